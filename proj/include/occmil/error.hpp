#pragma once

#include <stdexcept>
#include <string>

namespace occmil {

enum class ErrorCode {
    // file / data
    BadMagic,
    CorruptHeader,
    NonFinite,
    IoFailure,
    InvalidBag,
    LabelConflict,
    TooFewCases,
    InvalidConfig,
    DegenerateSplit,
    SingleClass,
    // numerics / shapes
    DimMismatch,
    ShapeMismatch,
    EmptyInput,
    EmptyBag,
    EmptyTrainingSet,
    BadNu,
    BadProbability,
    MissingInstanceProbs,
    TraceMismatch,
    ZeroVector,
    NumericFailure,
    // cli
    UsageError,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

}  // namespace occmil
