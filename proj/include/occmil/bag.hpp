#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "occmil/error.hpp"
#include "occmil/linalg.hpp"

namespace occmil {

enum class Label : int { Unknown = -1, Negative = 0, Positive = 1 };

inline std::string label_name(Label l) {
    switch (l) {
        case Label::Negative: return "neg";
        case Label::Positive: return "pos";
        default: return "unknown";
    }
}

inline Label label_from_name(const std::string& s) {
    if (s == "neg") return Label::Negative;
    if (s == "pos") return Label::Positive;
    if (s == "unknown") return Label::Unknown;
    fail(ErrorCode::InvalidConfig, "bad label '" + s + "' (want neg|pos|unknown)");
}

// Per-instance ground truth, available for synthetic data only.
enum class InstanceTruth : int { Negative = 0, Positive = 1, Noise = 2 };

inline std::string truth_name(InstanceTruth t) {
    switch (t) {
        case InstanceTruth::Negative: return "neg";
        case InstanceTruth::Positive: return "pos";
        default: return "noise";
    }
}

inline InstanceTruth truth_from_name(const std::string& s) {
    if (s == "neg") return InstanceTruth::Negative;
    if (s == "pos") return InstanceTruth::Positive;
    if (s == "noise") return InstanceTruth::Noise;
    fail(ErrorCode::InvalidConfig, "bad truth '" + s + "' (want neg|pos|noise)");
}

// One embedding vector; storage is 32-bit, all arithmetic downstream is 64-bit.
struct InstanceFeature {
    std::vector<float> values;
    std::optional<std::pair<std::int32_t, std::int32_t>> coord;  // (col, row)
};

struct Bag {
    std::string bag_id;
    std::string case_id;
    Label label = Label::Unknown;
    std::vector<InstanceFeature> instances;

    std::size_t size() const { return instances.size(); }
    std::size_t feature_dim() const {
        return instances.empty() ? 0 : instances.front().values.size();
    }
};

struct SyntheticTruth {
    std::vector<InstanceTruth> labels;
};

struct Dataset {
    std::vector<Bag> bags;
    std::optional<std::vector<SyntheticTruth>> truths;
    std::size_t feature_dim = 0;
};

inline DVec to_dvec(const InstanceFeature& f) {
    DVec out(f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i) out[i] = static_cast<double>(f.values[i]);
    return out;
}

// K >= 1, one shared feature_dim, finite values, uniform coord presence.
inline void validate_bag(const Bag& bag) {
    if (bag.instances.empty()) {
        fail(ErrorCode::InvalidBag, "bag '" + bag.bag_id + "' has no instances");
    }
    const std::size_t dim = bag.instances.front().values.size();
    if (dim == 0) fail(ErrorCode::InvalidBag, "bag '" + bag.bag_id + "' has zero feature dim");
    const bool has_coords = bag.instances.front().coord.has_value();
    for (const auto& inst : bag.instances) {
        if (inst.values.size() != dim) {
            fail(ErrorCode::InvalidBag, "bag '" + bag.bag_id + "' mixes feature dims");
        }
        if (inst.coord.has_value() != has_coords) {
            fail(ErrorCode::InvalidBag, "bag '" + bag.bag_id + "' mixes coord presence");
        }
        for (float v : inst.values) {
            if (!std::isfinite(v)) {
                fail(ErrorCode::InvalidBag, "bag '" + bag.bag_id + "' has non-finite values");
            }
        }
    }
}

// Unique bag ids, shared feature_dim, aligned truths, and one label per case
// (the known labels of a case's bags must agree).
inline void validate_dataset(const Dataset& ds) {
    std::unordered_set<std::string> ids;
    std::unordered_map<std::string, Label> case_label;
    for (const auto& bag : ds.bags) {
        validate_bag(bag);
        if (!ids.insert(bag.bag_id).second) {
            fail(ErrorCode::InvalidBag, "duplicate bag_id '" + bag.bag_id + "'");
        }
        if (bag.feature_dim() != ds.feature_dim) {
            fail(ErrorCode::InvalidBag, "bag '" + bag.bag_id + "' dim " +
                                            std::to_string(bag.feature_dim()) +
                                            " != dataset dim " + std::to_string(ds.feature_dim));
        }
        if (bag.label != Label::Unknown) {
            auto [it, inserted] = case_label.emplace(bag.case_id, bag.label);
            if (!inserted && it->second != bag.label) {
                fail(ErrorCode::LabelConflict,
                     "case '" + bag.case_id + "' carries conflicting labels");
            }
        }
    }
    if (ds.truths.has_value()) {
        if (ds.truths->size() != ds.bags.size()) {
            fail(ErrorCode::InvalidBag, "truth list does not align with bags");
        }
        for (std::size_t i = 0; i < ds.bags.size(); ++i) {
            if ((*ds.truths)[i].labels.size() != ds.bags[i].size()) {
                fail(ErrorCode::InvalidBag,
                     "truth length mismatch for bag '" + ds.bags[i].bag_id + "'");
            }
        }
    }
}

}  // namespace occmil
