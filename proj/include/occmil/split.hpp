#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "occmil/bag.hpp"
#include "occmil/error.hpp"
#include "occmil/prng.hpp"

namespace occmil {

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

// Case-grouped split: every bag of a case lands in exactly one subset.
struct SplitSpec {
    int fold = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> train_cases;  // each sorted ascending
    std::vector<std::string> val_cases;
    std::vector<std::string> test_cases;
};

enum class Subset { Train, Val, Test };

inline bool contains_case(const std::vector<std::string>& cases, const std::string& id) {
    return std::binary_search(cases.begin(), cases.end(), id);
}

namespace detail {
inline constexpr std::uint64_t kSplitTag = 0x464F4C44ull;  // stream tag for fold shuffles
}

// Shuffles the sorted case-id list with a stream derived from (seed, fold)
// and partitions it. Val and test sizes round to nearest (at least 1 each);
// the remainder trains.
inline SplitSpec monte_carlo_split(const Dataset& ds, int fold, std::uint64_t seed,
                                   SplitRatios ratios) {
    if (fold < 0) fail(ErrorCode::InvalidConfig, "fold must be >= 0");
    if (!(ratios.train > 0.0) || !(ratios.val > 0.0) || !(ratios.test > 0.0) ||
        std::fabs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        fail(ErrorCode::InvalidConfig, "split ratios must be positive and sum to 1");
    }
    std::vector<std::string> cases;
    cases.reserve(ds.bags.size());
    for (const auto& bag : ds.bags) cases.push_back(bag.case_id);
    std::sort(cases.begin(), cases.end());
    cases.erase(std::unique(cases.begin(), cases.end()), cases.end());
    const std::size_t n = cases.size();
    if (n < 3) {
        fail(ErrorCode::TooFewCases,
             "need at least 3 cases, have " + std::to_string(n));
    }
    Prng stream = Prng(seed).derive(detail::kSplitTag ^ static_cast<std::uint64_t>(fold));
    stream.shuffle(cases);

    const auto rounded = [n](double r) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(r * static_cast<double>(n))));
    };
    const std::size_t n_val = rounded(ratios.val);
    const std::size_t n_test = rounded(ratios.test);
    if (n_val + n_test >= n) {
        fail(ErrorCode::TooFewCases, "cannot give each subset at least one case");
    }
    const std::size_t n_train = n - n_val - n_test;

    SplitSpec spec;
    spec.fold = fold;
    spec.seed = seed;
    spec.train_cases.assign(cases.begin(), cases.begin() + n_train);
    spec.val_cases.assign(cases.begin() + n_train, cases.begin() + n_train + n_val);
    spec.test_cases.assign(cases.begin() + n_train + n_val, cases.end());
    std::sort(spec.train_cases.begin(), spec.train_cases.end());
    std::sort(spec.val_cases.begin(), spec.val_cases.end());
    std::sort(spec.test_cases.begin(), spec.test_cases.end());
    return spec;
}

// Indices into ds.bags for one subset, in dataset order.
inline std::vector<std::size_t> subset_bag_indices(const Dataset& ds, const SplitSpec& spec,
                                                   Subset subset) {
    const std::vector<std::string>* cases = nullptr;
    switch (subset) {
        case Subset::Train: cases = &spec.train_cases; break;
        case Subset::Val: cases = &spec.val_cases; break;
        case Subset::Test: cases = &spec.test_cases; break;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.bags.size(); ++i) {
        if (contains_case(*cases, ds.bags[i].case_id)) out.push_back(i);
    }
    return out;
}

}  // namespace occmil
