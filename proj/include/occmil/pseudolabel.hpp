#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "occmil/error.hpp"
#include "occmil/linalg.hpp"

namespace occmil {

// Confident-instance selection. `excluded` holds the top-r% anomaly scores,
// which are never labeled. All index lists are sorted ascending.
struct PseudoLabelSet {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    std::vector<std::size_t> excluded;

    std::size_t confident_count() const { return positives.size() + negatives.size(); }
    bool empty() const { return positives.empty() && negatives.empty(); }
};

namespace detail {

// Indices ordered by (value desc, index asc); the global tie rule.
inline std::vector<std::size_t> order_desc(const DVec& values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    return idx;
}

}  // namespace detail

// Positive bags: drop the floor(K*r/100) largest anomaly scores as noise,
// then label the M_eff largest of the remainder positive and the M_eff
// smallest negative, with M_eff = min(M, floor(K'/2)).
inline PseudoLabelSet pseudo_label_positive_bag(const DVec& scores, std::size_t M,
                                                double r_percent) {
    const std::size_t k = scores.size();
    if (k == 0) fail(ErrorCode::EmptyBag, "pseudo-labeling an empty bag");
    if (M == 0) fail(ErrorCode::InvalidConfig, "M must be >= 1");
    if (r_percent < 0.0 || r_percent >= 100.0) {
        fail(ErrorCode::InvalidConfig, "r must be in [0, 100)");
    }
    const auto order = detail::order_desc(scores);
    const std::size_t n_excl = static_cast<std::size_t>(
        std::floor(static_cast<double>(k) * r_percent / 100.0));
    const std::size_t k_rest = k - n_excl;
    const std::size_t m_eff = std::min(M, k_rest / 2);

    PseudoLabelSet out;
    out.excluded.assign(order.begin(), order.begin() + n_excl);
    out.positives.assign(order.begin() + n_excl, order.begin() + n_excl + m_eff);
    out.negatives.assign(order.end() - m_eff, order.end());
    std::sort(out.excluded.begin(), out.excluded.end());
    std::sort(out.positives.begin(), out.positives.end());
    std::sort(out.negatives.begin(), out.negatives.end());
    return out;
}

// Negative bags: the top and bottom M_eff attention logits are confident and
// all receive negative pseudo-labels; `positives` stays empty.
inline PseudoLabelSet confident_negatives(const DVec& attention_logits, std::size_t M) {
    const std::size_t k = attention_logits.size();
    if (k == 0) fail(ErrorCode::EmptyBag, "pseudo-labeling an empty bag");
    if (M == 0) fail(ErrorCode::InvalidConfig, "M must be >= 1");
    const auto order = detail::order_desc(attention_logits);
    const std::size_t m_eff = std::min(M, k / 2);

    PseudoLabelSet out;
    out.negatives.assign(order.begin(), order.begin() + m_eff);
    out.negatives.insert(out.negatives.end(), order.end() - m_eff, order.end());
    std::sort(out.negatives.begin(), out.negatives.end());
    return out;
}

}  // namespace occmil
