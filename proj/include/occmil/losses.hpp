#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "occmil/error.hpp"
#include "occmil/linalg.hpp"
#include "occmil/model.hpp"
#include "occmil/pseudolabel.hpp"

namespace occmil {

inline constexpr double kProbClamp = 1e-12;

namespace detail {

inline double clamped_log(double p) { return std::log(std::max(p, kProbClamp)); }

inline void check_prob2(const DVec& prob) {
    if (prob.size() != 2 || !std::isfinite(prob[0]) || !std::isfinite(prob[1]) ||
        prob[0] < 0.0 || prob[1] < 0.0 || prob[0] > 1.0 || prob[1] > 1.0 ||
        std::fabs(prob[0] + prob[1] - 1.0) > 1e-6) {
        fail(ErrorCode::BadProbability, "expected a 2-entry probability vector");
    }
}

}  // namespace detail

enum class InstanceHead { Neg, Pos };

// Cross entropy for the two instance heads. The negative head reads index 1
// as "negative evidence" (so a y=0 instance targets index 1); the positive
// head reads index 1 as "positive".
inline double instance_loss(InstanceHead head, const DVec& prob, int pseudo_label) {
    detail::check_prob2(prob);
    if (pseudo_label != 0 && pseudo_label != 1) {
        fail(ErrorCode::BadProbability, "pseudo label must be 0 or 1");
    }
    const double y = static_cast<double>(pseudo_label);
    if (head == InstanceHead::Neg) {
        return -((1.0 - y) * detail::clamped_log(prob[1]) + y * detail::clamped_log(prob[0]));
    }
    return -(y * detail::clamped_log(prob[1]) + (1.0 - y) * detail::clamped_log(prob[0]));
}

// Binary cross entropy with index 1 as the positive class.
inline double bag_loss(const DVec& prob, int bag_label) {
    detail::check_prob2(prob);
    if (bag_label != 0 && bag_label != 1) {
        fail(ErrorCode::BadProbability, "bag label must be 0 or 1");
    }
    const double y = static_cast<double>(bag_label);
    return -(y * detail::clamped_log(prob[1]) + (1.0 - y) * detail::clamped_log(prob[0]));
}

// alpha1 * L_bag + ((1-alpha1) / (2|C|)) * sum_{j in C} (L_neg_j + L_pos_j).
// With an empty confident set the instance term is dropped entirely.
inline double total_loss(const ForwardTrace& trace, int bag_label, const PseudoLabelSet& pseudo,
                         double alpha1) {
    if (alpha1 < 0.0 || alpha1 > 1.0) fail(ErrorCode::InvalidConfig, "alpha1 must be in [0,1]");
    double loss = alpha1 * bag_loss(trace.bag_probs, bag_label);
    const std::size_t n_conf = pseudo.confident_count();
    if (n_conf == 0) return loss;

    const double scale = (1.0 - alpha1) / (2.0 * static_cast<double>(n_conf));
    double inst = 0.0;
    const auto add_terms = [&](std::size_t j, int y) {
        const InstanceHeadProbs* ip = trace.find_instance(j);
        if (ip == nullptr) {
            fail(ErrorCode::MissingInstanceProbs,
                 "trace lacks instance probabilities for confident index " + std::to_string(j));
        }
        inst += instance_loss(InstanceHead::Neg, ip->neg, y);
        inst += instance_loss(InstanceHead::Pos, ip->pos, y);
    };
    for (std::size_t j : pseudo.positives) add_terms(j, 1);
    for (std::size_t j : pseudo.negatives) add_terms(j, 0);
    return loss + scale * inst;
}

}  // namespace occmil
