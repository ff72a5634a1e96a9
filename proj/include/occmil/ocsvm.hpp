#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "occmil/bag.hpp"
#include "occmil/error.hpp"
#include "occmil/linalg.hpp"
#include "occmil/prng.hpp"

namespace occmil {

// Linear one-class SVM hyperplane <w, z> = rho, trained on the inlier
// (negative) class only.
struct OcsvmState {
    DVec w;
    double rho = 0.0;
    double nu = 0.0;
    int epochs_run = 0;
    double final_objective = 0.0;
    DVec objective_trace;  // full-batch objective after each epoch
};

namespace detail {

inline double ocsvm_objective(const DVec& w, double rho, const std::vector<DVec>& features,
                              double nu) {
    // J(w, rho) = 0.5*||w||^2 - rho + (1/(nu*N)) * sum_i max(0, rho - <w, z_i>)
    double hinge = 0.0;
    for (const auto& z : features) hinge += std::max(0.0, rho - dot(w, z));
    const double n = static_cast<double>(features.size());
    const double wsq = dot(w, w);
    return 0.5 * wsq - rho + hinge / (nu * n);
}

}  // namespace detail

// Per-sample subgradient descent on the unconstrained hinge objective with
// step size 1/(1+t) over shuffled epochs, from zero initialization. Stops
// once the per-epoch objective decrease falls below tol (compared from the
// second epoch on, so the zero-init baseline never triggers a stop).
inline OcsvmState fit_ocsvm(const std::vector<DVec>& features, double nu, double tol,
                            int max_epochs, Prng prng) {
    if (features.empty()) fail(ErrorCode::EmptyTrainingSet, "OCSVM needs at least one sample");
    if (!(nu > 0.0) || nu > 1.0) fail(ErrorCode::BadNu, "nu must be in (0, 1]");
    if (max_epochs < 1) fail(ErrorCode::InvalidConfig, "max_epochs must be >= 1");
    const std::size_t dim = features.front().size();
    for (const auto& z : features) {
        if (z.size() != dim) fail(ErrorCode::DimMismatch, "OCSVM features mix dimensions");
    }

    OcsvmState state;
    state.w.assign(dim, 0.0);
    state.nu = nu;

    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::uint64_t t = 0;
    double prev_obj = 0.0;
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        prng.shuffle(order);
        for (std::size_t idx : order) {
            const DVec& z = features[idx];
            const double eta = 1.0 / (1.0 + static_cast<double>(t));
            const bool active = dot(state.w, z) < state.rho;
            // w <- w - eta * (w - 1[active] z / nu); rho <- rho + eta (1 - 1[active]/nu)
            const double keep = 1.0 - eta;
            for (double& wi : state.w) wi *= keep;
            if (active) {
                const double step = eta / nu;
                for (std::size_t d = 0; d < dim; ++d) state.w[d] += step * z[d];
                state.rho += eta * (1.0 - 1.0 / nu);
            } else {
                state.rho += eta;
            }
            ++t;
        }
        const double obj = detail::ocsvm_objective(state.w, state.rho, features, nu);
        state.objective_trace.push_back(obj);
        state.epochs_run = epoch;
        if (epoch >= 2 && prev_obj - obj < tol) break;
        prev_obj = obj;
    }
    state.final_objective = state.objective_trace.back();
    return state;
}

// Negated directed distance; the intercept is deliberately left out.
inline double anomaly_score(const OcsvmState& state, const DVec& z) {
    return -dot(state.w, z);
}

// Inliers (the training class) sit on the normal-vector side; the boundary
// itself counts as Negative.
inline Label occ_classify(const OcsvmState& state, const DVec& z) {
    return (dot(state.w, z) - state.rho >= 0.0) ? Label::Negative : Label::Positive;
}

// (positive fraction, negative fraction); sums to 1 exactly.
inline std::pair<double, double> occ_bag_proportions(const OcsvmState& state,
                                                     const std::vector<DVec>& refined) {
    if (refined.empty()) fail(ErrorCode::EmptyBag, "proportions of an empty bag");
    std::size_t n_pos = 0;
    for (const auto& z : refined) {
        if (occ_classify(state, z) == Label::Positive) ++n_pos;
    }
    const double pos = static_cast<double>(n_pos) / static_cast<double>(refined.size());
    return {pos, 1.0 - pos};
}

}  // namespace occmil
