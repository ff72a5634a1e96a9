#pragma once

#include <cmath>
#include <cstddef>

#include "occmil/config.hpp"
#include "occmil/error.hpp"
#include "occmil/model.hpp"

namespace occmil {

// First and second moment estimates, shapes mirroring ModelParams.
struct AdamState {
    Gradients m;
    Gradients v;
    long t = 0;

    static AdamState init(const ModelParams& p) {
        return {zero_gradients(p), zero_gradients(p), 0};
    }
};

// One Adam update with coupled L2 decay (decay added to the gradient before
// the moment updates) and bias-corrected moments.
inline void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
                      const TrainConfig& cfg) {
    auto tp = tensor_data(params);
    auto tg = tensor_data(grads);
    auto tm = tensor_data(state.m);
    auto tv = tensor_data(state.v);
    for (std::size_t k = 0; k < tp.size(); ++k) {
        if (tg[k]->size() != tp[k]->size() || tm[k]->size() != tp[k]->size()) {
            fail(ErrorCode::ShapeMismatch, "gradient shapes do not mirror the parameters");
        }
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < tp.size(); ++k) {
        auto& theta = *tp[k];
        const auto& grad = *tg[k];
        auto& m = *tm[k];
        auto& v = *tv[k];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = grad[i] + cfg.weight_decay * theta[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + 1e-8);
        }
    }
}

}  // namespace occmil
