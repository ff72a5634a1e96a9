#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "occmil/bag.hpp"
#include "occmil/error.hpp"
#include "occmil/linalg.hpp"
#include "occmil/prng.hpp"
#include "occmil/pseudolabel.hpp"

namespace occmil {

// Refinement layer, gated attention, two instance heads, bag head.
struct ModelParams {
    std::size_t d_in = 0;
    std::size_t d_ref = 0;
    std::size_t att_dim = 0;

    DMat W_refine;  // d_in x d_ref
    DVec b_refine;  // d_ref
    DMat V_att;     // d_ref x att_dim
    DMat U_att;     // d_ref x att_dim
    DVec w_att;     // att_dim
    DMat W_neg;     // d_ref x 2
    DVec b_neg;     // 2
    DMat W_pos;     // d_ref x 2
    DVec b_pos;     // 2
    DMat W_bag;     // d_ref x 2
    DVec b_bag;     // 2
};

// Same tensor shapes as ModelParams.
struct Gradients {
    DMat W_refine;
    DVec b_refine;
    DMat V_att;
    DMat U_att;
    DVec w_att;
    DMat W_neg;
    DVec b_neg;
    DMat W_pos;
    DVec b_pos;
    DMat W_bag;
    DVec b_bag;
};

// Flat view over the eleven tensors, in checkpoint field order.
template <typename T>
inline std::array<std::vector<double>*, 11> tensor_data(T& t) {
    return {&t.W_refine.data, &t.b_refine, &t.V_att.data, &t.U_att.data, &t.w_att,
            &t.W_neg.data,    &t.b_neg,    &t.W_pos.data, &t.b_pos,      &t.W_bag.data,
            &t.b_bag};
}

template <typename T>
inline std::array<const std::vector<double>*, 11> tensor_data(const T& t) {
    return {&t.W_refine.data, &t.b_refine, &t.V_att.data, &t.U_att.data, &t.w_att,
            &t.W_neg.data,    &t.b_neg,    &t.W_pos.data, &t.b_pos,      &t.W_bag.data,
            &t.b_bag};
}

inline Gradients zero_gradients(const ModelParams& p) {
    Gradients g;
    g.W_refine = DMat(p.d_in, p.d_ref);
    g.b_refine.assign(p.d_ref, 0.0);
    g.V_att = DMat(p.d_ref, p.att_dim);
    g.U_att = DMat(p.d_ref, p.att_dim);
    g.w_att.assign(p.att_dim, 0.0);
    g.W_neg = DMat(p.d_ref, 2);
    g.b_neg.assign(2, 0.0);
    g.W_pos = DMat(p.d_ref, 2);
    g.b_pos.assign(2, 0.0);
    g.W_bag = DMat(p.d_ref, 2);
    g.b_bag.assign(2, 0.0);
    return g;
}

namespace detail {

inline void glorot_fill(DMat& m, std::size_t fan_in, std::size_t fan_out, Prng& prng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : m.data) x = (2.0 * prng.uniform() - 1.0) * limit;
}

inline void glorot_fill(DVec& v, std::size_t fan_in, std::size_t fan_out, Prng& prng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : v) x = (2.0 * prng.uniform() - 1.0) * limit;
}

}  // namespace detail

// Uniform fan-based initialization, zero biases. Consumes a fixed number of
// draws for given dims, in tensor order.
inline ModelParams init_params(std::size_t d_in, std::size_t d_ref, std::size_t att_dim,
                               Prng prng) {
    if (d_in == 0 || d_ref == 0 || att_dim == 0) {
        fail(ErrorCode::InvalidConfig, "model dims must be positive");
    }
    ModelParams p;
    p.d_in = d_in;
    p.d_ref = d_ref;
    p.att_dim = att_dim;
    p.W_refine = DMat(d_in, d_ref);
    p.b_refine.assign(d_ref, 0.0);
    p.V_att = DMat(d_ref, att_dim);
    p.U_att = DMat(d_ref, att_dim);
    p.w_att.assign(att_dim, 0.0);
    p.W_neg = DMat(d_ref, 2);
    p.b_neg.assign(2, 0.0);
    p.W_pos = DMat(d_ref, 2);
    p.b_pos.assign(2, 0.0);
    p.W_bag = DMat(d_ref, 2);
    p.b_bag.assign(2, 0.0);

    detail::glorot_fill(p.W_refine, d_in, d_ref, prng);
    detail::glorot_fill(p.V_att, d_ref, att_dim, prng);
    detail::glorot_fill(p.U_att, d_ref, att_dim, prng);
    detail::glorot_fill(p.w_att, att_dim, 1, prng);
    detail::glorot_fill(p.W_neg, d_ref, 2, prng);
    detail::glorot_fill(p.W_pos, d_ref, 2, prng);
    detail::glorot_fill(p.W_bag, d_ref, 2, prng);
    return p;
}

// ReLU(W_refine^T h + b_refine).
inline DVec refine(const ModelParams& p, const DVec& h) {
    return activate(Activation::ReLU, affine(p.W_refine, p.b_refine, h));
}

namespace detail {

// e = w^T (tanh(V^T z) * sigmoid(U^T z)); the two branch activations are
// returned for the backward pass.
inline double gated_logit(const ModelParams& p, const DVec& z, DVec& tanh_out, DVec& sig_out) {
    tanh_out = activate(Activation::Tanh, matvec_t(p.V_att, z));
    sig_out = activate(Activation::Sigmoid, matvec_t(p.U_att, z));
    double e = 0.0;
    for (std::size_t d = 0; d < p.att_dim; ++d) e += p.w_att[d] * tanh_out[d] * sig_out[d];
    return e;
}

}  // namespace detail

// Gated attention logits e_j = w^T (tanh(V^T z_j) * sigmoid(U^T z_j)) and
// their softmax weights.
inline std::pair<DVec, DVec> attention(const ModelParams& p, const std::vector<DVec>& zs) {
    if (zs.empty()) fail(ErrorCode::EmptyBag, "attention over an empty bag");
    DVec logits(zs.size());
    DVec t, s;
    for (std::size_t j = 0; j < zs.size(); ++j) {
        logits[j] = detail::gated_logit(p, zs[j], t, s);
    }
    return {logits, softmax_stable(logits)};
}

// Z = sum_j a_j z_j, accumulated in instance order.
inline DVec aggregate(const DVec& a, const std::vector<DVec>& zs) {
    if (a.size() != zs.size()) {
        fail(ErrorCode::DimMismatch, "aggregate: weights/instances length mismatch");
    }
    if (zs.empty()) fail(ErrorCode::EmptyBag, "aggregate over an empty bag");
    DVec out(zs.front().size(), 0.0);
    for (std::size_t j = 0; j < zs.size(); ++j) {
        if (zs[j].size() != out.size()) fail(ErrorCode::DimMismatch, "aggregate: mixed dims");
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += a[j] * zs[j][d];
    }
    return out;
}

enum class Head { Bag, InstNeg, InstPos };

inline DVec classify(Head head, const ModelParams& p, const DVec& x) {
    switch (head) {
        case Head::Bag: return softmax_stable(affine(p.W_bag, p.b_bag, x));
        case Head::InstNeg: return softmax_stable(affine(p.W_neg, p.b_neg, x));
        case Head::InstPos: return softmax_stable(affine(p.W_pos, p.b_pos, x));
    }
    fail(ErrorCode::InvalidConfig, "unknown classifier head");
}

// Instance-head probabilities for one confident instance. Each head emits
// two entries; index 1 is the head's own evidence class.
struct InstanceHeadProbs {
    std::size_t index = 0;
    DVec neg;
    DVec pos;
};

struct ForwardTrace {
    std::size_t d_in = 0;
    std::size_t d_ref = 0;
    std::size_t att_dim = 0;
    std::vector<DVec> inputs;     // h_j widened to 64-bit
    std::vector<DVec> preact;     // W_refine^T h_j + b_refine
    std::vector<DVec> refined;    // z_j = ReLU(preact)
    std::vector<DVec> tanh_gate;  // tanh(V^T z_j)
    std::vector<DVec> sig_gate;   // sigmoid(U^T z_j)
    DVec att_logits;              // e_j
    DVec att_weights;             // a_j
    DVec bag_feature;             // Z
    DVec bag_logits;
    DVec bag_probs;               // Yhat
    std::vector<InstanceHeadProbs> instance_probs;  // confident instances, index ascending

    std::size_t bag_size() const { return refined.size(); }

    const InstanceHeadProbs* find_instance(std::size_t index) const {
        for (const auto& ip : instance_probs) {
            if (ip.index == index) return &ip;
        }
        return nullptr;
    }
};

// Fills instance-head probabilities for every confident index.
inline void attach_instance_probs(const ModelParams& p, ForwardTrace& trace,
                                  const PseudoLabelSet& confident) {
    std::vector<std::size_t> indices = confident.positives;
    indices.insert(indices.end(), confident.negatives.begin(), confident.negatives.end());
    std::sort(indices.begin(), indices.end());
    trace.instance_probs.clear();
    trace.instance_probs.reserve(indices.size());
    for (std::size_t idx : indices) {
        if (idx >= trace.refined.size()) {
            fail(ErrorCode::TraceMismatch, "confident index out of range");
        }
        InstanceHeadProbs ip;
        ip.index = idx;
        ip.neg = classify(Head::InstNeg, p, trace.refined[idx]);
        ip.pos = classify(Head::InstPos, p, trace.refined[idx]);
        trace.instance_probs.push_back(std::move(ip));
    }
}

inline ForwardTrace forward(const ModelParams& p, const Bag& bag) {
    if (bag.instances.empty()) fail(ErrorCode::EmptyBag, "forward on empty bag '" + bag.bag_id + "'");
    if (bag.feature_dim() != p.d_in) {
        fail(ErrorCode::DimMismatch, "bag '" + bag.bag_id + "' dim " +
                                         std::to_string(bag.feature_dim()) + " != model d_in " +
                                         std::to_string(p.d_in));
    }
    const std::size_t k = bag.size();
    ForwardTrace t;
    t.d_in = p.d_in;
    t.d_ref = p.d_ref;
    t.att_dim = p.att_dim;
    t.inputs.reserve(k);
    t.preact.reserve(k);
    t.refined.reserve(k);
    t.tanh_gate.reserve(k);
    t.sig_gate.reserve(k);
    t.att_logits.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        t.inputs.push_back(to_dvec(bag.instances[j]));
        t.preact.push_back(affine(p.W_refine, p.b_refine, t.inputs.back()));
        t.refined.push_back(activate(Activation::ReLU, t.preact.back()));
        t.tanh_gate.emplace_back();
        t.sig_gate.emplace_back();
        t.att_logits[j] =
            detail::gated_logit(p, t.refined.back(), t.tanh_gate.back(), t.sig_gate.back());
    }
    t.att_weights = softmax_stable(t.att_logits);
    t.bag_feature = aggregate(t.att_weights, t.refined);
    t.bag_logits = affine(p.W_bag, p.b_bag, t.bag_feature);
    t.bag_probs = softmax_stable(t.bag_logits);
    return t;
}

inline ForwardTrace forward(const ModelParams& p, const Bag& bag, const PseudoLabelSet& confident) {
    ForwardTrace t = forward(p, bag);
    attach_instance_probs(p, t, confident);
    return t;
}

namespace detail {

inline void check_trace(const ModelParams& p, const ForwardTrace& t) {
    if (t.d_in != p.d_in || t.d_ref != p.d_ref || t.att_dim != p.att_dim) {
        fail(ErrorCode::TraceMismatch, "trace dims do not match params");
    }
    const std::size_t k = t.refined.size();
    if (k == 0 || t.inputs.size() != k || t.preact.size() != k || t.tanh_gate.size() != k ||
        t.sig_gate.size() != k || t.att_logits.size() != k || t.att_weights.size() != k ||
        t.bag_feature.size() != p.d_ref || t.bag_probs.size() != 2) {
        fail(ErrorCode::TraceMismatch, "trace is incomplete");
    }
}

// rank-1 update acc += x * d^T
inline void add_outer(DMat& acc, const DVec& x, const DVec& d) {
    for (std::size_t i = 0; i < acc.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        double* row = &acc.data[i * acc.cols];
        for (std::size_t j = 0; j < acc.cols; ++j) row[j] += xi * d[j];
    }
}

}  // namespace detail

// Analytic gradient of the weighted bag + confident-instance loss:
//   L = alpha1 * L_bag + ((1-alpha1) / (2|C|)) * sum_{j in C} (L_neg_j + L_pos_j)
// Cross-entropy targets follow the head conventions: the negative head's
// index 1 is "negative evidence", the positive head's index 1 is "positive".
inline Gradients backward(const ModelParams& p, const ForwardTrace& t, int bag_label,
                          const PseudoLabelSet& pseudo, double alpha1) {
    detail::check_trace(p, t);
    if (bag_label != 0 && bag_label != 1) {
        fail(ErrorCode::InvalidConfig, "bag label must be 0 or 1");
    }
    if (alpha1 < 0.0 || alpha1 > 1.0) fail(ErrorCode::InvalidConfig, "alpha1 must be in [0,1]");

    const std::size_t k = t.refined.size();
    const std::size_t n_conf = pseudo.confident_count();
    const double beta = (n_conf == 0) ? 0.0 : (1.0 - alpha1) / (2.0 * static_cast<double>(n_conf));

    Gradients g = zero_gradients(p);

    // Bag head: d(bag logits) = alpha1 * (p - onehot(Y)).
    DVec d_bag(2);
    d_bag[0] = alpha1 * (t.bag_probs[0] - (bag_label == 0 ? 1.0 : 0.0));
    d_bag[1] = alpha1 * (t.bag_probs[1] - (bag_label == 1 ? 1.0 : 0.0));
    detail::add_outer(g.W_bag, t.bag_feature, d_bag);
    g.b_bag[0] += d_bag[0];
    g.b_bag[1] += d_bag[1];

    // dL/dZ from the bag head.
    DVec dZ(p.d_ref, 0.0);
    for (std::size_t i = 0; i < p.d_ref; ++i) {
        dZ[i] = p.W_bag(i, 0) * d_bag[0] + p.W_bag(i, 1) * d_bag[1];
    }

    // Per-instance dL/dz_j, filled below from three paths.
    std::vector<DVec> dz(k, DVec(p.d_ref, 0.0));

    // Instance heads for the confident set.
    if (beta != 0.0) {
        const auto head_grads = [&](std::size_t j, double y) {
            const InstanceHeadProbs* ip = t.find_instance(j);
            if (ip == nullptr) {
                fail(ErrorCode::TraceMismatch,
                     "trace lacks instance probabilities for confident index " + std::to_string(j));
            }
            // L_neg target index: 1 when y=0, 0 when y=1.
            DVec d_neg(2);
            d_neg[0] = beta * (ip->neg[0] - y);
            d_neg[1] = beta * (ip->neg[1] - (1.0 - y));
            // L_pos target index: 1 when y=1, 0 when y=0.
            DVec d_pos(2);
            d_pos[0] = beta * (ip->pos[0] - (1.0 - y));
            d_pos[1] = beta * (ip->pos[1] - y);
            detail::add_outer(g.W_neg, t.refined[j], d_neg);
            detail::add_outer(g.W_pos, t.refined[j], d_pos);
            for (int c = 0; c < 2; ++c) {
                g.b_neg[c] += d_neg[c];
                g.b_pos[c] += d_pos[c];
            }
            for (std::size_t i = 0; i < p.d_ref; ++i) {
                dz[j][i] += p.W_neg(i, 0) * d_neg[0] + p.W_neg(i, 1) * d_neg[1] +
                            p.W_pos(i, 0) * d_pos[0] + p.W_pos(i, 1) * d_pos[1];
            }
        };
        for (std::size_t j : pseudo.positives) head_grads(j, 1.0);
        for (std::size_t j : pseudo.negatives) head_grads(j, 0.0);
    }

    // Aggregation: Z = sum_j a_j z_j.
    DVec da(k);
    for (std::size_t j = 0; j < k; ++j) {
        da[j] = dot(dZ, t.refined[j]);
        for (std::size_t i = 0; i < p.d_ref; ++i) dz[j][i] += t.att_weights[j] * dZ[i];
    }

    // Softmax over attention logits: de_j = a_j (da_j - sum_k a_k da_k).
    double mean_da = 0.0;
    for (std::size_t j = 0; j < k; ++j) mean_da += t.att_weights[j] * da[j];
    DVec de(k);
    for (std::size_t j = 0; j < k; ++j) de[j] = t.att_weights[j] * (da[j] - mean_da);

    // Gated attention: e_j = w^T (tanh_j * sig_j). Every term scales with
    // de_j, so a zero entry contributes nothing.
    for (std::size_t j = 0; j < k; ++j) {
        if (de[j] == 0.0) continue;
        const DVec& tj = t.tanh_gate[j];
        const DVec& sj = t.sig_gate[j];
        DVec dv(p.att_dim);  // into tanh pre-activation
        DVec du(p.att_dim);  // into sigmoid pre-activation
        for (std::size_t d = 0; d < p.att_dim; ++d) {
            const double dg = de[j] * p.w_att[d];
            g.w_att[d] += de[j] * tj[d] * sj[d];
            dv[d] = dg * sj[d] * (1.0 - tj[d] * tj[d]);
            du[d] = dg * tj[d] * sj[d] * (1.0 - sj[d]);
        }
        detail::add_outer(g.V_att, t.refined[j], dv);
        detail::add_outer(g.U_att, t.refined[j], du);
        for (std::size_t i = 0; i < p.d_ref; ++i) {
            double acc = 0.0;
            const double* vrow = &p.V_att.data[i * p.att_dim];
            const double* urow = &p.U_att.data[i * p.att_dim];
            for (std::size_t d = 0; d < p.att_dim; ++d) acc += vrow[d] * dv[d] + urow[d] * du[d];
            dz[j][i] += acc;
        }
    }

    // Refinement layer through the ReLU mask.
    for (std::size_t j = 0; j < k; ++j) {
        DVec dpre(p.d_ref);
        for (std::size_t i = 0; i < p.d_ref; ++i) {
            dpre[i] = (t.preact[j][i] > 0.0) ? dz[j][i] : 0.0;
        }
        detail::add_outer(g.W_refine, t.inputs[j], dpre);
        for (std::size_t i = 0; i < p.d_ref; ++i) g.b_refine[i] += dpre[i];
    }
    return g;
}

}  // namespace occmil
