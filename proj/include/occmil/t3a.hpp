#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "occmil/bag.hpp"
#include "occmil/error.hpp"
#include "occmil/linalg.hpp"
#include "occmil/model.hpp"

namespace occmil {

// Test-time template augmentation: per-class support sets seeded from the
// bag-classifier columns (the bias plays no role), grown online with
// normalized bag features and filtered by prediction entropy.
struct SupportTemplate {
    DVec feature;
    double entropy = 0.0;
    bool is_seed = false;
};

struct SupportSets {
    std::array<std::vector<SupportTemplate>, 2> sets;
    std::size_t capacity = 1;  // C: non-seed templates retained per class
};

inline SupportSets init_support(const ModelParams& params, std::size_t capacity) {
    if (capacity == 0) fail(ErrorCode::InvalidConfig, "support capacity must be >= 1");
    SupportSets s;
    s.capacity = capacity;
    for (int c = 0; c < 2; ++c) {
        SupportTemplate seed;
        seed.feature.resize(params.d_ref);
        for (std::size_t i = 0; i < params.d_ref; ++i) {
            seed.feature[i] = params.W_bag(i, static_cast<std::size_t>(c));
        }
        seed.entropy = 0.0;
        seed.is_seed = true;
        s.sets[c].push_back(std::move(seed));
    }
    return s;
}

namespace detail {

// Seeds always participate; non-seeds compete on stored entropy (smallest
// first, earlier insertion wins ties).
inline DVec filtered_centroid(const std::vector<SupportTemplate>& set, std::size_t capacity) {
    std::vector<std::size_t> non_seeds;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (!set[i].is_seed) non_seeds.push_back(i);
    }
    std::sort(non_seeds.begin(), non_seeds.end(), [&](std::size_t a, std::size_t b) {
        if (set[a].entropy != set[b].entropy) return set[a].entropy < set[b].entropy;
        return a < b;
    });
    if (non_seeds.size() > capacity) non_seeds.resize(capacity);
    std::vector<bool> keep(set.size(), false);
    for (std::size_t i = 0; i < set.size(); ++i) keep[i] = set[i].is_seed;
    for (std::size_t i : non_seeds) keep[i] = true;

    DVec centroid(set.front().feature.size(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (!keep[i]) continue;
        for (std::size_t d = 0; d < centroid.size(); ++d) centroid[d] += set[i].feature[d];
        ++count;
    }
    for (double& x : centroid) x /= static_cast<double>(count);
    return centroid;
}

inline double prediction_entropy(const DVec& probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

}  // namespace detail

struct AdaptResult {
    int label = 0;
    double score_pos = 0.0;  // softmax score for class 1, post-insertion centroids
};

// One adaptation step: raw-predict with the current filtered centroids,
// insert the normalized bag feature into that class, then predict with the
// recomputed centroids. Argmax ties go to class 0.
inline AdaptResult adapt_predict(SupportSets& support, const DVec& bag_feature) {
    const double norm = norm2(bag_feature);
    if (norm == 0.0) fail(ErrorCode::ZeroVector, "cannot adapt on a zero bag feature");

    const DVec c0 = detail::filtered_centroid(support.sets[0], support.capacity);
    const DVec c1 = detail::filtered_centroid(support.sets[1], support.capacity);
    const DVec logits = {dot(c0, bag_feature), dot(c1, bag_feature)};
    const int raw = logits[1] > logits[0] ? 1 : 0;
    const DVec probs = softmax_stable(logits);

    SupportTemplate tpl;
    tpl.feature.resize(bag_feature.size());
    for (std::size_t d = 0; d < bag_feature.size(); ++d) tpl.feature[d] = bag_feature[d] / norm;
    tpl.entropy = detail::prediction_entropy(probs);
    tpl.is_seed = false;
    support.sets[raw].push_back(std::move(tpl));

    const DVec c0p = detail::filtered_centroid(support.sets[0], support.capacity);
    const DVec c1p = detail::filtered_centroid(support.sets[1], support.capacity);
    const DVec post = softmax_stable({dot(c0p, bag_feature), dot(c1p, bag_feature)});
    AdaptResult out;
    out.label = post[1] > post[0] ? 1 : 0;
    out.score_pos = post[1];
    return out;
}

struct AdaptOutputs {
    std::vector<int> labels;
    DVec scores;  // class-1 softmax scores
};

// Sequential adaptation in the given bag order (order-dependent by design).
inline AdaptOutputs adapt_evaluate(const ModelParams& params, const std::vector<const Bag*>& bags,
                                   std::size_t capacity) {
    if (bags.empty()) fail(ErrorCode::EmptyInput, "no bags to evaluate");
    SupportSets support = init_support(params, capacity);
    AdaptOutputs out;
    out.labels.reserve(bags.size());
    out.scores.reserve(bags.size());
    for (const Bag* bag : bags) {
        const ForwardTrace trace = forward(params, *bag);
        const AdaptResult r = adapt_predict(support, trace.bag_feature);
        out.labels.push_back(r.label);
        out.scores.push_back(r.score_pos);
    }
    return out;
}

}  // namespace occmil
