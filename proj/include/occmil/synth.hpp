#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "occmil/bag.hpp"
#include "occmil/error.hpp"
#include "occmil/prng.hpp"

namespace occmil {

// Two-gaussian bag generator with instance-level ground truth. Negative
// instances sit at the origin, positive instances at separation*sigma along a
// seed-derived unit direction, and noise outliers at 10*separation*sigma
// along a second direction orthogonalized against the first.
struct SynthConfig {
    std::size_t feature_dim = 32;
    std::size_t n_neg_bags = 0;
    std::size_t n_pos_bags = 0;
    std::size_t k_min = 1;
    std::size_t k_max = 1;
    double pos_fraction = 0.5;   // fraction of positive instances per positive bag
    double separation = 0.0;     // class-mean distance in units of sigma
    double sigma = 1.0;
    double noise_fraction = 0.0; // far-outlier instances in positive bags
    std::uint64_t seed = 0;
};

namespace detail {
inline constexpr std::uint64_t kSynthDirTag = 0x44495231ull;
inline constexpr std::uint64_t kSynthNoiseDirTag = 0x44495232ull;
inline constexpr std::uint64_t kSynthBagTag = 0x42414747ull;

inline DVec unit_gauss_direction(Prng prng, std::size_t dim) {
    DVec v(dim);
    double n = 0.0;
    while (n == 0.0) {
        for (auto& x : v) x = prng.gauss();
        n = norm2(v);
    }
    for (auto& x : v) x /= n;
    return v;
}
}  // namespace detail

inline void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.feature_dim == 0) fail(ErrorCode::InvalidConfig, "feature_dim must be >= 1");
    if (cfg.n_neg_bags == 0 || cfg.n_pos_bags == 0) {
        fail(ErrorCode::InvalidConfig, "need at least one bag of each class");
    }
    if (cfg.k_min == 0 || cfg.k_min > cfg.k_max) {
        fail(ErrorCode::InvalidConfig, "bag size bounds must satisfy 1 <= k_min <= k_max");
    }
    if (!(cfg.pos_fraction > 0.0) || cfg.pos_fraction > 1.0) {
        fail(ErrorCode::InvalidConfig, "pos_fraction must be in (0,1]");
    }
    if (cfg.pos_fraction * static_cast<double>(cfg.k_min) < 1.0) {
        fail(ErrorCode::InvalidConfig, "pos_fraction * k_min must be >= 1");
    }
    if (cfg.separation < 0.0) fail(ErrorCode::InvalidConfig, "separation must be >= 0");
    if (!(cfg.sigma > 0.0)) fail(ErrorCode::InvalidConfig, "sigma must be > 0");
    if (cfg.noise_fraction < 0.0 || cfg.noise_fraction >= 1.0) {
        fail(ErrorCode::InvalidConfig, "noise_fraction must be in [0,1)");
    }
    if (cfg.noise_fraction > 0.0 && cfg.feature_dim < 2) {
        fail(ErrorCode::InvalidConfig, "noise outliers need feature_dim >= 2");
    }
}

inline Dataset synth_generate(const SynthConfig& cfg) {
    validate_synth_config(cfg);
    const Prng root(cfg.seed);
    const DVec u = detail::unit_gauss_direction(root.derive(detail::kSynthDirTag), cfg.feature_dim);
    DVec u2(cfg.feature_dim, 0.0);
    if (cfg.noise_fraction > 0.0) {
        // Gram-Schmidt against u so outliers separate from both classes.
        Prng noise_stream = root.derive(detail::kSynthNoiseDirTag);
        double n = 0.0;
        while (n < 1e-12) {
            for (auto& x : u2) x = noise_stream.gauss();
            double proj = 0.0;
            for (std::size_t i = 0; i < u2.size(); ++i) proj += u2[i] * u[i];
            for (std::size_t i = 0; i < u2.size(); ++i) u2[i] -= proj * u[i];
            n = norm2(u2);
        }
        for (auto& x : u2) x /= n;
    }

    Dataset ds;
    ds.feature_dim = cfg.feature_dim;
    ds.truths.emplace();
    const std::size_t total = cfg.n_neg_bags + cfg.n_pos_bags;
    ds.bags.reserve(total);
    ds.truths->reserve(total);

    const auto pad = [](std::size_t v) {
        std::string s = std::to_string(v);
        while (s.size() < 4) s.insert(s.begin(), '0');
        return s;
    };

    for (std::size_t b = 0; b < total; ++b) {
        const bool positive = b >= cfg.n_neg_bags;
        Prng bag_stream = root.derive(detail::kSynthBagTag ^ static_cast<std::uint64_t>(b));
        const std::size_t k = cfg.k_min + bag_stream.below(cfg.k_max - cfg.k_min + 1);

        std::size_t n_pos = 0, n_noise = 0;
        if (positive) {
            n_pos = static_cast<std::size_t>(
                std::ceil(cfg.pos_fraction * static_cast<double>(k)));
            n_noise = static_cast<std::size_t>(
                std::floor(cfg.noise_fraction * static_cast<double>(k)));
            if (n_pos + n_noise > k) n_noise = k - n_pos;
        }

        std::vector<InstanceTruth> truth(k, InstanceTruth::Negative);
        for (std::size_t i = 0; i < n_pos; ++i) truth[i] = InstanceTruth::Positive;
        for (std::size_t i = n_pos; i < n_pos + n_noise; ++i) truth[i] = InstanceTruth::Noise;
        bag_stream.shuffle(truth);

        Bag bag;
        const std::string idx = pad(positive ? b - cfg.n_neg_bags : b);
        bag.bag_id = (positive ? "pos_" : "neg_") + idx;
        bag.case_id = (positive ? "case_p" : "case_n") + idx;
        bag.label = positive ? Label::Positive : Label::Negative;
        bag.instances.resize(k);
        const std::size_t grid_w = static_cast<std::size_t>(
            std::ceil(std::sqrt(static_cast<double>(k))));
        for (std::size_t j = 0; j < k; ++j) {
            auto& inst = bag.instances[j];
            inst.values.resize(cfg.feature_dim);
            double mean_scale = 0.0;
            const DVec* dir = &u;
            switch (truth[j]) {
                case InstanceTruth::Negative: mean_scale = 0.0; break;
                case InstanceTruth::Positive: mean_scale = cfg.separation * cfg.sigma; break;
                case InstanceTruth::Noise:
                    mean_scale = 10.0 * cfg.separation * cfg.sigma;
                    dir = &u2;
                    break;
            }
            for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
                const double v = mean_scale * (*dir)[d] + cfg.sigma * bag_stream.gauss();
                inst.values[d] = static_cast<float>(v);
            }
            inst.coord = {static_cast<std::int32_t>(j % grid_w),
                          static_cast<std::int32_t>(j / grid_w)};
        }
        ds.bags.push_back(std::move(bag));
        ds.truths->push_back({std::move(truth)});
    }
    validate_dataset(ds);
    return ds;
}

}  // namespace occmil
