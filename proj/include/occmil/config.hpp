#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "occmil/error.hpp"
#include "occmil/split.hpp"
#include "occmil/synth.hpp"

namespace occmil {

// Training hyperparameters. Defaults follow the reference recipe: Adam with
// lr 5e-4, betas 0.9/0.999, weight decay 1e-4, early stopping after ten
// flat epochs, at most 200 epochs.
struct TrainConfig {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-4;
    double alpha1 = 0.7;        // bag-loss weight; instance weight is 1 - alpha1
    std::size_t M = 8;          // confident instances per extreme
    double r_percent = 20.0;    // top anomaly percentage excluded as noise
    double nu = 0.25;           // OCSVM nu
    int patience = 10;
    int max_epochs = 200;
    double threshold = 0.5;     // positive iff score >= threshold
    bool t3a_enabled = false;
    std::size_t t3a_C = 10;
    std::uint64_t seed = 0;
    std::size_t d_ref = 512;
    std::size_t att_dim = 128;  // config key "D"
    double ocsvm_tol = 1e-4;
    int ocsvm_max_epochs = 100;
};

inline void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) fail(ErrorCode::InvalidConfig, "learning_rate must be > 0");
    if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
        fail(ErrorCode::InvalidConfig, "betas must be in [0,1)");
    }
    if (cfg.weight_decay < 0.0) fail(ErrorCode::InvalidConfig, "weight_decay must be >= 0");
    if (cfg.alpha1 < 0.0 || cfg.alpha1 > 1.0) fail(ErrorCode::InvalidConfig, "alpha1 must be in [0,1]");
    if (cfg.M == 0) fail(ErrorCode::InvalidConfig, "M must be >= 1");
    if (cfg.r_percent < 0.0 || cfg.r_percent >= 100.0) {
        fail(ErrorCode::InvalidConfig, "r must be in [0,100)");
    }
    if (!(cfg.nu > 0.0) || cfg.nu > 1.0) fail(ErrorCode::InvalidConfig, "nu must be in (0,1]");
    if (cfg.patience < 1) fail(ErrorCode::InvalidConfig, "patience must be >= 1");
    if (cfg.max_epochs < 1) fail(ErrorCode::InvalidConfig, "max_epochs must be >= 1");
    if (!(cfg.threshold > 0.0) || !(cfg.threshold < 1.0)) {
        fail(ErrorCode::InvalidConfig, "threshold must be in (0,1)");
    }
    if (cfg.t3a_C == 0) fail(ErrorCode::InvalidConfig, "t3a_C must be >= 1");
    if (cfg.d_ref == 0 || cfg.att_dim == 0) fail(ErrorCode::InvalidConfig, "model dims must be >= 1");
    if (!(cfg.ocsvm_tol > 0.0)) fail(ErrorCode::InvalidConfig, "ocsvm_tol must be > 0");
    if (cfg.ocsvm_max_epochs < 1) fail(ErrorCode::InvalidConfig, "ocsvm_max_epochs must be >= 1");
}

// A full run description: training hyperparameters plus orchestration keys.
struct RunConfig {
    TrainConfig train;
    int folds = 10;
    SplitRatios ratios;
    std::string manifest;
    std::string out_dir;
};

namespace detail {

inline std::unordered_map<std::string, std::string> parse_kv_lines(const std::string& text,
                                                                   const std::string& origin) {
    std::unordered_map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(ErrorCode::InvalidConfig,
                 origin + " line " + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto ktrim = key.find_last_not_of(" \t");
        key = key.substr(0, ktrim == std::string::npos ? 0 : ktrim + 1);
        const auto vtrim = value.find_first_not_of(" \t");
        value = vtrim == std::string::npos ? "" : value.substr(vtrim);
        if (key.empty()) {
            fail(ErrorCode::InvalidConfig, origin + " line " + std::to_string(lineno) + ": empty key");
        }
        if (!kv.emplace(key, value).second) {
            fail(ErrorCode::InvalidConfig,
                 origin + " line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

inline double to_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail(ErrorCode::InvalidConfig, "key '" + key + "': bad real value '" + v + "'");
    }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const std::uint64_t x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail(ErrorCode::InvalidConfig, "key '" + key + "': bad integer value '" + v + "'");
    }
}

inline long long to_i64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail(ErrorCode::InvalidConfig, "key '" + key + "': bad integer value '" + v + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrorCode::InvalidConfig, "key '" + key + "': bad boolean value '" + v + "'");
}

inline SplitRatios to_ratios(const std::string& key, const std::string& v) {
    std::vector<double> parts;
    std::string cur;
    for (char c : v + ",") {
        if (c == ',') {
            if (!cur.empty()) parts.push_back(to_real(key, cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (parts.size() != 3) {
        fail(ErrorCode::InvalidConfig, "key '" + key + "': want three comma-separated ratios");
    }
    return {parts[0], parts[1], parts[2]};
}

}  // namespace detail

// Flat key=value training configuration; unknown keys are errors.
inline RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    RunConfig rc;
    const auto kv = detail::parse_kv_lines(text, origin);
    for (const auto& [key, value] : kv) {
        if (key == "learning_rate") rc.train.learning_rate = detail::to_real(key, value);
        else if (key == "beta1") rc.train.beta1 = detail::to_real(key, value);
        else if (key == "beta2") rc.train.beta2 = detail::to_real(key, value);
        else if (key == "weight_decay") rc.train.weight_decay = detail::to_real(key, value);
        else if (key == "alpha1") rc.train.alpha1 = detail::to_real(key, value);
        else if (key == "M") rc.train.M = static_cast<std::size_t>(detail::to_u64(key, value));
        else if (key == "r") rc.train.r_percent = detail::to_real(key, value);
        else if (key == "nu") rc.train.nu = detail::to_real(key, value);
        else if (key == "patience") rc.train.patience = static_cast<int>(detail::to_i64(key, value));
        else if (key == "max_epochs") rc.train.max_epochs = static_cast<int>(detail::to_i64(key, value));
        else if (key == "threshold") rc.train.threshold = detail::to_real(key, value);
        else if (key == "t3a_enabled") rc.train.t3a_enabled = detail::to_bool(key, value);
        else if (key == "t3a_C") rc.train.t3a_C = static_cast<std::size_t>(detail::to_u64(key, value));
        else if (key == "seed") rc.train.seed = detail::to_u64(key, value);
        else if (key == "d_ref") rc.train.d_ref = static_cast<std::size_t>(detail::to_u64(key, value));
        else if (key == "D") rc.train.att_dim = static_cast<std::size_t>(detail::to_u64(key, value));
        else if (key == "ocsvm_tol") rc.train.ocsvm_tol = detail::to_real(key, value);
        else if (key == "ocsvm_max_epochs") rc.train.ocsvm_max_epochs = static_cast<int>(detail::to_i64(key, value));
        else if (key == "folds") rc.folds = static_cast<int>(detail::to_i64(key, value));
        else if (key == "ratios") rc.ratios = detail::to_ratios(key, value);
        else if (key == "manifest") rc.manifest = value;
        else if (key == "out_dir") rc.out_dir = value;
        else fail(ErrorCode::InvalidConfig, origin + ": unknown key '" + key + "'");
    }
    validate_train_config(rc.train);
    if (rc.folds < 1) fail(ErrorCode::InvalidConfig, "folds must be >= 1");
    return rc;
}

// Flat key=value synthetic-data configuration; unknown keys are errors.
inline SynthConfig parse_synth_config(const std::string& text, const std::string& origin) {
    SynthConfig sc;
    const auto kv = detail::parse_kv_lines(text, origin);
    for (const auto& [key, value] : kv) {
        if (key == "feature_dim") sc.feature_dim = static_cast<std::size_t>(detail::to_u64(key, value));
        else if (key == "n_neg_bags") sc.n_neg_bags = static_cast<std::size_t>(detail::to_u64(key, value));
        else if (key == "n_pos_bags") sc.n_pos_bags = static_cast<std::size_t>(detail::to_u64(key, value));
        else if (key == "k_min") sc.k_min = static_cast<std::size_t>(detail::to_u64(key, value));
        else if (key == "k_max") sc.k_max = static_cast<std::size_t>(detail::to_u64(key, value));
        else if (key == "pos_fraction") sc.pos_fraction = detail::to_real(key, value);
        else if (key == "separation") sc.separation = detail::to_real(key, value);
        else if (key == "sigma") sc.sigma = detail::to_real(key, value);
        else if (key == "noise_fraction") sc.noise_fraction = detail::to_real(key, value);
        else if (key == "seed") sc.seed = detail::to_u64(key, value);
        else fail(ErrorCode::InvalidConfig, origin + ": unknown key '" + key + "'");
    }
    validate_synth_config(sc);
    return sc;
}

// FNV-1a over raw config bytes, recorded in run metadata.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace occmil
