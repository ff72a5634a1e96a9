#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "occmil/adam.hpp"
#include "occmil/bag.hpp"
#include "occmil/config.hpp"
#include "occmil/error.hpp"
#include "occmil/losses.hpp"
#include "occmil/metrics.hpp"
#include "occmil/model.hpp"
#include "occmil/ocsvm.hpp"
#include "occmil/prng.hpp"
#include "occmil/pseudolabel.hpp"
#include "occmil/split.hpp"
#include "occmil/t3a.hpp"

namespace occmil {

struct EpochStats {
    double train_loss = 0.0;
    double val_auroc = 0.0;
};

struct TrainedModel {
    ModelParams params;   // parameters of the best validation epoch
    OcsvmState ocsvm;     // final epoch's fit
    TrainConfig config;
    std::vector<EpochStats> history;
    int best_epoch = 0;   // 1-based
};

// Improvement means strictly greater validation AUROC; ties burn patience.
struct EarlyStopTracker {
    int patience = 10;
    double best = -std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int epochs_since_best = 0;

    explicit EarlyStopTracker(int p) : patience(p) {}

    // Returns true once `patience` consecutive epochs brought no improvement.
    bool observe(int epoch, double val_auroc) {
        if (val_auroc > best) {
            best = val_auroc;
            best_epoch = epoch;
            epochs_since_best = 0;
            return false;
        }
        ++epochs_since_best;
        return epochs_since_best >= patience;
    }
};

namespace detail {

inline constexpr std::uint64_t kTrainTag = 0x545241494Eull;
inline constexpr std::uint64_t kInitTag = 0x494E4954ull;
inline constexpr std::uint64_t kOcsvmTag = 0x4F435356ull;
inline constexpr std::uint64_t kShuffleTag = 0x53485546ull;

inline int label01(const Bag& bag) { return bag.label == Label::Positive ? 1 : 0; }

inline std::vector<DVec> refined_negative_features(const ModelParams& params, const Dataset& ds,
                                                   const std::vector<std::size_t>& train_idx) {
    std::vector<DVec> feats;
    for (std::size_t i : train_idx) {
        const Bag& bag = ds.bags[i];
        if (bag.label != Label::Negative) continue;
        for (const auto& inst : bag.instances) feats.push_back(refine(params, to_dvec(inst)));
    }
    return feats;
}

}  // namespace detail

// Pseudo-label precision of positive training bags against synthetic truth.
struct PseudoPrecision {
    double positive = 1.0;  // fraction of pseudo-positives that are truly positive
    double negative = 1.0;  // fraction of pseudo-negatives that are truly negative
    std::size_t n_pos_labels = 0;
    std::size_t n_neg_labels = 0;
};

inline PseudoPrecision pseudo_label_precision(const ModelParams& params, const OcsvmState& ocsvm,
                                              const Dataset& ds,
                                              const std::vector<std::size_t>& bag_indices,
                                              std::size_t M, double r_percent) {
    if (!ds.truths.has_value()) fail(ErrorCode::InvalidConfig, "dataset carries no truth labels");
    std::size_t pos_hit = 0, pos_total = 0, neg_hit = 0, neg_total = 0;
    for (std::size_t i : bag_indices) {
        const Bag& bag = ds.bags[i];
        if (bag.label != Label::Positive) continue;
        DVec scores(bag.size());
        for (std::size_t j = 0; j < bag.size(); ++j) {
            scores[j] = anomaly_score(ocsvm, refine(params, to_dvec(bag.instances[j])));
        }
        const PseudoLabelSet pl = pseudo_label_positive_bag(scores, M, r_percent);
        const auto& truth = (*ds.truths)[i].labels;
        for (std::size_t j : pl.positives) {
            ++pos_total;
            if (truth[j] == InstanceTruth::Positive) ++pos_hit;
        }
        for (std::size_t j : pl.negatives) {
            ++neg_total;
            if (truth[j] == InstanceTruth::Negative) ++neg_hit;
        }
    }
    PseudoPrecision out;
    out.n_pos_labels = pos_total;
    out.n_neg_labels = neg_total;
    if (pos_total > 0) out.positive = static_cast<double>(pos_hit) / static_cast<double>(pos_total);
    if (neg_total > 0) out.negative = static_cast<double>(neg_hit) / static_cast<double>(neg_total);
    return out;
}

// One fold: per epoch, refit the OCSVM from scratch on the refined features
// of the training negatives (the first fit precedes epoch 1), run the bags in
// a seeded shuffled order at batch size 1, then score validation AUROC.
// Returns the parameters of the best validation epoch.
inline TrainedModel train_fold(const Dataset& ds, const SplitSpec& split, const TrainConfig& cfg) {
    validate_train_config(cfg);
    validate_dataset(ds);

    std::vector<std::size_t> train_idx;
    for (std::size_t i : subset_bag_indices(ds, split, Subset::Train)) {
        if (ds.bags[i].label != Label::Unknown) train_idx.push_back(i);
    }
    std::vector<std::size_t> val_idx;
    for (std::size_t i : subset_bag_indices(ds, split, Subset::Val)) {
        if (ds.bags[i].label != Label::Unknown) val_idx.push_back(i);
    }
    const auto count_labels = [&](const std::vector<std::size_t>& idx) {
        std::pair<std::size_t, std::size_t> c{0, 0};
        for (std::size_t i : idx) {
            (ds.bags[i].label == Label::Negative ? c.first : c.second) += 1;
        }
        return c;
    };
    const auto [train_neg, train_pos] = count_labels(train_idx);
    if (train_neg == 0 || train_pos == 0) {
        fail(ErrorCode::DegenerateSplit, "fold " + std::to_string(split.fold) +
                                             ": training set lacks a class");
    }
    const auto [val_neg, val_pos] = count_labels(val_idx);
    if (val_neg == 0 || val_pos == 0) {
        fail(ErrorCode::DegenerateSplit,
             "fold " + std::to_string(split.fold) + ": validation set lacks a class");
    }

    const Prng root =
        Prng(cfg.seed).derive(detail::kTrainTag ^ static_cast<std::uint64_t>(split.fold));
    ModelParams params = init_params(ds.feature_dim, cfg.d_ref, cfg.att_dim,
                                     root.derive(detail::kInitTag));
    AdamState adam = AdamState::init(params);

    TrainedModel out;
    out.config = cfg;
    EarlyStopTracker stopper(cfg.patience);
    ModelParams best_params = params;

    std::vector<std::size_t> order = train_idx;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto neg_feats = detail::refined_negative_features(params, ds, train_idx);
        out.ocsvm = fit_ocsvm(neg_feats, cfg.nu, cfg.ocsvm_tol, cfg.ocsvm_max_epochs,
                              root.derive(detail::kOcsvmTag ^ static_cast<std::uint64_t>(epoch)));

        Prng shuffler = root.derive(detail::kShuffleTag ^ static_cast<std::uint64_t>(epoch));
        order = train_idx;
        shuffler.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t i : order) {
            const Bag& bag = ds.bags[i];
            const int y = detail::label01(bag);
            ForwardTrace trace = forward(params, bag);
            PseudoLabelSet pseudo;
            if (y == 1) {
                DVec scores(trace.bag_size());
                for (std::size_t j = 0; j < trace.bag_size(); ++j) {
                    scores[j] = anomaly_score(out.ocsvm, trace.refined[j]);
                }
                pseudo = pseudo_label_positive_bag(scores, cfg.M, cfg.r_percent);
            } else {
                pseudo = confident_negatives(trace.att_logits, cfg.M);
            }
            attach_instance_probs(params, trace, pseudo);
            const double loss = total_loss(trace, y, pseudo, cfg.alpha1);
            if (!std::isfinite(loss)) {
                fail(ErrorCode::NumericFailure, "non-finite loss on bag '" + bag.bag_id + "'");
            }
            loss_sum += loss;
            const Gradients grads = backward(params, trace, y, pseudo, cfg.alpha1);
            adam_step(params, grads, adam, cfg);
        }

        DVec val_scores(val_idx.size());
        std::vector<int> val_labels(val_idx.size());
        for (std::size_t v = 0; v < val_idx.size(); ++v) {
            const Bag& bag = ds.bags[val_idx[v]];
            val_scores[v] = forward(params, bag).bag_probs[1];
            val_labels[v] = detail::label01(bag);
        }
        const double val_auroc = auroc(val_scores, val_labels);
        out.history.push_back({loss_sum / static_cast<double>(order.size()), val_auroc});

        const bool was_best = val_auroc > stopper.best;
        const bool stop = stopper.observe(epoch, val_auroc);
        if (was_best) best_params = params;
        if (stop) break;
    }
    out.params = std::move(best_params);
    out.best_epoch = stopper.best_epoch;
    return out;
}

struct FoldResult {
    TrainedModel model;
    MetricsReport metrics;
};

// Test-set scores for a trained model: T3A adaptation in dataset order when
// enabled, otherwise plain bag-classifier probabilities.
inline DVec test_scores(const TrainedModel& model, const Dataset& ds,
                        const std::vector<std::size_t>& test_idx) {
    if (model.config.t3a_enabled) {
        std::vector<const Bag*> bags;
        bags.reserve(test_idx.size());
        for (std::size_t i : test_idx) bags.push_back(&ds.bags[i]);
        return adapt_evaluate(model.params, bags, model.config.t3a_C).scores;
    }
    DVec scores(test_idx.size());
    for (std::size_t v = 0; v < test_idx.size(); ++v) {
        scores[v] = forward(model.params, ds.bags[test_idx[v]]).bag_probs[1];
    }
    return scores;
}

inline FoldResult run_fold(const Dataset& ds, const TrainConfig& cfg, int fold,
                           SplitRatios ratios) {
    const SplitSpec split = monte_carlo_split(ds, fold, cfg.seed, ratios);
    FoldResult result;
    result.model = train_fold(ds, split, cfg);

    std::vector<std::size_t> test_idx;
    for (std::size_t i : subset_bag_indices(ds, split, Subset::Test)) {
        if (ds.bags[i].label != Label::Unknown) test_idx.push_back(i);
    }
    std::vector<int> labels(test_idx.size());
    for (std::size_t v = 0; v < test_idx.size(); ++v) labels[v] = detail::label01(ds.bags[test_idx[v]]);
    const DVec scores = test_scores(result.model, ds, test_idx);
    result.metrics = threshold_metrics(scores, labels, cfg.threshold);
    return result;
}

// Monte Carlo cross-validation: folds 0..n_folds-1 split, trained and scored
// independently; fold errors are rethrown with the fold index attached.
inline std::vector<FoldResult> run_cv(const Dataset& ds, const TrainConfig& cfg, int n_folds,
                                      SplitRatios ratios) {
    if (n_folds < 1) fail(ErrorCode::InvalidConfig, "n_folds must be >= 1");
    std::vector<FoldResult> results;
    results.reserve(static_cast<std::size_t>(n_folds));
    for (int fold = 0; fold < n_folds; ++fold) {
        try {
            results.push_back(run_fold(ds, cfg, fold, ratios));
        } catch (const Error& e) {
            throw Error(e.code(), "fold " + std::to_string(fold) + ": " + e.what());
        }
    }
    return results;
}

}  // namespace occmil
