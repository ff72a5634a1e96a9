#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "occmil/error.hpp"
#include "occmil/linalg.hpp"

namespace occmil {

// Thresholded metrics under the two-class macro scheme (accuracy micro).
// recall_pos is the supplementary positive-class recall.
struct MetricsReport {
    double auroc = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double threshold = 0.5;
    double n_pos = 0.0;
    double n_neg = 0.0;
    double recall_pos = 0.0;
};

namespace detail {

inline void check_two_classes(const std::vector<int>& labels) {
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == 1) has_pos = true;
        else if (y == 0) has_neg = true;
        else fail(ErrorCode::InvalidConfig, "labels must be 0 or 1");
    }
    if (!has_pos || !has_neg) {
        fail(ErrorCode::SingleClass, "metrics need at least one label of each class");
    }
}

}  // namespace detail

// Mann-Whitney rank statistic with average ranks for ties: the probability a
// random positive outscores a random negative, ties counted half.
inline double auroc(const DVec& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        fail(ErrorCode::DimMismatch, "auroc: scores/labels length mismatch");
    }
    detail::check_two_classes(labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
        for (std::size_t u = i; u < j; ++u) {
            if (labels[idx[u]] == 1) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    const double p = static_cast<double>(n_pos);
    const double q = static_cast<double>(n - n_pos);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

// Predicted positive iff score >= threshold. Accuracy is micro; precision,
// recall and F1 average the positive-class and negative-class views. A class
// with no predicted members contributes precision 0; a 0/0 F1 is 0.
inline MetricsReport threshold_metrics(const DVec& scores, const std::vector<int>& labels,
                                       double threshold) {
    if (scores.size() != labels.size()) {
        fail(ErrorCode::DimMismatch, "metrics: scores/labels length mismatch");
    }
    detail::check_two_classes(labels);
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (pred && labels[i] == 1) ++tp;
        else if (pred && labels[i] == 0) ++fp;
        else if (!pred && labels[i] == 1) ++fn;
        else ++tn;
    }
    const auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    const auto f1_of = [](double prec, double rec) {
        return (prec + rec) == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
    };
    const double prec_pos = ratio(tp, tp + fp);
    const double rec_pos = ratio(tp, tp + fn);
    const double prec_neg = ratio(tn, tn + fn);
    const double rec_neg = ratio(tn, tn + fp);

    MetricsReport r;
    r.auroc = auroc(scores, labels);
    r.accuracy = ratio(tp + tn, scores.size());
    r.precision = 0.5 * (prec_pos + prec_neg);
    r.recall = 0.5 * (rec_pos + rec_neg);
    r.f1 = 0.5 * (f1_of(prec_pos, rec_pos) + f1_of(prec_neg, rec_neg));
    r.threshold = threshold;
    r.n_pos = static_cast<double>(tp + fn);
    r.n_neg = static_cast<double>(tn + fp);
    r.recall_pos = rec_pos;
    return r;
}

inline std::string fmt_real(double x) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

// Element-wise mean and population standard deviation across folds.
inline std::pair<MetricsReport, MetricsReport> aggregate_metrics(
    const std::vector<MetricsReport>& folds) {
    if (folds.empty()) fail(ErrorCode::EmptyInput, "no fold metrics to aggregate");
    const auto fields = [](MetricsReport& r) {
        return std::array<double*, 9>{&r.auroc, &r.accuracy, &r.precision, &r.recall, &r.f1,
                                      &r.threshold, &r.n_pos, &r.n_neg, &r.recall_pos};
    };
    MetricsReport mean, stddev;
    auto mf = fields(mean);
    auto sf = fields(stddev);
    for (std::size_t i = 0; i < mf.size(); ++i) *mf[i] = *sf[i] = 0.0;
    const double n = static_cast<double>(folds.size());
    for (auto fold : folds) {
        auto ff = fields(fold);
        for (std::size_t i = 0; i < mf.size(); ++i) *mf[i] += *ff[i] / n;
    }
    for (auto fold : folds) {
        auto ff = fields(fold);
        for (std::size_t i = 0; i < sf.size(); ++i) {
            const double d = *ff[i] - *mf[i];
            *sf[i] += d * d / n;
        }
    }
    for (std::size_t i = 0; i < sf.size(); ++i) *sf[i] = std::sqrt(*sf[i]);
    return {mean, stddev};
}

inline constexpr const char* kMetricsHeader =
    "fold,auroc,accuracy,precision,recall,f1,threshold,n_pos,n_neg,recall_pos";

inline std::string metrics_row(const std::string& fold, const MetricsReport& r) {
    return fold + "," + fmt_real(r.auroc) + "," + fmt_real(r.accuracy) + "," +
           fmt_real(r.precision) + "," + fmt_real(r.recall) + "," + fmt_real(r.f1) + "," +
           fmt_real(r.threshold) + "," + fmt_real(r.n_pos) + "," + fmt_real(r.n_neg) + "," +
           fmt_real(r.recall_pos) + "\n";
}

// Per-fold rows plus a trailing mean/std pair (std is the population form).
inline std::string metrics_csv(const std::vector<MetricsReport>& folds) {
    std::string out = std::string(kMetricsHeader) + "\n";
    for (std::size_t i = 0; i < folds.size(); ++i) {
        out += metrics_row(std::to_string(i), folds[i]);
    }
    const auto [mean, stddev] = aggregate_metrics(folds);
    out += metrics_row("mean", mean);
    out += metrics_row("std", stddev);
    return out;
}

}  // namespace occmil
