#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "occmil/ocsvm.hpp"
#include "occmil/pseudolabel.hpp"
#include "test_util.hpp"

using namespace occmil;

TEST_CASE("single-point fit recovers the closed-form hyperplane", "[occ]") {
    // For one training point z with nu=1 the program's optimum is w*=z with
    // the boundary at rho*=<z,z> (KKT of the one-point problem).
    const DVec z = {0.6, 0.8};  // unit norm, rho* = 1
    const OcsvmState s = fit_ocsvm({z}, 1.0, 1e-6, 10000, Prng(1));
    CHECK(std::fabs(s.w[0] - z[0]) / std::fabs(z[0]) < 0.02);
    CHECK(std::fabs(s.w[1] - z[1]) / std::fabs(z[1]) < 0.02);
    CHECK(std::fabs(s.rho - 1.0) < 0.02);
}

TEST_CASE("two symmetric points get equal decision values", "[occ]") {
    const std::vector<DVec> pts = {{1.0, 0.0}, {0.0, 1.0}};
    const OcsvmState s = fit_ocsvm(pts, 1.0, 1e-7, 10000, Prng(3));
    const double d0 = dot(s.w, pts[0]);
    const double d1 = dot(s.w, pts[1]);
    CHECK(std::fabs(d0 - d1) <= 0.05 * std::max(std::fabs(d0), std::fabs(d1)));
}

TEST_CASE("objective trace is non-increasing after epoch 3", "[occ]") {
    Prng p(11);
    std::vector<DVec> pts(50, DVec(4));
    for (auto& z : pts) {
        for (auto& x : z) x = 1.0 + 0.3 * p.gauss();
    }
    const OcsvmState s = fit_ocsvm(pts, 0.5, 1e-9, 60, Prng(12));
    REQUIRE(s.objective_trace.size() >= 4);
    for (std::size_t e = 3; e < s.objective_trace.size(); ++e) {
        CHECK(s.objective_trace[e] <= s.objective_trace[e - 1] + 1e-3);
    }
    CHECK(s.final_objective == s.objective_trace.back());
    CHECK(s.epochs_run == static_cast<int>(s.objective_trace.size()));
}

TEST_CASE("fit is deterministic in (features, nu, tol, seed)", "[occ]") {
    Prng p(21);
    std::vector<DVec> pts(20, DVec(3));
    for (auto& z : pts) {
        for (auto& x : z) x = p.gauss();
    }
    const OcsvmState a = fit_ocsvm(pts, 0.3, 1e-5, 40, Prng(5));
    const OcsvmState b = fit_ocsvm(pts, 0.3, 1e-5, 40, Prng(5));
    CHECK(a.w == b.w);
    CHECK(a.rho == b.rho);
    CHECK(a.epochs_run == b.epochs_run);
}

TEST_CASE("fit input validation", "[occ]") {
    CHECK(testutil::thrown_code([&] { fit_ocsvm({}, 0.5, 1e-4, 10, Prng(0)); }) ==
          ErrorCode::EmptyTrainingSet);
    CHECK(testutil::thrown_code([&] { fit_ocsvm({DVec{1.0}}, 0.0, 1e-4, 10, Prng(0)); }) ==
          ErrorCode::BadNu);
    CHECK(testutil::thrown_code([&] { fit_ocsvm({DVec{1.0}}, 1.5, 1e-4, 10, Prng(0)); }) ==
          ErrorCode::BadNu);
}

TEST_CASE("anomaly score is the negated directed distance", "[occ]") {
    OcsvmState s;
    s.w = {1.0, 0.0};
    s.rho = 0.5;
    CHECK(anomaly_score(s, {1.0, 0.0}) == -1.0);
    CHECK(anomaly_score(s, {0.0, 0.0}) == 0.0);
    const DVec z = {0.3, -0.7};
    CHECK(anomaly_score(s, {0.6, -1.4}) == Approx(2.0 * anomaly_score(s, z)).margin(1e-15));
}

TEST_CASE("anomaly ordering is invariant under positive rescaling of w", "[occ]") {
    Prng p(31);
    OcsvmState a, b;
    a.w.resize(5);
    for (auto& x : a.w) x = p.gauss();
    b.w = a.w;
    for (auto& x : b.w) x *= 7.25;
    std::vector<DVec> zs(24, DVec(5));
    for (auto& z : zs) {
        for (auto& x : z) x = p.gauss();
    }
    const auto argsort = [&](const OcsvmState& s) {
        std::vector<std::size_t> idx(zs.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) {
            return anomaly_score(s, zs[l]) < anomaly_score(s, zs[r]);
        });
        return idx;
    };
    CHECK(argsort(a) == argsort(b));
}

TEST_CASE("occ_classify puts the boundary on the negative side", "[occ]") {
    OcsvmState s;
    s.w = {1.0, 0.0};
    s.rho = 0.5;
    CHECK(occ_classify(s, {1.0, 0.0}) == Label::Negative);
    CHECK(occ_classify(s, {-1.0, 0.0}) == Label::Positive);
    CHECK(occ_classify(s, {0.5, 0.0}) == Label::Negative);  // exactly on the boundary
}

TEST_CASE("occ_bag_proportions counts classifications", "[occ]") {
    OcsvmState s;
    s.w = {1.0};
    s.rho = 0.0;
    SECTION("3:1") {
        const auto [pos, neg] =
            occ_bag_proportions(s, {{-1.0}, {-2.0}, {-3.0}, {4.0}});
        CHECK(pos == 0.75);
        CHECK(neg == 0.25);
        CHECK(pos + neg == 1.0);
    }
    SECTION("all positive") {
        const auto [pos, neg] = occ_bag_proportions(s, {{-1.0}, {-1.0}});
        CHECK(pos == 1.0);
        CHECK(neg == 0.0);
    }
    SECTION("sum is exactly one") {
        Prng p(3);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<DVec> zs(1 + p.below(9), DVec(1));
            for (auto& z : zs) z[0] = p.gauss();
            const auto [pos, neg] = occ_bag_proportions(s, zs);
            CHECK(pos + neg == 1.0);
        }
    }
}

TEST_CASE("positive-bag pseudo-labeling follows the stated rule", "[occ]") {
    SECTION("worked example") {
        const PseudoLabelSet pl = pseudo_label_positive_bag({5.0, 3.0, 1.0, -1.0, -2.0}, 1, 20.0);
        CHECK(pl.excluded == std::vector<std::size_t>{0});
        CHECK(pl.positives == std::vector<std::size_t>{1});
        CHECK(pl.negatives == std::vector<std::size_t>{4});
    }
    SECTION("M clamps to half the remainder") {
        const PseudoLabelSet pl = pseudo_label_positive_bag({3.0, 2.0, 1.0}, 8, 0.0);
        CHECK(pl.positives.size() == 1);
        CHECK(pl.negatives.size() == 1);
        CHECK(pl.positives != pl.negatives);
    }
    SECTION("tie-break by smaller index") {
        const PseudoLabelSet pl = pseudo_label_positive_bag({1.0, 1.0, 1.0, 1.0}, 2, 0.0);
        CHECK(pl.positives == std::vector<std::size_t>{0, 1});
        CHECK(pl.negatives == std::vector<std::size_t>{2, 3});
    }
    SECTION("bad inputs") {
        CHECK(testutil::thrown_code([&] { pseudo_label_positive_bag({}, 1, 0.0); }) ==
              ErrorCode::EmptyBag);
        CHECK(testutil::thrown_code([&] { pseudo_label_positive_bag({1.0}, 0, 0.0); }) ==
              ErrorCode::InvalidConfig);
        CHECK(testutil::thrown_code([&] { pseudo_label_positive_bag({1.0}, 1, 100.0); }) ==
              ErrorCode::InvalidConfig);
    }
}

TEST_CASE("pseudo-label policy properties over random scores", "[occ]") {
    Prng p(47);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + p.below(40);
        DVec scores(k);
        for (auto& s : scores) s = p.below(2) == 0 ? p.gauss() : static_cast<double>(p.below(4));
        const std::size_t m = 1 + p.below(10);
        const double r = static_cast<double>(p.below(50));
        const PseudoLabelSet pl = pseudo_label_positive_bag(scores, m, r);

        const std::size_t n_excl =
            static_cast<std::size_t>(std::floor(static_cast<double>(k) * r / 100.0));
        CHECK(pl.excluded.size() == n_excl);
        const std::size_t m_eff = std::min(m, (k - n_excl) / 2);
        CHECK(pl.positives.size() == m_eff);
        CHECK(pl.negatives.size() == m_eff);

        std::set<std::size_t> seen;
        for (auto i : pl.positives) CHECK(seen.insert(i).second);
        for (auto i : pl.negatives) CHECK(seen.insert(i).second);
        for (auto i : pl.excluded) CHECK(seen.insert(i).second);
        for (auto i : seen) CHECK(i < k);

        // excluded dominates: every excluded score >= every labeled score
        if (!pl.excluded.empty()) {
            double min_excl = scores[pl.excluded[0]];
            for (auto i : pl.excluded) min_excl = std::min(min_excl, scores[i]);
            for (auto i : pl.positives) CHECK(scores[i] <= min_excl);
            for (auto i : pl.negatives) CHECK(scores[i] <= min_excl);
        }
        // positives outrank negatives
        if (m_eff > 0) {
            double min_pos = scores[pl.positives[0]];
            for (auto i : pl.positives) min_pos = std::min(min_pos, scores[i]);
            for (auto i : pl.negatives) CHECK(scores[i] <= min_pos);
        }
    }
}

TEST_CASE("negative-bag confident selection", "[occ]") {
    SECTION("worked example") {
        const PseudoLabelSet pl = confident_negatives({0.9, 0.1, 0.5, 0.7}, 1);
        CHECK(pl.negatives == std::vector<std::size_t>{0, 1});
        CHECK(pl.positives.empty());
        CHECK(pl.excluded.empty());
    }
    SECTION("clamp on tiny bags") {
        const PseudoLabelSet pl = confident_negatives({0.2, 0.8}, 5);
        CHECK(pl.negatives.size() == 2);
    }
    SECTION("positives always empty") {
        Prng p(9);
        for (int trial = 0; trial < 100; ++trial) {
            DVec logits(1 + p.below(20));
            for (auto& x : logits) x = p.gauss();
            const PseudoLabelSet pl = confident_negatives(logits, 1 + p.below(5));
            CHECK(pl.positives.empty());
            std::set<std::size_t> uniq(pl.negatives.begin(), pl.negatives.end());
            CHECK(uniq.size() == pl.negatives.size());
        }
    }
}
