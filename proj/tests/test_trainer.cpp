#include <catch2/catch.hpp>

#include <cmath>

#include "occmil/adam.hpp"
#include "occmil/config.hpp"
#include "occmil/losses.hpp"
#include "occmil/synth.hpp"
#include "occmil/trainer.hpp"
#include "test_util.hpp"

using namespace occmil;

TEST_CASE("instance losses read the head conventions", "[trainer]") {
    SECTION("positive head, uniform probability") {
        CHECK(instance_loss(InstanceHead::Pos, {0.5, 0.5}, 1) ==
              Approx(std::log(2.0)).margin(1e-12));
    }
    SECTION("negative head reads index 0 for y=1") {
        const double loss = instance_loss(InstanceHead::Neg, {0.0001, 0.9999}, 1);
        CHECK(loss == Approx(-std::log(0.0001)).margin(1e-9));
        CHECK(loss == Approx(9.2103).margin(1e-4));
    }
    SECTION("perfect prediction limit") {
        const double loss = instance_loss(InstanceHead::Pos, {1e-15, 1.0 - 1e-15}, 1);
        CHECK(loss >= 0.0);
        CHECK(loss < 1e-9);
    }
    SECTION("clamp stops infinities") {
        const double loss = instance_loss(InstanceHead::Pos, {1.0, 0.0}, 1);
        CHECK(std::isfinite(loss));
        CHECK(loss == Approx(-std::log(1e-12)).margin(1e-9));
    }
    SECTION("malformed probabilities") {
        CHECK(testutil::thrown_code([&] { instance_loss(InstanceHead::Pos, {0.9, 0.9}, 1); }) ==
              ErrorCode::BadProbability);
        CHECK(testutil::thrown_code([&] { instance_loss(InstanceHead::Pos, {0.5, 0.5}, 2); }) ==
              ErrorCode::BadProbability);
    }
}

TEST_CASE("bag loss is binary cross entropy", "[trainer]") {
    CHECK(bag_loss({0.5, 0.5}, 0) == Approx(std::log(2.0)).margin(1e-12));
    CHECK(bag_loss({0.5, 0.5}, 1) == Approx(std::log(2.0)).margin(1e-12));
    CHECK(bag_loss({0.25, 0.75}, 1) == Approx(-std::log(0.75)).margin(1e-12));
    CHECK(bag_loss({0.25, 0.75}, 0) == Approx(-std::log(0.25)).margin(1e-12));
}

TEST_CASE("total loss mixes bag and instance terms", "[trainer]") {
    ForwardTrace trace;
    trace.bag_probs = {1.0 - std::exp(-1.0), std::exp(-1.0)};  // bag loss exactly 1 at Y=1

    SECTION("alpha1=1 is the bag loss alone") {
        const PseudoLabelSet none;
        CHECK(total_loss(trace, 1, none, 1.0) == Approx(1.0).margin(1e-12));
    }
    SECTION("empty confident set drops the instance term") {
        const PseudoLabelSet none;
        CHECK(total_loss(trace, 1, none, 0.4) == Approx(0.4).margin(1e-12));
    }
    SECTION("hand-evaluated mixture") {
        // One confident positive with L_neg = 0.2 and L_pos = 0.4:
        // total = 0.5*1.0 + (0.5/2)*(0.2+0.4) = 0.65
        trace.refined.resize(1);
        InstanceHeadProbs ip;
        ip.index = 0;
        ip.neg = {std::exp(-0.2), 1.0 - std::exp(-0.2)};
        ip.pos = {1.0 - std::exp(-0.4), std::exp(-0.4)};
        trace.instance_probs.push_back(ip);
        PseudoLabelSet pl;
        pl.positives = {0};
        CHECK(total_loss(trace, 1, pl, 0.5) == Approx(0.65).margin(1e-12));
    }
    SECTION("missing probabilities") {
        PseudoLabelSet pl;
        pl.positives = {0};
        trace.instance_probs.clear();
        CHECK(testutil::thrown_code([&] { total_loss(trace, 1, pl, 0.5); }) ==
              ErrorCode::MissingInstanceProbs);
    }
}

namespace {

// Scalar Adam written independently of the library path.
struct ScalarAdamOracle {
    double m = 0.0, v = 0.0;
    int t = 0;

    double step(double theta, double g, double lr, double b1, double b2, double wd) {
        ++t;
        g += wd * theta;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        return theta - lr * mhat / (std::sqrt(vhat) + 1e-8);
    }
};

}  // namespace

TEST_CASE("adam_step update rule", "[trainer]") {
    TrainConfig cfg;
    cfg.learning_rate = 0.001;
    cfg.weight_decay = 0.0;
    ModelParams p = init_params(2, 2, 1, Prng(1));
    AdamState state = AdamState::init(p);

    SECTION("zero gradient is a fixed point") {
        const ModelParams before = p;
        const Gradients g = zero_gradients(p);
        adam_step(p, g, state, cfg);
        auto ta = tensor_data(before);
        auto tb = tensor_data(p);
        for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);
    }
    SECTION("first step moves by about -lr * sign(g)") {
        Gradients g = zero_gradients(p);
        p.b_bag[0] = 0.0;
        g.b_bag[0] = 10.0;
        adam_step(p, g, state, cfg);
        CHECK(p.b_bag[0] == Approx(-0.001).margin(1e-9));
    }
    SECTION("five-step trajectory matches the scalar oracle") {
        cfg.weight_decay = 0.01;
        ScalarAdamOracle oracle;
        double theta = 0.7;
        p.b_bag[0] = 0.7;
        for (int step = 0; step < 5; ++step) {
            const double grad = 2.0 * theta - 0.5;  // d/dtheta of (theta^2 - 0.5 theta)
            Gradients g = zero_gradients(p);
            g.b_bag[0] = 2.0 * p.b_bag[0] - 0.5;
            adam_step(p, g, state, cfg);
            theta = oracle.step(theta, grad, cfg.learning_rate, cfg.beta1, cfg.beta2,
                                cfg.weight_decay);
            CHECK(p.b_bag[0] == Approx(theta).margin(1e-12));
        }
    }
    SECTION("shape mismatch") {
        Gradients g = zero_gradients(init_params(3, 2, 1, Prng(2)));
        CHECK(testutil::thrown_code([&] { adam_step(p, g, state, cfg); }) ==
              ErrorCode::ShapeMismatch);
    }
}

TEST_CASE("early stopping arithmetic", "[trainer]") {
    SECTION("strictly decreasing from epoch 1 stops at epoch 11, best 1") {
        EarlyStopTracker tracker(10);
        bool stopped = false;
        int stop_epoch = 0;
        for (int epoch = 1; epoch <= 50 && !stopped; ++epoch) {
            stopped = tracker.observe(epoch, 1.0 - 0.01 * epoch);
            stop_epoch = epoch;
        }
        CHECK(stopped);
        CHECK(stop_epoch == 11);
        CHECK(tracker.best_epoch == 1);
    }
    SECTION("ties do not reset patience") {
        EarlyStopTracker tracker(3);
        CHECK_FALSE(tracker.observe(1, 0.8));
        CHECK_FALSE(tracker.observe(2, 0.8));
        CHECK_FALSE(tracker.observe(3, 0.8));
        CHECK(tracker.observe(4, 0.8));
        CHECK(tracker.best_epoch == 1);
    }
    SECTION("improvement resets the counter") {
        EarlyStopTracker tracker(2);
        CHECK_FALSE(tracker.observe(1, 0.5));
        CHECK_FALSE(tracker.observe(2, 0.4));
        CHECK_FALSE(tracker.observe(3, 0.6));
        CHECK_FALSE(tracker.observe(4, 0.5));
        CHECK(tracker.observe(5, 0.5));
        CHECK(tracker.best_epoch == 3);
    }
}

namespace {

SynthConfig small_synth(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.feature_dim = 4;
    cfg.n_neg_bags = 15;
    cfg.n_pos_bags = 15;
    cfg.k_min = 4;
    cfg.k_max = 8;
    cfg.pos_fraction = 0.4;
    cfg.separation = 3.0;
    cfg.sigma = 1.0;
    cfg.noise_fraction = 0.0;
    cfg.seed = seed;
    return cfg;
}

TrainConfig small_train(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.M = 2;
    cfg.r_percent = 10.0;
    cfg.nu = 0.5;
    cfg.max_epochs = 3;
    cfg.patience = 10;
    cfg.d_ref = 8;
    cfg.att_dim = 4;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("train_fold is bit-deterministic", "[trainer]") {
    const Dataset ds = synth_generate(small_synth(42));
    const TrainConfig cfg = small_train(7);
    const SplitSpec split = monte_carlo_split(ds, 0, cfg.seed, {0.5, 0.25, 0.25});

    const TrainedModel a = train_fold(ds, split, cfg);
    const TrainedModel b = train_fold(ds, split, cfg);
    auto ta = tensor_data(a.params), tb = tensor_data(b.params);
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);
    CHECK(a.best_epoch == b.best_epoch);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(a.history[e].train_loss == b.history[e].train_loss);
        CHECK(a.history[e].val_auroc == b.history[e].val_auroc);
    }
    CHECK(a.ocsvm.w == b.ocsvm.w);
    CHECK(a.ocsvm.rho == b.ocsvm.rho);
}

TEST_CASE("best epoch has the maximal validation auroc", "[trainer]") {
    const Dataset ds = synth_generate(small_synth(9));
    TrainConfig cfg = small_train(3);
    cfg.max_epochs = 6;
    const SplitSpec split = monte_carlo_split(ds, 1, cfg.seed, {0.5, 0.25, 0.25});
    const TrainedModel m = train_fold(ds, split, cfg);
    REQUIRE(m.best_epoch >= 1);
    const double best = m.history[static_cast<std::size_t>(m.best_epoch - 1)].val_auroc;
    for (const auto& e : m.history) CHECK(e.val_auroc <= best);
}

TEST_CASE("degenerate splits are rejected", "[trainer]") {
    Dataset ds = synth_generate(small_synth(1));
    for (auto& bag : ds.bags) bag.label = Label::Negative;  // kill the positive class
    ds.truths.reset();
    const TrainConfig cfg = small_train(1);
    const SplitSpec split = monte_carlo_split(ds, 0, cfg.seed, {0.5, 0.25, 0.25});
    CHECK(testutil::thrown_code([&] { train_fold(ds, split, cfg); }) ==
          ErrorCode::DegenerateSplit);
}

TEST_CASE("run_cv reports one fold per split and exact aggregates", "[trainer]") {
    const Dataset ds = synth_generate(small_synth(5));
    const TrainConfig cfg = small_train(2);
    const auto results = run_cv(ds, cfg, 3, {0.5, 0.25, 0.25});
    REQUIRE(results.size() == 3);

    std::vector<MetricsReport> reports;
    for (const auto& r : results) reports.push_back(r.metrics);
    const auto [mean, stddev] = aggregate_metrics(reports);
    double expect = 0.0;
    for (const auto& r : reports) expect += r.auroc;
    expect /= 3.0;
    CHECK(mean.auroc == Approx(expect).margin(1e-12));
    (void)stddev;
}

TEST_CASE("fold std uses the population formula", "[trainer]") {
    std::vector<MetricsReport> reports(3);
    reports[0].auroc = 0.5;
    reports[1].auroc = 0.7;
    reports[2].auroc = 0.9;
    const auto [mean, stddev] = aggregate_metrics(reports);
    CHECK(mean.auroc == Approx(0.7).margin(1e-12));
    // population: sqrt(((0.2)^2 + 0 + (0.2)^2) / 3)
    CHECK(stddev.auroc == Approx(std::sqrt(0.08 / 3.0)).margin(1e-12));
}

TEST_CASE("config parsing mirrors TrainConfig", "[trainer]") {
    SECTION("full round trip") {
        const std::string text =
            "# comment\n"
            "learning_rate = 0.001\n"
            "beta1 = 0.85\n"
            "beta2 = 0.995\n"
            "weight_decay = 0.0002\n"
            "alpha1 = 0.3\n"
            "M = 16\n"
            "r = 10\n"
            "nu = 0.55\n"
            "patience = 4\n"
            "max_epochs = 50\n"
            "threshold = 0.8\n"
            "t3a_enabled = true\n"
            "t3a_C = 8\n"
            "seed = 99\n"
            "d_ref = 64\n"
            "D = 32\n"
            "folds = 5\n"
            "ratios = 0.7,0.2,0.1\n"
            "manifest = data/manifest.csv\n"
            "out_dir = out\n";
        const RunConfig rc = parse_run_config(text, "test");
        CHECK(rc.train.learning_rate == 0.001);
        CHECK(rc.train.beta1 == 0.85);
        CHECK(rc.train.alpha1 == 0.3);
        CHECK(rc.train.M == 16);
        CHECK(rc.train.r_percent == 10.0);
        CHECK(rc.train.nu == 0.55);
        CHECK(rc.train.patience == 4);
        CHECK(rc.train.threshold == 0.8);
        CHECK(rc.train.t3a_enabled);
        CHECK(rc.train.t3a_C == 8);
        CHECK(rc.train.seed == 99);
        CHECK(rc.train.d_ref == 64);
        CHECK(rc.train.att_dim == 32);
        CHECK(rc.folds == 5);
        CHECK(rc.ratios.train == 0.7);
        CHECK(rc.manifest == "data/manifest.csv");
        CHECK(rc.out_dir == "out");
    }
    SECTION("unknown keys are hard errors") {
        CHECK(testutil::thrown_code([&] { parse_run_config("learning_rte = 0.1\n", "t"); }) ==
              ErrorCode::InvalidConfig);
    }
    SECTION("duplicate keys are errors") {
        CHECK(testutil::thrown_code([&] { parse_run_config("seed = 1\nseed = 2\n", "t"); }) ==
              ErrorCode::InvalidConfig);
    }
    SECTION("range validation") {
        CHECK(testutil::thrown_code([&] { parse_run_config("alpha1 = 1.5\n", "t"); }) ==
              ErrorCode::InvalidConfig);
        CHECK(testutil::thrown_code([&] { parse_run_config("nu = 0\n", "t"); }) ==
              ErrorCode::InvalidConfig);
    }
}
