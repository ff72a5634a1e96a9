#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "occmil/attention_export.hpp"
#include "occmil/bag_io.hpp"
#include "occmil/checkpoint.hpp"
#include "occmil/config.hpp"
#include "occmil/error.hpp"
#include "occmil/metrics.hpp"
#include "occmil/synth.hpp"
#include "occmil/trainer.hpp"
#include "occmil/version.hpp"

namespace occmil::cli {

namespace fs = std::filesystem;

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
inline int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::UsageError: return 1;
        case ErrorCode::NumericFailure: return 3;
        default: return 2;
    }
}

struct Flags {
    std::map<std::string, std::string> values;
    std::set<std::string> switches;

    bool has(const std::string& name) const {
        return values.count(name) > 0 || switches.count(name) > 0;
    }

    const std::string& require(const std::string& name) const {
        auto it = values.find(name);
        if (it == values.end()) fail(ErrorCode::UsageError, "missing required flag " + name);
        return it->second;
    }

    std::string get_or(const std::string& name, const std::string& fallback) const {
        auto it = values.find(name);
        return it == values.end() ? fallback : it->second;
    }
};

namespace detail {

inline Flags parse_flags(const std::vector<std::string>& args, std::size_t start,
                         const std::set<std::string>& with_value,
                         const std::set<std::string>& switches) {
    Flags flags;
    for (std::size_t i = start; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (switches.count(arg) > 0) {
            flags.switches.insert(arg);
        } else if (with_value.count(arg) > 0) {
            if (i + 1 >= args.size()) fail(ErrorCode::UsageError, "flag " + arg + " needs a value");
            if (!flags.values.emplace(arg, args[++i]).second) {
                fail(ErrorCode::UsageError, "flag " + arg + " given twice");
            }
        } else {
            fail(ErrorCode::UsageError, "unknown flag " + arg);
        }
    }
    return flags;
}

inline fs::path make_out_dir(const std::string& dir) {
    if (dir.empty()) fail(ErrorCode::UsageError, "missing output directory");
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create '" + dir + "': " + ec.message());
    return p;
}

inline void write_run_meta(const fs::path& out_dir, const std::string& command,
                           std::uint64_t seed, const std::string& config_bytes,
                           const std::string& manifest,
                           const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_bytes)));
    std::string meta;
    meta += "command=" + command + "\n";
    meta += "version=" + std::string(kVersion) + "\n";
    meta += "seed=" + std::to_string(seed) + "\n";
    meta += "config_hash=" + std::string(hash) + "\n";
    meta += "manifest=" + manifest + "\n";
    for (const auto& [k, v] : extra) meta += k + "=" + v + "\n";
    occmil::detail::spew(out_dir / "run.meta", meta);
}

inline std::uint64_t parse_u64_flag(const std::string& name, const std::string& v) {
    try {
        std::size_t used = 0;
        const std::uint64_t x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail(ErrorCode::UsageError, "flag " + name + ": bad integer '" + v + "'");
    }
}

inline double parse_real_flag(const std::string& name, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail(ErrorCode::UsageError, "flag " + name + ": bad real '" + v + "'");
    }
}

inline std::string history_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,train_loss,val_auroc\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
        out += std::to_string(e + 1) + "," + fmt_real(history[e].train_loss) + "," +
               fmt_real(history[e].val_auroc) + "\n";
    }
    return out;
}

// Prediction rows for a manifest-ordered bag list. With T3A the score is the
// adapted class-1 softmax; without it, label_t3a repeats label_raw.
inline std::string predictions_csv(const ModelParams& params, const Dataset& ds,
                                   double threshold, bool t3a, std::size_t t3a_c) {
    std::string out = "bag_id,score_pos,label_raw,label_t3a\n";
    std::optional<AdaptOutputs> adapted;
    if (t3a) {
        std::vector<const Bag*> bags;
        bags.reserve(ds.bags.size());
        for (const auto& bag : ds.bags) bags.push_back(&bag);
        adapted = adapt_evaluate(params, bags, t3a_c);
    }
    for (std::size_t i = 0; i < ds.bags.size(); ++i) {
        const double raw_score = forward(params, ds.bags[i]).bag_probs[1];
        const int label_raw = raw_score >= threshold ? 1 : 0;
        const double score = adapted ? adapted->scores[i] : raw_score;
        const int label_t3a = adapted ? adapted->labels[i] : label_raw;
        out += ds.bags[i].bag_id + "," + fmt_real(score) + "," + std::to_string(label_raw) + "," +
               std::to_string(label_t3a) + "\n";
    }
    return out;
}

inline void cmd_synth(const std::vector<std::string>& args) {
    const Flags flags = parse_flags(args, 1, {"--config", "--out-dir", "--seed"}, {});
    const std::string cfg_bytes = occmil::detail::slurp(flags.require("--config"));
    SynthConfig cfg = parse_synth_config(cfg_bytes, flags.require("--config"));
    if (flags.has("--seed")) cfg.seed = parse_u64_flag("--seed", flags.require("--seed"));
    const Dataset ds = synth_generate(cfg);

    const fs::path out = make_out_dir(flags.require("--out-dir"));
    make_out_dir((out / "bags").string());
    std::vector<ManifestEntry> entries;
    entries.reserve(ds.bags.size());
    for (const auto& bag : ds.bags) {
        const std::string rel = "bags/" + bag.bag_id + ".bagf";
        write_bag(bag, out / rel);
        entries.push_back({bag.bag_id, bag.case_id, bag.label, rel});
    }
    write_manifest(entries, out / "manifest.csv");
    write_truth_csv(ds, out / "truth.csv");
    write_run_meta(out, "synth", cfg.seed, cfg_bytes, (out / "manifest.csv").string());
}

inline void cmd_split(const std::vector<std::string>& args) {
    const Flags flags =
        parse_flags(args, 1, {"--manifest", "--fold", "--seed", "--config", "--out-dir"}, {});
    const std::string manifest = flags.require("--manifest");
    const int fold = static_cast<int>(parse_u64_flag("--fold", flags.require("--fold")));
    const std::uint64_t seed =
        flags.has("--seed") ? parse_u64_flag("--seed", flags.require("--seed")) : 0;
    SplitRatios ratios;
    std::string cfg_bytes;
    if (flags.has("--config")) {
        cfg_bytes = occmil::detail::slurp(flags.require("--config"));
        ratios = parse_run_config(cfg_bytes, flags.require("--config")).ratios;
    }
    const Dataset ds = load_manifest(manifest);
    const SplitSpec spec = monte_carlo_split(ds, fold, seed, ratios);

    const fs::path out = make_out_dir(flags.get_or("--out-dir", "."));
    std::string csv = "case_id,subset\n";
    std::vector<std::pair<std::string, const char*>> rows;
    for (const auto& c : spec.train_cases) rows.emplace_back(c, "train");
    for (const auto& c : spec.val_cases) rows.emplace_back(c, "val");
    for (const auto& c : spec.test_cases) rows.emplace_back(c, "test");
    std::sort(rows.begin(), rows.end());
    for (const auto& [c, subset] : rows) csv += c + "," + subset + "\n";
    occmil::detail::spew(out / ("split_fold" + std::to_string(fold) + ".csv"), csv);
    write_run_meta(out, "split", seed, cfg_bytes, manifest);
}

inline void cmd_train(const std::vector<std::string>& args) {
    const Flags flags = parse_flags(
        args, 1, {"--config", "--manifest", "--out-dir", "--fold", "--folds", "--seed"}, {});
    const std::string cfg_path = flags.require("--config");
    const std::string cfg_bytes = occmil::detail::slurp(cfg_path);
    RunConfig rc = parse_run_config(cfg_bytes, cfg_path);
    if (flags.has("--manifest")) rc.manifest = flags.require("--manifest");
    if (flags.has("--out-dir")) rc.out_dir = flags.require("--out-dir");
    if (flags.has("--seed")) rc.train.seed = parse_u64_flag("--seed", flags.require("--seed"));
    if (flags.has("--folds")) {
        rc.folds = static_cast<int>(parse_u64_flag("--folds", flags.require("--folds")));
        if (rc.folds < 1) fail(ErrorCode::UsageError, "--folds must be >= 1");
    }
    if (rc.manifest.empty()) fail(ErrorCode::UsageError, "no manifest given (flag or config)");
    if (rc.out_dir.empty()) fail(ErrorCode::UsageError, "no out_dir given (flag or config)");

    const Dataset ds = load_manifest(rc.manifest);
    std::vector<int> folds;
    if (flags.has("--fold")) {
        folds.push_back(static_cast<int>(parse_u64_flag("--fold", flags.require("--fold"))));
    } else {
        for (int f = 0; f < rc.folds; ++f) folds.push_back(f);
    }

    const fs::path out = make_out_dir(rc.out_dir);
    std::vector<MetricsReport> reports;
    std::string csv = std::string(kMetricsHeader) + "\n";
    for (int fold : folds) {
        FoldResult result;
        try {
            result = run_fold(ds, rc.train, fold, rc.ratios);
        } catch (const Error& e) {
            throw Error(e.code(), "fold " + std::to_string(fold) + ": " + e.what());
        }
        const std::string tag = "_fold" + std::to_string(fold);
        save_model(result.model.params, out / ("model" + tag + ".mbhp"));
        save_ocsvm(result.model.ocsvm, out / ("model" + tag + ".mbho"));
        occmil::detail::spew(out / ("history" + tag + ".csv"), history_csv(result.model.history));
        csv += metrics_row(std::to_string(fold), result.metrics);
        reports.push_back(result.metrics);
        std::cout << "fold " << fold << ": best epoch " << result.model.best_epoch
                  << ", test auroc " << fmt_real(result.metrics.auroc) << "\n";
    }
    const auto [mean, stddev] = aggregate_metrics(reports);
    csv += metrics_row("mean", mean);
    csv += metrics_row("std", stddev);
    occmil::detail::spew(out / "metrics.csv", csv);
    write_run_meta(out, "train", rc.train.seed, cfg_bytes, rc.manifest);
}

struct EvalArgs {
    ModelParams params;
    Dataset ds;
    double threshold = 0.5;
    bool t3a = false;
    std::size_t t3a_c = 10;
    fs::path out;
    std::string model_path;
    std::string manifest;
};

inline EvalArgs parse_eval_args(const std::vector<std::string>& args) {
    const Flags flags = parse_flags(
        args, 1, {"--model", "--manifest", "--out-dir", "--t3a-c", "--threshold"}, {"--t3a"});
    EvalArgs ea;
    ea.model_path = flags.require("--model");
    ea.manifest = flags.require("--manifest");
    ea.params = load_model(ea.model_path);
    ea.ds = load_manifest(ea.manifest);
    ea.threshold = flags.has("--threshold")
                       ? parse_real_flag("--threshold", flags.require("--threshold"))
                       : 0.5;
    if (!(ea.threshold > 0.0) || !(ea.threshold < 1.0)) {
        fail(ErrorCode::UsageError, "--threshold must be in (0,1)");
    }
    ea.t3a = flags.has("--t3a");
    if (flags.has("--t3a-c")) {
        ea.t3a_c = parse_u64_flag("--t3a-c", flags.require("--t3a-c"));
        if (ea.t3a_c == 0) fail(ErrorCode::UsageError, "--t3a-c must be >= 1");
    }
    ea.out = make_out_dir(flags.get_or("--out-dir", "."));
    return ea;
}

inline void cmd_eval(const std::vector<std::string>& args) {
    EvalArgs ea = parse_eval_args(args);
    // Metrics over the labeled bags; T3A adapts over the full manifest order.
    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < ea.ds.bags.size(); ++i) {
        if (ea.ds.bags[i].label != Label::Unknown) labeled.push_back(i);
    }
    if (labeled.empty()) fail(ErrorCode::SingleClass, "no labeled bags to evaluate");
    DVec scores(labeled.size());
    std::vector<int> labels(labeled.size());
    std::optional<AdaptOutputs> adapted;
    if (ea.t3a) {
        std::vector<const Bag*> bags;
        for (const auto& bag : ea.ds.bags) bags.push_back(&bag);
        adapted = adapt_evaluate(ea.params, bags, ea.t3a_c);
    }
    for (std::size_t v = 0; v < labeled.size(); ++v) {
        const std::size_t i = labeled[v];
        scores[v] = adapted ? adapted->scores[i] : forward(ea.params, ea.ds.bags[i]).bag_probs[1];
        labels[v] = ea.ds.bags[i].label == Label::Positive ? 1 : 0;
    }
    const MetricsReport report = threshold_metrics(scores, labels, ea.threshold);
    std::string csv = std::string(kMetricsHeader) + "\n" + metrics_row("-", report);
    occmil::detail::spew(ea.out / "eval_metrics.csv", csv);
    occmil::detail::spew(ea.out / "predictions.csv",
                         predictions_csv(ea.params, ea.ds, ea.threshold, ea.t3a, ea.t3a_c));
    write_run_meta(ea.out, "eval", 0, "", ea.manifest,
                   {{"model", ea.model_path},
                    {"threshold", fmt_real(ea.threshold)},
                    {"t3a", ea.t3a ? "true" : "false"},
                    {"t3a_C", std::to_string(ea.t3a_c)}});
    std::cout << "auroc " << fmt_real(report.auroc) << " accuracy " << fmt_real(report.accuracy)
              << "\n";
}

inline void cmd_predict(const std::vector<std::string>& args) {
    EvalArgs ea = parse_eval_args(args);
    occmil::detail::spew(ea.out / "predictions.csv",
                         predictions_csv(ea.params, ea.ds, ea.threshold, ea.t3a, ea.t3a_c));
    write_run_meta(ea.out, "predict", 0, "", ea.manifest,
                   {{"model", ea.model_path},
                    {"threshold", fmt_real(ea.threshold)},
                    {"t3a", ea.t3a ? "true" : "false"},
                    {"t3a_C", std::to_string(ea.t3a_c)}});
}

inline void cmd_export_attention(const std::vector<std::string>& args) {
    const Flags flags = parse_flags(args, 1, {"--model", "--manifest", "--out-dir"}, {});
    const ModelParams params = load_model(flags.require("--model"));
    const Dataset ds = load_manifest(flags.require("--manifest"));
    const fs::path out = make_out_dir(flags.get_or("--out-dir", "."));
    std::vector<AttentionReport> reports;
    reports.reserve(ds.bags.size());
    for (const auto& bag : ds.bags) {
        reports.push_back(attention_export(params, bag));
        if (bag.instances.front().coord.has_value()) {
            occmil::detail::spew(out / (bag.bag_id + ".pgm"), render_pgm(reports.back()));
        }
    }
    occmil::detail::spew(out / "attention.csv", attention_csv(reports));
    write_run_meta(out, "export-attention", 0, "", flags.require("--manifest"));
}

inline void cmd_occ_report(const std::vector<std::string>& args) {
    const Flags flags = parse_flags(args, 1, {"--model", "--manifest", "--out-dir"}, {});
    const std::string model_path = flags.require("--model");
    const ModelParams params = load_model(model_path);
    fs::path ocsvm_path(model_path);
    ocsvm_path.replace_extension(".mbho");
    const OcsvmState ocsvm = load_ocsvm(ocsvm_path);
    const Dataset ds = load_manifest(flags.require("--manifest"));
    const fs::path out = make_out_dir(flags.get_or("--out-dir", "."));

    std::string csv = "bag_id,n_instances,pos_fraction,neg_fraction\n";
    for (const auto& bag : ds.bags) {
        std::vector<DVec> refined;
        refined.reserve(bag.size());
        for (const auto& inst : bag.instances) refined.push_back(refine(params, to_dvec(inst)));
        const auto [pos, neg] = occ_bag_proportions(ocsvm, refined);
        csv += bag.bag_id + "," + std::to_string(bag.size()) + "," + fmt_real(pos) + "," +
               fmt_real(neg) + "\n";
    }
    occmil::detail::spew(out / "occ_report.csv", csv);
    write_run_meta(out, "occ-report", 0, "", flags.require("--manifest"));
}

inline void print_usage(std::ostream& os) {
    os << "usage: occmil <command> [flags]\n"
          "\n"
          "commands:\n"
          "  synth             --config <synth.cfg> --out-dir <dir> [--seed <u64>]\n"
          "  split             --manifest <csv> --fold <int> [--seed <u64>] [--config <cfg>]\n"
          "                    [--out-dir <dir>]\n"
          "  train             --config <train.cfg> [--manifest <csv>] [--out-dir <dir>]\n"
          "                    [--fold <int> | --folds <int>] [--seed <u64>]\n"
          "  eval              --model <ckpt> --manifest <csv> [--out-dir <dir>]\n"
          "                    [--threshold <real>] [--t3a] [--t3a-c <int>]\n"
          "  predict           --model <ckpt> --manifest <csv> [--out-dir <dir>]\n"
          "                    [--threshold <real>] [--t3a] [--t3a-c <int>]\n"
          "  export-attention  --model <ckpt> --manifest <csv> [--out-dir <dir>]\n"
          "  occ-report        --model <ckpt> --manifest <csv> [--out-dir <dir>]\n";
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args) {
    try {
        if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
            detail::print_usage(args.empty() ? std::cerr : std::cout);
            return args.empty() ? 1 : 0;
        }
        const std::string& cmd = args[0];
        if (cmd == "synth") detail::cmd_synth(args);
        else if (cmd == "split") detail::cmd_split(args);
        else if (cmd == "train") detail::cmd_train(args);
        else if (cmd == "eval") detail::cmd_eval(args);
        else if (cmd == "predict") detail::cmd_predict(args);
        else if (cmd == "export-attention") detail::cmd_export_attention(args);
        else if (cmd == "occ-report") detail::cmd_occ_report(args);
        else fail(ErrorCode::UsageError, "unknown command '" + cmd + "'");
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (e.code() == ErrorCode::UsageError) detail::print_usage(std::cerr);
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace occmil::cli
