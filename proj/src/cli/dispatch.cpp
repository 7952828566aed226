#include "cotlab/cli/dispatch.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cotlab/cli/config.hpp"
#include "cotlab/cli/manifest.hpp"
#include "cotlab/cli/plots.hpp"
#include "cotlab/experiments/bench.hpp"
#include "cotlab/experiments/lab_presets.hpp"
#include "cotlab/experiments/no_cot_eval.hpp"
#include "cotlab/experiments/run_state.hpp"
#include "cotlab/experiments/taxonomy_suite.hpp"
#include "cotlab/experiments/transfer.hpp"
#include "cotlab/experiments/translator.hpp"
#include "cotlab/model/transformer.hpp"
#include "cotlab/tasks/lab_vocab.hpp"
#include "cotlab/train/sft.hpp"

namespace cotlab::cli {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string manifest_path;
    std::string out_dir;
    std::int64_t seed_override = -1;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "JSON config file");
    sub->add_option("--manifest", args.manifest_path, "rerun from a manifest");
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--seed", args.seed_override, "seed override");
}

// Resolved run context: normalized config, digest, output directory.
struct RunCtx {
    ordered_json config;
    std::string out_dir;

    std::uint64_t digest() const { return config_digest(config); }
    model::ModelConfig model_config() const {
        model::ModelConfig mc;
        const auto& m = config.at("model");
        mc.n_layers = m.at("n_layers").get<std::size_t>();
        mc.n_heads = m.at("n_heads").get<std::size_t>();
        mc.d_model = m.at("d_model").get<std::size_t>();
        mc.max_seq_len = m.at("max_seq_len").get<std::size_t>();
        mc.learned_pos = m.at("learned_pos").get<bool>();
        mc.vocab_size = tasks::kVocabSize;
        mc.validate();
        return mc;
    }
    std::uint64_t seed() const { return config.at("seed").get<std::uint64_t>(); }
    std::vector<std::uint64_t> seeds() const {
        return config.at("seeds").get<std::vector<std::uint64_t>>();
    }
    model::ModelWeights load_ckpt(const std::string& which) const {
        const std::string path = config.at("checkpoints").at(which).get<std::string>();
        if (path.empty()) {
            throw ConfigError("/checkpoints/" + which + ": required for this subcommand");
        }
        return model::ModelWeights::load(path, model_config());
    }
};

RunCtx resolve(const CommonArgs& args) {
    RunCtx ctx;
    if (!args.manifest_path.empty()) {
        ctx.config = load_manifest(args.manifest_path).at("config");
    } else if (!args.config_path.empty()) {
        ValidationResult v = validate_config(args.config_path);
        if (!v.ok()) {
            std::string msg = "configuration errors:";
            for (const auto& e : v.errors) msg += "\n  " + e;
            throw ConfigError(msg);
        }
        ctx.config = v.normalized;
    } else {
        ctx.config = default_config();
    }
    if (args.seed_override >= 0) ctx.config["seed"] = args.seed_override;

    ctx.out_dir = ctx.config.at("out_dir").get<std::string>();
    if (!args.out_dir.empty()) ctx.out_dir = args.out_dir;
    if (const char* env = std::getenv("COTLAB_OUT")) ctx.out_dir = env;
    fs::create_directories(ctx.out_dir);
    return ctx;
}

void write_outputs(const RunCtx& ctx, const std::string& experiment, const ordered_json& report) {
    ordered_json rep = report;
    rep["manifest_config_digest"] = numcore::hex64(ctx.digest());
    experiments::write_json(ctx.out_dir + "/" + experiment + "_report.json", rep);
    experiments::write_json(ctx.out_dir + "/" + experiment + "_manifest.json",
                            make_manifest(experiment, ctx.config));
}

int cmd_train_sft(const CommonArgs& args) {
    RunCtx ctx = resolve(args);
    const auto& sc = ctx.config.at("sft");
    experiments::SftMixConfig mix;
    mix.arithmetic_ks = sc.at("arithmetic_ks").get<std::vector<int>>();
    mix.arithmetic_count = sc.at("arithmetic_count").get<std::size_t>();
    mix.gameable_count = sc.at("gameable_count").get<std::size_t>();
    mix.gameable_hack_frac = sc.at("gameable_hack_frac").get<double>();
    mix.gameable_cipher_hack_frac = sc.at("gameable_cipher_hack_frac").get<double>();
    auto corpus = experiments::build_sft_mix(mix, ctx.seed());

    numcore::Rng wrng(ctx.seed());
    model::ModelWeights w(ctx.model_config(), wrng);
    train::SftOptions opt;
    opt.batch_size = sc.at("batch_size").get<std::size_t>();
    opt.lr = sc.at("lr").get<double>();
    opt.weight_decay = sc.at("weight_decay").get<double>();
    opt.seed = ctx.seed();
    train::SftResult res = train::sft(w, corpus, sc.at("epochs").get<std::size_t>(), opt);

    w.save(ctx.out_dir + "/sft_model.bin", ctx.digest());
    tasks::lab_vocab().save(ctx.out_dir + "/vocab.txt");
    {
        std::ofstream os(ctx.out_dir + "/sft_loss.csv", std::ios::trunc);
        os << "step,loss\n";
        for (std::size_t i = 0; i < res.step_loss.size(); ++i) {
            os << i << "," << res.step_loss[i] << "\n";
        }
    }
    ordered_json rep;
    rep["schema_version"] = 1;
    rep["report"] = "train-sft";
    rep["steps"] = res.steps;
    rep["final_loss"] = res.step_loss.empty() ? 0.0 : res.step_loss.back();
    rep["model_digest"] = numcore::hex64(w.digest());
    write_outputs(ctx, "sft", rep);
    std::cout << "sft: " << res.steps << " steps, final loss "
              << (res.step_loss.empty() ? 0.0 : res.step_loss.back()) << "\n";
    return 0;
}

experiments::BenchOptions bench_options_from(const RunCtx& ctx) {
    const auto& bc = ctx.config.at("bench");
    experiments::BenchOptions opt;
    opt.roster.clear();
    for (const auto& name : bc.at("roster")) {
        opt.roster.push_back(experiments::bench_method_from_name(name.get<std::string>()));
    }
    opt.episodes = bc.at("episodes").get<std::size_t>();
    opt.seeds = ctx.seeds();
    opt.monitor_penalty = bc.at("monitor_penalty").get<double>();
    opt.legibility_weight = bc.at("legibility_weight").get<double>();
    opt.tau = bc.at("tau").get<double>();
    opt.delta = bc.at("delta").get<double>();
    opt.window = bc.at("window").get<std::size_t>();
    opt.escalate_factor = bc.at("escalate_factor").get<double>();
    opt.escalate_detection_bar = bc.at("escalate_detection_bar").get<double>();
    const auto& rw = ctx.config.at("reward");
    opt.base_reward.task_weight = rw.at("task_weight").get<double>();
    opt.base_reward.length_penalty_weight = rw.at("length_penalty_weight").get<double>();
    opt.base_reward.kl_weight = rw.at("kl_weight").get<double>();
    opt.base_reward.output_only = rw.at("output_only").get<bool>();
    const auto& rl = ctx.config.at("rl");
    opt.batch_size = rl.at("batch_size").get<std::size_t>();
    opt.lr = rl.at("lr").get<double>();
    opt.temperature = rl.at("temperature").get<double>();
    opt.max_new = rl.at("max_new").get<std::size_t>();
    return opt;
}

int cmd_train_rl(const CommonArgs& args) {
    RunCtx ctx = resolve(args);
    model::ModelWeights base = ctx.load_ckpt("base");
    model::ModelWeights reference =
        ctx.config.at("checkpoints").at("reference").get<std::string>().empty()
            ? base
            : ctx.load_ckpt("reference");

    experiments::BenchOptions opt = bench_options_from(ctx);
    opt.episodes = ctx.config.at("rl").at("episodes").get<std::size_t>();
    const auto method = experiments::bench_method_from_name(
        ctx.config.at("rl").at("method").get<std::string>());

    model::ModelWeights trained = base;
    train::TrainingCurves curves =
        experiments::run_bench_method(method, base, reference, opt, ctx.seed(), &trained);
    const experiments::MethodSeedOutcome outcome = experiments::bench_metrics(curves, opt);

    curves.save_csv(ctx.out_dir + "/curves.csv");
    trained.save(ctx.out_dir + "/rl_model.bin", ctx.digest());
    ordered_json rep;
    rep["schema_version"] = 1;
    rep["report"] = "train-rl";
    rep["method"] = experiments::bench_method_name(method);
    rep["episodes"] = curves.size();
    rep["divergence_flag"] = outcome.divergence_flag
                                 ? ordered_json(*outcome.divergence_flag)
                                 : ordered_json(nullptr);
    rep["detection_at_flag"] = outcome.detection_at_flag;
    rep["final_divergence"] = outcome.final_divergence;
    rep["final_detection"] = outcome.final_detection;
    write_outputs(ctx, "rl", rep);
    std::cout << "train-rl: " << curves.size() << " episodes\n";
    return 0;
}

int cmd_bench(const CommonArgs& args) {
    RunCtx ctx = resolve(args);
    model::ModelWeights base = ctx.load_ckpt("base");
    model::ModelWeights reference = ctx.load_ckpt("reference");
    experiments::BenchOptions opt = bench_options_from(ctx);
    opt.journal_path = ctx.out_dir + "/bench_journal.json";
    experiments::BenchReport rep = run_monitorability_bench(base, reference, opt);
    write_outputs(ctx, "bench", experiments::bench_report_json(rep));
    std::cout << "bench: " << rep.methods.size() << " methods x " << opt.seeds.size()
              << " seeds\n";
    return 0;
}

int cmd_transfer(const CommonArgs& args) {
    RunCtx ctx = resolve(args);
    model::ModelWeights base = ctx.load_ckpt("base");
    const auto& tc = ctx.config.at("transfer");
    experiments::TransferOptions opt;
    opt.k = tc.at("k").get<int>();
    opt.criterion = tc.at("criterion").get<double>();
    opt.heldout = tc.at("heldout").get<std::size_t>();
    opt.eval_every = tc.at("eval_every").get<std::size_t>();
    opt.max_steps = tc.at("max_steps").get<std::size_t>();
    opt.trace_count = tc.at("trace_count").get<std::size_t>();
    opt.batch_size = tc.at("batch_size").get<std::size_t>();
    opt.lr = tc.at("lr").get<double>();
    opt.seeds = ctx.seeds();
    opt.journal_path = ctx.out_dir + "/transfer_journal.json";
    experiments::TransferReport rep =
        run_transfer_eval(base, tasks::CipherSpec::cipher_a(), tasks::CipherSpec::cipher_b(), opt);
    write_outputs(ctx, "transfer", experiments::transfer_report_json(rep));
    std::cout << "transfer: ratios reported over " << opt.seeds.size() << " seeds\n";
    return 0;
}

int cmd_translate(const CommonArgs& args) {
    RunCtx ctx = resolve(args);
    model::ModelWeights reasoning = ctx.load_ckpt("reasoning");
    model::ModelWeights base = ctx.load_ckpt("reference");
    reasoning.set_frozen(true);
    base.set_frozen(true);
    const auto& tc = ctx.config.at("translate");
    experiments::TranslatorOptions opt;
    opt.episodes = tc.at("episodes").get<std::size_t>();
    opt.batch_size = tc.at("batch_size").get<std::size_t>();
    opt.lr = tc.at("lr").get<double>();
    opt.temperature = tc.at("temperature").get<double>();
    opt.k = tc.at("k").get<int>();
    opt.cot_budget = tc.at("cot_budget").get<std::size_t>();
    opt.heldout = tc.at("heldout").get<std::size_t>();
    opt.kv_feed = tc.at("kv_feed").get<bool>();
    opt.init_from_base = tc.at("init_from_base").get<bool>();
    opt.seed = ctx.seed();
    experiments::TranslatorResult res = train_translator(reasoning, base, opt);
    res.translator.save(ctx.out_dir + "/translator.bin", ctx.digest());
    write_outputs(ctx, "translate", experiments::translator_report_json(res, opt));
    std::cout << "translate: recovery " << res.recovery_rate << ", reward " << res.final_reward
              << " (oracle " << res.verbatim_oracle_reward << ")\n";
    return 0;
}

int cmd_eval_no_cot(const CommonArgs& args) {
    RunCtx ctx = resolve(args);
    model::ModelWeights base = ctx.load_ckpt("base");
    const auto& nc = ctx.config.at("no_cot");
    experiments::NoCotEvalOptions opt;
    opt.k = nc.at("k").get<int>();
    opt.instances = nc.at("instances").get<std::size_t>();
    opt.seed = ctx.seed();
    opt.modes.clear();
    for (const auto& m : nc.at("modes")) {
        const std::string name = m.get<std::string>();
        if (name == "with-cot") opt.modes.push_back(experiments::EvalMode::WithCot);
        else if (name == "constrained-output")
            opt.modes.push_back(experiments::EvalMode::ConstrainedOutput);
        else if (name == "filler-cot") opt.modes.push_back(experiments::EvalMode::FillerCot);
        else if (name == "distilled") opt.modes.push_back(experiments::EvalMode::Distilled);
        else throw ConfigError("/no_cot/modes: unknown mode " + name);
    }
    opt.distill_corpus = nc.at("distill_corpus").get<std::size_t>();
    opt.distill_epochs = nc.at("distill_epochs").get<std::size_t>();
    opt.filler_finetune_corpus = nc.at("filler_finetune_corpus").get<std::size_t>();
    opt.filler_finetune_epochs = nc.at("filler_finetune_epochs").get<std::size_t>();
    experiments::NoCotEvalReport rep = run_no_cot_eval(base, opt);
    write_outputs(ctx, "no_cot", experiments::no_cot_report_json(rep));
    for (const auto& m : rep.modes) {
        std::cout << experiments::eval_mode_name(m.mode) << ": " << m.accuracy << "\n";
    }
    return 0;
}

int cmd_taxonomy(const CommonArgs& args) {
    RunCtx ctx = resolve(args);
    model::ModelWeights reference = ctx.load_ckpt("reference");
    const auto& tc = ctx.config.at("taxonomy");
    experiments::TaxonomySuiteOptions opt;
    opt.traces_per_model = tc.at("traces_per_model").get<std::size_t>();
    opt.k = tc.at("k").get<int>();
    opt.temperature = tc.at("temperature").get<double>();
    opt.seed = ctx.seed();

    std::vector<model::ModelWeights> models;
    std::vector<experiments::TaxonomyRosterEntry> roster;
    if (!tc.contains("roster") || tc.at("roster").empty()) {
        throw ConfigError("/taxonomy/roster: at least one {name, checkpoint} entry required");
    }
    models.reserve(tc.at("roster").size());
    for (const auto& e : tc.at("roster")) {
        models.push_back(
            model::ModelWeights::load(e.at("checkpoint").get<std::string>(), ctx.model_config()));
        experiments::TaxonomyRosterEntry entry;
        entry.name = e.at("name").get<std::string>();
        entry.weights = &models.back();
        if (e.contains("divergence_present")) {
            entry.evidence.divergence_present = e.at("divergence_present").get<bool>();
        }
        if (e.contains("translator_recovery_rate")) {
            entry.evidence.translator_recovery_rate =
                e.at("translator_recovery_rate").get<double>();
        }
        roster.push_back(entry);
    }
    auto entries = run_taxonomy_suite(roster, reference, monitor::PatternMonitor::lab_default(),
                                      opt);
    write_outputs(ctx, "taxonomy", experiments::taxonomy_report_json(entries));
    for (const auto& e : entries) {
        std::cout << e.name << ": " << monitor::taxonomy_label_name(e.report.label) << "\n";
    }
    return 0;
}

int cmd_plot(const std::string& report_path, const std::string& curves_path,
             const std::string& out_path) {
    if (report_path.empty() == curves_path.empty()) {
        throw ConfigError("plot: exactly one of --report / --curves is required");
    }
    std::string svg;
    if (!report_path.empty()) {
        svg = svg_for_report(experiments::read_json(report_path));
    } else {
        svg = svg_curves(train::TrainingCurves::load_csv(curves_path));
    }
    std::ofstream os(out_path, std::ios::trunc | std::ios::binary);
    if (!os) throw IoError("cannot write plot: " + out_path);
    os << svg;
    std::cout << "plot: wrote " << out_path << "\n";
    return 0;
}

int cmd_inspect_trace(const std::string& trace_path) {
    std::ifstream is(trace_path);
    if (!is) throw IoError("cannot open trace: " + trace_path);
    const auto& vocab = tasks::lab_vocab();
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line);
        const int tok = j.at("token").get<int>();
        std::cout << j.at("position").get<std::size_t>() << "\t"
                  << (tok >= 0 && tok < static_cast<int>(vocab.size()) ? vocab.name(tok)
                                                                       : "?")
                  << "\t" << j.at("producer").get<std::string>() << "\tcache_len="
                  << j.at("cache_len").get<std::size_t>() << "\n";
    }
    return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"chain-of-thought monitorability lab"};
    app.require_subcommand(1);

    CommonArgs sft_args, rl_args, bench_args, transfer_args, translate_args, nocot_args,
        taxonomy_args;
    add_common(app.add_subcommand("train-sft", "supervised fine-tune a fresh model"), sft_args);
    add_common(app.add_subcommand("train-rl", "policy-gradient run with one method"), rl_args);
    add_common(app.add_subcommand("eval-no-cot", "capability evaluation without CoT"), nocot_args);
    add_common(app.add_subcommand("bench", "monitorability benchmark"), bench_args);
    add_common(app.add_subcommand("transfer", "encoded-reasoning transfer evaluation"),
               transfer_args);
    add_common(app.add_subcommand("translate", "train a translator against R/B"), translate_args);
    add_common(app.add_subcommand("taxonomy", "classify models' encoded reasoning"),
               taxonomy_args);

    std::string plot_report, plot_curves, plot_out = "plot.svg";
    CLI::App* plot = app.add_subcommand("plot", "emit an SVG for a report or curves file");
    plot->add_option("--report", plot_report, "report JSON");
    plot->add_option("--curves", plot_curves, "curves CSV");
    plot->add_option("--out", plot_out, "output SVG path");

    std::string trace_path;
    CLI::App* inspect = app.add_subcommand("inspect-trace", "pretty-print a trace dump");
    inspect->add_option("--trace", trace_path, "trace JSONL")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (app.got_subcommand("train-sft")) return cmd_train_sft(sft_args);
        if (app.got_subcommand("train-rl")) return cmd_train_rl(rl_args);
        if (app.got_subcommand("eval-no-cot")) return cmd_eval_no_cot(nocot_args);
        if (app.got_subcommand("bench")) return cmd_bench(bench_args);
        if (app.got_subcommand("transfer")) return cmd_transfer(transfer_args);
        if (app.got_subcommand("translate")) return cmd_translate(translate_args);
        if (app.got_subcommand("taxonomy")) return cmd_taxonomy(taxonomy_args);
        if (app.got_subcommand("plot")) return cmd_plot(plot_report, plot_curves, plot_out);
        if (app.got_subcommand("inspect-trace")) return cmd_inspect_trace(trace_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help();
    return 2;
}

}  // namespace cotlab::cli
