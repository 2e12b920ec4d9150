#include "confgate/cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>

#include "confgate/cli/config.hpp"
#include "confgate/cli/report.hpp"
#include "confgate/data/formats.hpp"
#include "confgate/data/synthetic.hpp"
#include "confgate/errors.hpp"
#include "confgate/eval/metrics.hpp"
#include "confgate/numeric/checkpoint.hpp"
#include "confgate/pipeline/pipeline.hpp"
#include "confgate/prefs/preferences.hpp"
#include "confgate/probe/probe.hpp"
#include "confgate/rerank/reranker.hpp"

namespace confgate::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kProbeDevFraction = 0.15;
constexpr double kProbeTestFraction = 0.25;

struct Globals {
    std::string config_path;
    bool json = false;
    int threads = 1;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    bool force = false;
};

// State shared by every handler once flags are parsed.
struct Context {
    RunConfig config;
    std::uint64_t seed = kDefaultSeed;
    Parallelism par;
    bool json = false;
    bool force = false;
    std::ostream& out;
    std::ostream& err;
};

template <typename T>
void apply(const CLI::Option* opt, const T& value, T& target) {
    if (opt->count() > 0) {
        target = value;
    }
}

bool parse_on_off(const std::string& value, const char* flag) {
    if (value == "on") {
        return true;
    }
    if (value == "off") {
        return false;
    }
    throw UsageError(std::string(flag) + " takes on|off");
}

fs::path input_path(const Context& ctx, const std::string& flag_value, const std::string& role) {
    std::string chosen = flag_value;
    if (chosen.empty()) {
        const auto it = ctx.config.paths.find(role);
        if (it == ctx.config.paths.end()) {
            throw UsageError("missing --" + role + " (or paths." + role + " in --config)");
        }
        chosen = it->second;
    }
    if (!fs::exists(chosen)) {
        throw DataError("--" + role + " file not found: " + chosen);
    }
    return chosen;
}

void emit(const Context& ctx, const Json& doc, const std::string& human) {
    if (ctx.json) {
        ctx.out << doc.dump() << "\n";
    } else {
        ctx.out << human;
    }
}

void write_json(const fs::path& path, const Json& doc) {
    write_text_atomic(path, doc.dump(2) + "\n");
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

data::HiddenStates load_states(const Context& ctx, const fs::path& path) {
    auto states = data::read_hidden_states(path);
    for (const auto& w : states.warnings) {
        ctx.err << "warning: " << path.string() << ": " << w << "\n";
    }
    return states;
}

probe::ProbeModel load_probe(const fs::path& path, const data::HiddenStateMeta& meta) {
    auto model = probe::probe_from_checkpoint(numeric::read_checkpoint(path));
    if (model.meta_fingerprint != meta.fingerprint()) {
        throw DataError("probe " + path.string() + " was trained on '" + model.meta_fingerprint +
                        "' but the states are '" + meta.fingerprint() + "'");
    }
    return model;
}

rerank::RerankerModel load_reranker(const fs::path& path, const data::Corpus& corpus) {
    auto model = rerank::reranker_from_checkpoint(numeric::read_checkpoint(path));
    if (model.query_dim() != corpus.meta().query_dim ||
        model.context_dim() != corpus.meta().context_dim) {
        throw DataError("reranker " + path.string() + " dimensions do not match the corpus");
    }
    return model;
}

Json synth_settings(const data::SyntheticConfig& s) {
    return {{"n_queries", s.n_queries},
            {"n_contexts_per_query", s.n_contexts_per_query},
            {"dim", s.dim},
            {"feature_dim", s.feature_dim},
            {"helpful_fraction", s.helpful_fraction},
            {"known_fraction", s.known_fraction},
            {"noise_sigma", s.noise_sigma},
            {"feature_margin", s.feature_margin},
            {"model_id", s.model_id},
            {"seed", s.seed}};
}

Json probe_settings(const probe::ProbeTrainConfig& p) {
    return {{"learning_rate", p.learning_rate},
            {"epochs", p.epochs},
            {"dropout", p.dropout},
            {"batch_size", p.batch_size},
            {"hidden_width", p.hidden_width},
            {"patience", p.patience},
            {"activation", numeric::to_string(p.activation)},
            {"seed", p.seed}};
}

Json reranker_settings(const rerank::RerankerTrainConfig& r) {
    return {{"learning_rate", r.learning_rate},
            {"weight_decay", r.weight_decay},
            {"epochs", r.epochs},
            {"negatives_per_positive", r.negatives_per_positive},
            {"temperature", r.temperature},
            {"init_scale", r.init_scale},
            {"seed", r.seed}};
}

Json probe_eval_json(const probe::ProbeEvalReport& r) {
    return {{"accuracy", r.accuracy},
            {"n_pos", r.n_pos},
            {"n_neg", r.n_neg},
            {"confusion", {{r.confusion[0][0], r.confusion[0][1]},
                           {r.confusion[1][0], r.confusion[1][1]}}},
            {"mean_conf_pos", r.mean_conf_pos},
            {"mean_conf_neg", r.mean_conf_neg}};
}

std::string probe_eval_text(const probe::ProbeEvalReport& r) {
    std::string s = "accuracy " + fmt("%.4f", r.accuracy) + " on " +
                    std::to_string(r.n_pos + r.n_neg) + " records\n";
    s += "confusion [actual][pred]: [[" + std::to_string(r.confusion[0][0]) + ", " +
         std::to_string(r.confusion[0][1]) + "], [" + std::to_string(r.confusion[1][0]) + ", " +
         std::to_string(r.confusion[1][1]) + "]]\n";
    s += "mean conf: positives " + fmt("%.4f", r.mean_conf_pos) + ", negatives " +
         fmt("%.4f", r.mean_conf_neg) + "\n";
    return s;
}

std::string metrics_text(std::span<const eval::MetricReport> reports) {
    std::string s = "    k  precision     recall        mrr  n_queries\n";
    for (const auto& r : reports) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%5zu  %9.2f  %9.2f  %9.2f  %9zu\n", r.k,
                      100.0 * r.precision, 100.0 * r.recall, 100.0 * r.mrr, r.n_queries);
        s += buf;
    }
    return s;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    std::string out;
    data::SyntheticConfig flags;
    CLI::Option *n_queries, *contexts, *dim, *feature_dim, *helpful, *known, *sigma, *margin,
        *model_id;
};

void run_synth(Context& ctx, const SynthArgs& a) {
    auto cfg = ctx.config.synth;
    apply(a.n_queries, a.flags.n_queries, cfg.n_queries);
    apply(a.contexts, a.flags.n_contexts_per_query, cfg.n_contexts_per_query);
    apply(a.dim, a.flags.dim, cfg.dim);
    apply(a.feature_dim, a.flags.feature_dim, cfg.feature_dim);
    apply(a.helpful, a.flags.helpful_fraction, cfg.helpful_fraction);
    apply(a.known, a.flags.known_fraction, cfg.known_fraction);
    apply(a.sigma, a.flags.noise_sigma, cfg.noise_sigma);
    apply(a.margin, a.flags.feature_margin, cfg.feature_margin);
    apply(a.model_id, a.flags.model_id, cfg.model_id);
    cfg.seed = ctx.seed;
    ctx.config.synth = cfg;
    ctx.config.validate();

    const fs::path dir = a.out;
    claim_output_dir(dir, "synth", synth_settings(cfg), ctx.force);
    const auto world = data::generate_synthetic_world(cfg);
    const auto states_path = dir / "world.hsr.jsonl";
    const auto corpus_path = dir / "world.corpus.jsonl";
    data::write_hidden_states(states_path, world.meta, world.records);
    data::write_corpus(corpus_path, world.corpus);

    const Json doc = {{"format_version", kFormatVersion},
                      {"command", "synth"},
                      {"states", states_path.string()},
                      {"corpus", corpus_path.string()},
                      {"n_queries", world.corpus.size()},
                      {"n_records", world.records.size()}};
    emit(ctx, doc,
         "wrote " + std::to_string(world.records.size()) + " hidden states for " +
             std::to_string(world.corpus.size()) + " queries to " + states_path.string() +
             "\nwrote corpus to " + corpus_path.string() + "\n");
}

// ---- probe ----------------------------------------------------------------

struct ProbeArgs {
    std::string states, probe, out, split = "test";
    probe::ProbeTrainConfig flags;
    std::string activation;
    CLI::Option *lr, *epochs, *dropout, *batch, *hidden, *patience, *act;
};

void run_probe_train(Context& ctx, const ProbeArgs& a) {
    auto cfg = ctx.config.probe;
    apply(a.lr, a.flags.learning_rate, cfg.learning_rate);
    apply(a.epochs, a.flags.epochs, cfg.epochs);
    apply(a.dropout, a.flags.dropout, cfg.dropout);
    apply(a.batch, a.flags.batch_size, cfg.batch_size);
    apply(a.hidden, a.flags.hidden_width, cfg.hidden_width);
    apply(a.patience, a.flags.patience, cfg.patience);
    if (a.act->count() > 0) {
        cfg.activation = numeric::activation_from_string(a.activation);
    }
    cfg.seed = ctx.seed;
    ctx.config.probe = cfg;
    ctx.config.validate();

    const auto states_path = input_path(ctx, a.states, "states");
    const auto states = load_states(ctx, states_path);
    Json settings = probe_settings(cfg);
    settings["states_digest"] = file_digest(states_path);
    const fs::path dir = a.out;
    claim_output_dir(dir, "probe", settings, ctx.force);

    const auto splits =
        probe::split_probe_records(states.records, kProbeDevFraction, kProbeTestFraction, ctx.seed);
    const auto result = probe::train_probe(splits.train, splits.dev, cfg, states.meta.fingerprint());
    const auto test = probe::evaluate_probe(result.model, splits.test, ctx.par);
    const auto& log = result.log;
    const double dev_acc = log.best_epoch >= 0
                               ? log.epoch_dev_accuracy[static_cast<std::size_t>(log.best_epoch)]
                               : 0.0;

    numeric::write_checkpoint(dir / "probe.ckpt.json", probe::to_checkpoint(result.model));
    Json log_doc = {{"format_version", kFormatVersion},
                    {"n_train", splits.train.size()},
                    {"n_dev", splits.dev.size()},
                    {"n_test", splits.test.size()},
                    {"epochs_run", log.epochs_run},
                    {"best_epoch", log.best_epoch},
                    {"epoch_train_loss", log.epoch_train_loss},
                    {"epoch_dev_accuracy", log.epoch_dev_accuracy},
                    {"dev_accuracy", dev_acc},
                    {"test", probe_eval_json(test)}};
    write_json(dir / "probe.log.json", log_doc);

    std::string text;
    for (int e = 0; e < log.epochs_run; ++e) {
        const auto i = static_cast<std::size_t>(e);
        text += "epoch " + std::to_string(e + 1) + "  loss " +
                fmt("%.4f", log.epoch_train_loss[i]);
        if (i < log.epoch_dev_accuracy.size()) {
            text += "  dev_acc " + fmt("%.4f", log.epoch_dev_accuracy[i]);
        }
        text += "\n";
    }
    text += "final dev accuracy " + fmt("%.4f", dev_acc) + " (best epoch " +
            std::to_string(log.best_epoch + 1) + ")\n";
    text += "test " + probe_eval_text(test);
    text += "wrote " + (dir / "probe.ckpt.json").string() + "\n";
    emit(ctx, log_doc, text);
}

void run_probe_eval(Context& ctx, const ProbeArgs& a) {
    const auto states = load_states(ctx, input_path(ctx, a.states, "states"));
    const auto model = load_probe(input_path(ctx, a.probe, "probe"), states.meta);
    std::vector<data::HiddenStateRecord> records;
    if (a.split == "test") {
        records = probe::split_probe_records(states.records, kProbeDevFraction, kProbeTestFraction,
                                             ctx.seed)
                      .test;
    } else if (a.split == "all") {
        for (const auto& r : states.records) {
            if (r.is_query_only() && r.label) {
                records.push_back(r);
            }
        }
    } else {
        throw UsageError("--split takes test|all");
    }
    const auto report = probe::evaluate_probe(model, records, ctx.par);
    Json doc = probe_eval_json(report);
    doc["format_version"] = kFormatVersion;
    doc["split"] = a.split;
    emit(ctx, doc, probe_eval_text(report));
}

void run_probe_conf(Context& ctx, const ProbeArgs& a) {
    const auto states = load_states(ctx, input_path(ctx, a.states, "states"));
    const auto model = load_probe(input_path(ctx, a.probe, "probe"), states.meta);
    const auto confs = probe::batch_conf(model, states.records, ctx.par);
    for (std::size_t i = 0; i < confs.size(); ++i) {
        const auto& r = states.records[i];
        Json row = {{"qid", r.qid},
                    {"cid", r.cid ? Json(*r.cid) : Json(nullptr)},
                    {"conf", confs[i]}};
        ctx.out << row.dump() << "\n";
    }
}

// ---- prefs ----------------------------------------------------------------

struct PrefsArgs {
    std::string states, probe, out;
    PrefsSettings flags;
    CLI::Option *k, *eval_fraction;
};

void run_prefs_build(Context& ctx, const PrefsArgs& a) {
    apply(a.k, a.flags.k, ctx.config.prefs.k);
    apply(a.eval_fraction, a.flags.eval_fraction, ctx.config.prefs.eval_fraction);
    ctx.config.validate();
    const auto& cfg = ctx.config.prefs;

    const auto states_path = input_path(ctx, a.states, "states");
    const auto probe_path = input_path(ctx, a.probe, "probe");
    const auto states = load_states(ctx, states_path);
    const auto model = load_probe(probe_path, states.meta);
    const fs::path dir = a.out;
    claim_output_dir(dir, "prefs",
                     {{"k", cfg.k},
                      {"eval_fraction", cfg.eval_fraction},
                      {"seed", ctx.seed},
                      {"states_digest", file_digest(states_path)},
                      {"probe_digest", file_digest(probe_path)}},
                     ctx.force);

    const data::StateIndex index(states);
    const auto tables = prefs::compute_inc_all(model, index, ctx.par);
    const auto built = prefs::build_preferences(tables, cfg.k);
    const auto split = prefs::split_preferences(built.examples, cfg.eval_fraction, ctx.seed);
    data::write_preferences(dir / "prefs.jsonl", built.examples, cfg.k);
    data::write_preferences(dir / "prefs.train.jsonl", split.train, cfg.k);
    data::write_preferences(dir / "prefs.eval.jsonl", split.eval, cfg.k);
    const auto& st = built.stats;
    const Json stats = {{"format_version", kFormatVersion},
                        {"n_in", st.n_in},
                        {"n_kept", st.n_kept},
                        {"n_dropped_no_pos", st.n_dropped_no_pos},
                        {"n_dropped_no_neg", st.n_dropped_no_neg},
                        {"n_train", split.train.size()},
                        {"n_eval", split.eval.size()}};
    write_json(dir / "prefs.stats.json", stats);
    emit(ctx, stats,
         "kept " + std::to_string(st.n_kept) + " of " + std::to_string(st.n_in) +
             " queries (dropped: " + std::to_string(st.n_dropped_no_pos) + " without positive, " +
             std::to_string(st.n_dropped_no_neg) + " without negative)\n" + "split " +
             std::to_string(split.train.size()) + " train / " + std::to_string(split.eval.size()) +
             " eval into " + dir.string() + "\n");
}

// ---- reranker -------------------------------------------------------------

struct RerankerArgs {
    std::string prefs, corpus, reranker, out, qid, cid;
    rerank::RerankerTrainConfig flags;
    CLI::Option *lr, *wd, *epochs, *negatives, *temperature, *init_scale;
};

void run_reranker_train(Context& ctx, const RerankerArgs& a) {
    auto cfg = ctx.config.reranker;
    apply(a.lr, a.flags.learning_rate, cfg.learning_rate);
    apply(a.wd, a.flags.weight_decay, cfg.weight_decay);
    apply(a.epochs, a.flags.epochs, cfg.epochs);
    apply(a.negatives, a.flags.negatives_per_positive, cfg.negatives_per_positive);
    apply(a.temperature, a.flags.temperature, cfg.temperature);
    apply(a.init_scale, a.flags.init_scale, cfg.init_scale);
    cfg.seed = ctx.seed;
    ctx.config.reranker = cfg;
    ctx.config.validate();

    const auto prefs_path = input_path(ctx, a.prefs, "prefs");
    const auto corpus_path = input_path(ctx, a.corpus, "corpus");
    Json settings = reranker_settings(cfg);
    settings["prefs_digest"] = file_digest(prefs_path);
    settings["corpus_digest"] = file_digest(corpus_path);
    const fs::path dir = a.out;
    claim_output_dir(dir, "reranker", settings, ctx.force);

    const auto prefs_file = data::read_preferences(prefs_path);
    const auto corpus = data::read_corpus(corpus_path);
    const auto result = rerank::train_reranker(prefs_file.examples, corpus, cfg);
    numeric::write_checkpoint(dir / "reranker.ckpt.json", rerank::to_checkpoint(result.model));

    const auto& losses = result.log.step_losses;
    const auto window_mean = [&](std::size_t from, std::size_t to) {
        return to > from ? std::accumulate(losses.begin() + static_cast<std::ptrdiff_t>(from),
                                           losses.begin() + static_cast<std::ptrdiff_t>(to), 0.0) /
                               static_cast<double>(to - from)
                         : 0.0;
    };
    const std::size_t window = std::min<std::size_t>(100, losses.size());
    const Json log_doc = {{"format_version", kFormatVersion},
                          {"n_examples", prefs_file.examples.size()},
                          {"n_steps", losses.size()},
                          {"mean_loss", window_mean(0, losses.size())},
                          {"mean_loss_first_100", window_mean(0, window)},
                          {"mean_loss_last_100", window_mean(losses.size() - window, losses.size())}};
    write_json(dir / "reranker.log.json", log_doc);
    emit(ctx, log_doc,
         "trained on " + std::to_string(prefs_file.examples.size()) + " examples, " +
             std::to_string(losses.size()) + " steps; loss " +
             fmt("%.4f", log_doc["mean_loss_first_100"].get<double>()) + " -> " +
             fmt("%.4f", log_doc["mean_loss_last_100"].get<double>()) + "\nwrote " +
             (dir / "reranker.ckpt.json").string() + "\n");
}

void run_reranker_rerank(Context& ctx, const RerankerArgs& a) {
    const auto corpus = data::read_corpus(input_path(ctx, a.corpus, "corpus"));
    const auto model = load_reranker(input_path(ctx, a.reranker, "reranker"), corpus);
    const auto rankings = rerank::rerank_all(model, corpus, ctx.par);
    for (const auto& r : rankings) {
        if (!a.qid.empty() && r.qid != a.qid) {
            continue;
        }
        Json ordered = Json::array();
        for (const auto& [cid, s] : r.ordered) {
            ordered.push_back({{"cid", cid}, {"score", s}});
        }
        ctx.out << Json{{"qid", r.qid}, {"ranking", ordered}}.dump() << "\n";
    }
}

void run_reranker_score(Context& ctx, const RerankerArgs& a) {
    const auto corpus = data::read_corpus(input_path(ctx, a.corpus, "corpus"));
    const auto model = load_reranker(input_path(ctx, a.reranker, "reranker"), corpus);
    const auto& item = corpus.at(a.qid);
    const auto* c = item.find(a.cid);
    if (c == nullptr) {
        throw DataError("qid " + a.qid + " has no context " + a.cid);
    }
    const double s = rerank::score(model, item.query_features.view(), c->context_features.view());
    emit(ctx, {{"qid", a.qid}, {"cid", a.cid}, {"score", s}}, fmt("%.9g", s) + "\n");
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string reranker, prefs, corpus, out, ks;
    bool random_init = false;
};

void run_eval_rerank(Context& ctx, const EvalArgs& a) {
    if (!a.ks.empty()) {
        ctx.config.ks = parse_ks(a.ks);
    }
    const auto prefs_path = input_path(ctx, a.prefs, "prefs");
    const auto corpus_path = input_path(ctx, a.corpus, "corpus");
    const auto corpus = data::read_corpus(corpus_path);
    const auto prefs_file = data::read_preferences(prefs_path);

    rerank::RerankerModel model;
    std::string model_name;
    Json settings = {{"ks", ctx.config.ks},
                     {"prefs_digest", file_digest(prefs_path)},
                     {"corpus_digest", file_digest(corpus_path)}};
    if (a.random_init) {
        auto cfg = ctx.config.reranker;
        cfg.seed = ctx.seed;
        model = rerank::RerankerModel::random_init(corpus.meta().query_dim,
                                                   corpus.meta().context_dim, cfg);
        model_name = "random-init";
        settings["model"] = reranker_settings(cfg);
    } else {
        const auto path = input_path(ctx, a.reranker, "reranker");
        model = load_reranker(path, corpus);
        model_name = path.filename().string();
        settings["reranker_digest"] = file_digest(path);
    }
    const fs::path dir = a.out;
    claim_output_dir(dir, "eval", settings, ctx.force);

    const auto reports =
        eval::evaluate_reranker(model, prefs_file.examples, corpus, ctx.config.ks, ctx.par);
    const Json doc = eval::metric_reports_to_json(reports, prefs_path.filename().string(), model_name);
    write_json(dir / "eval.json", doc);
    emit(ctx, doc, model_name + " on " + prefs_path.filename().string() + " (percent)\n" +
                       metrics_text(reports));
}

// ---- pipeline -------------------------------------------------------------

struct PipelineArgs {
    std::string probe, reranker, states, corpus, out, gating, penalty, betas = "0.5:0.99:0.01";
    double beta = 0.95;
    std::size_t top_k = 3;
    CLI::Option *beta_opt, *top_k_opt, *gating_opt, *penalty_opt;
};

struct PipelineInputs {
    data::HiddenStates states;
    data::Corpus corpus;
    probe::ProbeModel probe;
    rerank::RerankerModel reranker;
    Json digests;
};

PipelineInputs load_pipeline_inputs(Context& ctx, const PipelineArgs& a) {
    if (a.penalty_opt->count() > 0) {
        ctx.config.generator.misleading_penalty = parse_on_off(a.penalty, "--misleading-penalty");
    }
    ctx.config.generator.seed = ctx.seed;
    const auto states_path = input_path(ctx, a.states, "states");
    const auto corpus_path = input_path(ctx, a.corpus, "corpus");
    const auto probe_path = input_path(ctx, a.probe, "probe");
    const auto reranker_path = input_path(ctx, a.reranker, "reranker");
    PipelineInputs in;
    in.states = load_states(ctx, states_path);
    in.corpus = data::read_corpus(corpus_path);
    in.probe = load_probe(probe_path, in.states.meta);
    in.reranker = load_reranker(reranker_path, in.corpus);
    in.digests = {{"states_digest", file_digest(states_path)},
                  {"corpus_digest", file_digest(corpus_path)},
                  {"probe_digest", file_digest(probe_path)},
                  {"reranker_digest", file_digest(reranker_path)},
                  {"generator", ctx.config.generator.mode},
                  {"misleading_penalty", ctx.config.generator.misleading_penalty},
                  {"seed", ctx.seed}};
    return in;
}

void run_pipeline_run(Context& ctx, const PipelineArgs& a) {
    auto& gate = ctx.config.gate;
    apply(a.beta_opt, a.beta, gate.beta);
    apply(a.top_k_opt, a.top_k, gate.top_k);
    if (a.gating_opt->count() > 0) {
        gate.gating_enabled = parse_on_off(a.gating, "--gating");
    }
    ctx.config.validate();
    const auto in = load_pipeline_inputs(ctx, a);
    Json settings = in.digests;
    settings["beta"] = gate.beta;
    settings["top_k"] = gate.top_k;
    settings["gating"] = gate.gating_enabled;
    const fs::path dir = a.out;
    claim_output_dir(dir, "pipeline", settings, ctx.force);

    const data::StateIndex index(in.states);
    const auto report = pipeline::run_pipeline(in.probe, in.reranker, in.corpus, index, gate,
                                               ctx.config.generator, ctx.par);
    write_json(dir / "pipeline.json", pipeline::pipeline_report_json(report, true));
    emit(ctx, pipeline::pipeline_report_json(report, false),
         "beta " + fmt("%.4g", gate.beta) + (gate.gating_enabled ? "" : " (gating off)") +
             "  top-" + std::to_string(gate.top_k) + "  accuracy " +
             fmt("%.2f", 100.0 * report.accuracy) + "  RR " + fmt("%.2f", report.retrieval_rate) +
             "\n");
}

void run_pipeline_sweep(Context& ctx, const PipelineArgs& a) {
    const auto betas = pipeline::parse_beta_grid(a.betas);
    const auto in = load_pipeline_inputs(ctx, a);
    Json settings = in.digests;
    settings["betas"] = betas;
    const fs::path dir = a.out;
    claim_output_dir(dir, "sweep", settings, ctx.force);

    const data::StateIndex index(in.states);
    const auto& gen = ctx.config.generator;
    std::vector<pipeline::PipelineReport> top1;
    std::vector<pipeline::PipelineReport> top3;
    for (const std::size_t k : {std::size_t{1}, std::size_t{3}}) {
        // The retrieve-always row leads, as in the reference results table.
        const auto prepared = pipeline::prepare_queries(in.probe, in.reranker, in.corpus, index, k,
                                                        gen, ctx.par);
        auto& dest = k == 1 ? top1 : top3;
        dest.push_back(pipeline::assemble_report(prepared, {0.0, false, k}));
        for (const double b : betas) {
            dest.push_back(pipeline::assemble_report(prepared, {b, true, k}));
        }
    }
    const std::span<const pipeline::PipelineReport> gated(top1.begin() + 1, top1.end());
    const bool monotone = pipeline::retrieval_rate_monotone(gated);
    const Json rows = pipeline::sweep_table_json(top1, top3);
    const Json doc = {{"format_version", kFormatVersion},
                      {"n_queries", in.corpus.size()},
                      {"rr_monotone", monotone},
                      {"rows", rows}};
    write_json(dir / "sweep.json", doc);

    std::string text = "      beta      RR   top1_acc   top3_acc\n";
    for (const auto& row : rows) {
        char buf[128];
        if (row["gating"].get<bool>()) {
            std::snprintf(buf, sizeof buf, "%10.4g  %6.2f  %9.2f  %9.2f\n",
                          row["beta"].get<double>(), row["rr"].get<double>(),
                          100.0 * row["top1_acc"].get<double>(),
                          100.0 * row["top3_acc"].get<double>());
        } else {
            std::snprintf(buf, sizeof buf, "%10s  %6.2f  %9.2f  %9.2f\n", "off",
                          row["rr"].get<double>(), 100.0 * row["top1_acc"].get<double>(),
                          100.0 * row["top3_acc"].get<double>());
        }
        text += buf;
    }
    text += monotone ? "RR monotone in beta\n" : "RR MONOTONICITY VIOLATED\n";
    emit(ctx, doc, text);
}

// ---- report ---------------------------------------------------------------

void run_report(Context& ctx, const std::vector<std::string>& dirs) {
    std::vector<fs::path> paths(dirs.begin(), dirs.end());
    const auto report = build_run_report(paths);
    emit(ctx, report.to_json(), report.render());
}

void error_record(std::ostream& err, int code, const char* kind, const std::string& message) {
    const Json rec = {{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", message}};
    err << rec.dump() << "\n";
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Confidence-gated retrieval toolkit: probes, preference data, reranking, "
                 "dynamic retrieval.",
                 "confgate"};
    app.fallthrough();
    app.require_subcommand(1);

    Globals g;
    app.add_option("--config", g.config_path, "JSON run config");
    app.add_flag("--json", g.json, "Print structured JSON to stdout");
    app.add_option("--threads", g.threads, "Threads for per-query work (0 = all cores)")
        ->check(CLI::NonNegativeNumber);
    g.seed_opt = app.add_option("--seed", g.seed, "Run seed (overrides CONF_GATE_SEED and config)");
    app.add_flag("--force", g.force, "Overwrite an output dir produced under another config");

    std::function<void(Context&)> action;
    const auto bind = [&](CLI::App* sub, std::function<void(Context&)> fn) {
        sub->callback([&action, fn] { action = fn; });
    };

    // synth
    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic world (states + corpus)");
    synth->add_option("--out", sa.out, "Output directory")->required();
    sa.n_queries = synth->add_option("--n-queries", sa.flags.n_queries);
    sa.contexts = synth->add_option("--contexts", sa.flags.n_contexts_per_query);
    sa.dim = synth->add_option("--dim", sa.flags.dim);
    sa.feature_dim = synth->add_option("--feature-dim", sa.flags.feature_dim);
    sa.helpful = synth->add_option("--helpful", sa.flags.helpful_fraction);
    sa.known = synth->add_option("--known", sa.flags.known_fraction);
    sa.sigma = synth->add_option("--sigma", sa.flags.noise_sigma);
    sa.margin = synth->add_option("--margin", sa.flags.feature_margin);
    sa.model_id = synth->add_option("--model-id", sa.flags.model_id);
    bind(synth, [&sa](Context& c) { run_synth(c, sa); });

    // probe
    ProbeArgs pa;
    auto* probe_cmd = app.add_subcommand("probe", "Train, evaluate or apply a confidence probe");
    probe_cmd->require_subcommand(1);
    auto* ptrain = probe_cmd->add_subcommand("train", "Train a probe on query-only states");
    ptrain->add_option("--states", pa.states, "Hidden-state file (.hsr.jsonl)");
    ptrain->add_option("--out", pa.out, "Output directory")->required();
    pa.lr = ptrain->add_option("--lr", pa.flags.learning_rate);
    pa.epochs = ptrain->add_option("--epochs", pa.flags.epochs);
    pa.dropout = ptrain->add_option("--dropout", pa.flags.dropout);
    pa.batch = ptrain->add_option("--batch-size", pa.flags.batch_size);
    pa.hidden = ptrain->add_option("--hidden-width", pa.flags.hidden_width);
    pa.patience = ptrain->add_option("--patience", pa.flags.patience);
    pa.act = ptrain->add_option("--activation", pa.activation, "relu|linear");
    bind(ptrain, [&pa](Context& c) { run_probe_train(c, pa); });
    auto* peval = probe_cmd->add_subcommand("eval", "Held-out accuracy of a probe");
    peval->add_option("--states", pa.states);
    peval->add_option("--probe", pa.probe, "Probe checkpoint");
    peval->add_option("--split", pa.split, "test|all")->capture_default_str();
    bind(peval, [&pa](Context& c) { run_probe_eval(c, pa); });
    auto* pconf = probe_cmd->add_subcommand("conf", "Print Conf for every record as JSON lines");
    pconf->add_option("--states", pa.states);
    pconf->add_option("--probe", pa.probe, "Probe checkpoint");
    bind(pconf, [&pa](Context& c) { run_probe_conf(c, pa); });

    // prefs
    PrefsArgs fa;
    auto* prefs_cmd = app.add_subcommand("prefs", "Preference datasets from confidence shifts");
    prefs_cmd->require_subcommand(1);
    auto* pbuild = prefs_cmd->add_subcommand("build", "Build and split a preference dataset");
    pbuild->add_option("--states", fa.states);
    pbuild->add_option("--probe", fa.probe, "Probe checkpoint");
    pbuild->add_option("--out", fa.out, "Output directory")->required();
    fa.k = pbuild->add_option("--k", fa.flags.k, "Max positives and negatives per query");
    fa.eval_fraction = pbuild->add_option("--eval-fraction", fa.flags.eval_fraction);
    bind(pbuild, [&fa](Context& c) { run_prefs_build(c, fa); });

    // reranker
    RerankerArgs ra;
    auto* rr_cmd = app.add_subcommand("reranker", "Train or apply the bilinear reranker");
    rr_cmd->require_subcommand(1);
    auto* rtrain = rr_cmd->add_subcommand("train", "Train with InfoNCE on a preference file");
    rtrain->add_option("--prefs", ra.prefs, "Training preferences (.jsonl)");
    rtrain->add_option("--corpus", ra.corpus);
    rtrain->add_option("--out", ra.out, "Output directory")->required();
    ra.lr = rtrain->add_option("--lr", ra.flags.learning_rate);
    ra.wd = rtrain->add_option("--weight-decay", ra.flags.weight_decay);
    ra.epochs = rtrain->add_option("--epochs", ra.flags.epochs);
    ra.negatives = rtrain->add_option("--negatives", ra.flags.negatives_per_positive);
    ra.temperature = rtrain->add_option("--temperature", ra.flags.temperature);
    ra.init_scale = rtrain->add_option("--init-scale", ra.flags.init_scale);
    bind(rtrain, [&ra](Context& c) { run_reranker_train(c, ra); });
    auto* rrank = rr_cmd->add_subcommand("rerank", "Rank every query's contexts (JSON lines)");
    rrank->add_option("--reranker", ra.reranker, "Reranker checkpoint");
    rrank->add_option("--corpus", ra.corpus);
    rrank->add_option("--qid", ra.qid, "Only this query");
    bind(rrank, [&ra](Context& c) { run_reranker_rerank(c, ra); });
    auto* rscore = rr_cmd->add_subcommand("score", "Score one (query, context) pair");
    rscore->add_option("--reranker", ra.reranker, "Reranker checkpoint");
    rscore->add_option("--corpus", ra.corpus);
    rscore->add_option("--qid", ra.qid)->required();
    rscore->add_option("--cid", ra.cid)->required();
    bind(rscore, [&ra](Context& c) { run_reranker_score(c, ra); });

    // eval
    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Ranking metrics");
    eval_cmd->require_subcommand(1);
    auto* erank = eval_cmd->add_subcommand("rerank", "P@k, R@k and MRR@k on a preference file");
    auto* ckpt = erank->add_option("--reranker", ea.reranker, "Reranker checkpoint");
    erank->add_flag("--random-init", ea.random_init, "Evaluate an untrained random-init reranker")
        ->excludes(ckpt);
    erank->add_option("--prefs", ea.prefs, "Evaluation preferences (.jsonl)");
    erank->add_option("--corpus", ea.corpus);
    erank->add_option("--ks", ea.ks, "Cutoffs, e.g. 1,3,5");
    erank->add_option("--out", ea.out, "Output directory")->required();
    bind(erank, [&ea](Context& c) { run_eval_rerank(c, ea); });

    // pipeline
    PipelineArgs la;
    auto* pipe_cmd = app.add_subcommand("pipeline", "Confidence-gated dynamic retrieval");
    pipe_cmd->require_subcommand(1);
    auto* prun = pipe_cmd->add_subcommand("run", "One gated run");
    auto* psweep = pipe_cmd->add_subcommand("sweep", "Sweep beta at top-1 and top-3");
    for (auto* sub : {prun, psweep}) {
        sub->add_option("--probe", la.probe, "Probe checkpoint");
        sub->add_option("--reranker", la.reranker, "Reranker checkpoint");
        sub->add_option("--states", la.states);
        sub->add_option("--corpus", la.corpus);
        sub->add_option("--out", la.out, "Output directory")->required();
        la.penalty_opt = sub->add_option("--misleading-penalty", la.penalty, "on|off");
    }
    la.beta_opt = prun->add_option("--beta", la.beta, "Skip retrieval when Conf > beta");
    la.top_k_opt = prun->add_option("--top-k", la.top_k);
    la.gating_opt = prun->add_option("--gating", la.gating, "on|off");
    psweep->add_option("--betas", la.betas, "lo:hi:step or a,b,c")->capture_default_str();
    // Each subcommand owns its own --misleading-penalty option object.
    prun->callback([&] {
        la.penalty_opt = prun->get_option("--misleading-penalty");
        action = [&la](Context& c) { run_pipeline_run(c, la); };
    });
    psweep->callback([&] {
        la.penalty_opt = psweep->get_option("--misleading-penalty");
        action = [&la](Context& c) { run_pipeline_sweep(c, la); };
    });

    // report
    std::vector<std::string> report_dirs;
    auto* report = app.add_subcommand("report", "Compare run directories side by side");
    report->add_option("dirs", report_dirs, "Run directories")->required();
    bind(report, [&report_dirs](Context& c) { run_report(c, report_dirs); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << app.help();
        error_record(err, kExitUsage, "usage", e.what());
        return kExitUsage;
    } catch (const UsageError& e) {
        err << app.help();
        error_record(err, kExitUsage, "usage", e.what());
        return kExitUsage;
    } catch (const DataError& e) {
        error_record(err, kExitData, "data", e.what());
        return kExitData;
    }

    try {
        Context ctx{{}, kDefaultSeed, {}, g.json, g.force, out, err};
        if (!g.config_path.empty()) {
            if (!fs::exists(g.config_path)) {
                throw DataError("--config file not found: " + g.config_path);
            }
            ctx.config = load_run_config(g.config_path);
        }
        ctx.seed = resolve_seed(g.seed_opt->count() > 0 ? std::optional(g.seed) : std::nullopt,
                                ctx.config);
        ctx.par = g.threads == 0 ? Parallelism::hardware() : Parallelism{g.threads};
        if (!action) {
            throw UsageError("no subcommand given");
        }
        action(ctx);
        return kExitOk;
    } catch (const UsageError& e) {
        error_record(err, kExitUsage, "usage", e.what());
        return kExitUsage;
    } catch (const DataError& e) {
        error_record(err, kExitData, "data", e.what());
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        error_record(err, kExitData, "data", e.what());
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        error_record(err, kExitData, "data", e.what());
        return kExitData;
    } catch (const InvariantError& e) {
        error_record(err, kExitInternal, "internal", e.what());
        return kExitInternal;
    } catch (const std::exception& e) {
        error_record(err, kExitInternal, "internal", e.what());
        return kExitInternal;
    }
}

} // namespace confgate::cli
