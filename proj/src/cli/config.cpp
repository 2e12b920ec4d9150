#include "confgate/cli/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "confgate/errors.hpp"
#include "confgate/numeric/rng.hpp"

namespace confgate::cli {

namespace {

void reject_unknown(const Json& obj, const std::string& where, std::set<std::string> allowed) {
    if (!obj.is_object()) {
        throw DataError("config: '" + where + "' must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (allowed.count(key) == 0) {
            throw DataError("config: unknown key '" + where + "." + key + "'");
        }
    }
}

template <typename T>
void read_into(const Json& obj, const char* key, T& target) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        target = obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw DataError(std::string("config: key '") + key + "' has the wrong type");
    }
}

std::uint64_t parse_seed_text(const std::string& text, const char* origin) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &pos, 10);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (text.empty() || pos != text.size() || text.front() == '-') {
        throw UsageError(std::string(origin) + " must be a non-negative integer, got '" + text + "'");
    }
    return v;
}

} // namespace

void RunConfig::validate() const {
    const auto need = [](bool ok, const char* what) {
        if (!ok) {
            throw DataError(std::string("config: ") + what);
        }
    };
    need(synth.n_queries >= 2, "synth.n_queries must be at least 2");
    need(synth.n_contexts_per_query >= 1, "synth.n_contexts_per_query must be positive");
    need(synth.dim >= 8, "synth.dim must be at least 8");
    need(synth.feature_dim >= 1, "synth.feature_dim must be positive");
    need(synth.helpful_fraction >= 0.0 && synth.helpful_fraction <= 1.0,
         "synth.helpful_fraction must lie in [0, 1]");
    need(synth.known_fraction >= 0.0 && synth.known_fraction <= 1.0,
         "synth.known_fraction must lie in [0, 1]");
    need(synth.noise_sigma > 0.0, "synth.noise_sigma must be positive");
    need(synth.feature_margin > 0.0, "synth.feature_margin must be positive");

    need(probe.learning_rate > 0.0, "probe.learning_rate must be positive");
    need(probe.epochs >= 1, "probe.epochs must be at least 1");
    need(probe.dropout >= 0.0 && probe.dropout < 1.0, "probe.dropout must lie in [0, 1)");
    need(probe.batch_size >= 1, "probe.batch_size must be positive");
    need(probe.patience >= 1, "probe.patience must be at least 1");

    need(prefs.k >= 1, "prefs.k must be at least 1");
    need(prefs.eval_fraction > 0.0 && prefs.eval_fraction < 1.0,
         "prefs.eval_fraction must lie in (0, 1)");

    need(reranker.learning_rate > 0.0, "reranker.learning_rate must be positive");
    need(reranker.weight_decay >= 0.0, "reranker.weight_decay must be non-negative");
    need(reranker.epochs >= 1, "reranker.epochs must be at least 1");
    need(reranker.negatives_per_positive >= 1, "reranker.negatives_per_positive must be positive");
    need(reranker.temperature > 0.0, "reranker.temperature must be positive");
    need(reranker.init_scale >= 0.0, "reranker.init_scale must be non-negative");

    gate.validate();
    need(!ks.empty(), "ks must not be empty");
    for (const auto k : ks) {
        need(k >= 1, "every k must be positive");
    }
}

RunConfig parse_run_config(const Json& doc) {
    reject_unknown(doc, "config", {"seed", "paths", "synth", "probe", "prefs", "reranker", "gate",
                                   "generator", "ks"});
    RunConfig c;
    if (doc.contains("seed")) {
        const auto& s = doc.at("seed");
        if (!s.is_number_unsigned()) {
            throw DataError("config: seed must be a non-negative integer");
        }
        c.seed = s.get<std::uint64_t>();
    }
    if (doc.contains("paths")) {
        const auto& p = doc.at("paths");
        reject_unknown(p, "paths", {"states", "corpus", "probe", "reranker", "prefs"});
        for (const auto& [role, value] : p.items()) {
            if (!value.is_string()) {
                throw DataError("config: paths." + role + " must be a string");
            }
            c.paths[role] = value.get<std::string>();
        }
    }
    if (doc.contains("synth")) {
        const auto& s = doc.at("synth");
        reject_unknown(s, "synth", {"n_queries", "n_contexts_per_query", "dim", "feature_dim",
                                    "helpful_fraction", "known_fraction", "noise_sigma",
                                    "feature_margin", "model_id"});
        read_into(s, "n_queries", c.synth.n_queries);
        read_into(s, "n_contexts_per_query", c.synth.n_contexts_per_query);
        read_into(s, "dim", c.synth.dim);
        read_into(s, "feature_dim", c.synth.feature_dim);
        read_into(s, "helpful_fraction", c.synth.helpful_fraction);
        read_into(s, "known_fraction", c.synth.known_fraction);
        read_into(s, "noise_sigma", c.synth.noise_sigma);
        read_into(s, "feature_margin", c.synth.feature_margin);
        read_into(s, "model_id", c.synth.model_id);
    }
    if (doc.contains("probe")) {
        const auto& p = doc.at("probe");
        reject_unknown(p, "probe", {"learning_rate", "epochs", "dropout", "batch_size",
                                    "hidden_width", "patience", "activation"});
        read_into(p, "learning_rate", c.probe.learning_rate);
        read_into(p, "epochs", c.probe.epochs);
        read_into(p, "dropout", c.probe.dropout);
        read_into(p, "batch_size", c.probe.batch_size);
        read_into(p, "hidden_width", c.probe.hidden_width);
        read_into(p, "patience", c.probe.patience);
        if (p.contains("activation")) {
            std::string name;
            read_into(p, "activation", name);
            c.probe.activation = numeric::activation_from_string(name);
        }
    }
    if (doc.contains("prefs")) {
        const auto& p = doc.at("prefs");
        reject_unknown(p, "prefs", {"k", "eval_fraction"});
        read_into(p, "k", c.prefs.k);
        read_into(p, "eval_fraction", c.prefs.eval_fraction);
    }
    if (doc.contains("reranker")) {
        const auto& r = doc.at("reranker");
        reject_unknown(r, "reranker", {"learning_rate", "weight_decay", "epochs",
                                       "negatives_per_positive", "temperature", "init_scale"});
        read_into(r, "learning_rate", c.reranker.learning_rate);
        read_into(r, "weight_decay", c.reranker.weight_decay);
        read_into(r, "epochs", c.reranker.epochs);
        read_into(r, "negatives_per_positive", c.reranker.negatives_per_positive);
        read_into(r, "temperature", c.reranker.temperature);
        read_into(r, "init_scale", c.reranker.init_scale);
    }
    if (doc.contains("gate")) {
        const auto& g = doc.at("gate");
        reject_unknown(g, "gate", {"beta", "top_k", "gating"});
        read_into(g, "beta", c.gate.beta);
        read_into(g, "top_k", c.gate.top_k);
        read_into(g, "gating", c.gate.gating_enabled);
    }
    if (doc.contains("generator")) {
        const auto& g = doc.at("generator");
        reject_unknown(g, "generator", {"mode", "misleading_penalty"});
        read_into(g, "mode", c.generator.mode);
        read_into(g, "misleading_penalty", c.generator.misleading_penalty);
    }
    read_into(doc, "ks", c.ks);
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return parse_run_config(doc);
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const RunConfig& config) {
    if (flag) {
        return *flag;
    }
    if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
        return parse_seed_text(env, kSeedEnv);
    }
    return config.seed.value_or(kDefaultSeed);
}

std::vector<std::size_t> parse_ks(const std::string& text) {
    std::vector<std::size_t> ks;
    std::stringstream ss(text);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        const auto v = parse_seed_text(piece, "--ks entry");
        if (v == 0) {
            throw UsageError("--ks entries must be positive");
        }
        ks.push_back(static_cast<std::size_t>(v));
    }
    if (ks.empty() || std::set<std::size_t>(ks.begin(), ks.end()).size() != ks.size()) {
        throw UsageError("--ks needs distinct positive integers, e.g. 1,3,5");
    }
    return ks;
}

std::string text_digest(std::string_view text) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(numeric::stable_hash(text, 0)));
    return buf;
}

std::string file_digest(const std::filesystem::path& path) {
    return text_digest(read_text(path));
}

void claim_output_dir(const std::filesystem::path& dir, const std::string& step,
                      const Json& settings, bool force) {
    const std::string digest = text_digest(step + "\n" + settings.dump());
    const auto manifest = dir / ("manifest." + step + ".json");
    if (std::filesystem::exists(manifest) && !force) {
        Json previous;
        try {
            previous = Json::parse(read_text(manifest));
        } catch (const Json::parse_error&) {
            throw DataError(manifest.string() + " is not valid JSON; use --force to overwrite");
        }
        if (previous.value("config_digest", std::string()) != digest) {
            throw DataError(dir.string() + " holds " + step +
                            " outputs from a different config; choose another --out or pass "
                            "--force");
        }
    }
    Json doc = Json::object();
    doc["format_version"] = kFormatVersion;
    doc["step"] = step;
    doc["config_digest"] = digest;
    doc["config"] = settings;
    write_text_atomic(manifest, doc.dump(2) + "\n");
}

} // namespace confgate::cli
