#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "confgate/data/synthetic.hpp"
#include "confgate/json_io.hpp"
#include "confgate/pipeline/pipeline.hpp"
#include "confgate/probe/probe.hpp"
#include "confgate/rerank/reranker.hpp"

namespace confgate::cli {

inline constexpr std::uint64_t kDefaultSeed = 7;
inline constexpr const char* kSeedEnv = "CONF_GATE_SEED";

struct PrefsSettings {
    std::size_t k = 5;
    double eval_fraction = 0.14;
};

/// One JSON file configuring every subcommand:
/// {"seed":7, "paths":{"states":..,"corpus":..,"probe":..,"reranker":..,"prefs":..},
///  "synth":{..}, "probe":{..}, "prefs":{..}, "reranker":{..},
///  "gate":{"beta":..,"top_k":..,"gating":true}, "generator":{..}, "ks":[1,3,5]}
/// Every key is optional. Unknown keys are rejected.
struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::map<std::string, std::string> paths;
    data::SyntheticConfig synth;
    probe::ProbeTrainConfig probe;
    PrefsSettings prefs;
    rerank::RerankerTrainConfig reranker;
    pipeline::GateConfig gate;
    pipeline::SimulatedGenerator generator;
    std::vector<std::size_t> ks = {1, 3, 5};

    // Throws DataError when a hyperparameter is outside its documented range.
    void validate() const;
};

RunConfig parse_run_config(const Json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

// flag, then CONF_GATE_SEED, then the config file, then kDefaultSeed.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const RunConfig& config);

// "1,3,5" -> {1,3,5}; entries must be positive and distinct.
std::vector<std::size_t> parse_ks(const std::string& text);

// Hex digest of a file's bytes, used to address outputs by their inputs.
std::string file_digest(const std::filesystem::path& path);
std::string text_digest(std::string_view text);

/// Refuses to overwrite a directory produced under a different config.
/// Writes "<dir>/manifest.<step>.json" holding the config and its digest. A
/// mismatching manifest throws DataError unless force is set.
void claim_output_dir(const std::filesystem::path& dir, const std::string& step,
                      const Json& settings, bool force);

} // namespace confgate::cli
