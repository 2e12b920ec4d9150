#pragma once

// In-process driver for the command line, shared by the CLI tests and the
// acceptance binary.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "confgate/cli/cli.hpp"

namespace testutil {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;

    // Last non-empty line written to err.
    std::string last_err_line() const {
        std::istringstream in(err);
        std::string line;
        std::string last;
        while (std::getline(in, line)) {
            if (!line.empty()) {
                last = line;
            }
        }
        return last;
    }
};

inline CliResult run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"confgate"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    CliResult r;
    r.code = confgate::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// The full chain from synthetic world to sweep, every artifact in `dir`.
// Returns the first failing step, or an ok result with the sweep output.
inline CliResult run_quickstart(const std::filesystem::path& dir, const std::string& seed,
                                const std::string& n_queries = "2000") {
    const std::string d = dir.string();
    const std::string states = (dir / "world.hsr.jsonl").string();
    const std::string corpus = (dir / "world.corpus.jsonl").string();
    const std::string probe = (dir / "probe.ckpt.json").string();
    const std::string reranker = (dir / "reranker.ckpt.json").string();
    const std::vector<std::vector<std::string>> steps{
        {"--seed", seed, "synth", "--out", d, "--n-queries", n_queries},
        {"--seed", seed, "probe", "train", "--states", states, "--out", d},
        {"--seed", seed, "prefs", "build", "--states", states, "--probe", probe, "--out", d},
        {"--seed", seed, "reranker", "train", "--prefs", (dir / "prefs.train.jsonl").string(),
         "--corpus", corpus, "--out", d},
        {"--seed", seed, "eval", "rerank", "--reranker", reranker, "--prefs",
         (dir / "prefs.eval.jsonl").string(), "--corpus", corpus, "--out", d},
        {"--seed", seed, "pipeline", "run", "--probe", probe, "--reranker", reranker, "--states",
         states, "--corpus", corpus, "--out", d},
        {"--seed", seed, "pipeline", "sweep", "--probe", probe, "--reranker", reranker,
         "--states", states, "--corpus", corpus, "--out", d},
    };
    CliResult last;
    for (const auto& step : steps) {
        last = run_cli(step);
        if (last.code != 0) {
            return last;
        }
    }
    return last;
}

} // namespace testutil
