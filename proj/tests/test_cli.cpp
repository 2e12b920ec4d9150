#include <doctest.h>

#include <cstdlib>

#include "cli_driver.hpp"
#include "confgate/json_io.hpp"
#include "test_util.hpp"

using confgate::Json;
using testutil::CliResult;
using testutil::run_cli;
using testutil::slurp;
using testutil::spit;
using testutil::TempDir;

namespace {

Json error_record(const CliResult& r) {
    return Json::parse(r.last_err_line());
}

// Restores CONF_GATE_SEED when the test ends.
struct SeedEnvGuard {
    std::optional<std::string> saved;
    SeedEnvGuard() {
        if (const char* v = std::getenv("CONF_GATE_SEED")) {
            saved = v;
        }
    }
    ~SeedEnvGuard() {
        if (saved) {
            ::setenv("CONF_GATE_SEED", saved->c_str(), 1);
        } else {
            ::unsetenv("CONF_GATE_SEED");
        }
    }
};

CliResult synth(const std::filesystem::path& dir, std::vector<std::string> pre = {}) {
    pre.insert(pre.end(), {"synth", "--out", dir.string(), "--n-queries", "120"});
    return run_cli(pre);
}

} // namespace

TEST_CASE("synth is byte-identical across runs") {
    TempDir tmp;
    REQUIRE(synth(tmp / "a").code == 0);
    REQUIRE(synth(tmp / "b").code == 0);
    CHECK(slurp(tmp / "a/world.hsr.jsonl") == slurp(tmp / "b/world.hsr.jsonl"));
    CHECK(slurp(tmp / "a/world.corpus.jsonl") == slurp(tmp / "b/world.corpus.jsonl"));
    REQUIRE(synth(tmp / "c", {"--seed", "8"}).code == 0);
    CHECK(slurp(tmp / "a/world.hsr.jsonl") != slurp(tmp / "c/world.hsr.jsonl"));
}

TEST_CASE("usage errors exit 1 with a JSON record last") {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"synth", "--out", "x", "--no-such-flag"},
             {},
             {"probe", "train"},
             {"pipeline", "sweep", "--out", "x", "--betas", "0.9,0.1"},
         }) {
        const auto r = run_cli(args);
        CHECK(r.code == 1);
        const auto rec = error_record(r);
        CHECK(rec.at("status") == "error");
        CHECK(rec.at("exit_code") == 1);
        CHECK(rec.at("kind") == "usage");
    }
}

TEST_CASE("missing or malformed input exits 2") {
    TempDir tmp;
    auto r = run_cli({"probe", "train", "--states", (tmp / "missing.jsonl").string(), "--out",
                      (tmp / "o").string()});
    CHECK(r.code == 2);
    CHECK(error_record(r).at("kind") == "data");

    spit(tmp / "bad.jsonl", "not json\n");
    r = run_cli({"probe", "train", "--states", (tmp / "bad.jsonl").string(), "--out",
                 (tmp / "o").string()});
    CHECK(r.code == 2);
    CHECK(error_record(r).at("message").get<std::string>().find("bad.jsonl") != std::string::npos);
}

TEST_CASE("an output dir remembers its config") {
    TempDir tmp;
    REQUIRE(synth(tmp / "w").code == 0);
    // Same settings again is fine.
    CHECK(synth(tmp / "w").code == 0);
    const auto clash = synth(tmp / "w", {"--seed", "99"});
    CHECK(clash.code == 2);
    CHECK(error_record(clash).at("message").get<std::string>().find("--force") !=
          std::string::npos);
    CHECK(synth(tmp / "w", {"--seed", "99", "--force"}).code == 0);
    const auto manifest = Json::parse(slurp(tmp / "w/manifest.synth.json"));
    CHECK(manifest.at("config").at("seed") == 99);
}

TEST_CASE("seed precedence: flag over environment over default") {
    SeedEnvGuard guard;
    TempDir tmp;
    ::unsetenv("CONF_GATE_SEED");
    REQUIRE(synth(tmp / "default").code == 0);
    REQUIRE(synth(tmp / "flag11", {"--seed", "11"}).code == 0);
    ::setenv("CONF_GATE_SEED", "11", 1);
    REQUIRE(synth(tmp / "env11").code == 0);
    REQUIRE(synth(tmp / "flag7", {"--seed", "7"}).code == 0);
    CHECK(slurp(tmp / "env11/world.hsr.jsonl") == slurp(tmp / "flag11/world.hsr.jsonl"));
    CHECK(slurp(tmp / "flag7/world.hsr.jsonl") == slurp(tmp / "default/world.hsr.jsonl"));
    CHECK(slurp(tmp / "env11/world.hsr.jsonl") != slurp(tmp / "default/world.hsr.jsonl"));

    ::setenv("CONF_GATE_SEED", "not-a-number", 1);
    CHECK(synth(tmp / "badenv").code == 1);
}

TEST_CASE("config file supplies paths and rejects unknown keys") {
    TempDir tmp;
    REQUIRE(synth(tmp / "w").code == 0);
    spit(tmp / "run.json", Json({{"paths", {{"states", (tmp / "w/world.hsr.jsonl").string()}}},
                                 {"probe", {{"epochs", 2}}}})
                               .dump());
    const auto r = run_cli({"--config", (tmp / "run.json").string(), "probe", "train", "--out",
                            (tmp / "p").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("epoch 2 ") != std::string::npos);
    CHECK(r.out.find("epoch 3 ") == std::string::npos);

    spit(tmp / "typo.json", R"({"probes":{}})");
    const auto bad = run_cli({"--config", (tmp / "typo.json").string(), "synth", "--out",
                              (tmp / "t").string()});
    CHECK(bad.code == 2);
    CHECK(error_record(bad).at("message").get<std::string>().find("probes") != std::string::npos);
}

TEST_CASE("quickstart chain and report") {
    TempDir tmp;
    const auto r = testutil::run_quickstart(tmp / "run", "7", "400");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    for (const char* f : {"world.hsr.jsonl", "world.corpus.jsonl", "probe.ckpt.json",
                          "prefs.jsonl", "prefs.train.jsonl", "prefs.eval.jsonl",
                          "prefs.stats.json", "reranker.ckpt.json", "eval.json", "pipeline.json",
                          "sweep.json"}) {
        CHECK_MESSAGE(std::filesystem::exists(tmp / ("run/" + std::string(f))), f);
    }
    const auto sweep = Json::parse(slurp(tmp / "run/sweep.json"));
    CHECK(sweep.at("rows").size() == 51);
    CHECK(sweep.at("rows")[0].at("gating") == false);
    CHECK(sweep.at("rr_monotone") == true);

    const auto single = run_cli({"report", (tmp / "run").string()});
    REQUIRE(single.code == 0);
    CHECK(single.out.find("P@1") != std::string::npos);
    CHECK(single.out.find("RR monotone in beta") != std::string::npos);

    // A second run with a random-init reranker gets marked as worse.
    const auto d = (tmp / "rand").string();
    REQUIRE(run_cli({"eval", "rerank", "--random-init", "--prefs",
                     (tmp / "run/prefs.eval.jsonl").string(), "--corpus",
                     (tmp / "run/world.corpus.jsonl").string(), "--out", d})
                .code == 0);
    const auto two = run_cli({"--json", "report", (tmp / "run").string(), d});
    REQUIRE(two.code == 0);
    const auto doc = Json::parse(two.out);
    const auto& rows = doc.at("tables")[0].at("rows");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].at("run") == "run");
    const auto& best = rows[0].at("best");
    CHECK(std::find(best.begin(), best.end(), Json("P@1")) != best.end());

    CHECK(run_cli({"report", (tmp / "nowhere").string()}).code == 2);
}

TEST_CASE("report flags a non-monotone sweep without failing") {
    TempDir tmp;
    std::filesystem::create_directories(tmp / "s");
    Json rows = Json::array();
    rows.push_back({{"beta", 0.0}, {"gating", false}, {"rr", 100.0}, {"top1_acc", 0.5}, {"top3_acc", 0.6}});
    rows.push_back({{"beta", 0.5}, {"gating", true}, {"rr", 40.0}, {"top1_acc", 0.5}, {"top3_acc", 0.6}});
    rows.push_back({{"beta", 0.6}, {"gating", true}, {"rr", 30.0}, {"top1_acc", 0.5}, {"top3_acc", 0.6}});
    spit(tmp / "s/sweep.json", Json({{"format_version", 1}, {"rows", rows}}).dump());
    const auto r = run_cli({"report", (tmp / "s").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("RR MONOTONICITY VIOLATED at beta = 0.6") != std::string::npos);
}

TEST_CASE("a probe trained on other states is refused") {
    TempDir tmp;
    REQUIRE(synth(tmp / "a").code == 0);
    REQUIRE(run_cli({"synth", "--out", (tmp / "b").string(), "--n-queries", "120", "--model-id",
                     "other-model"})
                .code == 0);
    REQUIRE(run_cli({"probe", "train", "--states", (tmp / "a/world.hsr.jsonl").string(), "--out",
                     (tmp / "a").string(), "--epochs", "1"})
                .code == 0);
    const auto r = run_cli({"prefs", "build", "--states", (tmp / "b/world.hsr.jsonl").string(),
                            "--probe", (tmp / "a/probe.ckpt.json").string(), "--out",
                            (tmp / "b").string()});
    CHECK(r.code == 2);
    CHECK(error_record(r).at("message").get<std::string>().find("other-model") !=
          std::string::npos);
}
