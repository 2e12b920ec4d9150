#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "confgate/data/synthetic.hpp"
#include "confgate/errors.hpp"
#include "confgate/numeric/mlp.hpp"
#include "confgate/pipeline/pipeline.hpp"

using namespace confgate;
using namespace confgate::pipeline;

namespace {

std::vector<PreparedQuery> random_prepared(std::mt19937_64& gen, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::vector<PreparedQuery> out;
    for (std::size_t i = 0; i < n; ++i) {
        // Coarse confidences so many land exactly on grid points.
        out.push_back({"q" + std::to_string(i), std::round(u(gen) * 20.0) / 20.0, {"c0"},
                       coin(gen), coin(gen)});
    }
    return out;
}

std::set<std::string> retrieved_set(const PipelineReport& r) {
    std::set<std::string> out;
    for (const auto& d : r.per_query) {
        if (d.retrieved) {
            out.insert(d.qid);
        }
    }
    return out;
}

probe::ProbeModel zero_probe(std::size_t dim) {
    probe::ProbeModel m;
    m.net = numeric::Mlp2::zeros(dim, 2, 0.0, numeric::Activation::relu);
    return m;
}

} // namespace

TEST_CASE("gate examples") {
    GateConfig cfg;
    cfg.beta = 0.95;
    CHECK_FALSE(retrieves(0.97, cfg));
    CHECK(retrieves(0.60, cfg));
    CHECK(retrieves(0.95, cfg));
    cfg.gating_enabled = false;
    CHECK(retrieves(0.999, cfg));

    cfg.beta = 1.5;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg.beta = 0.5;
    cfg.top_k = 0;
    CHECK_THROWS_AS(cfg.validate(), DataError);

    const auto p = zero_probe(2);
    const std::vector<double> h{1.0, 2.0};
    GateConfig at_half;
    at_half.beta = 0.5;
    const auto g = gate(p, h, at_half);
    CHECK(g.conf == 0.5);
    CHECK(g.action == GateAction::retrieve);
    at_half.beta = 0.49;
    CHECK(gate(p, h, at_half).action == GateAction::skip);
}

TEST_CASE("retrieval rate arithmetic") {
    std::vector<PreparedQuery> qs;
    for (int i = 0; i < 100; ++i) {
        qs.push_back({"q" + std::to_string(i), i < 83 ? 0.5 : 0.99, {"c"}, true, i % 2 == 0});
    }
    GateConfig cfg;
    const auto r = assemble_report(qs, cfg);
    CHECK(r.retrieval_rate == doctest::Approx(83.0));
    CHECK(r.n_queries == 100);
    // 17 skipped and correct, plus the even-numbered retrieved ones.
    CHECK(r.accuracy == doctest::Approx((17.0 + 42.0) / 100.0));
    CHECK(r.per_query[0].contexts_used == std::vector<std::string>{"c"});
    CHECK(r.per_query[99].contexts_used.empty());

    cfg.beta = 1.0;
    CHECK(assemble_report(qs, cfg).retrieval_rate == 100.0);
    cfg.beta = 0.1;
    const auto none = assemble_report(qs, cfg);
    CHECK(none.retrieval_rate == 0.0);
    // With nothing retrieved, accuracy is the parametric-known fraction.
    CHECK(none.accuracy == 1.0);
}

TEST_CASE("gating off equals retrieve-always") {
    std::mt19937_64 gen(4);
    const auto qs = random_prepared(gen, 500);
    GateConfig off;
    off.gating_enabled = false;
    off.beta = 0.2;
    GateConfig always;
    always.beta = 1.0;
    const auto a = assemble_report(qs, off);
    const auto b = assemble_report(qs, always);
    CHECK(a.retrieval_rate == 100.0);
    CHECK(a.accuracy == b.accuracy);
    for (std::size_t i = 0; i < qs.size(); ++i) {
        CHECK(a.per_query[i].retrieved == b.per_query[i].retrieved);
        CHECK(a.per_query[i].correct == b.per_query[i].correct);
    }
}

TEST_CASE("retrieved sets grow with beta") {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto qs = random_prepared(gen, 200);
        const auto betas = parse_beta_grid("0.5:0.99:0.01");
        std::vector<PipelineReport> reports;
        for (const double b : betas) {
            GateConfig cfg;
            cfg.beta = b;
            reports.push_back(assemble_report(qs, cfg));
        }
        CHECK(retrieval_rate_monotone(reports));
        for (std::size_t i = 1; i < reports.size(); ++i) {
            const auto lo = retrieved_set(reports[i - 1]);
            const auto hi = retrieved_set(reports[i]);
            CHECK(std::includes(hi.begin(), hi.end(), lo.begin(), lo.end()));
        }
    }
    std::vector<PipelineReport> bad(2);
    bad[0].retrieval_rate = 50.0;
    bad[1].retrieval_rate = 40.0;
    CHECK_FALSE(retrieval_rate_monotone(bad));
}

TEST_CASE("query order does not change the aggregate") {
    std::mt19937_64 gen(6);
    auto qs = random_prepared(gen, 300);
    GateConfig cfg;
    cfg.beta = 0.6;
    const auto a = assemble_report(qs, cfg);
    std::shuffle(qs.begin(), qs.end(), gen);
    const auto b = assemble_report(qs, cfg);
    CHECK(a.accuracy == doctest::Approx(b.accuracy).epsilon(1e-15));
    CHECK(a.retrieval_rate == doctest::Approx(b.retrieval_rate).epsilon(1e-15));
}

TEST_CASE("a probe that tracks knowledge never loses accuracy against retrieve-always") {
    // For known queries skipping is always correct, so routing exactly the
    // known ones away from retrieval can only help.
    std::mt19937_64 gen(21);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PreparedQuery> qs;
        for (int i = 0; i < 100; ++i) {
            const bool known = coin(gen);
            qs.push_back({"q" + std::to_string(i), known ? 0.99 : 0.01, {"c"}, known, coin(gen)});
        }
        GateConfig gated;
        gated.beta = 0.5;
        GateConfig always;
        always.gating_enabled = false;
        CHECK(assemble_report(qs, gated).accuracy >= assemble_report(qs, always).accuracy);
    }
}

TEST_CASE("oracle generator rules") {
    data::CorpusItem known{"q", numeric::DenseVector({1.0}), 1,
                           {{"good", numeric::DenseVector({1.0}), 1},
                            {"bad", numeric::DenseVector({1.0}), 0}}};
    auto unknown = known;
    unknown.parametric_known = 0;
    SimulatedGenerator gen;
    const std::vector<std::string> good{"good"};
    const std::vector<std::string> bad{"bad"};
    CHECK(gen.answers_correctly(known, false, {}));
    CHECK_FALSE(gen.answers_correctly(unknown, false, {}));
    CHECK(gen.answers_correctly(unknown, true, good));
    CHECK_FALSE(gen.answers_correctly(unknown, true, bad));
    gen.misleading_penalty = false;
    CHECK(gen.answers_correctly(known, true, bad));

    // The misleading draw is a fixed function of (seed, qid).
    gen.misleading_penalty = true;
    int flips = 0;
    for (int i = 0; i < 400; ++i) {
        known.qid = "q" + std::to_string(i);
        const bool first = gen.answers_correctly(known, true, bad);
        CHECK(first == gen.answers_correctly(known, true, bad));
        flips += first ? 0 : 1;
    }
    CHECK(flips > 140);
    CHECK(flips < 260);
    gen.mode = "other";
    CHECK_THROWS_AS(gen.answers_correctly(known, false, {}), DataError);
}

TEST_CASE("end-to-end with a constant probe") {
    data::SyntheticConfig cfg;
    cfg.n_queries = 60;
    cfg.n_contexts_per_query = 5;
    cfg.dim = 8;
    cfg.feature_dim = 4;
    const auto world = data::generate_synthetic_world(cfg);
    const data::HiddenStates hs{world.meta, world.records, {}};
    const data::StateIndex index(hs);
    const auto p = zero_probe(8);
    const auto reranker = rerank::RerankerModel::zeros(4, 4);
    const SimulatedGenerator gen;

    const std::vector<double> betas{0.0, 0.49, 0.5, 1.0};
    const auto sweep = beta_sweep(p, reranker, world.corpus, index, betas, 3, gen);
    REQUIRE(sweep.size() == 4);
    CHECK(sweep[0].retrieval_rate == 0.0);
    CHECK(sweep[1].retrieval_rate == 0.0);
    CHECK(sweep[2].retrieval_rate == 100.0);
    CHECK(sweep[3].retrieval_rate == 100.0);
    std::size_t known = 0;
    for (const auto& item : world.corpus.items()) {
        known += static_cast<std::size_t>(item.parametric_known);
    }
    CHECK(sweep[0].accuracy == doctest::Approx(double(known) / 60.0));

    GateConfig single;
    single.beta = 0.5;
    const auto run = run_pipeline(p, reranker, world.corpus, index, single, gen);
    CHECK(run.accuracy == sweep[2].accuracy);
    CHECK(run.per_query.front().contexts_used.size() == 3);

    const std::vector<double> unsorted{0.6, 0.5};
    CHECK_THROWS(beta_sweep(p, reranker, world.corpus, index, unsorted, 3, gen));

    const auto table = sweep_table_json(sweep, sweep);
    CHECK(table.size() == 4);
    CHECK(table[2].at("rr") == 100.0);
    const auto doc = pipeline_report_json(run, true);
    CHECK(doc.at("per_query").size() == 60);
    CHECK_FALSE(pipeline_report_json(run, false).contains("per_query"));
}

TEST_CASE("beta grid parsing") {
    const auto grid = parse_beta_grid("0.5:0.99:0.01");
    CHECK(grid.size() == 50);
    CHECK(grid.front() == 0.5);
    CHECK(grid.back() == 0.99);
    CHECK(parse_beta_grid("0.1,0.5,0.9") == std::vector<double>{0.1, 0.5, 0.9});
    CHECK(parse_beta_grid("0.7") == std::vector<double>{0.7});
    CHECK_THROWS_AS(parse_beta_grid("0.9,0.1"), UsageError);
    CHECK_THROWS_AS(parse_beta_grid("0:1.5:0.5"), UsageError);
    CHECK_THROWS_AS(parse_beta_grid("0.1:0.5:0"), UsageError);
    CHECK_THROWS_AS(parse_beta_grid("abc"), UsageError);
    CHECK_THROWS_AS(parse_beta_grid(""), UsageError);
}
