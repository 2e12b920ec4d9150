// Serial reference vs OpenMP kernels on a synthetic world. The thread count
// is the benchmark argument; 1 runs the plain-loop reference.

#include <benchmark/benchmark.h>

#include <omp.h>

#include "confgate/data/synthetic.hpp"
#include "confgate/eval/metrics.hpp"
#include "confgate/numeric/rng.hpp"
#include "confgate/pipeline/pipeline.hpp"
#include "confgate/prefs/preferences.hpp"
#include "confgate/probe/probe.hpp"
#include "confgate/rerank/reranker.hpp"

namespace {

using namespace confgate;

struct Fixture {
    data::SyntheticWorld world;
    data::HiddenStates states;
    probe::ProbeModel probe;
    rerank::RerankerModel reranker;
    std::vector<data::PreferenceExample> prefs;

    Fixture() {
        data::SyntheticConfig cfg;
        cfg.n_queries = 4000;
        cfg.dim = 512;
        world = data::generate_synthetic_world(cfg);
        states = {world.meta, world.records, {}};
        numeric::Rng rng(1);
        probe.net = numeric::Mlp2::random_init(cfg.dim, probe::default_hidden_width(cfg.dim), 0.5,
                                               numeric::Activation::relu, rng);
        probe.meta_fingerprint = world.meta.fingerprint();
        reranker = rerank::RerankerModel::random_init(cfg.feature_dim, cfg.feature_dim, {});
        // A fresh probe head is zero, so every inc would be 0 and no query
        // would survive the builder. The planted labels stand in instead.
        for (const auto& item : world.corpus.items()) {
            data::PreferenceExample ex;
            ex.qid = item.qid;
            for (const auto& c : item.contexts) {
                (c.gold_helpful ? ex.positives : ex.negatives).push_back(c.cid);
                ex.inc_scores[c.cid] = c.gold_helpful ? 0.1 : -0.1;
            }
            if (!ex.positives.empty() && !ex.negatives.empty()) {
                prefs.push_back(std::move(ex));
            }
        }
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

Parallelism threads(const benchmark::State& state) {
    return Parallelism{static_cast<int>(state.range(0))};
}

void BM_BatchConf(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        if (state.range(0) == 1) {
            benchmark::DoNotOptimize(probe::batch_conf_serial(f.probe, f.states.records));
        } else {
            benchmark::DoNotOptimize(probe::batch_conf(f.probe, f.states.records, threads(state)));
        }
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.states.records.size()));
}

void BM_ComputeInc(benchmark::State& state) {
    const auto& f = fixture();
    const data::StateIndex index(f.states);
    for (auto _ : state) {
        if (state.range(0) == 1) {
            benchmark::DoNotOptimize(prefs::compute_inc_all_serial(f.probe, index));
        } else {
            benchmark::DoNotOptimize(prefs::compute_inc_all(f.probe, index, threads(state)));
        }
    }
}

void BM_RerankAll(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        if (state.range(0) == 1) {
            benchmark::DoNotOptimize(rerank::rerank_all_serial(f.reranker, f.world.corpus));
        } else {
            benchmark::DoNotOptimize(
                rerank::rerank_all(f.reranker, f.world.corpus, threads(state)));
        }
    }
}

void BM_JudgePreferences(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        if (state.range(0) == 1) {
            benchmark::DoNotOptimize(
                eval::judge_preferences_serial(f.reranker, f.prefs, f.world.corpus));
        } else {
            benchmark::DoNotOptimize(
                eval::judge_preferences(f.reranker, f.prefs, f.world.corpus, threads(state)));
        }
    }
}

void BM_PrepareQueries(benchmark::State& state) {
    const auto& f = fixture();
    const data::StateIndex index(f.states);
    const pipeline::SimulatedGenerator gen;
    for (auto _ : state) {
        if (state.range(0) == 1) {
            benchmark::DoNotOptimize(pipeline::prepare_queries_serial(
                f.probe, f.reranker, f.world.corpus, index, 3, gen));
        } else {
            benchmark::DoNotOptimize(pipeline::prepare_queries(
                f.probe, f.reranker, f.world.corpus, index, 3, gen, threads(state)));
        }
    }
}

void thread_args(benchmark::internal::Benchmark* b) {
    const int max_threads = omp_get_max_threads();
    for (int t = 1; t <= max_threads; t *= 2) {
        b->Arg(t);
    }
    b->Unit(benchmark::kMillisecond)->UseRealTime();
}

} // namespace

BENCHMARK(BM_BatchConf)->Apply(thread_args);
BENCHMARK(BM_ComputeInc)->Apply(thread_args);
BENCHMARK(BM_RerankAll)->Apply(thread_args);
BENCHMARK(BM_JudgePreferences)->Apply(thread_args);
BENCHMARK(BM_PrepareQueries)->Apply(thread_args);

BENCHMARK_MAIN();
