#include "confgate/pipeline/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "confgate/errors.hpp"
#include "confgate/numeric/rng.hpp"

namespace confgate::pipeline {

void GateConfig::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw DataError("gate: beta must lie in [0, 1]");
    }
    if (top_k == 0) {
        throw DataError("gate: top_k must be at least 1");
    }
}

bool retrieves(double conf, const GateConfig& config) noexcept {
    return !config.gating_enabled || conf <= config.beta;
}

GateResult gate(const probe::ProbeModel& probe, std::span<const double> h_query,
                const GateConfig& config) {
    const double c = probe::conf(probe, h_query);
    return {retrieves(c, config) ? GateAction::retrieve : GateAction::skip, c};
}

bool SimulatedGenerator::answers_correctly(const data::CorpusItem& item, bool retrieved,
                                           std::span<const std::string> contexts_used) const {
    if (mode != "oracle-v1") {
        throw DataError("unknown generator mode '" + mode + "'");
    }
    if (!retrieved) {
        return item.parametric_known == 1;
    }
    for (const auto& cid : contexts_used) {
        const auto* c = item.find(cid);
        if (c != nullptr && c->gold_helpful == 1) {
            return true;
        }
    }
    if (item.parametric_known != 1) {
        return false;
    }
    if (!misleading_penalty) {
        return true;
    }
    return numeric::keyed_uniform(seed, item.qid) >= 0.5;
}

namespace {

PreparedQuery prepare_one(const probe::ProbeModel& probe, const rerank::RerankerModel& reranker,
                          const data::CorpusItem& item, const data::StateIndex& states,
                          std::size_t top_k, const SimulatedGenerator& generator) {
    const auto* h = states.query_state(item.qid);
    if (h == nullptr) {
        throw DataError("pipeline: no query-only hidden state for qid " + item.qid);
    }
    PreparedQuery q;
    q.qid = item.qid;
    q.conf = probe::conf(probe, h->vec.view());
    const rerank::Ranking ranking = rerank::rerank(reranker, item);
    const std::size_t depth = std::min(top_k, ranking.ordered.size());
    for (std::size_t i = 0; i < depth; ++i) {
        q.top_contexts.push_back(ranking.ordered[i].first);
    }
    q.correct_if_skipped = generator.answers_correctly(item, false, {});
    q.correct_if_retrieved = generator.answers_correctly(item, true, q.top_contexts);
    return q;
}

} // namespace

std::vector<PreparedQuery> prepare_queries(const probe::ProbeModel& probe,
                                           const rerank::RerankerModel& reranker,
                                           const data::Corpus& corpus,
                                           const data::StateIndex& states, std::size_t top_k,
                                           const SimulatedGenerator& generator,
                                           const Parallelism& par) {
    std::vector<PreparedQuery> out(corpus.size());
    parallel_for(corpus.size(), par, [&](std::size_t i) {
        out[i] = prepare_one(probe, reranker, corpus.items()[i], states, top_k, generator);
    });
    return out;
}

std::vector<PreparedQuery> prepare_queries_serial(const probe::ProbeModel& probe,
                                                  const rerank::RerankerModel& reranker,
                                                  const data::Corpus& corpus,
                                                  const data::StateIndex& states, std::size_t top_k,
                                                  const SimulatedGenerator& generator) {
    std::vector<PreparedQuery> out;
    out.reserve(corpus.size());
    for (const auto& item : corpus.items()) {
        out.push_back(prepare_one(probe, reranker, item, states, top_k, generator));
    }
    return out;
}

PipelineReport assemble_report(std::span<const PreparedQuery> prepared, const GateConfig& config) {
    config.validate();
    if (prepared.empty()) {
        throw DataError("pipeline: no queries");
    }
    PipelineReport report;
    report.beta = config.beta;
    report.gating_enabled = config.gating_enabled;
    report.top_k = config.top_k;
    report.n_queries = prepared.size();
    report.per_query.reserve(prepared.size());

    std::size_t n_retrieved = 0;
    std::size_t n_correct = 0;
    for (const auto& q : prepared) {
        if (q.top_contexts.size() > config.top_k) {
            throw InvariantError("pipeline: prepared with a deeper top_k than requested");
        }
        GateDecision d;
        d.qid = q.qid;
        d.conf = q.conf;
        d.retrieved = retrieves(q.conf, config);
        if (d.retrieved) {
            d.contexts_used = q.top_contexts;
            d.correct = q.correct_if_retrieved;
            ++n_retrieved;
        } else {
            d.correct = q.correct_if_skipped;
        }
        n_correct += d.correct ? 1 : 0;
        report.per_query.push_back(std::move(d));
    }
    const auto n = static_cast<double>(prepared.size());
    report.accuracy = static_cast<double>(n_correct) / n;
    report.retrieval_rate = 100.0 * static_cast<double>(n_retrieved) / n;
    return report;
}

PipelineReport run_pipeline(const probe::ProbeModel& probe, const rerank::RerankerModel& reranker,
                            const data::Corpus& corpus, const data::StateIndex& states,
                            const GateConfig& config, const SimulatedGenerator& generator,
                            const Parallelism& par) {
    config.validate();
    const auto prepared =
        prepare_queries(probe, reranker, corpus, states, config.top_k, generator, par);
    return assemble_report(prepared, config);
}

std::vector<PipelineReport> beta_sweep(const probe::ProbeModel& probe,
                                       const rerank::RerankerModel& reranker,
                                       const data::Corpus& corpus, const data::StateIndex& states,
                                       std::span<const double> betas, std::size_t top_k,
                                       const SimulatedGenerator& generator,
                                       const Parallelism& par) {
    if (!std::is_sorted(betas.begin(), betas.end())) {
        throw DataError("beta_sweep: betas must be sorted ascending");
    }
    const auto prepared = prepare_queries(probe, reranker, corpus, states, top_k, generator, par);
    std::vector<PipelineReport> reports;
    reports.reserve(betas.size());
    for (const double beta : betas) {
        reports.push_back(assemble_report(prepared, {beta, true, top_k}));
    }
    return reports;
}

namespace {

double parse_number(std::string_view text) {
    // from_chars for double is available in libstdc++ 11.
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw UsageError("cannot parse number '" + std::string(text) + "'");
    }
    return value;
}

double round9(double v) {
    return std::round(v * 1e9) / 1e9;
}

} // namespace

std::vector<double> parse_beta_grid(std::string_view grid) {
    std::vector<double> out;
    if (grid.find(':') != std::string_view::npos) {
        const auto c1 = grid.find(':');
        const auto c2 = grid.find(':', c1 + 1);
        if (c2 == std::string_view::npos) {
            throw UsageError("beta grid must be lo:hi:step");
        }
        const double lo = parse_number(grid.substr(0, c1));
        const double hi = parse_number(grid.substr(c1 + 1, c2 - c1 - 1));
        const double step = parse_number(grid.substr(c2 + 1));
        if (!(step > 0.0) || hi < lo) {
            throw UsageError("beta grid needs step > 0 and hi >= lo");
        }
        const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(round9(lo + static_cast<double>(i) * step));
        }
    } else {
        std::size_t start = 0;
        while (start <= grid.size()) {
            const auto comma = grid.find(',', start);
            const auto piece = grid.substr(start, comma == std::string_view::npos ? grid.npos
                                                                                  : comma - start);
            out.push_back(round9(parse_number(piece)));
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
    }
    for (const double b : out) {
        if (!(b >= 0.0 && b <= 1.0)) {
            throw UsageError("beta values must lie in [0, 1]");
        }
    }
    if (!std::is_sorted(out.begin(), out.end())) {
        throw UsageError("beta values must be ascending");
    }
    return out;
}

bool retrieval_rate_monotone(std::span<const PipelineReport> reports) {
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].retrieval_rate < reports[i - 1].retrieval_rate) {
            return false;
        }
    }
    return true;
}

Json sweep_table_json(std::span<const PipelineReport> top1, std::span<const PipelineReport> top3) {
    if (top1.size() != top3.size()) {
        throw InvariantError("sweep_table_json: sweeps differ in length");
    }
    Json rows = Json::array();
    for (std::size_t i = 0; i < top1.size(); ++i) {
        if (top1[i].gating_enabled != top3[i].gating_enabled || top1[i].beta != top3[i].beta ||
            top1[i].retrieval_rate != top3[i].retrieval_rate) {
            throw InvariantError("sweep_table_json: sweeps disagree on gate decisions");
        }
        rows.push_back({{"beta", top1[i].beta},
                        {"gating", top1[i].gating_enabled},
                        {"rr", top1[i].retrieval_rate},
                        {"top1_acc", top1[i].accuracy},
                        {"top3_acc", top3[i].accuracy}});
    }
    return rows;
}

Json pipeline_report_json(const PipelineReport& report, bool include_per_query) {
    Json doc = Json::object();
    doc["format_version"] = kFormatVersion;
    doc["beta"] = report.beta;
    doc["gating"] = report.gating_enabled;
    doc["top_k"] = report.top_k;
    doc["accuracy"] = report.accuracy;
    doc["rr"] = report.retrieval_rate;
    doc["n_queries"] = report.n_queries;
    if (include_per_query) {
        Json rows = Json::array();
        for (const auto& d : report.per_query) {
            rows.push_back({{"qid", d.qid},
                            {"conf", d.conf},
                            {"retrieved", d.retrieved},
                            {"contexts_used", d.contexts_used},
                            {"correct", d.correct}});
        }
        doc["per_query"] = std::move(rows);
    }
    return doc;
}

} // namespace confgate::pipeline
