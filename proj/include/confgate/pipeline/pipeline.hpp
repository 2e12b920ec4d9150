#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confgate/data/records.hpp"
#include "confgate/json_io.hpp"
#include "confgate/parallel.hpp"
#include "confgate/probe/probe.hpp"
#include "confgate/rerank/reranker.hpp"

namespace confgate::pipeline {

struct GateConfig {
    double beta = 0.95;
    bool gating_enabled = true;
    std::size_t top_k = 3;

    void validate() const;
};

enum class GateAction { skip, retrieve };

struct GateResult {
    GateAction action;
    double conf;
};

// Retrieval runs unless gating is on and conf > beta. conf == beta retrieves.
bool retrieves(double conf, const GateConfig& config) noexcept;

GateResult gate(const probe::ProbeModel& probe, std::span<const double> h_query,
                const GateConfig& config);

/// Answer oracle "oracle-v1". A query is answered correctly when
///  * retrieval was skipped and the answer is parametric, or
///  * retrieval ran and some used context is helpful, or
///  * retrieval ran, the answer is parametric and no misleading override
///    fires. With misleading_penalty on, an all-unhelpful context set
///    overrides parametric knowledge with probability 0.5, drawn from a hash
///    of (seed, qid) so the outcome does not depend on evaluation order.
struct SimulatedGenerator {
    std::string mode = "oracle-v1";
    bool misleading_penalty = true;
    std::uint64_t seed = 0;

    bool answers_correctly(const data::CorpusItem& item, bool retrieved,
                           std::span<const std::string> contexts_used) const;
};

struct GateDecision {
    std::string qid;
    double conf = 0.0;
    bool retrieved = false;
    std::vector<std::string> contexts_used; // empty when skipped
    bool correct = false;
};

struct PipelineReport {
    double beta = 0.0;
    bool gating_enabled = true;
    std::size_t top_k = 0;
    double accuracy = 0.0;
    double retrieval_rate = 0.0; // percent of queries that retrieved
    std::size_t n_queries = 0;
    std::vector<GateDecision> per_query;
};

// Everything about a query that does not depend on beta: its confidence,
// its reranked top-k, and the oracle outcome on either branch.
struct PreparedQuery {
    std::string qid;
    double conf = 0.0;
    std::vector<std::string> top_contexts;
    bool correct_if_skipped = false;
    bool correct_if_retrieved = false;
};

std::vector<PreparedQuery> prepare_queries(const probe::ProbeModel& probe,
                                           const rerank::RerankerModel& reranker,
                                           const data::Corpus& corpus,
                                           const data::StateIndex& states, std::size_t top_k,
                                           const SimulatedGenerator& generator,
                                           const Parallelism& par);
std::vector<PreparedQuery> prepare_queries_serial(const probe::ProbeModel& probe,
                                                  const rerank::RerankerModel& reranker,
                                                  const data::Corpus& corpus,
                                                  const data::StateIndex& states, std::size_t top_k,
                                                  const SimulatedGenerator& generator);

PipelineReport assemble_report(std::span<const PreparedQuery> prepared, const GateConfig& config);

PipelineReport run_pipeline(const probe::ProbeModel& probe, const rerank::RerankerModel& reranker,
                            const data::Corpus& corpus, const data::StateIndex& states,
                            const GateConfig& config, const SimulatedGenerator& generator,
                            const Parallelism& par = {});

// One report per beta (ascending, each in [0,1]). Confidences and rankings
// are computed once and shared by every beta.
std::vector<PipelineReport> beta_sweep(const probe::ProbeModel& probe,
                                       const rerank::RerankerModel& reranker,
                                       const data::Corpus& corpus, const data::StateIndex& states,
                                       std::span<const double> betas, std::size_t top_k,
                                       const SimulatedGenerator& generator,
                                       const Parallelism& par = {});

// "lo:hi:step" (inclusive) or "a,b,c". Values are rounded to 1e-9.
std::vector<double> parse_beta_grid(std::string_view grid);

// True when retrieval_rate never decreases along the list.
bool retrieval_rate_monotone(std::span<const PipelineReport> reports);

// Table-style rows {beta, gating, rr, top1_acc, top3_acc} from two sweeps over
// the same betas, one at top_k = 1 and one at top_k = 3.
Json sweep_table_json(std::span<const PipelineReport> top1, std::span<const PipelineReport> top3);

Json pipeline_report_json(const PipelineReport& report, bool include_per_query);

} // namespace confgate::pipeline
