#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "confgate/data/records.hpp"
#include "confgate/json_io.hpp"
#include "confgate/parallel.hpp"
#include "confgate/rerank/reranker.hpp"

namespace confgate::eval {

/// A ranked candidate list with its relevance judgments.
/// relevant_cids must be a subset of ordered_cids; ordered_cids has no
/// duplicates.
struct JudgedRanking {
    std::string qid;
    std::vector<std::string> ordered_cids;
    std::set<std::string> relevant_cids;

    void validate() const;
};

// |relevant in top-k| / min(k, |ordered|).
double precision_at_k(const JudgedRanking& r, std::size_t k);
// |relevant in top-k| / |relevant|. Requires a non-empty relevant set.
double recall_at_k(const JudgedRanking& r, std::size_t k);
// 1-based rank of the first relevant cid, 0 when there is none.
std::size_t first_relevant_rank(const JudgedRanking& r);
// Mean over queries of 1/rank when rank <= k, else 0.
double mrr_at_k(std::span<const JudgedRanking> rs, std::size_t k);

struct MetricReport {
    std::size_t k = 0;
    double precision = 0.0;
    double recall = 0.0;
    double mrr = 0.0;
    std::size_t n_queries = 0;
};

// One report per k, averaged over all rankings. Rankings with an empty
// relevant set are excluded before averaging.
std::vector<MetricReport> compute_metrics(std::span<const JudgedRanking> rankings,
                                          std::span<const std::size_t> ks);

/// Ranks each example's pool (positives and negatives) with the model and
/// judges the positives as relevant.
std::vector<JudgedRanking> judge_preferences(const rerank::RerankerModel& model,
                                             std::span<const data::PreferenceExample> prefs,
                                             const data::Corpus& corpus, const Parallelism& par);
std::vector<JudgedRanking> judge_preferences_serial(const rerank::RerankerModel& model,
                                                    std::span<const data::PreferenceExample> prefs,
                                                    const data::Corpus& corpus);

std::vector<MetricReport> evaluate_reranker(const rerank::RerankerModel& model,
                                            std::span<const data::PreferenceExample> prefs,
                                            const data::Corpus& corpus,
                                            std::span<const std::size_t> ks,
                                            const Parallelism& par = {});

// {"dataset":..,"model":..,"reports":[{"k":..,"precision":..,"recall":..,"mrr":..,"n_queries":..}]}
Json metric_reports_to_json(std::span<const MetricReport> reports, const std::string& dataset,
                            const std::string& model);
std::vector<MetricReport> metric_reports_from_json(const Json& doc);

} // namespace confgate::eval
