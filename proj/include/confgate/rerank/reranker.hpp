#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "confgate/data/records.hpp"
#include "confgate/numeric/checkpoint.hpp"
#include "confgate/numeric/dense.hpp"
#include "confgate/parallel.hpp"

namespace confgate::rerank {

struct RerankerTrainConfig {
    double learning_rate = 6e-5;
    double weight_decay = 0.01;
    int epochs = 1;
    std::size_t negatives_per_positive = 5;
    double temperature = 0.05;
    double init_scale = 0.01; // stddev of the random initial w
    std::uint64_t seed = 0;
};

/// Bilinear surrogate reranker: phi(q, c) = q^T w c + bias.
struct RerankerModel {
    numeric::Matrix w; // [query_dim x context_dim]
    double bias = 0.0;
    double temperature = 0.05;
    RerankerTrainConfig train_config;

    std::size_t query_dim() const noexcept { return w.rows(); }
    std::size_t context_dim() const noexcept { return w.cols(); }

    static RerankerModel zeros(std::size_t query_dim, std::size_t context_dim,
                               double temperature = 0.05);
    static RerankerModel random_init(std::size_t query_dim, std::size_t context_dim,
                                     const RerankerTrainConfig& config);
};

double score(const RerankerModel& model, std::span<const double> q, std::span<const double> c);

/// InfoNCE over raw scores with temperature tau:
///   L = -log( e^{pos/tau} / (e^{pos/tau} + sum_i e^{neg_i/tau}) )
/// evaluated as logsumexp(s) - s_pos. d_scores[0] is dL/dpos, d_scores[1+i]
/// is dL/dneg_i.
struct ScoreLoss {
    double loss = 0.0;
    std::vector<double> d_scores;
};

ScoreLoss infonce_from_scores(double pos_score, std::span<const double> neg_scores,
                              double temperature);

struct InfoNceResult {
    double loss = 0.0;
    numeric::Matrix grad_w;
    double grad_bias = 0.0; // always 0: a shared bias cancels in the softmax
};

InfoNceResult infonce_loss(const RerankerModel& model, std::span<const double> q,
                           std::span<const double> pos,
                           std::span<const std::span<const double>> negs);

struct RerankerTrainLog {
    std::vector<double> step_losses;
};

struct RerankerTrainResult {
    RerankerModel model;
    RerankerTrainLog log;
};

/// One AdamW step per (query, positive) pair against that query's own
/// negatives, capped at negatives_per_positive by seeded sampling without
/// replacement. Example order is reshuffled every epoch.
RerankerTrainResult train_reranker(std::span<const data::PreferenceExample> prefs,
                                   const data::Corpus& corpus, const RerankerTrainConfig& config);

struct Ranking {
    std::string qid;
    std::vector<std::pair<std::string, double>> ordered; // (cid, score), best first
};

// Scores every candidate; sorts by descending score, ties by ascending cid.
Ranking rank_candidates(const RerankerModel& model, const std::string& qid,
                        std::span<const double> q,
                        std::span<const data::CorpusContext* const> candidates);

Ranking rerank(const RerankerModel& model, const data::CorpusItem& item);

std::vector<Ranking> rerank_all(const RerankerModel& model, const data::Corpus& corpus,
                                const Parallelism& par);
std::vector<Ranking> rerank_all_serial(const RerankerModel& model, const data::Corpus& corpus);

numeric::Checkpoint to_checkpoint(const RerankerModel& model);
RerankerModel reranker_from_checkpoint(const numeric::Checkpoint& checkpoint);

} // namespace confgate::rerank
