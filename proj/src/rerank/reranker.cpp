#include "confgate/rerank/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "confgate/errors.hpp"
#include "confgate/numeric/optimizer.hpp"
#include "confgate/numeric/rng.hpp"
#include "confgate/numeric/softmax.hpp"

namespace confgate::rerank {

using numeric::Matrix;
using numeric::Rng;

RerankerModel RerankerModel::zeros(std::size_t query_dim, std::size_t context_dim,
                                   double temperature) {
    if (query_dim == 0 || context_dim == 0) {
        throw DataError("reranker: feature dimensions must be positive");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw DataError("reranker: temperature must be positive");
    }
    RerankerModel m;
    m.w = Matrix(query_dim, context_dim);
    m.temperature = temperature;
    m.train_config.temperature = temperature;
    return m;
}

RerankerModel RerankerModel::random_init(std::size_t query_dim, std::size_t context_dim,
                                         const RerankerTrainConfig& config) {
    RerankerModel m = zeros(query_dim, context_dim, config.temperature);
    m.train_config = config;
    Rng rng(numeric::derive_seed(config.seed, "reranker.init"));
    for (double& v : m.w.data()) {
        v = rng.normal(0.0, config.init_scale);
    }
    return m;
}

double score(const RerankerModel& model, std::span<const double> q, std::span<const double> c) {
    if (q.size() != model.query_dim() || c.size() != model.context_dim()) {
        throw DataError("reranker: feature dimensions (" + std::to_string(q.size()) + ", " +
                        std::to_string(c.size()) + ") do not match model (" +
                        std::to_string(model.query_dim()) + ", " +
                        std::to_string(model.context_dim()) + ")");
    }
    double s = 0.0;
    for (std::size_t r = 0; r < q.size(); ++r) {
        if (q[r] != 0.0) {
            s += q[r] * numeric::dot(model.w.row(r), c);
        }
    }
    return s + model.bias;
}

ScoreLoss infonce_from_scores(double pos_score, std::span<const double> neg_scores,
                              double temperature) {
    if (neg_scores.empty()) {
        throw DataError("infonce: at least one negative is required");
    }
    if (!(temperature > 0.0)) {
        throw DataError("infonce: temperature must be positive");
    }
    std::vector<double> logits;
    logits.reserve(neg_scores.size() + 1);
    logits.push_back(pos_score / temperature);
    for (const double s : neg_scores) {
        logits.push_back(s / temperature);
    }
    const double lse = numeric::log_sum_exp(logits);

    ScoreLoss out;
    out.loss = lse - logits[0];
    out.d_scores.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = std::exp(logits[i] - lse);
        out.d_scores[i] = (p - (i == 0 ? 1.0 : 0.0)) / temperature;
    }
    return out;
}

InfoNceResult infonce_loss(const RerankerModel& model, std::span<const double> q,
                           std::span<const double> pos,
                           std::span<const std::span<const double>> negs) {
    if (negs.empty()) {
        throw DataError("infonce: at least one negative is required");
    }
    std::vector<double> neg_scores;
    neg_scores.reserve(negs.size());
    for (const auto& c : negs) {
        neg_scores.push_back(score(model, q, c));
    }
    const ScoreLoss sl = infonce_from_scores(score(model, q, pos), neg_scores, model.temperature);

    InfoNceResult out;
    out.loss = sl.loss;
    out.grad_w = Matrix(model.query_dim(), model.context_dim());
    // d phi / d w = q c^T, d phi / d bias = 1.
    const auto add_outer = [&](double g, std::span<const double> c) {
        for (std::size_t r = 0; r < q.size(); ++r) {
            const double gq = g * q[r];
            auto row = out.grad_w.row(r);
            for (std::size_t j = 0; j < c.size(); ++j) {
                row[j] += gq * c[j];
            }
        }
    };
    add_outer(sl.d_scores[0], pos);
    out.grad_bias = sl.d_scores[0];
    for (std::size_t i = 0; i < negs.size(); ++i) {
        add_outer(sl.d_scores[i + 1], negs[i]);
        out.grad_bias += sl.d_scores[i + 1];
    }
    return out;
}

RerankerTrainResult train_reranker(std::span<const data::PreferenceExample> prefs,
                                   const data::Corpus& corpus, const RerankerTrainConfig& config) {
    if (config.epochs < 0 || config.negatives_per_positive == 0 ||
        !(config.learning_rate > 0.0) || !(config.weight_decay >= 0.0)) {
        throw DataError("train_reranker: invalid hyperparameters");
    }

    // Resolve every cid up front so a bad file fails before any update.
    struct Resolved {
        std::span<const double> q;
        std::vector<std::span<const double>> positives;
        std::vector<std::span<const double>> negatives;
    };
    std::vector<Resolved> resolved;
    resolved.reserve(prefs.size());
    for (const auto& ex : prefs) {
        const auto* item = corpus.find(ex.qid);
        if (item == nullptr) {
            throw DataError("train_reranker: qid " + ex.qid + " is not in the corpus");
        }
        if (ex.positives.empty() || ex.negatives.empty()) {
            throw DataError("train_reranker: example " + ex.qid +
                            " needs at least one positive and one negative");
        }
        Resolved r{item->query_features.view(), {}, {}};
        const auto lookup = [&](const std::string& cid) {
            const auto* c = item->find(cid);
            if (c == nullptr) {
                throw DataError("train_reranker: cannot resolve qid " + ex.qid + " cid " + cid);
            }
            return c->context_features.view();
        };
        for (const auto& cid : ex.positives) {
            r.positives.push_back(lookup(cid));
        }
        for (const auto& cid : ex.negatives) {
            r.negatives.push_back(lookup(cid));
        }
        resolved.push_back(std::move(r));
    }

    RerankerTrainResult result;
    result.model = RerankerModel::random_init(corpus.meta().query_dim, corpus.meta().context_dim,
                                              config);
    RerankerModel& model = result.model;

    std::vector<std::span<double>> params = {model.w.data(), std::span<double>(&model.bias, 1)};
    const auto sizes = numeric::block_sizes(params);
    numeric::AdamW optimizer(
        {.learning_rate = config.learning_rate, .weight_decay = config.weight_decay}, sizes);

    Rng order_rng(numeric::derive_seed(config.seed, "reranker.order"));
    Rng negative_rng(numeric::derive_seed(config.seed, "reranker.negatives"));
    std::vector<std::size_t> order(resolved.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::span<const double>> negs;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (const std::size_t idx : order) {
            const auto& ex = resolved[idx];
            for (const auto& pos : ex.positives) {
                negs.clear();
                if (ex.negatives.size() <= config.negatives_per_positive) {
                    negs = ex.negatives;
                } else {
                    for (const std::size_t j : negative_rng.sample_without_replacement(
                             ex.negatives.size(), config.negatives_per_positive)) {
                        negs.push_back(ex.negatives[j]);
                    }
                }
                const InfoNceResult step = infonce_loss(model, ex.q, pos, negs);
                result.log.step_losses.push_back(step.loss);
                const std::vector<std::span<const double>> grads = {
                    step.grad_w.data(), std::span<const double>(&step.grad_bias, 1)};
                optimizer.step(params, grads);
            }
        }
    }
    return result;
}

Ranking rank_candidates(const RerankerModel& model, const std::string& qid,
                        std::span<const double> q,
                        std::span<const data::CorpusContext* const> candidates) {
    Ranking ranking;
    ranking.qid = qid;
    ranking.ordered.reserve(candidates.size());
    for (const auto* c : candidates) {
        ranking.ordered.emplace_back(c->cid, score(model, q, c->context_features.view()));
    }
    std::sort(ranking.ordered.begin(), ranking.ordered.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return ranking;
}

Ranking rerank(const RerankerModel& model, const data::CorpusItem& item) {
    std::vector<const data::CorpusContext*> candidates;
    candidates.reserve(item.contexts.size());
    for (const auto& c : item.contexts) {
        candidates.push_back(&c);
    }
    return rank_candidates(model, item.qid, item.query_features.view(), candidates);
}

std::vector<Ranking> rerank_all(const RerankerModel& model, const data::Corpus& corpus,
                                const Parallelism& par) {
    std::vector<Ranking> out(corpus.size());
    parallel_for(corpus.size(), par,
                 [&](std::size_t i) { out[i] = rerank(model, corpus.items()[i]); });
    return out;
}

std::vector<Ranking> rerank_all_serial(const RerankerModel& model, const data::Corpus& corpus) {
    std::vector<Ranking> out;
    out.reserve(corpus.size());
    for (const auto& item : corpus.items()) {
        out.push_back(rerank(model, item));
    }
    return out;
}

numeric::Checkpoint to_checkpoint(const RerankerModel& model) {
    numeric::Checkpoint cp;
    cp.kind = "bilinear";
    cp.shapes["query_dim"] = model.query_dim();
    cp.shapes["context_dim"] = model.context_dim();
    const auto w = model.w.data();
    cp.params.emplace_back("w", std::vector<double>(w.begin(), w.end()));
    cp.params.emplace_back("bias", std::vector<double>{model.bias});
    cp.seed = model.train_config.seed;
    const auto& c = model.train_config;
    cp.hyperparams["temperature"] = model.temperature;
    cp.hyperparams["learning_rate"] = c.learning_rate;
    cp.hyperparams["weight_decay"] = c.weight_decay;
    cp.hyperparams["epochs"] = c.epochs;
    cp.hyperparams["negatives_per_positive"] = c.negatives_per_positive;
    cp.hyperparams["init_scale"] = c.init_scale;
    return cp;
}

RerankerModel reranker_from_checkpoint(const numeric::Checkpoint& cp) {
    if (cp.kind != "bilinear") {
        throw DataError("reranker checkpoint must have kind \"bilinear\", got \"" + cp.kind + "\"");
    }
    const auto dq = static_cast<std::size_t>(require_int(cp.shapes, "query_dim"));
    const auto dc = static_cast<std::size_t>(require_int(cp.shapes, "context_dim"));
    const auto& hp = cp.hyperparams;
    const double temperature = require_field(hp, "temperature").get<double>();

    RerankerModel model = RerankerModel::zeros(dq, dc, temperature);
    auto& c = model.train_config;
    c.temperature = temperature;
    c.learning_rate = require_field(hp, "learning_rate").get<double>();
    c.weight_decay = require_field(hp, "weight_decay").get<double>();
    c.epochs = static_cast<int>(require_int(hp, "epochs"));
    c.negatives_per_positive = static_cast<std::size_t>(require_int(hp, "negatives_per_positive"));
    c.init_scale = require_field(hp, "init_scale").get<double>();
    c.seed = cp.seed;

    const auto& w = cp.param("w");
    const auto& bias = cp.param("bias");
    if (w.size() != dq * dc || bias.size() != 1) {
        throw DataError("reranker checkpoint: parameter shapes do not match declared shapes");
    }
    std::copy(w.begin(), w.end(), model.w.data().begin());
    model.bias = bias[0];
    return model;
}

} // namespace confgate::rerank
