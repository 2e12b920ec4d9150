#include "confgate/eval/metrics.hpp"

#include <algorithm>
#include <unordered_set>

#include "confgate/errors.hpp"

namespace confgate::eval {

void JudgedRanking::validate() const {
    std::unordered_set<std::string> seen(ordered_cids.begin(), ordered_cids.end());
    if (seen.size() != ordered_cids.size()) {
        throw DataError("ranking " + qid + " lists a cid twice");
    }
    for (const auto& cid : relevant_cids) {
        if (seen.count(cid) == 0) {
            throw DataError("ranking " + qid + ": relevant cid " + cid + " is not ranked");
        }
    }
}

namespace {

std::size_t hits_in_top(const JudgedRanking& r, std::size_t k) {
    const std::size_t depth = std::min(k, r.ordered_cids.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < depth; ++i) {
        hits += r.relevant_cids.count(r.ordered_cids[i]);
    }
    return hits;
}

void require_k(std::size_t k) {
    if (k == 0) {
        throw DataError("metric cutoff k must be at least 1");
    }
}

} // namespace

double precision_at_k(const JudgedRanking& r, std::size_t k) {
    require_k(k);
    if (r.ordered_cids.empty()) {
        throw DataError("precision_at_k: empty ranking for " + r.qid);
    }
    const std::size_t denom = std::min(k, r.ordered_cids.size());
    return static_cast<double>(hits_in_top(r, k)) / static_cast<double>(denom);
}

double recall_at_k(const JudgedRanking& r, std::size_t k) {
    require_k(k);
    if (r.relevant_cids.empty()) {
        throw DataError("recall_at_k: ranking " + r.qid + " has no relevant cids");
    }
    return static_cast<double>(hits_in_top(r, k)) / static_cast<double>(r.relevant_cids.size());
}

std::size_t first_relevant_rank(const JudgedRanking& r) {
    for (std::size_t i = 0; i < r.ordered_cids.size(); ++i) {
        if (r.relevant_cids.count(r.ordered_cids[i]) != 0) {
            return i + 1;
        }
    }
    return 0;
}

double mrr_at_k(std::span<const JudgedRanking> rs, std::size_t k) {
    require_k(k);
    if (rs.empty()) {
        throw DataError("mrr_at_k: no rankings");
    }
    double sum = 0.0;
    for (const auto& r : rs) {
        const std::size_t rank = first_relevant_rank(r);
        if (rank != 0 && rank <= k) {
            sum += 1.0 / static_cast<double>(rank);
        }
    }
    return sum / static_cast<double>(rs.size());
}

std::vector<MetricReport> compute_metrics(std::span<const JudgedRanking> rankings,
                                          std::span<const std::size_t> ks) {
    std::vector<JudgedRanking> judged;
    judged.reserve(rankings.size());
    for (const auto& r : rankings) {
        if (!r.relevant_cids.empty()) {
            judged.push_back(r);
        }
    }
    if (judged.empty()) {
        throw DataError("compute_metrics: no ranking has a relevant cid");
    }

    std::vector<MetricReport> reports;
    for (const std::size_t k : ks) {
        MetricReport m;
        m.k = k;
        m.n_queries = judged.size();
        double p = 0.0;
        double rc = 0.0;
        for (const auto& r : judged) {
            p += precision_at_k(r, k);
            rc += recall_at_k(r, k);
        }
        const auto n = static_cast<double>(judged.size());
        m.precision = p / n;
        m.recall = rc / n;
        m.mrr = mrr_at_k(judged, k);
        reports.push_back(m);
    }
    return reports;
}

namespace {

JudgedRanking judge_one(const rerank::RerankerModel& model, const data::PreferenceExample& ex,
                        const data::Corpus& corpus) {
    const auto* item = corpus.find(ex.qid);
    if (item == nullptr) {
        throw DataError("evaluate_reranker: qid " + ex.qid + " is not in the corpus");
    }
    std::vector<const data::CorpusContext*> pool;
    for (const auto* side : {&ex.positives, &ex.negatives}) {
        for (const auto& cid : *side) {
            const auto* c = item->find(cid);
            if (c == nullptr) {
                throw DataError("evaluate_reranker: cannot resolve qid " + ex.qid + " cid " + cid);
            }
            pool.push_back(c);
        }
    }
    const rerank::Ranking ranking =
        rerank::rank_candidates(model, ex.qid, item->query_features.view(), pool);

    JudgedRanking judged;
    judged.qid = ex.qid;
    judged.ordered_cids.reserve(ranking.ordered.size());
    for (const auto& [cid, s] : ranking.ordered) {
        judged.ordered_cids.push_back(cid);
    }
    judged.relevant_cids.insert(ex.positives.begin(), ex.positives.end());
    return judged;
}

} // namespace

std::vector<JudgedRanking> judge_preferences(const rerank::RerankerModel& model,
                                             std::span<const data::PreferenceExample> prefs,
                                             const data::Corpus& corpus, const Parallelism& par) {
    std::vector<JudgedRanking> out(prefs.size());
    parallel_for(prefs.size(), par,
                 [&](std::size_t i) { out[i] = judge_one(model, prefs[i], corpus); });
    return out;
}

std::vector<JudgedRanking> judge_preferences_serial(const rerank::RerankerModel& model,
                                                    std::span<const data::PreferenceExample> prefs,
                                                    const data::Corpus& corpus) {
    std::vector<JudgedRanking> out;
    out.reserve(prefs.size());
    for (const auto& ex : prefs) {
        out.push_back(judge_one(model, ex, corpus));
    }
    return out;
}

std::vector<MetricReport> evaluate_reranker(const rerank::RerankerModel& model,
                                            std::span<const data::PreferenceExample> prefs,
                                            const data::Corpus& corpus,
                                            std::span<const std::size_t> ks,
                                            const Parallelism& par) {
    const auto judged = judge_preferences(model, prefs, corpus, par);
    return compute_metrics(judged, ks);
}

Json metric_reports_to_json(std::span<const MetricReport> reports, const std::string& dataset,
                            const std::string& model) {
    Json doc = Json::object();
    doc["format_version"] = kFormatVersion;
    doc["dataset"] = dataset;
    doc["model"] = model;
    Json list = Json::array();
    for (const auto& r : reports) {
        list.push_back({{"k", r.k},
                        {"precision", r.precision},
                        {"recall", r.recall},
                        {"mrr", r.mrr},
                        {"n_queries", r.n_queries}});
    }
    doc["reports"] = std::move(list);
    return doc;
}

std::vector<MetricReport> metric_reports_from_json(const Json& doc) {
    std::vector<MetricReport> out;
    try {
        for (const auto& r : doc.at("reports")) {
            out.push_back({r.at("k").get<std::size_t>(), r.at("precision").get<double>(),
                           r.at("recall").get<double>(), r.at("mrr").get<double>(),
                           r.at("n_queries").get<std::size_t>()});
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed metric report: ") + e.what());
    }
    return out;
}

} // namespace confgate::eval
