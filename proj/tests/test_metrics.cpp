#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "confgate/errors.hpp"
#include "confgate/eval/metrics.hpp"
#include "oracles/brute_force.hpp"

using namespace confgate;
using namespace confgate::eval;
using numeric::DenseVector;

namespace {

JudgedRanking ranking(std::vector<std::string> ordered, std::set<std::string> relevant) {
    return {"q", std::move(ordered), std::move(relevant)};
}

// Ranking whose first relevant cid sits at 1-based position `rank`.
JudgedRanking first_relevant_at(std::size_t rank, std::size_t length) {
    JudgedRanking r;
    r.qid = "q" + std::to_string(rank);
    for (std::size_t i = 1; i <= length; ++i) {
        r.ordered_cids.push_back("c" + std::to_string(i));
    }
    r.relevant_cids.insert("c" + std::to_string(rank));
    return r;
}

JudgedRanking random_ranking(std::mt19937_64& gen) {
    std::uniform_int_distribution<std::size_t> len(1, 16);
    const std::size_t n = len(gen);
    JudgedRanking r;
    r.qid = "q";
    for (std::size_t i = 0; i < n; ++i) {
        r.ordered_cids.push_back("c" + std::to_string(i));
    }
    std::shuffle(r.ordered_cids.begin(), r.ordered_cids.end(), gen);
    std::bernoulli_distribution pick(0.35);
    for (const auto& c : r.ordered_cids) {
        if (pick(gen)) {
            r.relevant_cids.insert(c);
        }
    }
    if (r.relevant_cids.empty()) {
        r.relevant_cids.insert(r.ordered_cids[gen() % n]);
    }
    return r;
}

// Corpus with one query whose contexts have one-hot features; the model's
// diagonal then sets each context's score directly.
struct ToyEval {
    data::Corpus corpus;
    std::vector<data::PreferenceExample> prefs;
};

ToyEval toy_eval() {
    std::vector<data::CorpusItem> items;
    std::vector<data::PreferenceExample> prefs;
    for (int q = 0; q < 4; ++q) {
        data::CorpusItem item;
        item.qid = "q" + std::to_string(q);
        item.query_features = DenseVector({1.0, 1.0});
        data::PreferenceExample ex;
        ex.qid = item.qid;
        for (int c = 0; c < 6; ++c) {
            const bool positive = (c + q) % 3 == 0;
            const std::string cid = "c" + std::to_string(c);
            item.contexts.push_back(
                {cid, positive ? DenseVector({1.0, 0.0}) : DenseVector({0.0, 1.0}), positive});
            (positive ? ex.positives : ex.negatives).push_back(cid);
            ex.inc_scores[cid] = positive ? 0.2 : -0.2;
        }
        items.push_back(std::move(item));
        prefs.push_back(std::move(ex));
    }
    return {data::Corpus({2, 2}, std::move(items)), std::move(prefs)};
}

} // namespace

TEST_CASE("precision and recall examples") {
    const auto r = ranking({"a", "b", "c", "d"}, {"a", "c"});
    CHECK(precision_at_k(r, 3) == doctest::Approx(2.0 / 3.0));
    CHECK(precision_at_k(ranking({"x", "y", "z"}, {"z"}), 2) == 0.0);
    // Pools smaller than k cap the denominator.
    CHECK(precision_at_k(ranking({"a", "b"}, {"a"}), 5) == 0.5);

    const auto five = ranking({"r1", "n1", "r2", "r3", "r4", "r5", "n2"}, {"r1", "r2", "r3", "r4", "r5"});
    CHECK(recall_at_k(five, 3) == 0.4);
    CHECK(recall_at_k(five, 7) == 1.0);
    CHECK(recall_at_k(five, 50) == 1.0);

    CHECK_THROWS_AS(precision_at_k(r, 0), DataError);
    CHECK_THROWS_AS(recall_at_k(ranking({"a"}, {}), 1), DataError);
    CHECK_THROWS_AS(ranking({"a", "a"}, {"a"}).validate(), DataError);
    CHECK_THROWS_AS(ranking({"a"}, {"b"}).validate(), DataError);
}

TEST_CASE("MRR examples") {
    const std::vector rs{first_relevant_at(1, 6), first_relevant_at(2, 6), first_relevant_at(4, 6)};
    CHECK(mrr_at_k(rs, 5) == 0.5833333333333334);
    const std::vector beyond{first_relevant_at(1, 8), first_relevant_at(7, 8)};
    CHECK(mrr_at_k(beyond, 5) == 0.5);
    const std::vector top{first_relevant_at(1, 3), first_relevant_at(1, 2)};
    CHECK(mrr_at_k(top, 1) == 1.0);
    CHECK_THROWS_AS(mrr_at_k(std::vector<JudgedRanking>{}, 1), DataError);
}

TEST_CASE("metrics agree with the brute-force recount") {
    std::mt19937_64 gen(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto r = random_ranking(gen);
        for (std::size_t k = 1; k <= 17; ++k) {
            CHECK(std::abs(precision_at_k(r, k) - oracle::precision(r.ordered_cids, r.relevant_cids, k)) <= 1e-12);
            CHECK(std::abs(recall_at_k(r, k) - oracle::recall(r.ordered_cids, r.relevant_cids, k)) <= 1e-12);
            CHECK(std::abs(mrr_at_k(std::vector{r}, k) -
                           oracle::reciprocal_rank(r.ordered_cids, r.relevant_cids, k)) <= 1e-12);
        }
    }
}

TEST_CASE("dataset-level properties") {
    std::mt19937_64 gen(8);
    std::vector<JudgedRanking> rs;
    for (int i = 0; i < 300; ++i) {
        rs.push_back(random_ranking(gen));
    }
    // One unjudged query is excluded rather than counted.
    rs.push_back(ranking({"a", "b"}, {}));
    const std::vector<std::size_t> ks{1, 2, 3, 5, 8, 16};
    const auto reports = compute_metrics(rs, ks);
    REQUIRE(reports.size() == ks.size());
    CHECK(reports[0].mrr == reports[0].precision);
    CHECK(reports[0].n_queries == 300);
    for (std::size_t i = 1; i < reports.size(); ++i) {
        CHECK(reports[i].recall >= reports[i - 1].recall);
        CHECK(reports[i].mrr >= reports[i - 1].mrr);
    }
    CHECK(reports.back().recall == 1.0);

    // Renaming cids changes nothing.
    auto renamed = rs;
    for (auto& r : renamed) {
        std::set<std::string> rel;
        for (auto& c : r.ordered_cids) {
            const bool was = r.relevant_cids.count(c) != 0;
            c = "zz-" + c + "-x";
            if (was) {
                rel.insert(c);
            }
        }
        r.relevant_cids = rel;
    }
    const auto again = compute_metrics(renamed, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        CHECK(again[i].precision == reports[i].precision);
        CHECK(again[i].recall == reports[i].recall);
        CHECK(again[i].mrr == reports[i].mrr);
    }
    CHECK_THROWS_AS(compute_metrics(std::vector{ranking({"a"}, {})}, ks), DataError);
}

TEST_CASE("oracle and anti-oracle models") {
    const auto toy = toy_eval();
    auto model = rerank::RerankerModel::zeros(2, 2);
    model.w(0, 0) = 1.0;
    model.w(1, 1) = -1.0;
    const std::vector<std::size_t> ks{1, 2};
    const auto good = evaluate_reranker(model, toy.prefs, toy.corpus, ks);
    CHECK(good[0].precision == 1.0);
    CHECK(good[0].mrr == 1.0);

    model.w(0, 0) = -1.0;
    model.w(1, 1) = 1.0;
    // Each query has at least 4 negatives, so the top 2 are all negatives.
    const auto bad = evaluate_reranker(model, toy.prefs, toy.corpus, ks);
    CHECK(bad[0].precision == 0.0);
    CHECK(bad[1].precision == 0.0);
    CHECK(bad[1].mrr == 0.0);

    auto broken = toy.prefs;
    broken[0].positives.push_back("missing");
    broken[0].inc_scores["missing"] = 0.3;
    CHECK_THROWS_AS(evaluate_reranker(model, broken, toy.corpus, ks), DataError);
}

TEST_CASE("metric report JSON round-trip") {
    std::vector<MetricReport> reports{{1, 0.5, 0.25, 0.5, 10}, {3, 0.4, 0.75, 0.6, 10}};
    const auto doc = metric_reports_to_json(reports, "prefs.eval.jsonl", "reranker.ckpt.json");
    CHECK(doc.at("dataset") == "prefs.eval.jsonl");
    const auto back = metric_reports_from_json(doc);
    REQUIRE(back.size() == 2);
    CHECK(back[1].k == 3);
    CHECK(back[1].recall == 0.75);
    CHECK(back[0].n_queries == 10);
    CHECK_THROWS_AS(metric_reports_from_json(Json::object()), DataError);
}
