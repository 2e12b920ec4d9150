#include <doctest.h>

#include <random>

#include "confgate/data/formats.hpp"
#include "confgate/data/synthetic.hpp"
#include "confgate/errors.hpp"
#include "confgate/json_io.hpp"
#include "oracles/brute_force.hpp"
#include "test_util.hpp"

using namespace confgate;
using namespace confgate::data;
using confgate::AtomicFileWriter;
using testutil::slurp;
using testutil::spit;
using testutil::TempDir;

namespace {

HiddenStateMeta small_meta() {
    HiddenStateMeta m;
    m.model_id = "tiny";
    m.dim = 3;
    m.created_at = "2024-01-01T00:00:00Z";
    return m;
}

std::vector<HiddenStateRecord> small_records() {
    return {
        {"q1", std::nullopt, 1, DenseVector({0.1, -0.2, 0.3})},
        {"q1", std::string("c0"), std::nullopt, DenseVector({1.5, 2.0, -3.25})},
        {"q2", std::nullopt, 0, DenseVector({1e-7, 123456.0, 0.0})},
    };
}

} // namespace

TEST_CASE("hidden states round-trip and rewrite byte-identically") {
    TempDir dir;
    const auto meta = small_meta();
    // Values representable in float32 survive exactly.
    std::vector<HiddenStateRecord> records = small_records();
    for (auto& r : records) {
        r.vec = DenseVector(quantize_f32(r.vec.view()));
    }
    write_hidden_states(dir / "a.hsr.jsonl", meta, records);
    const auto back = read_hidden_states(dir / "a.hsr.jsonl");
    CHECK(back.meta == meta);
    CHECK(back.records == records);
    CHECK(back.warnings.empty());

    write_hidden_states(dir / "b.hsr.jsonl", back.meta, back.records);
    CHECK(slurp(dir / "a.hsr.jsonl") == slurp(dir / "b.hsr.jsonl"));
}

TEST_CASE("unquantized values are stored as float32 and then stay fixed") {
    TempDir dir;
    write_hidden_states(dir / "a.jsonl", small_meta(), small_records());
    const auto once = read_hidden_states(dir / "a.jsonl");
    CHECK(once.records[0].vec[0] == static_cast<double>(0.1f));
    write_hidden_states(dir / "b.jsonl", once.meta, once.records);
    CHECK(read_hidden_states(dir / "b.jsonl").records == once.records);
}

TEST_CASE("empty record list writes the meta line only") {
    TempDir dir;
    write_hidden_states(dir / "e.jsonl", small_meta(), {});
    const auto text = slurp(dir / "e.jsonl");
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    CHECK(text.find("\"format_version\":1") != std::string::npos);
    CHECK(read_hidden_states(dir / "e.jsonl").records.empty());
}

TEST_CASE("reader errors name the offending line") {
    TempDir dir;
    const std::string meta = hidden_state_meta_line(small_meta());

    spit(dir / "len.jsonl", meta + "\n" + R"({"qid":"q1","cid":null,"label":1,"vec":[1,2,3]})" +
                                "\n" + R"({"qid":"q2","cid":null,"label":1,"vec":[1,2]})" + "\n");
    try {
        read_hidden_states(dir / "len.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("len.jsonl:3") != std::string::npos);
    }

    spit(dir / "bad.jsonl", meta + "\n{\"qid\": \n");
    try {
        read_hidden_states(dir / "bad.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("bad.jsonl:2") != std::string::npos);
    }

    spit(dir / "dup.jsonl", meta + "\n" + R"({"qid":"q1","cid":"c","label":null,"vec":[1,2,3]})" +
                                "\n" + R"({"qid":"q1","cid":"c","label":null,"vec":[1,2,3]})" +
                                "\n");
    CHECK_THROWS_AS(read_hidden_states(dir / "dup.jsonl"), DataError);

    spit(dir / "label.jsonl",
         meta + "\n" + R"({"qid":"q1","cid":null,"label":2,"vec":[1,2,3]})" + "\n");
    CHECK_THROWS_AS(read_hidden_states(dir / "label.jsonl"), DataError);

    spit(dir / "empty.jsonl", "");
    CHECK_THROWS_AS(read_hidden_states(dir / "empty.jsonl"), DataError);
    CHECK_THROWS_AS(read_hidden_states(dir / "missing.jsonl"), DataError);
}

TEST_CASE("position vocabulary: default positions clean, others warn, unknown rejected") {
    TempDir dir;
    auto meta = small_meta();
    meta.layer_position = "last_layer";
    write_hidden_states(dir / "w.jsonl", meta, {});
    const auto warned = read_hidden_states(dir / "w.jsonl");
    CHECK(warned.warnings.size() == 1);

    meta.layer_position = "mid_layer";
    meta.token_position = "somewhere";
    spit(dir / "u.jsonl", hidden_state_meta_line(meta) + "\n");
    CHECK_THROWS_AS(read_hidden_states(dir / "u.jsonl"), DataError);
}

TEST_CASE("completeness marker is accepted and its count enforced") {
    TempDir dir;
    const auto meta = small_meta();
    std::string body = hidden_state_meta_line(meta) + "\n";
    for (const auto& r : small_records()) {
        body += hidden_state_record_line(r) + "\n";
    }
    spit(dir / "ok.jsonl", body + R"({"complete":true,"n_records":3})" + "\n");
    CHECK(read_hidden_states(dir / "ok.jsonl").records.size() == 3);

    spit(dir / "count.jsonl", body + R"({"complete":true,"n_records":4})" + "\n");
    CHECK_THROWS_AS(read_hidden_states(dir / "count.jsonl"), DataError);

    spit(dir / "partial.jsonl", body + R"({"complete":false,"n_records":3})" + "\n");
    CHECK_THROWS_AS(read_hidden_states(dir / "partial.jsonl"), DataError);

    spit(dir / "after.jsonl", body + R"({"complete":true,"n_records":3})" + "\n" +
                                  hidden_state_record_line(small_records()[0]) + "\n");
    CHECK_THROWS_AS(read_hidden_states(dir / "after.jsonl"), DataError);
}

TEST_CASE("StateIndex lookups") {
    HiddenStates hs{small_meta(), small_records(), {}};
    const StateIndex index(hs);
    CHECK(index.qids() == std::vector<std::string>{"q1", "q2"});
    REQUIRE(index.query_state("q1") != nullptr);
    CHECK(index.query_state("q1")->label == 1);
    CHECK(index.query_state("nope") == nullptr);
    CHECK(index.context_states("q1").size() == 1);
    CHECK(index.context_states("q2").empty());
}

TEST_CASE("corpus and preferences round-trip") {
    TempDir dir;
    CorpusItem item{"q1", DenseVector({1.0, 0.5}), 1,
                    {{"c0", DenseVector({0.25, -1.0, 2.0}), 1},
                     {"c1", DenseVector({0.0, 0.0, 1.0}), 0}}};
    const Corpus corpus({2, 3}, {item});
    write_corpus(dir / "x.corpus.jsonl", corpus);
    const auto back = read_corpus(dir / "x.corpus.jsonl");
    CHECK(back == corpus);
    write_corpus(dir / "y.corpus.jsonl", back);
    CHECK(slurp(dir / "x.corpus.jsonl") == slurp(dir / "y.corpus.jsonl"));

    PreferenceExample ex{"q1", {"c0"}, {"c1"}, {{"c0", 0.5}, {"c1", -0.25}}};
    write_preferences(dir / "p.jsonl", std::vector{ex}, 5);
    const auto pf = read_preferences(dir / "p.jsonl");
    CHECK(pf.k == 5);
    REQUIRE(pf.examples.size() == 1);
    CHECK(pf.examples[0] == ex);
}

TEST_CASE("corpus and preference invariants are enforced") {
    CHECK_THROWS_AS(Corpus({2, 2}, {{"q", DenseVector({1.0, 2.0}), 0, {}}}), DataError);
    CHECK_THROWS_AS(Corpus({2, 2},
                           {{"q", DenseVector({1.0, 2.0}), 0,
                             {{"c", DenseVector({1.0, 2.0}), 0}, {"c", DenseVector({1.0, 2.0}), 1}}}}),
                    DataError);
    CHECK_THROWS_AS(Corpus({2, 2}, {{"q", DenseVector({1.0}), 0, {{"c", DenseVector({1.0, 2.0}), 0}}}}),
                    DataError);

    PreferenceExample overlap{"q", {"a"}, {"a"}, {{"a", 0.1}}};
    CHECK_THROWS_AS(overlap.validate(5), DataError);
    PreferenceExample sign{"q", {"a"}, {"b"}, {{"a", -0.1}, {"b", -0.2}}};
    CHECK_THROWS_AS(sign.validate(5), DataError);
    PreferenceExample missing{"q", {"a"}, {"b"}, {{"a", 0.1}}};
    CHECK_THROWS_AS(missing.validate(5), DataError);
    PreferenceExample too_many{"q", {"a", "b"}, {"c"}, {{"a", 0.1}, {"b", 0.2}, {"c", -0.1}}};
    CHECK_THROWS_AS(too_many.validate(1), DataError);
    PreferenceExample ok{"q", {"a", "b"}, {"c"}, {{"a", 0.1}, {"b", 0.2}, {"c", -0.1}}};
    CHECK_NOTHROW(ok.validate(2));
}

TEST_CASE("synthetic world is a pure function of its config") {
    TempDir dir;
    SyntheticConfig cfg;
    cfg.n_queries = 200;
    const auto a = generate_synthetic_world(cfg);
    const auto b = generate_synthetic_world(cfg);
    CHECK(a.records == b.records);
    CHECK(a.corpus == b.corpus);
    write_hidden_states(dir / "a.jsonl", a.meta, a.records);
    write_hidden_states(dir / "b.jsonl", b.meta, b.records);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));

    // The in-memory world already equals what is read back from disk.
    CHECK(read_hidden_states(dir / "a.jsonl").records == a.records);

    cfg.seed = 8;
    CHECK_FALSE(generate_synthetic_world(cfg).records == a.records);
}

TEST_CASE("synthetic world shape and guarantees") {
    SyntheticConfig cfg;
    cfg.n_queries = 300;
    const auto w = generate_synthetic_world(cfg);
    CHECK(w.meta.dim == cfg.dim);
    CHECK(w.meta.layer_position == "mid_layer");
    CHECK(w.meta.token_position == "pre_token");
    CHECK(w.records.size() == cfg.n_queries * (1 + cfg.n_contexts_per_query));
    CHECK(w.corpus.size() == cfg.n_queries);
    for (const auto& item : w.corpus.items()) {
        int helpful = 0;
        for (const auto& c : item.contexts) {
            helpful += c.gold_helpful;
        }
        REQUIRE(helpful >= 1);
        REQUIRE(helpful < static_cast<int>(item.contexts.size()));
    }
    // Query-only labels mirror parametric knowledge.
    const HiddenStates hs{w.meta, w.records, {}};
    const StateIndex index(hs);
    for (const auto& item : w.corpus.items()) {
        REQUIRE(index.query_state(item.qid)->label == item.parametric_known);
    }
}

TEST_CASE("synthetic config edge cases") {
    SyntheticConfig cfg;
    cfg.n_queries = 50;
    cfg.known_fraction = 1.0;
    for (const auto& r : generate_synthetic_world(cfg).records) {
        if (r.is_query_only()) {
            REQUIRE(r.label == 1);
        }
    }
    cfg.dim = 7;
    CHECK_THROWS_AS(generate_synthetic_world(cfg), DataError);
    cfg.dim = 64;
    cfg.noise_sigma = 0.0;
    CHECK_THROWS_AS(generate_synthetic_world(cfg), DataError);
    cfg.noise_sigma = 1.0;
    cfg.helpful_fraction = 1.5;
    CHECK_THROWS_AS(generate_synthetic_world(cfg), DataError);
}

TEST_CASE("a linear classifier separates the default world's query states") {
    SyntheticConfig cfg; // n_queries 2000, dim 64, sigma 1
    const auto w = generate_synthetic_world(cfg);
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (const auto& r : w.records) {
        if (r.is_query_only()) {
            xs.push_back(r.vec.values());
            ys.push_back(*r.label);
        }
    }
    const std::size_t n_train = xs.size() * 7 / 10;
    oracle::NearestCentroid clf;
    clf.fit({xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(n_train)},
            {ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(n_train)});
    std::size_t correct = 0;
    for (std::size_t i = n_train; i < xs.size(); ++i) {
        correct += clf.predict(xs[i]) == ys[i] ? 1 : 0;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(xs.size() - n_train);
    MESSAGE("nearest-centroid held-out accuracy " << acc);
    CHECK(acc >= 0.95);
}

TEST_CASE("context helpfulness is linearly recoverable from features") {
    SyntheticConfig cfg;
    const auto w = generate_synthetic_world(cfg);
    // Nearest centroid on the outer product q c^T, which is linear in the
    // bilinear form's parameters.
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (const auto& item : w.corpus.items()) {
        for (const auto& c : item.contexts) {
            std::vector<double> outer;
            for (const double qv : item.query_features.values()) {
                for (const double cv : c.context_features.values()) {
                    outer.push_back(qv * cv);
                }
            }
            xs.push_back(std::move(outer));
            ys.push_back(c.gold_helpful);
        }
    }
    const std::size_t n_train = xs.size() * 7 / 10;
    oracle::NearestCentroid clf;
    clf.fit({xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(n_train)},
            {ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(n_train)});
    std::size_t correct = 0;
    for (std::size_t i = n_train; i < xs.size(); ++i) {
        correct += clf.predict(xs[i]) == ys[i] ? 1 : 0;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(xs.size() - n_train);
    MESSAGE("outer-product nearest-centroid accuracy " << acc);
    CHECK(acc >= 0.85);
}

TEST_CASE("atomic writer leaves no temp file behind") {
    TempDir dir;
    {
        AtomicFileWriter w(dir / "sub" / "f.txt");
        w.write_line("hello");
        // Dropped without commit.
    }
    CHECK_FALSE(std::filesystem::exists(dir / "sub" / "f.txt"));
    write_text_atomic(dir / "sub" / "g.txt", "x\n");
    CHECK(slurp(dir / "sub" / "g.txt") == "x\n");
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "sub")) {
        ++n;
    }
    CHECK(n == 1);
}
