#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "confgate/numeric/dense.hpp"

namespace confgate::data {

using numeric::DenseVector;

inline constexpr std::string_view kMidLayer = "mid_layer";
inline constexpr std::string_view kPreToken = "pre_token";

// Closed vocabularies for where an activation was captured. mid_layer and
// pre_token load cleanly; the other known values load with a warning.
bool is_known_layer_position(std::string_view value);
bool is_known_token_position(std::string_view value);

struct HiddenStateMeta {
    std::string model_id;
    std::size_t dim = 0;
    std::string layer_position{kMidLayer};
    std::string token_position{kPreToken};
    std::string created_at;

    // "<model_id>:<dim>", embedded in probe checkpoints.
    std::string fingerprint() const;

    friend bool operator==(const HiddenStateMeta&, const HiddenStateMeta&) = default;
};

// cid absent: query-only state. cid present: state for query + that context.
struct HiddenStateRecord {
    std::string qid;
    std::optional<std::string> cid;
    std::optional<int> label;
    DenseVector vec;

    bool is_query_only() const noexcept { return !cid.has_value(); }

    friend bool operator==(const HiddenStateRecord&, const HiddenStateRecord&) = default;
};

struct HiddenStates {
    HiddenStateMeta meta;
    std::vector<HiddenStateRecord> records;
    std::vector<std::string> warnings;
};

// Throws DataError on a record whose length differs from meta.dim, a label
// outside {0,1}, or a duplicate (qid, cid).
void validate_records(const HiddenStateMeta& meta, std::span<const HiddenStateRecord> records);

/// Lookup over a hidden-state set by qid. Holds a reference; the states
/// must outlive the index.
class StateIndex {
public:
    explicit StateIndex(const HiddenStates& states);

    const HiddenStates& states() const noexcept { return *states_; }

    // nullptr when the qid has no query-only record.
    const HiddenStateRecord* query_state(std::string_view qid) const;

    // Context records for qid in file order.
    std::vector<const HiddenStateRecord*> context_states(std::string_view qid) const;

    // Distinct qids in order of first appearance.
    const std::vector<std::string>& qids() const noexcept { return qids_; }

private:
    struct Entry {
        std::optional<std::size_t> query_only;
        std::vector<std::size_t> contexts;
    };
    const HiddenStates* states_;
    std::unordered_map<std::string, Entry> entries_;
    std::vector<std::string> qids_;
};

struct CorpusContext {
    std::string cid;
    DenseVector context_features;
    int gold_helpful = 0;

    friend bool operator==(const CorpusContext&, const CorpusContext&) = default;
};

// parametric_known and gold_helpful are simulation ground truth. Only the
// answer oracle and evaluation code read them.
struct CorpusItem {
    std::string qid;
    DenseVector query_features;
    int parametric_known = 0;
    std::vector<CorpusContext> contexts;

    const CorpusContext* find(std::string_view cid) const;

    friend bool operator==(const CorpusItem&, const CorpusItem&) = default;
};

struct CorpusMeta {
    std::size_t query_dim = 0;
    std::size_t context_dim = 0;

    friend bool operator==(const CorpusMeta&, const CorpusMeta&) = default;
};

class Corpus {
public:
    Corpus() = default;
    // Validates: unique qids, >= 1 context each, unique cids per query,
    // feature dims equal to meta.
    Corpus(CorpusMeta meta, std::vector<CorpusItem> items);

    const CorpusMeta& meta() const noexcept { return meta_; }
    const std::vector<CorpusItem>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }

    const CorpusItem* find(std::string_view qid) const;
    const CorpusItem& at(std::string_view qid) const;

    friend bool operator==(const Corpus& a, const Corpus& b) {
        return a.meta_ == b.meta_ && a.items_ == b.items_;
    }

private:
    CorpusMeta meta_;
    std::vector<CorpusItem> items_;
    std::unordered_map<std::string, std::size_t> by_qid_;
};

struct PreferenceExample {
    std::string qid;
    std::vector<std::string> positives;
    std::vector<std::string> negatives;
    std::map<std::string, double> inc_scores;

    // Disjoint sides, an inc score for every listed cid, positives > 0 >
    // negatives, and 1 <= |side| <= k.
    void validate(std::size_t k) const;

    friend bool operator==(const PreferenceExample&, const PreferenceExample&) = default;
};

} // namespace confgate::data
