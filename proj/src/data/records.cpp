#include "confgate/data/records.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>
#include <utility>

#include "confgate/errors.hpp"

namespace confgate::data {

bool is_known_layer_position(std::string_view value) {
    return value == kMidLayer || value == "last_layer" || value == "custom";
}

bool is_known_token_position(std::string_view value) {
    return value == kPreToken || value == "last_prompt_token" || value == "custom";
}

std::string HiddenStateMeta::fingerprint() const {
    return model_id + ":" + std::to_string(dim);
}

namespace {

std::string record_key(const HiddenStateRecord& r) {
    // '\x1f' cannot appear in a qid that round-trips through the formats.
    return r.qid + '\x1f' + (r.cid ? "c:" + *r.cid : std::string("q"));
}

std::string describe(const HiddenStateRecord& r) {
    return "(qid=" + r.qid + ", cid=" + (r.cid ? *r.cid : std::string("null")) + ")";
}

} // namespace

void validate_records(const HiddenStateMeta& meta, std::span<const HiddenStateRecord> records) {
    std::unordered_set<std::string> seen;
    seen.reserve(records.size());
    for (const auto& r : records) {
        if (r.qid.empty()) {
            throw DataError("record with empty qid");
        }
        if (r.vec.size() != meta.dim) {
            throw DataError("record " + describe(r) + " has vector length " +
                            std::to_string(r.vec.size()) + ", meta.dim is " +
                            std::to_string(meta.dim));
        }
        if (r.label && *r.label != 0 && *r.label != 1) {
            throw DataError("record " + describe(r) + " has a label outside {0,1}");
        }
        if (!seen.insert(record_key(r)).second) {
            throw DataError("duplicate record " + describe(r));
        }
    }
}

StateIndex::StateIndex(const HiddenStates& states) : states_(&states) {
    for (std::size_t i = 0; i < states.records.size(); ++i) {
        const auto& r = states.records[i];
        auto [it, inserted] = entries_.try_emplace(r.qid);
        if (inserted) {
            qids_.push_back(r.qid);
        }
        if (r.is_query_only()) {
            if (it->second.query_only) {
                throw DataError("duplicate query-only state for qid " + r.qid);
            }
            it->second.query_only = i;
        } else {
            it->second.contexts.push_back(i);
        }
    }
}

const HiddenStateRecord* StateIndex::query_state(std::string_view qid) const {
    const auto it = entries_.find(std::string(qid));
    if (it == entries_.end() || !it->second.query_only) {
        return nullptr;
    }
    return &states_->records[*it->second.query_only];
}

std::vector<const HiddenStateRecord*> StateIndex::context_states(std::string_view qid) const {
    std::vector<const HiddenStateRecord*> out;
    const auto it = entries_.find(std::string(qid));
    if (it != entries_.end()) {
        out.reserve(it->second.contexts.size());
        for (const std::size_t i : it->second.contexts) {
            out.push_back(&states_->records[i]);
        }
    }
    return out;
}

const CorpusContext* CorpusItem::find(std::string_view cid) const {
    for (const auto& c : contexts) {
        if (c.cid == cid) {
            return &c;
        }
    }
    return nullptr;
}

Corpus::Corpus(CorpusMeta meta, std::vector<CorpusItem> items)
    : meta_(meta), items_(std::move(items)) {
    if (meta_.query_dim == 0 || meta_.context_dim == 0) {
        throw DataError("corpus: feature dimensions must be positive");
    }
    by_qid_.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& item = items_[i];
        if (item.qid.empty()) {
            throw DataError("corpus: item with empty qid");
        }
        if (!by_qid_.emplace(item.qid, i).second) {
            throw DataError("corpus: duplicate qid " + item.qid);
        }
        if (item.query_features.size() != meta_.query_dim) {
            throw DataError("corpus: qid " + item.qid + " has query feature length " +
                            std::to_string(item.query_features.size()) + ", expected " +
                            std::to_string(meta_.query_dim));
        }
        if (item.parametric_known != 0 && item.parametric_known != 1) {
            throw DataError("corpus: qid " + item.qid + " has parametric_known outside {0,1}");
        }
        if (item.contexts.empty()) {
            throw DataError("corpus: qid " + item.qid + " has no contexts");
        }
        std::unordered_set<std::string> cids;
        for (const auto& c : item.contexts) {
            if (c.cid.empty() || !cids.insert(c.cid).second) {
                throw DataError("corpus: qid " + item.qid + " has an empty or duplicate cid '" +
                                c.cid + "'");
            }
            if (c.context_features.size() != meta_.context_dim) {
                throw DataError("corpus: " + item.qid + "/" + c.cid +
                                " has context feature length " +
                                std::to_string(c.context_features.size()) + ", expected " +
                                std::to_string(meta_.context_dim));
            }
            if (c.gold_helpful != 0 && c.gold_helpful != 1) {
                throw DataError("corpus: " + item.qid + "/" + c.cid +
                                " has gold_helpful outside {0,1}");
            }
        }
    }
}

const CorpusItem* Corpus::find(std::string_view qid) const {
    const auto it = by_qid_.find(std::string(qid));
    return it == by_qid_.end() ? nullptr : &items_[it->second];
}

const CorpusItem& Corpus::at(std::string_view qid) const {
    const auto* item = find(qid);
    if (item == nullptr) {
        throw DataError("corpus has no qid " + std::string(qid));
    }
    return *item;
}

void PreferenceExample::validate(std::size_t k) const {
    const auto where = [&] { return "preference example " + qid + ": "; };
    if (positives.empty() || positives.size() > k || negatives.empty() || negatives.size() > k) {
        throw DataError(where() + "each side must hold between 1 and " + std::to_string(k) +
                        " contexts");
    }
    std::set<std::string> pos(positives.begin(), positives.end());
    std::set<std::string> neg(negatives.begin(), negatives.end());
    if (pos.size() != positives.size() || neg.size() != negatives.size()) {
        throw DataError(where() + "duplicate cid within a side");
    }
    for (const auto& cid : positives) {
        if (neg.count(cid) != 0) {
            throw DataError(where() + "cid " + cid + " is both positive and negative");
        }
        const auto it = inc_scores.find(cid);
        if (it == inc_scores.end() || !(it->second > 0.0)) {
            throw DataError(where() + "positive " + cid + " lacks a positive inc score");
        }
    }
    for (const auto& cid : negatives) {
        const auto it = inc_scores.find(cid);
        if (it == inc_scores.end() || !(it->second < 0.0)) {
            throw DataError(where() + "negative " + cid + " lacks a negative inc score");
        }
    }
    if (inc_scores.size() != positives.size() + negatives.size()) {
        throw DataError(where() + "inc_scores lists cids outside the two sides");
    }
}

} // namespace confgate::data
