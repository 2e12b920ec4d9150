#include "confgate/prefs/preferences.hpp"

#include <algorithm>
#include <cmath>

#include "confgate/errors.hpp"
#include "confgate/numeric/rng.hpp"

namespace confgate::prefs {

IncTable compute_inc(const probe::ProbeModel& model, const data::StateIndex& states,
                     std::string_view qid) {
    const auto* base = states.query_state(qid);
    if (base == nullptr) {
        throw DataError("no query-only state for qid " + std::string(qid));
    }
    IncTable table;
    table.qid = std::string(qid);
    table.base_conf = probe::conf(model, base->vec.view());
    for (const auto* r : states.context_states(qid)) {
        const double aug = probe::conf(model, r->vec.view());
        table.per_context.push_back({*r->cid, aug, aug - table.base_conf});
    }
    return table;
}

namespace {

std::vector<std::string> qids_with_contexts(const data::StateIndex& states) {
    std::vector<std::string> out;
    for (const auto& qid : states.qids()) {
        if (!states.context_states(qid).empty()) {
            out.push_back(qid);
        }
    }
    return out;
}

} // namespace

std::vector<IncTable> compute_inc_all(const probe::ProbeModel& model,
                                      const data::StateIndex& states, const Parallelism& par) {
    const auto qids = qids_with_contexts(states);
    std::vector<IncTable> tables(qids.size());
    parallel_for(qids.size(), par,
                 [&](std::size_t i) { tables[i] = compute_inc(model, states, qids[i]); });
    return tables;
}

std::vector<IncTable> compute_inc_all_serial(const probe::ProbeModel& model,
                                             const data::StateIndex& states) {
    std::vector<IncTable> tables;
    for (const auto& qid : qids_with_contexts(states)) {
        tables.push_back(compute_inc(model, states, qid));
    }
    return tables;
}

BuildResult build_preferences(std::span<const IncTable> tables, std::size_t k) {
    if (k == 0) {
        throw DataError("build_preferences: k must be at least 1");
    }
    BuildResult result;
    result.stats.n_in = tables.size();

    for (const auto& table : tables) {
        std::vector<const IncEntry*> pos;
        std::vector<const IncEntry*> neg;
        for (const auto& e : table.per_context) {
            if (e.inc > 0.0) {
                pos.push_back(&e);
            } else if (e.inc < 0.0) {
                neg.push_back(&e);
            }
        }
        if (pos.empty()) {
            result.stats.n_dropped_no_pos += 1;
            continue;
        }
        if (neg.empty()) {
            result.stats.n_dropped_no_neg += 1;
            continue;
        }

        std::sort(pos.begin(), pos.end(), [](const IncEntry* a, const IncEntry* b) {
            return a->inc != b->inc ? a->inc > b->inc : a->cid < b->cid;
        });
        std::sort(neg.begin(), neg.end(), [](const IncEntry* a, const IncEntry* b) {
            return a->inc != b->inc ? a->inc < b->inc : a->cid < b->cid;
        });
        pos.resize(std::min(k, pos.size()));
        neg.resize(std::min(k, neg.size()));

        data::PreferenceExample ex;
        ex.qid = table.qid;
        for (const auto* e : pos) {
            ex.positives.push_back(e->cid);
            ex.inc_scores[e->cid] = e->inc;
        }
        for (const auto* e : neg) {
            ex.negatives.push_back(e->cid);
            ex.inc_scores[e->cid] = e->inc;
        }
        result.examples.push_back(std::move(ex));
    }
    result.stats.n_kept = result.examples.size();
    return result;
}

PreferenceSplit split_preferences(std::span<const data::PreferenceExample> examples,
                                  double eval_fraction, std::uint64_t seed) {
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
        throw DataError("split_preferences: eval_fraction must lie in (0, 1)");
    }
    if (examples.size() < 2) {
        throw DataError("split_preferences: need at least 2 examples");
    }
    const std::size_t n = examples.size();
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        keyed.emplace_back(numeric::stable_hash(examples[i].qid, seed), i);
    }
    std::sort(keyed.begin(), keyed.end());

    auto n_eval = static_cast<std::size_t>(std::llround(static_cast<double>(n) * eval_fraction));
    n_eval = std::clamp<std::size_t>(n_eval, 1, n - 1);
    std::vector<bool> to_eval(n, false);
    for (std::size_t j = 0; j < n_eval; ++j) {
        to_eval[keyed[j].second] = true;
    }

    PreferenceSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        (to_eval[i] ? split.eval : split.train).push_back(examples[i]);
    }
    return split;
}

} // namespace confgate::prefs
