#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confgate/data/records.hpp"
#include "confgate/parallel.hpp"
#include "confgate/probe/probe.hpp"

namespace confgate::prefs {

struct IncEntry {
    std::string cid;
    double aug_conf = 0.0;
    double inc = 0.0; // aug_conf - base_conf
};

struct IncTable {
    std::string qid;
    double base_conf = 0.0;
    std::vector<IncEntry> per_context; // hidden-state file order
};

/// Confidence shift of every context for one query:
///   inc(c) = Conf(H(q + c)) - Conf(H(q)).
/// Throws DataError("no query-only state ...") when qid has no context-free
/// record.
IncTable compute_inc(const probe::ProbeModel& model, const data::StateIndex& states,
                     std::string_view qid);

// One table per qid with contexts, in StateIndex::qids() order. Queries
// without any context record are skipped.
std::vector<IncTable> compute_inc_all(const probe::ProbeModel& model,
                                      const data::StateIndex& states, const Parallelism& par);
std::vector<IncTable> compute_inc_all_serial(const probe::ProbeModel& model,
                                             const data::StateIndex& states);

struct BuildStats {
    std::size_t n_in = 0;
    std::size_t n_kept = 0;
    std::size_t n_dropped_no_pos = 0; // includes queries lacking both sides
    std::size_t n_dropped_no_neg = 0;
};

struct BuildResult {
    std::vector<data::PreferenceExample> examples;
    BuildStats stats;
};

/// Positives: up to k contexts with the largest inc, restricted to inc > 0.
/// Negatives: up to k contexts with the smallest inc, restricted to inc < 0.
/// inc == 0 lands in neither. Equal inc values order by ascending cid.
/// Queries without at least one positive and one negative are dropped and
/// counted.
BuildResult build_preferences(std::span<const IncTable> tables, std::size_t k = 5);

struct PreferenceSplit {
    std::vector<data::PreferenceExample> train;
    std::vector<data::PreferenceExample> eval;
};

inline constexpr double kDefaultEvalFraction = 0.14;

/// Orders examples by a seeded qid hash and sends the first
/// round(n * eval_fraction) (clamped to [1, n-1]) to eval. Input order is
/// kept within each side.
PreferenceSplit split_preferences(std::span<const data::PreferenceExample> examples,
                                  double eval_fraction, std::uint64_t seed);

} // namespace confgate::prefs
