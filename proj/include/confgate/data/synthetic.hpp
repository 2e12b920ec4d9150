#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "confgate/data/records.hpp"

namespace confgate::data {

struct SyntheticConfig {
    std::size_t n_queries = 2000;
    std::size_t n_contexts_per_query = 10;
    std::size_t dim = 64;           // hidden-state space
    std::size_t feature_dim = 16;   // query/context feature space
    double helpful_fraction = 0.3;
    double known_fraction = 0.5;
    double noise_sigma = 1.0;
    double feature_margin = 1.0;    // min |planted bilinear score| per context
    std::uint64_t seed = 7;
    std::string model_id = "synthetic-world-v1";
};

struct SyntheticWorld {
    HiddenStateMeta meta;
    std::vector<HiddenStateRecord> records;
    Corpus corpus;
};

/// Builds a labelled world that stands in for LLM activations:
///  * two anchors mu_known = +2 sigma u, mu_unknown = -2 sigma u (|u| = 1),
///    so the anchors sit 4 sigma apart;
///  * H(q) ~ N(mu_known or mu_unknown, sigma^2 I) by parametric_known, and
///    label = parametric_known;
///  * H(q + c) ~ N(mu_known, .) for helpful contexts, N(mu_unknown, .) otherwise;
///  * features come from a planted bilinear form W*: the context feature is
///    pushed along W*^T q by +/-(margin + |noise|), so sign(q^T W* c) equals
///    gold_helpful.
/// When helpful_fraction is in (0,1) and there are >= 4 contexts per query,
/// each query gets at least one helpful and one unhelpful context.
/// Vectors are rounded to float32 so the in-memory world equals its files.
SyntheticWorld generate_synthetic_world(const SyntheticConfig& config);

} // namespace confgate::data
