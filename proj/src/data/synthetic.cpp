#include "confgate/data/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "confgate/errors.hpp"
#include "confgate/json_io.hpp"
#include "confgate/numeric/rng.hpp"

namespace confgate::data {

namespace {

using numeric::Rng;

std::vector<double> gaussian(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) {
        x = rng.normal();
    }
    return v;
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

std::vector<double> around(Rng& rng, const std::vector<double>& mean, double sigma) {
    std::vector<double> v(mean.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = rng.normal(mean[i], sigma);
    }
    return v;
}

DenseVector to_f32_vector(const std::vector<double>& v) {
    return DenseVector(quantize_f32(v));
}

std::string padded_id(char prefix, std::size_t i, std::size_t width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, static_cast<int>(width), i);
    return buf;
}

std::size_t digits(std::size_t n) {
    std::size_t d = 1;
    while (n >= 10) {
        n /= 10;
        ++d;
    }
    return d;
}

void validate(const SyntheticConfig& c) {
    if (c.n_queries == 0 || c.n_contexts_per_query == 0 || c.feature_dim == 0) {
        throw DataError("synthetic: counts and feature_dim must be positive");
    }
    if (c.dim < 8) {
        throw DataError("synthetic: dim must be at least 8");
    }
    if (!(c.helpful_fraction >= 0.0 && c.helpful_fraction <= 1.0) ||
        !(c.known_fraction >= 0.0 && c.known_fraction <= 1.0)) {
        throw DataError("synthetic: fractions must lie in [0, 1]");
    }
    if (!(c.noise_sigma > 0.0) || !(c.feature_margin > 0.0)) {
        throw DataError("synthetic: noise_sigma and feature_margin must be positive");
    }
}

} // namespace

SyntheticWorld generate_synthetic_world(const SyntheticConfig& config) {
    validate(config);
    Rng rng(config.seed);
    const double sigma = config.noise_sigma;

    // Anchors 4 sigma apart along a random unit direction.
    std::vector<double> direction = gaussian(rng, config.dim);
    const double dnorm = norm(direction);
    std::vector<double> mu_known(config.dim);
    std::vector<double> mu_unknown(config.dim);
    for (std::size_t i = 0; i < config.dim; ++i) {
        const double u = direction[i] / dnorm;
        mu_known[i] = 2.0 * sigma * u;
        mu_unknown[i] = -2.0 * sigma * u;
    }

    // Planted bilinear relevance form.
    const std::size_t fd = config.feature_dim;
    std::vector<double> planted(fd * fd);
    for (double& w : planted) {
        w = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(fd)));
    }

    const bool force_mixed = config.helpful_fraction > 0.0 && config.helpful_fraction < 1.0 &&
                             config.n_contexts_per_query >= 4;

    SyntheticWorld world;
    world.meta.model_id = config.model_id;
    world.meta.dim = config.dim;
    world.meta.layer_position = std::string(kMidLayer);
    world.meta.token_position = std::string(kPreToken);
    world.meta.created_at = "1970-01-01T00:00:00Z";

    const std::size_t qwidth = digits(config.n_queries - 1);
    const std::size_t cwidth = digits(config.n_contexts_per_query - 1);
    std::vector<CorpusItem> items;
    items.reserve(config.n_queries);
    world.records.reserve(config.n_queries * (1 + config.n_contexts_per_query));

    for (std::size_t qi = 0; qi < config.n_queries; ++qi) {
        const std::string qid = padded_id('q', qi, qwidth);
        const int known = rng.bernoulli(config.known_fraction) ? 1 : 0;

        world.records.push_back(
            {qid, std::nullopt, known, to_f32_vector(around(rng, known ? mu_known : mu_unknown, sigma))});

        std::vector<int> helpful(config.n_contexts_per_query);
        for (;;) {
            int n_helpful = 0;
            for (int& h : helpful) {
                h = rng.bernoulli(config.helpful_fraction) ? 1 : 0;
                n_helpful += h;
            }
            const auto n = static_cast<int>(helpful.size());
            if (!force_mixed || (n_helpful > 0 && n_helpful < n)) {
                break;
            }
        }

        // v = W*^T q / |W*^T q|; helpful contexts lie on the positive side.
        const std::vector<double> q = quantize_f32(gaussian(rng, fd));
        std::vector<double> v(fd, 0.0);
        for (std::size_t r = 0; r < fd; ++r) {
            for (std::size_t c = 0; c < fd; ++c) {
                v[c] += q[r] * planted[r * fd + c];
            }
        }
        const double vnorm = norm(v);
        for (double& x : v) {
            x /= vnorm;
        }

        CorpusItem item;
        item.qid = qid;
        item.query_features = DenseVector(q);
        item.parametric_known = known;
        for (std::size_t ci = 0; ci < config.n_contexts_per_query; ++ci) {
            const std::string cid = padded_id('c', ci, cwidth);
            const int h = helpful[ci];
            world.records.push_back(
                {qid, cid, std::nullopt, to_f32_vector(around(rng, h ? mu_known : mu_unknown, sigma))});

            std::vector<double> c = gaussian(rng, fd);
            double along = 0.0;
            for (std::size_t i = 0; i < fd; ++i) {
                along += c[i] * v[i];
            }
            const double offset = config.feature_margin + std::abs(rng.normal(0.0, 0.5));
            const double target = h ? offset : -offset;
            for (std::size_t i = 0; i < fd; ++i) {
                c[i] += (target - along) * v[i];
            }
            item.contexts.push_back({cid, to_f32_vector(c), h});
        }
        items.push_back(std::move(item));
    }

    world.corpus = Corpus(CorpusMeta{fd, fd}, std::move(items));
    return world;
}

} // namespace confgate::data
