#include "confgate/numeric/optimizer.hpp"

#include <cmath>

#include "confgate/errors.hpp"

namespace confgate::numeric {

AdamW::AdamW(const AdamWConfig& config, std::span<const std::size_t> sizes) : config_(config) {
    if (!(config.learning_rate > 0.0) || !(config.weight_decay >= 0.0)) {
        throw DataError("AdamW: learning rate must be positive and weight decay non-negative");
    }
    state_.learning_rate = config.learning_rate;
    state_.weight_decay = config.weight_decay;
    for (const std::size_t n : sizes) {
        state_.first_moments.emplace_back(n, 0.0);
        state_.second_moments.emplace_back(n, 0.0);
    }
}

void AdamW::step(std::span<const std::span<double>> params,
                 std::span<const std::span<const double>> grads) {
    if (params.size() != state_.first_moments.size() || grads.size() != params.size()) {
        throw InvariantError("AdamW::step: block count mismatch");
    }
    state_.step_count += 1;
    const double t = static_cast<double>(state_.step_count);
    const double bias1 = 1.0 - std::pow(config_.beta1, t);
    const double bias2 = 1.0 - std::pow(config_.beta2, t);
    const double lr = config_.learning_rate;
    const double decay = lr * config_.weight_decay;

    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        auto g = grads[b];
        auto& m = state_.first_moments[b];
        auto& v = state_.second_moments[b];
        if (p.size() != m.size() || g.size() != m.size()) {
            throw InvariantError("AdamW::step: block size mismatch");
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            p[i] -= decay * p[i] + lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

std::vector<std::size_t> block_sizes(std::span<const std::span<double>> blocks) {
    std::vector<std::size_t> sizes;
    sizes.reserve(blocks.size());
    for (const auto& b : blocks) {
        sizes.push_back(b.size());
    }
    return sizes;
}

} // namespace confgate::numeric
