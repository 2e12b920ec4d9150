#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace confgate::numeric {

struct AdamWConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    double learning_rate = 0.0;
    double weight_decay = 0.0;
    std::uint64_t step_count = 0;
    std::vector<std::vector<double>> first_moments;
    std::vector<std::vector<double>> second_moments;
};

// Adam with decoupled weight decay: p -= lr * (wd * p + m_hat / (sqrt(v_hat) + eps)).
class AdamW {
public:
    AdamW(const AdamWConfig& config, std::span<const std::size_t> block_sizes);

    // params and grads are parallel lists of blocks with the sizes given at
    // construction.
    void step(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads);

    const OptimizerState& state() const noexcept { return state_; }

private:
    AdamWConfig config_;
    OptimizerState state_;
};

std::vector<std::size_t> block_sizes(std::span<const std::span<double>> blocks);

} // namespace confgate::numeric
