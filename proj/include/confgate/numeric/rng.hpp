#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace confgate::numeric {

// Seeded generator. The engine is std::mt19937_64, whose output sequence is
// fixed by the standard; the distributions below are written out by hand
// because the std:: distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n);

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

    // k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Platform-stable string hash (FNV-1a, then mixed with the seed).
std::uint64_t stable_hash(std::string_view text, std::uint64_t seed) noexcept;

// Derives an independent sub-seed for a named purpose.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) noexcept;

// Uniform [0,1) value keyed by (seed, key); independent of call order.
double keyed_uniform(std::uint64_t seed, std::string_view key) noexcept;

} // namespace confgate::numeric
