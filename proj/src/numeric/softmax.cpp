#include "confgate/numeric/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "confgate/errors.hpp"

namespace confgate::numeric {

namespace {

constexpr double kProbabilityFloor = 0x1.0p-53;
constexpr double kProbabilityCeil = 1.0 - 0x1.0p-53;

void require_finite(double z0, double z1, const char* where) {
    if (!std::isfinite(z0) || !std::isfinite(z1)) {
        throw DataError(std::string(where) + ": non-finite logits (" + std::to_string(z0) + ", " +
                        std::to_string(z1) + ")");
    }
}

} // namespace

Probabilities2 softmax2(double z0, double z1) {
    require_finite(z0, z1, "softmax2");
    const double m = std::max(z0, z1);
    const double e0 = std::exp(z0 - m);
    const double e1 = std::exp(z1 - m);
    const double p1 = std::clamp(e1 / (e0 + e1), kProbabilityFloor, kProbabilityCeil);
    return {1.0 - p1, p1};
}

double log_softmax2(double z0, double z1, int label) {
    require_finite(z0, z1, "log_softmax2");
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    return (label == 1 ? z1 : z0) - lse;
}

double log_sum_exp(std::span<const double> x) {
    if (x.empty()) {
        throw InvariantError("log_sum_exp of empty input");
    }
    const double m = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (const double v : x) {
        sum += std::exp(v - m);
    }
    return m + std::log(sum);
}

} // namespace confgate::numeric
