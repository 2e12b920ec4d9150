#pragma once

#include <span>

namespace confgate::numeric {

struct Probabilities2 {
    double p0;
    double p1;
};

/// Two-class softmax. p1 = e^z1 / (e^z0 + e^z1), evaluated after subtracting
/// max(z0, z1); p0 = 1 - p1. p1 is clamped to [2^-53, 1 - 2^-53] so both
/// outputs stay strictly inside (0, 1). Throws DataError on non-finite input.
Probabilities2 softmax2(double z0, double z1);

/// log p_label under softmax2, in log-domain (no clamping).
double log_softmax2(double z0, double z1, int label);

/// log(sum(exp(x))) with max subtraction. Empty input is an error.
double log_sum_exp(std::span<const double> x);

} // namespace confgate::numeric
