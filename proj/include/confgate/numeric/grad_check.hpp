#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace confgate::numeric {

using ScalarLoss = std::function<double(std::span<const double>)>;

struct GradCheckOptions {
    double epsilon = 1e-5;
    // 0 checks every coordinate; otherwise a seeded sample of this many.
    std::size_t max_coordinates = 0;
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_coordinate = 0;
    std::size_t coordinates_checked = 0;
};

/// Compares an analytic gradient against central differences
///   (L(p + eps e_i) - L(p - eps e_i)) / (2 eps)
/// and reports max |analytic - numeric| / max(1, |analytic|).
/// epsilon must lie in [1e-7, 1e-3]. A non-finite probe throws DataError
/// naming the coordinate.
GradCheckReport grad_check(const ScalarLoss& loss, std::span<const double> params,
                           std::span<const double> analytic, const GradCheckOptions& options = {});

} // namespace confgate::numeric
