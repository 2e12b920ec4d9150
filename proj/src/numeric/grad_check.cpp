#include "confgate/numeric/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "confgate/errors.hpp"
#include "confgate/numeric/rng.hpp"

namespace confgate::numeric {

GradCheckReport grad_check(const ScalarLoss& loss, std::span<const double> params,
                           std::span<const double> analytic, const GradCheckOptions& options) {
    if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-3)) {
        throw DataError("grad_check: epsilon must lie in [1e-7, 1e-3]");
    }
    if (params.size() != analytic.size()) {
        throw InvariantError("grad_check: gradient length differs from parameter length");
    }

    std::vector<std::size_t> coords;
    if (options.max_coordinates == 0 || options.max_coordinates >= params.size()) {
        coords.resize(params.size());
        for (std::size_t i = 0; i < coords.size(); ++i) {
            coords[i] = i;
        }
    } else {
        Rng rng(options.seed);
        coords = rng.sample_without_replacement(params.size(), options.max_coordinates);
        std::sort(coords.begin(), coords.end());
    }

    std::vector<double> probe(params.begin(), params.end());
    GradCheckReport report;
    for (const std::size_t i : coords) {
        const double saved = probe[i];
        probe[i] = saved + options.epsilon;
        const double up = loss(probe);
        probe[i] = saved - options.epsilon;
        const double down = loss(probe);
        probe[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw DataError("grad_check: non-finite loss when perturbing coordinate " +
                            std::to_string(i));
        }
        const double numeric = (up - down) / (2.0 * options.epsilon);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        if (report.coordinates_checked == 0 || err > report.max_relative_error) {
            report.max_relative_error = err;
            report.worst_coordinate = i;
        }
        report.coordinates_checked += 1;
    }
    return report;
}

} // namespace confgate::numeric
