#include "confgate/numeric/dense.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "confgate/errors.hpp"

namespace confgate::numeric {

DenseVector::DenseVector(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw DataError("non-finite vector entry at index " + std::to_string(i));
        }
    }
}

DenseVector DenseVector::zeros(std::size_t n) {
    return DenseVector(std::vector<double>(n, 0.0));
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

void Matrix::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DataError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

bool all_finite(std::span<const double> values) noexcept {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> flatten(std::span<const std::span<const double>> blocks) {
    std::vector<double> flat;
    for (const auto& block : blocks) {
        flat.insert(flat.end(), block.begin(), block.end());
    }
    return flat;
}

void assign_flat(std::span<const std::span<double>> blocks, std::span<const double> flat) {
    std::size_t total = 0;
    for (const auto& block : blocks) {
        total += block.size();
    }
    if (total != flat.size()) {
        throw InvariantError("assign_flat: expected " + std::to_string(total) + " values, got " +
                             std::to_string(flat.size()));
    }
    std::size_t offset = 0;
    for (const auto& block : blocks) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), block.size(), block.begin());
        offset += block.size();
    }
}

} // namespace confgate::numeric
