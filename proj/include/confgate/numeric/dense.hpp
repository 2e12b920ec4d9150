#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace confgate::numeric {

/// Fixed-length vector of finite doubles. Construction rejects NaN/Inf.
class DenseVector {
public:
    DenseVector() = default;
    explicit DenseVector(std::vector<double> values);

    static DenseVector zeros(std::size_t n);

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    std::span<const double> view() const noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    friend bool operator==(const DenseVector&, const DenseVector&) = default;

private:
    std::vector<double> values_;
};

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    void fill(double value);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> values) noexcept;

// Concatenates parameter blocks into one vector and back. Used by the
// gradient checker and checkpoint code.
std::vector<double> flatten(std::span<const std::span<const double>> blocks);
void assign_flat(std::span<const std::span<double>> blocks, std::span<const double> flat);

} // namespace confgate::numeric
