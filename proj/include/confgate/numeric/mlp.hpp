#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "confgate/numeric/dense.hpp"
#include "confgate/numeric/rng.hpp"

namespace confgate::numeric {

enum class Activation { relu, linear };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

/// Two-layer perceptron with a 2-logit head:
///   z = w2 * dropout(act(w1 * x + b1)) + b2
/// Dropout is inverted (survivors scaled by 1/(1-rate)) and only active in
/// training mode.
struct Mlp2 {
    Matrix w1;              // [hidden x in]
    std::vector<double> b1; // [hidden]
    Matrix w2;              // [2 x hidden]
    std::vector<double> b2; // [2]
    double dropout_rate = 0.0;
    Activation activation = Activation::relu;

    static Mlp2 zeros(std::size_t input_dim, std::size_t hidden_dim, double dropout_rate,
                      Activation activation);
    // He-style init for w1; w2 and both biases start at zero.
    static Mlp2 random_init(std::size_t input_dim, std::size_t hidden_dim, double dropout_rate,
                            Activation activation, Rng& rng);

    std::size_t input_dim() const noexcept { return w1.cols(); }
    std::size_t hidden_dim() const noexcept { return w1.rows(); }

    // Order: w1, b1, w2, b2.
    std::vector<std::span<double>> parameters();
    std::vector<std::span<const double>> parameters() const;

    // Throws DataError on inconsistent shapes, non-finite parameters, or a
    // dropout rate outside [0, 1].
    void validate() const;
};

struct Logits2 {
    double z0;
    double z1;
};

Logits2 mlp_forward(const Mlp2& model, std::span<const double> x, bool training, Rng& rng);

// Inference-mode forward pass; a pure function of (model, x).
Logits2 mlp_infer(const Mlp2& model, std::span<const double> x);

struct Mlp2Gradients {
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;

    explicit Mlp2Gradients(const Mlp2& shape_of);

    void clear();
    void scale(double factor);
    std::vector<std::span<double>> parameters();
    std::vector<std::span<const double>> parameters() const;
};

// -log p_label in inference mode.
double mlp_cross_entropy(const Mlp2& model, std::span<const double> x, int label);

// Adds weight * d(-log p_label)/d(params) into grads and returns the
// unweighted loss. In training mode a fresh dropout mask is drawn from rng.
double accumulate_cross_entropy_gradient(const Mlp2& model, std::span<const double> x, int label,
                                         bool training, Rng& rng, Mlp2Gradients& grads,
                                         double weight = 1.0);

} // namespace confgate::numeric
