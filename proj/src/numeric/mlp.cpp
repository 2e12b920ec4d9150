#include "confgate/numeric/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "confgate/errors.hpp"
#include "confgate/numeric/softmax.hpp"

namespace confgate::numeric {

std::string_view to_string(Activation activation) {
    switch (activation) {
    case Activation::relu:
        return "relu";
    case Activation::linear:
        return "linear";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") {
        return Activation::relu;
    }
    if (name == "linear") {
        return Activation::linear;
    }
    throw DataError("unknown activation '" + std::string(name) + "'");
}

Mlp2 Mlp2::zeros(std::size_t input_dim, std::size_t hidden_dim, double dropout_rate,
                 Activation activation) {
    Mlp2 m;
    m.w1 = Matrix(hidden_dim, input_dim);
    m.b1.assign(hidden_dim, 0.0);
    m.w2 = Matrix(2, hidden_dim);
    m.b2.assign(2, 0.0);
    m.dropout_rate = dropout_rate;
    m.activation = activation;
    m.validate();
    return m;
}

Mlp2 Mlp2::random_init(std::size_t input_dim, std::size_t hidden_dim, double dropout_rate,
                       Activation activation, Rng& rng) {
    Mlp2 m = zeros(input_dim, hidden_dim, dropout_rate, activation);
    const double s1 = std::sqrt(2.0 / static_cast<double>(input_dim));
    for (double& w : m.w1.data()) {
        w = rng.normal(0.0, s1);
    }
    // The head starts at zero so training begins from Conf = 0.5 everywhere.
    return m;
}

std::vector<std::span<double>> Mlp2::parameters() {
    return {w1.data(), std::span<double>(b1), w2.data(), std::span<double>(b2)};
}

std::vector<std::span<const double>> Mlp2::parameters() const {
    return {w1.data(), std::span<const double>(b1), w2.data(), std::span<const double>(b2)};
}

void Mlp2::validate() const {
    if (input_dim() == 0 || hidden_dim() == 0) {
        throw DataError("mlp2: input and hidden dimensions must be positive");
    }
    if (b1.size() != hidden_dim() || w2.rows() != 2 || w2.cols() != hidden_dim() ||
        b2.size() != 2) {
        throw DataError("mlp2: inconsistent parameter shapes");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate <= 1.0)) {
        throw DataError("mlp2: dropout rate must lie in [0, 1]");
    }
    for (const auto& block : parameters()) {
        if (!all_finite(block)) {
            throw DataError("mlp2: non-finite parameter");
        }
    }
}

namespace {

void require_input_dim(const Mlp2& model, std::span<const double> x) {
    if (x.size() != model.input_dim()) {
        throw DataError("mlp2: input has dimension " + std::to_string(x.size()) + ", model expects " +
                        std::to_string(model.input_dim()));
    }
}

// Hidden pre-activations, post-dropout activations and the mask applied.
struct HiddenPass {
    std::vector<double> pre;
    std::vector<double> out;
    std::vector<double> mask;
};

HiddenPass hidden_pass(const Mlp2& model, std::span<const double> x, bool training, Rng* rng) {
    const std::size_t hidden = model.hidden_dim();
    HiddenPass pass{std::vector<double>(hidden), std::vector<double>(hidden),
                    std::vector<double>(hidden, 1.0)};

    if (training && model.dropout_rate > 0.0) {
        const double keep = 1.0 - model.dropout_rate;
        const double scale = keep > 0.0 ? 1.0 / keep : 0.0;
        for (double& m : pass.mask) {
            m = rng->bernoulli(keep) ? scale : 0.0;
        }
    }

    for (std::size_t j = 0; j < hidden; ++j) {
        const double a = dot(model.w1.row(j), x) + model.b1[j];
        pass.pre[j] = a;
        const double h = model.activation == Activation::relu ? std::max(a, 0.0) : a;
        pass.out[j] = h * pass.mask[j];
    }
    return pass;
}

Logits2 head(const Mlp2& model, std::span<const double> hidden) {
    return {dot(model.w2.row(0), hidden) + model.b2[0], dot(model.w2.row(1), hidden) + model.b2[1]};
}

} // namespace

Logits2 mlp_forward(const Mlp2& model, std::span<const double> x, bool training, Rng& rng) {
    require_input_dim(model, x);
    const HiddenPass pass = hidden_pass(model, x, training, &rng);
    return head(model, pass.out);
}

Logits2 mlp_infer(const Mlp2& model, std::span<const double> x) {
    require_input_dim(model, x);
    const HiddenPass pass = hidden_pass(model, x, false, nullptr);
    return head(model, pass.out);
}

Mlp2Gradients::Mlp2Gradients(const Mlp2& shape_of)
    : w1(shape_of.w1.rows(), shape_of.w1.cols()),
      b1(shape_of.b1.size(), 0.0),
      w2(shape_of.w2.rows(), shape_of.w2.cols()),
      b2(shape_of.b2.size(), 0.0) {}

void Mlp2Gradients::clear() {
    for (auto block : parameters()) {
        std::fill(block.begin(), block.end(), 0.0);
    }
}

void Mlp2Gradients::scale(double factor) {
    for (auto block : parameters()) {
        for (double& g : block) {
            g *= factor;
        }
    }
}

std::vector<std::span<double>> Mlp2Gradients::parameters() {
    return {w1.data(), std::span<double>(b1), w2.data(), std::span<double>(b2)};
}

std::vector<std::span<const double>> Mlp2Gradients::parameters() const {
    return {w1.data(), std::span<const double>(b1), w2.data(), std::span<const double>(b2)};
}

double mlp_cross_entropy(const Mlp2& model, std::span<const double> x, int label) {
    const Logits2 z = mlp_infer(model, x);
    return -log_softmax2(z.z0, z.z1, label);
}

double accumulate_cross_entropy_gradient(const Mlp2& model, std::span<const double> x, int label,
                                         bool training, Rng& rng, Mlp2Gradients& grads,
                                         double weight) {
    require_input_dim(model, x);
    if (label != 0 && label != 1) {
        throw DataError("mlp2: label must be 0 or 1");
    }
    const HiddenPass pass = hidden_pass(model, x, training, &rng);
    const Logits2 z = head(model, pass.out);
    const double loss = -log_softmax2(z.z0, z.z1, label);

    // dL/dz = softmax - onehot.
    const Probabilities2 p = softmax2(z.z0, z.z1);
    const double dz[2] = {weight * (p.p0 - (label == 0 ? 1.0 : 0.0)),
                          weight * (p.p1 - (label == 1 ? 1.0 : 0.0))};

    const std::size_t hidden = model.hidden_dim();
    for (std::size_t k = 0; k < 2; ++k) {
        grads.b2[k] += dz[k];
        auto grow = grads.w2.row(k);
        for (std::size_t j = 0; j < hidden; ++j) {
            grow[j] += dz[k] * pass.out[j];
        }
    }

    for (std::size_t j = 0; j < hidden; ++j) {
        double d = (dz[0] * model.w2(0, j) + dz[1] * model.w2(1, j)) * pass.mask[j];
        if (model.activation == Activation::relu && pass.pre[j] <= 0.0) {
            d = 0.0;
        }
        if (d == 0.0) {
            continue;
        }
        grads.b1[j] += d;
        auto grow = grads.w1.row(j);
        for (std::size_t i = 0; i < x.size(); ++i) {
            grow[i] += d * x[i];
        }
    }
    return loss;
}

} // namespace confgate::numeric
