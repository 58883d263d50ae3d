#include "koopa/neural.hpp"

#include "koopa/error.hpp"

#include <algorithm>
#include <cmath>

namespace koopa::nn {
namespace {

double activate(Activation a, double v) {
    switch (a) {
    case Activation::relu:
        return v < 0.0 ? 0.0 : v; // NaN passes through
    case Activation::tanh:
        return std::tanh(v);
    }
    return v;
}

// derivative expressed through the pre-activation value
double activate_grad(Activation a, double pre) {
    switch (a) {
    case Activation::relu:
        return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
        const double t = std::tanh(pre);
        return 1.0 - t * t;
    }
    }
    return 1.0;
}

void affine(const DenseLayer& layer, std::span<const double> x, Vector& out) {
    const Matrix& w = layer.weight;
    out.resize(w.rows());
    const std::size_t in = w.cols();
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double* row = w.row(i).data();
        double s = layer.bias[i];
        for (std::size_t j = 0; j < in; ++j) {
            s += row[j] * x[j];
        }
        out[i] = s;
    }
}

} // namespace

std::string to_string(Activation a) {
    return a == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") {
        return Activation::relu;
    }
    if (name == "tanh") {
        return Activation::tanh;
    }
    throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

Mlp::Mlp(std::vector<std::size_t> layer_dims, Activation activation)
    : dims_(std::move(layer_dims)), activation_(activation) {
    if (dims_.size() < 2) {
        throw ArgumentError("Mlp: need at least input and output dimensions");
    }
    for (std::size_t d : dims_) {
        if (d == 0) {
            throw ArgumentError("Mlp: layer dimensions must be positive");
        }
    }
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        layers_.push_back({Matrix(dims_[l + 1], dims_[l]), Vector(dims_[l + 1], 0.0)});
    }
}

Mlp Mlp::glorot(std::vector<std::size_t> layer_dims, Activation activation, Rng& rng) {
    Mlp net(std::move(layer_dims), activation);
    for (auto& layer : net.layers_) {
        const double fan_in = static_cast<double>(layer.weight.cols());
        const double fan_out = static_cast<double>(layer.weight.rows());
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : layer.weight.data()) {
            w = rng.uniform(-limit, limit);
        }
    }
    return net;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        n += layer.weight.size() + layer.bias.size();
    }
    return n;
}

bool Mlp::all_finite() const {
    for (const auto& layer : layers_) {
        if (!layer.weight.all_finite()) {
            return false;
        }
        if (!std::all_of(layer.bias.begin(), layer.bias.end(), [](double v) { return std::isfinite(v); })) {
            return false;
        }
    }
    return true;
}

std::vector<std::span<double>> Mlp::parameters() {
    std::vector<std::span<double>> p;
    for (auto& layer : layers_) {
        p.emplace_back(layer.weight.data());
        p.emplace_back(layer.bias);
    }
    return p;
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
    MlpGrads g;
    for (const auto& layer : net.layers()) {
        g.weight.emplace_back(layer.weight.rows(), layer.weight.cols());
        g.bias.emplace_back(layer.bias.size(), 0.0);
    }
    return g;
}

void MlpGrads::set_zero() {
    for (auto& w : weight) {
        std::fill(w.data().begin(), w.data().end(), 0.0);
    }
    for (auto& b : bias) {
        std::fill(b.begin(), b.end(), 0.0);
    }
}

void MlpGrads::add_scaled(const MlpGrads& other, double s) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
        auto dst = weight[l].data();
        auto src = other.weight[l].data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += s * src[i];
        }
        for (std::size_t i = 0; i < bias[l].size(); ++i) {
            bias[l][i] += s * other.bias[l][i];
        }
    }
}

std::vector<std::span<double>> MlpGrads::parameters() {
    std::vector<std::span<double>> p;
    for (std::size_t l = 0; l < weight.size(); ++l) {
        p.emplace_back(weight[l].data());
        p.emplace_back(bias[l]);
    }
    return p;
}

MlpOutput mlp_forward(const Mlp& net, std::span<const double> x) {
    if (x.size() != net.input_dim()) {
        throw ShapeError("mlp_forward: input of length " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
    }
    MlpOutput out;
    const auto& layers = net.layers();
    out.tape.inputs.reserve(layers.size());
    out.tape.pre_activations.reserve(layers.size());
    Vector h(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Vector pre;
        affine(layers[l], h, pre);
        out.tape.inputs.push_back(std::move(h));
        h = pre;
        if (l + 1 < layers.size()) {
            for (double& v : h) {
                v = activate(net.activation(), v);
            }
        }
        out.tape.pre_activations.push_back(std::move(pre));
    }
    out.y = std::move(h);
    return out;
}

Vector mlp_apply(const Mlp& net, std::span<const double> x) {
    if (x.size() != net.input_dim()) {
        throw ShapeError("mlp_apply: input of length " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
    }
    const auto& layers = net.layers();
    Vector h(x.begin(), x.end());
    Vector next;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        affine(layers[l], h, next);
        if (l + 1 < layers.size()) {
            for (double& v : next) {
                v = activate(net.activation(), v);
            }
        }
        std::swap(h, next);
    }
    return h;
}

Vector mlp_backward(const Mlp& net, const GradientTape& tape, std::span<const double> dy, MlpGrads& grads) {
    const auto& layers = net.layers();
    if (tape.inputs.size() != layers.size() || tape.pre_activations.size() != layers.size()) {
        throw StateError("mlp_backward: tape does not belong to this network");
    }
    if (dy.size() != net.output_dim()) {
        throw ShapeError("mlp_backward: output gradient of length " + std::to_string(dy.size()) +
                         ", network outputs " + std::to_string(net.output_dim()));
    }
    if (grads.weight.size() != layers.size()) {
        throw ShapeError("mlp_backward: gradient container does not match network");
    }
    Vector delta(dy.begin(), dy.end());
    for (std::size_t l = layers.size(); l-- > 0;) {
        const Matrix& w = layers[l].weight;
        const Vector& in = tape.inputs[l];
        if (in.size() != w.cols() || tape.pre_activations[l].size() != w.rows()) {
            throw StateError("mlp_backward: stale tape (layer " + std::to_string(l) + " dimensions changed)");
        }
        if (l + 1 < layers.size()) {
            const Vector& pre = tape.pre_activations[l];
            for (std::size_t i = 0; i < delta.size(); ++i) {
                delta[i] *= activate_grad(net.activation(), pre[i]);
            }
        }
        Matrix& gw = grads.weight[l];
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double d = delta[i];
            double* grow = gw.row(i).data();
            for (std::size_t j = 0; j < w.cols(); ++j) {
                grow[j] += d * in[j];
            }
            grads.bias[l][i] += d;
        }
        delta = matvec_t(w, delta);
    }
    return delta;
}

MlpBackward mlp_backward(const Mlp& net, const GradientTape& tape, std::span<const double> dy) {
    MlpBackward out{{}, MlpGrads::zeros_like(net)};
    out.dx = mlp_backward(net, tape, dy, out.grads);
    return out;
}

AdamState::AdamState(AdamConfig cfg, const std::vector<std::span<double>>& params) : config(cfg) {
    for (const auto& p : params) {
        first_moment.emplace_back(p.size(), 0.0);
        second_moment.emplace_back(p.size(), 0.0);
    }
}

void adam_step(const std::vector<std::span<double>>& params, const std::vector<std::span<double>>& grads,
               AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw ShapeError("adam_step: parameter, gradient and moment groups differ in count");
    }
    ++state.step;
    const AdamConfig& c = state.config;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t g = 0; g < params.size(); ++g) {
        auto p = params[g];
        auto d = grads[g];
        auto& m = state.first_moment[g];
        auto& v = state.second_moment[g];
        if (p.size() != d.size() || p.size() != m.size()) {
            throw ShapeError("adam_step: group " + std::to_string(g) + " has mismatched sizes");
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * d[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * d[i] * d[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

double gradient_check(const Mlp& net, std::span<const double> x, const LossFn& loss, GradCheckOptions opts) {
    const MlpOutput fwd = mlp_forward(net, x);
    const auto [l0, dy] = loss(fwd.y);
    (void)l0;
    MlpBackward analytic = mlp_backward(net, fwd.tape, dy);

    Mlp probe = net;
    auto params = probe.parameters();
    auto grads = analytic.grads.parameters();
    double worst = 0.0;
    for (std::size_t g = 0; g < params.size(); ++g) {
        for (std::size_t i = 0; i < params[g].size(); ++i) {
            const double orig = params[g][i];
            params[g][i] = orig + opts.h;
            const double lp = loss(mlp_apply(probe, x)).first;
            params[g][i] = orig - opts.h;
            const double lm = loss(mlp_apply(probe, x)).first;
            params[g][i] = orig;
            const double numeric = (lp - lm) / (2.0 * opts.h);
            const double a = grads[g][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), opts.abs_floor});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

LossFn mse_loss(Vector target) {
    return [target = std::move(target)](const Vector& y) {
        if (y.size() != target.size()) {
            throw ShapeError("mse_loss: prediction and target lengths differ");
        }
        const double n = static_cast<double>(y.size());
        double l = 0.0;
        Vector dy(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double e = y[i] - target[i];
            l += e * e;
            dy[i] = 2.0 * e / n;
        }
        return std::pair<double, Vector>{l / n, std::move(dy)};
    };
}

} // namespace koopa::nn
