#pragma once

#include "koopa/matrix.hpp"
#include "koopa/rng.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace koopa::nn {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
/// Parses "relu" / "tanh"; throws ConfigError otherwise.
Activation parse_activation(const std::string& name);

struct DenseLayer {
    Matrix weight; // out x in
    Vector bias;   // out

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Feed-forward network: affine layers with `activation` between them and an
/// affine output layer.
class Mlp {
public:
    Mlp() = default;
    /// Zero-initialised network with the given layer widths [in, h1, ..., out].
    Mlp(std::vector<std::size_t> layer_dims, Activation activation);

    /// Glorot-uniform weights, zero biases.
    static Mlp glorot(std::vector<std::size_t> layer_dims, Activation activation, Rng& rng);

    const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
    std::size_t input_dim() const noexcept { return dims_.front(); }
    std::size_t output_dim() const noexcept { return dims_.back(); }
    Activation activation() const noexcept { return activation_; }

    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    std::size_t parameter_count() const;
    bool all_finite() const;

    /// Views over weights and biases, layer by layer.
    std::vector<std::span<double>> parameters();

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::vector<std::size_t> dims_;
    Activation activation_ = Activation::relu;
    std::vector<DenseLayer> layers_;
};

/// Intermediates of one forward pass.
struct GradientTape {
    std::vector<Vector> inputs;          // input to each layer
    std::vector<Vector> pre_activations; // W x + b for each layer
};

struct MlpGrads {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;

    static MlpGrads zeros_like(const Mlp& net);
    void set_zero();
    void add_scaled(const MlpGrads& other, double s);
    std::vector<std::span<double>> parameters();
};

struct MlpOutput {
    Vector y;
    GradientTape tape;
};

MlpOutput mlp_forward(const Mlp& net, std::span<const double> x);
/// Forward pass without recording a tape.
Vector mlp_apply(const Mlp& net, std::span<const double> x);

/// Reverse pass. Parameter gradients are accumulated into `grads`; the
/// gradient with respect to the network input is returned.
Vector mlp_backward(const Mlp& net, const GradientTape& tape, std::span<const double> dy, MlpGrads& grads);

struct MlpBackward {
    Vector dx;
    MlpGrads grads;
};
MlpBackward mlp_backward(const Mlp& net, const GradientTape& tape, std::span<const double> dy);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<Vector> first_moment;
    std::vector<Vector> second_moment;
    std::size_t step = 0;

    AdamState() = default;
    AdamState(AdamConfig cfg, const std::vector<std::span<double>>& params);
};

/// One bias-corrected Adam update, in place.
void adam_step(const std::vector<std::span<double>>& params, const std::vector<std::span<double>>& grads,
               AdamState& state);

/// Loss of a network output and its gradient with respect to that output.
using LossFn = std::function<std::pair<double, Vector>(const Vector& y)>;

struct GradCheckOptions {
    double h = 1e-5;
    /// Relative errors are taken against max(|analytic|, |numeric|, abs_floor).
    double abs_floor = 1e-6;
};

/// Worst relative error between mlp_backward and central differences over
/// every parameter coordinate.
double gradient_check(const Mlp& net, std::span<const double> x, const LossFn& loss, GradCheckOptions opts = {});

/// Mean squared error loss against `target`.
LossFn mse_loss(Vector target);

} // namespace koopa::nn
