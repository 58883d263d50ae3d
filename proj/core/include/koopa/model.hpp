#pragma once

#include "koopa/linalg.hpp"
#include "koopa/matrix.hpp"
#include "koopa/neural.hpp"
#include "koopa/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace koopa {

enum class LossSpace { normalized, denormalized };

struct ModelConfig {
    std::size_t lookback = 96;   // T
    std::size_t horizon = 48;    // H
    std::size_t variates = 1;    // C
    std::size_t blocks = 3;      // B
    std::size_t segment_len = 0; // S; 0 resolves to T / 2
    std::size_t embed_dim = 64;  // D
    double alpha = 0.2;
    std::size_t hidden_dim = 128;
    std::size_t hidden_layers = 2;
    nn::Activation activation = nn::Activation::relu;
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 10;
    std::size_t patience = 3;
    std::uint64_t seed = 2023;
    bool normalize = true;
    bool detach_kvar = false;
    double k_inv_init_scale = 0.0;
    double std_floor = 1e-5;
    LossSpace loss_space = LossSpace::normalized;

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;

    std::size_t segment_length() const noexcept { return segment_len == 0 ? lookback / 2 : segment_len; }
    /// Segments covering the (left-padded) lookback window.
    std::size_t lookback_segments() const noexcept;
    /// Segments covering the horizon before truncation.
    std::size_t horizon_segments() const noexcept;
    std::size_t padded_lookback() const noexcept { return lookback_segments() * segment_length(); }

    /// Canonical "model.*" / "train.*" key/value form, sorted by key.
    std::map<std::string, std::string> to_key_values() const;
    /// Inverse of to_key_values; unknown keys raise ConfigError.
    static ModelConfig from_key_values(const std::map<std::string, std::string>& kv);
    /// Applies a single key (with or without the "model."/"train." prefix).
    /// Returns false when the key is not a model/training key.
    bool set(const std::string& key, const std::string& value);
};

std::string to_string(LossSpace s);

struct NormStats {
    Vector mean;
    Vector stddev;
};

struct NormalizedWindow {
    Matrix x;
    NormStats stats;
};

/// Per-variate standardisation with the lookback mean and (population)
/// standard deviation, floored at `std_floor`.
NormalizedWindow normalize_window(const Matrix& x, double std_floor = 1e-5);
Matrix denormalize(const Matrix& y, const NormStats& stats);
/// Applies existing statistics to another window.
Matrix apply_normalization(const Matrix& x, const NormStats& stats);

/// Affine per-variate transform fitted on the training rows of a dataset.
/// Stored with the model so the CLI can forecast raw-scale input.
struct DataScaler {
    Vector mean;
    Vector stddev;

    bool empty() const noexcept { return mean.empty(); }
    Matrix transform(const Matrix& x) const;
    Matrix inverse(const Matrix& x) const;
};

/// Koopa forecaster: B residual blocks sharing one encoder/decoder pair per
/// branch, with a learnable K_inv per block.
class KoopaModel {
public:
    KoopaModel() = default;
    KoopaModel(ModelConfig config, spectral::SpectrumMask mask);

    /// Fresh model: Glorot MLPs and K_inv from init_k_inv, all seeded from config.seed.
    static KoopaModel create(const ModelConfig& config, spectral::SpectrumMask mask);

    const ModelConfig& config() const noexcept { return config_; }
    const spectral::SpectrumMask& mask() const noexcept { return filter_.mask(); }
    const spectral::FourierFilter& filter() const noexcept { return filter_; }
    void set_mask(spectral::SpectrumMask mask);

    nn::Mlp inv_encoder; // T*C -> D
    nn::Mlp inv_decoder; // D -> H*C
    nn::Mlp var_encoder; // S*C -> D
    nn::Mlp var_decoder; // D -> S*C
    std::vector<Matrix> k_inv; // one D x D operator per block
    DataScaler scaler;

    std::vector<std::span<double>> parameters();
    std::size_t parameter_count() const;
    bool all_finite() const;

private:
    ModelConfig config_;
    spectral::FourierFilter filter_{spectral::SpectrumMask::full(2)};
};

struct KoopaGrads {
    nn::MlpGrads inv_encoder;
    nn::MlpGrads inv_decoder;
    nn::MlpGrads var_encoder;
    nn::MlpGrads var_decoder;
    std::vector<Matrix> k_inv;

    static KoopaGrads zeros_like(const KoopaModel& model);
    void set_zero();
    void add_scaled(const KoopaGrads& other, double s);
    /// Same grouping and order as KoopaModel::parameters().
    std::vector<std::span<double>> parameters();
};

/// Replacement operator and starting embedding for one block's time-variant
/// forecast; used by horizon scale-up with operator adaptation.
struct OperatorOverride {
    Matrix k_var;
    Vector anchor;
};

struct ForwardOptions {
    /// Per-block overrides (empty, or one optional entry per block).
    std::vector<std::optional<OperatorOverride>> overrides;
    /// Skip instance normalisation even if the config enables it; the
    /// caller supplies an already normalised window.
    bool input_prenormalized = false;
    /// Called on every freshly fitted K_var before explosion checking; used
    /// for fault injection in tests.
    std::function<void(std::size_t block, Matrix& k_var)> operator_hook;
};

struct BlockContribution {
    Matrix y_var;
    Matrix y_inv;
};

struct ForecastResult {
    Matrix prediction;            // H x C, denormalised
    Matrix normalized_prediction; // H x C, sum of contributions
    std::vector<BlockContribution> per_block_contributions;
    std::vector<Matrix> residual_trace; // B + 1 block inputs (normalised scale)
    std::vector<Matrix> x_var;          // per block time-variant component
    std::vector<Matrix> x_var_fit;      // per block fitted reconstruction
    std::vector<Matrix> k_var;          // per block operator actually used for fitting
    std::vector<Matrix> embeddings;     // per block D x (T/S) snapshot matrix
    NormStats norm;
    std::size_t explosion_events = 0;
};

ForecastResult koopa_forward(const KoopaModel& model, const Matrix& x, const ForwardOptions& options = {});

// --- building blocks -------------------------------------------------------

/// Row-major flatten of a T x C window into a length T*C vector.
Vector flatten(const Matrix& x);
Matrix unflatten(std::span<const double> v, std::size_t rows, std::size_t cols);

/// Splits x into contiguous S-row segments; when S does not divide the row
/// count the window is left-padded by repeating its first row.
std::vector<Matrix> segment(const Matrix& x, std::size_t s);

/// K = Z_fore * pinv(Z_back) with Z_back = columns 0..m-2 and Z_fore =
/// columns 1..m-1 of the D x m snapshot matrix.
Matrix edmd_fit(const Matrix& snapshots, double rcond = kDefaultPinvRcond);

/// Returns the identity when any entry of k is non-finite, else k itself.
/// `replaced` (optional) reports which branch was taken.
Matrix explosion_check(const Matrix& k, bool* replaced = nullptr);

/// Identity plus an optional Gaussian perturbation of the given scale.
Matrix init_k_inv(std::size_t d, std::uint64_t seed, double perturbation = 0.0);

/// Mean distance of the eigenvalue moduli from the unit circle.
double operator_stability(const Matrix& k);

Matrix time_inv_forward(const KoopaModel& model, std::size_t block, const Matrix& x_inv);

struct TimeVarOutput {
    Matrix x_var_fit; // T x C
    Matrix y_var;     // H x C
    Matrix k_var;     // D x D
    Matrix embeddings; // D x (T/S)
    bool k_var_replaced = false;
};

TimeVarOutput time_var_forward(const KoopaModel& model, const Matrix& x_var,
                               const OperatorOverride* override_op = nullptr);

// --- training support ------------------------------------------------------

struct SampleOutcome {
    double loss = 0.0;
    std::size_t explosion_events = 0;
};

/// Loss for one (lookback, target) pair; the gradient of the loss is added
/// into `grads` scaled by `weight`. Only `operator_hook` of `options` is
/// honoured.
SampleOutcome accumulate_sample_gradient(const KoopaModel& model, const Matrix& lookback, const Matrix& target,
                                         KoopaGrads& grads, double weight = 1.0, const ForwardOptions& options = {});

/// Loss only (same definition as accumulate_sample_gradient).
double sample_loss(const KoopaModel& model, const Matrix& lookback, const Matrix& target);

/// Gradient of a scalar loss with respect to A given its gradient with
/// respect to pinv(A). Valid where the rank of A is locally constant.
Matrix pinv_backward(const Matrix& a, const Matrix& a_pinv, const Matrix& grad_pinv);

} // namespace koopa
