#pragma once

#include "koopa/data.hpp"
#include "koopa/matrix.hpp"
#include "koopa/model.hpp"
#include "koopa/spectral.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace koopa::eval {

double mse(const Matrix& pred, const Matrix& truth);
double mae(const Matrix& pred, const Matrix& truth);
/// Mean of 200 |p - t| / (|p| + |t|); entries with p = t = 0 contribute 0.
double smape(const Matrix& pred, const Matrix& truth);
/// Mean absolute error scaled by the mean absolute `seasonality`-step
/// difference of the in-sample rows (pooled over variates). Throws
/// MetricError when that denominator is zero.
double mase(const Matrix& pred, const Matrix& truth, const Matrix& insample, std::size_t seasonality = 1);

struct MetricReport {
    double mse = 0.0;
    double mae = 0.0;
    double smape = 0.0;
    /// Mean over windows with a non-zero MASE denominator; NaN when none.
    double mase = 0.0;
    std::vector<double> per_horizon_mse;
    std::size_t window_count = 0;
    std::size_t mase_window_count = 0;
};

/// Streaming metric accumulation over forecast windows.
class MetricAccumulator {
public:
    explicit MetricAccumulator(std::size_t seasonality = 1) : seasonality_(seasonality) {}

    void add(const Matrix& pred, const Matrix& truth, const Matrix& insample);
    MetricReport finish() const;

private:
    std::size_t seasonality_;
    double se_ = 0.0;
    double ae_ = 0.0;
    double sm_ = 0.0;
    double mase_sum_ = 0.0;
    std::size_t entries_ = 0;
    std::size_t windows_ = 0;
    std::size_t mase_windows_ = 0;
    std::vector<double> horizon_se_;
    std::size_t horizon_count_ = 0;
};

/// Metrics of the model on `pairs`, in the space of the pairs themselves.
MetricReport evaluate(const KoopaModel& model, const std::vector<data::WindowPair>& pairs,
                      std::size_t seasonality = 1);

/// Header and one row: mse,mae,smape,mase,windows.
std::string metric_csv(const MetricReport& r);

// --- naive baselines -----------------------------------------------------------

Matrix repeat_last(const Matrix& lookback, std::size_t horizon);
/// Repeats the last `season` rows; throws ArgumentError if season is 0 or
/// exceeds the lookback.
Matrix seasonal_naive(const Matrix& lookback, std::size_t horizon, std::size_t season);
/// Continues the least-squares line through each variate of the lookback.
Matrix linear_extrapolation(const Matrix& lookback, std::size_t horizon);

struct BaselineForecasts {
    Matrix repeat_last;
    Matrix seasonal_naive;
    Matrix linear_extrapolation;
};
BaselineForecasts naive_baselines(const Matrix& lookback, std::size_t horizon, std::size_t season);

// --- degree of variation --------------------------------------------------------

struct DovOptions {
    std::size_t subsets = 20;
    double ridge = 1e-6;
    bool keep_weights = false;
};

struct DovReport {
    std::size_t subsets = 0;
    double std_invariant = 0.0;
    double std_variant = 0.0;
    /// Per-subset (H*C) x (T*C) weight matrices, when requested.
    std::vector<Matrix> weights_invariant;
    std::vector<Matrix> weights_variant;
};

/// Least-squares linear map with intercept from the rows of `x` to the rows
/// of `y`: returns (y.cols) x (x.cols + 1), intercept last. Minimum-norm
/// solution when there are at least as many samples as unknowns, ridge
/// damped normal equations otherwise.
Matrix fit_linear_map(const Matrix& x, const Matrix& y, double ridge);

/// Splits the series rows into contiguous subsets, fits separate linear maps
/// on the invariant and variant components of every window in each subset,
/// and reports the spread of the weights across subsets averaged over
/// weight entries. The target component of a window is the last `horizon`
/// rows of the filtered length-`lookback` window ending at the target end.
DovReport degree_of_variation(const Matrix& series, const spectral::SpectrumMask& mask, std::size_t lookback,
                              std::size_t horizon, const DovOptions& options = {});

// --- operator stability ----------------------------------------------------------

struct StabilityRow {
    std::string kind; // "k_inv" or "k_var"
    std::size_t block = 0;
    std::size_t window = 0; // index into the sampled windows (k_var rows)
    double stability = 0.0;
};

struct EigenPoint {
    std::string id; // e.g. "k_inv/0" or "k_var/3"
    double re = 0.0;
    double im = 0.0;
};

struct StabilityReport {
    std::vector<StabilityRow> rows;
    std::vector<EigenPoint> eigenvalues;
};

/// One row per block K_inv followed by one row per sampled window (the
/// first block's K_var), plus the eigenvalues of every listed operator.
StabilityReport stability_report(const KoopaModel& model, const std::vector<Matrix>& lookbacks);

std::string stability_csv(const StabilityReport& r);
std::string eigenvalue_csv(const StabilityReport& r);

} // namespace koopa::eval
