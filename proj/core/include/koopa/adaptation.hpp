#pragma once

#include "koopa/linalg.hpp"
#include "koopa/matrix.hpp"
#include "koopa/model.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace koopa {

enum class AdaptAlgorithm { naive, fast };

std::string to_string(AdaptAlgorithm a);

/// Streaming least-squares operator over a growing snapshot collection.
///
/// The naive algorithm keeps every snapshot and refits K_var from scratch.
/// The fast algorithm keeps K_var, the projector X onto the span of the
/// back snapshots and G = pinv(Z_back)^T pinv(Z_back), each updated by
/// rank-one corrections in O(D^2) per step.
class AdaptState {
public:
    /// Threshold on |r| / |m| below which a new back snapshot is treated as
    /// lying in the span of the previous ones.
    static constexpr double kDegenerateRatio = 1e-9;

    AdaptState() = default;

    /// `snapshots` is the D x F embedding collection of the lookback window (F >= 2).
    static AdaptState start(const Matrix& snapshots, AdaptAlgorithm algorithm, double rcond = kDefaultPinvRcond);

    AdaptAlgorithm algorithm() const noexcept { return algorithm_; }
    std::size_t dim() const noexcept { return k_var_.rows(); }
    const Matrix& k_var() const noexcept { return k_var_; }
    const Matrix& x_proj() const noexcept { return x_proj_; }
    /// Back snapshots (naive mode only; empty in fast mode).
    const Matrix& z_back() const noexcept { return z_back_; }
    const Vector& last_embedding() const noexcept { return last_; }
    std::size_t steps_taken() const noexcept { return steps_; }
    std::size_t degenerate_steps() const noexcept { return degenerate_; }

    /// Forecast of the next embedding, K_var applied to the last one.
    Vector predict() const { return matvec(k_var_, last_); }

    /// Incorporates the next true embedding. Throws StreamError on
    /// non-finite or wrongly sized input.
    void observe(std::span<const double> z);

private:
    void observe_naive(std::span<const double> z);
    void observe_fast(std::span<const double> z);

    AdaptAlgorithm algorithm_ = AdaptAlgorithm::fast;
    double rcond_ = kDefaultPinvRcond;
    Matrix k_var_;
    Matrix x_proj_;
    Matrix gram_pinv_; // fast mode: pinv(Z_back)^T pinv(Z_back)
    Matrix z_back_;    // naive mode
    Matrix z_fore_;    // naive mode
    Vector last_;
    std::size_t steps_ = 0;
    std::size_t degenerate_ = 0;
};

struct AdaptTrace {
    std::vector<Vector> predictions; // L + 1 forecasts of z_{F+1}, ..., z_{F+L+1}
    std::vector<Matrix> k_history;   // operator used for each forecast
    std::size_t degenerate_steps = 0;
};

/// Runs the state machine over `stream` (D x L, one embedding per column).
AdaptTrace adapt(const Matrix& snapshots, const Matrix& stream, AdaptAlgorithm algorithm);
AdaptTrace adapt_naive(const Matrix& snapshots, const Matrix& stream);
AdaptTrace adapt_fast(const Matrix& snapshots, const Matrix& stream);

enum class ScaleUpMode { vanilla, oa_naive, oa_fast };

std::string to_string(ScaleUpMode m);
/// Parses "vanilla", "oa_naive" or "oa_fast"; throws ConfigError otherwise.
ScaleUpMode parse_scale_up_mode(const std::string& name);

struct ScaleUpResult {
    Matrix prediction; // H_te x C on the scale of the input
    std::size_t rounds = 0;
    std::size_t adaptation_steps = 0;
    std::size_t degenerate_steps = 0;
};

/// Forecasts `horizon` rows with a model trained for a shorter horizon.
///
/// Every mode rolls forward in rounds of the trained horizon. The vanilla
/// mode appends each round's forecast to the lookback. The
/// operator-adaptation modes read the next lookback from the ground truth
/// that arrived during the round, encode it segment by segment and stream the
/// resulting per-block embeddings into an AdaptState, whose operator replaces
/// the window-local K_var in the following rounds. All rounds share the
/// normalisation statistics of the initial lookback. `truth` holds the rows that follow `lookback`; the
/// adaptation modes need at least horizon - H_tr of them.
ScaleUpResult scale_up_forecast(const KoopaModel& model, const Matrix& lookback, std::size_t horizon,
                                const Matrix& truth, ScaleUpMode mode);

struct AdaptBenchmarkRow {
    AdaptAlgorithm algorithm = AdaptAlgorithm::fast;
    std::size_t dim = 0;
    std::size_t snapshots = 0;
    std::size_t steps = 0;
    double total_seconds = 0.0;
    double per_step_seconds = 0.0;
};

struct AdaptBenchmarkOptions {
    std::vector<std::size_t> dims{16, 32, 64, 128};
    std::vector<std::size_t> steps{256};
    /// Initial snapshot count; 0 selects max(2, D / 2).
    std::size_t snapshots = 0;
    std::size_t repetitions = 5;
    std::uint64_t seed = 7;
    bool include_naive = true;
};

/// Median wall-clock time of both algorithms over random streams.
std::vector<AdaptBenchmarkRow> adaptation_benchmark(const AdaptBenchmarkOptions& options);

/// CSV with header algorithm,D,F,L,total_seconds,per_step_seconds.
std::string benchmark_csv(const std::vector<AdaptBenchmarkRow>& rows);

/// Least-squares slope of log(per_step_seconds) against log(D) for one algorithm.
double complexity_slope(const std::vector<AdaptBenchmarkRow>& rows, AdaptAlgorithm algorithm);

} // namespace koopa
