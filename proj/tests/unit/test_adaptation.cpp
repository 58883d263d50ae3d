#include "koopa/adaptation.hpp"
#include "koopa/error.hpp"
#include "koopa/model.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace koopa;
using koopa::testing::gaussian_matrix;

namespace {

Matrix hcat(const Matrix& a, const Matrix& b, std::size_t b_cols) {
    Matrix out(a.rows(), a.cols() + b_cols);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            out(r, c) = a(r, c);
        }
        for (std::size_t c = 0; c < b_cols; ++c) {
            out(r, a.cols() + c) = b(r, c);
        }
    }
    return out;
}

// Refit from the full snapshot history with an independent least-squares
// route: K = Z_fore Z_back^T (Z_back Z_back^T)^-1 when Z_back has full row rank.
Matrix normal_equation_fit(const Matrix& z) {
    const Matrix back = z.slice_cols(0, z.cols() - 1);
    const Matrix fore = z.slice_cols(1, z.cols());
    const Matrix gram = matmul_nt(back, back);
    const Matrix rhs = matmul_nt(back, fore);
    return transpose(solve_spd(gram, rhs));
}

void expect_traces_equal(const AdaptTrace& a, const AdaptTrace& b, double tol) {
    ASSERT_EQ(a.predictions.size(), b.predictions.size());
    for (std::size_t i = 0; i < a.predictions.size(); ++i) {
        EXPECT_LT(max_abs_diff(a.k_history[i], b.k_history[i]), tol) << "step " << i;
        EXPECT_LT(max_abs_diff(a.predictions[i], b.predictions[i]), tol) << "step " << i;
    }
}

ModelConfig adapt_config() {
    ModelConfig cfg;
    cfg.lookback = 16;
    cfg.horizon = 8;
    cfg.segment_len = 4;
    cfg.embed_dim = 6;
    cfg.blocks = 2;
    cfg.hidden_dim = 16;
    cfg.hidden_layers = 1;
    cfg.variates = 2;
    return cfg;
}

spectral::SpectrumMask adapt_mask() {
    spectral::SpectrumMask m;
    m.window_length = 16;
    m.kept = {0, 1, 2};
    m.alpha = 0.3;
    return m;
}

Matrix wave(std::size_t rows, std::size_t cols, double offset) {
    Matrix x(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double t = static_cast<double>(i) + offset;
            x(i, c) = std::sin(0.4 * t + static_cast<double>(c)) + 0.5 * std::sin(0.13 * t);
        }
    }
    return x;
}

} // namespace

TEST(Adapt, NaiveMatchesRefitOnHistory) {
    Rng rng(1);
    const std::size_t d = 4;
    const Matrix init = gaussian_matrix(rng, d, 7);
    const Matrix stream = gaussian_matrix(rng, d, 5);
    const AdaptTrace t = adapt_naive(init, stream);
    ASSERT_EQ(t.predictions.size(), 6u);
    for (std::size_t l = 0; l <= 5; ++l) {
        const Matrix hist = hcat(init, stream, l);
        EXPECT_LT(max_abs_diff(t.k_history[l], normal_equation_fit(hist)), 1e-9);
        EXPECT_LT(max_abs_diff(t.predictions[l], matvec(t.k_history[l], hist.col(hist.cols() - 1))), 1e-12);
    }
}

TEST(Adapt, FastMatchesNaiveInFullRankRegime) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 2 + rng() % 10;
        const std::size_t f = d + 2 + rng() % d;
        const std::size_t l = 1 + rng() % 40;
        const Matrix init = gaussian_matrix(rng, d, f);
        const Matrix stream = gaussian_matrix(rng, d, l);
        const AdaptTrace fast = adapt_fast(init, stream);
        expect_traces_equal(fast, adapt_naive(init, stream), 1e-8);
        EXPECT_EQ(fast.degenerate_steps, l);
    }
}

TEST(Adapt, FastMatchesNaiveWhileSpanGrows) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 4 + rng() % 12;
        const std::size_t f = 2 + rng() % (d / 2);
        const std::size_t l = d + 5;
        const Matrix init = gaussian_matrix(rng, d, f);
        const Matrix stream = gaussian_matrix(rng, d, l);
        const AdaptTrace fast = adapt_fast(init, stream);
        expect_traces_equal(fast, adapt_naive(init, stream), 1e-8);
        // The first d - (f - 1) observations extend the span of the back snapshots.
        EXPECT_EQ(fast.degenerate_steps, l - (d - (f - 1)));
    }
}

TEST(Adapt, FastMatchesNaiveOnRankDeficientStreams) {
    Rng rng(4);
    const std::size_t d = 8;
    // Every embedding lives in a 3-dimensional subspace.
    const Matrix basis = gaussian_matrix(rng, d, 3);
    const Matrix init = matmul(basis, gaussian_matrix(rng, 3, 5));
    const Matrix stream = matmul(basis, gaussian_matrix(rng, 3, 12));
    const AdaptTrace fast = adapt_fast(init, stream);
    expect_traces_equal(fast, adapt_naive(init, stream), 1e-8);
}

TEST(Adapt, StateAccessorsAndErrors) {
    Rng rng(5);
    const Matrix init = gaussian_matrix(rng, 3, 6);
    AdaptState s = AdaptState::start(init, AdaptAlgorithm::fast);
    EXPECT_EQ(s.dim(), 3u);
    EXPECT_LT(max_abs_diff(s.x_proj(), Matrix::identity(3)), 1e-12);
    EXPECT_EQ(s.last_embedding(), init.col(5));
    EXPECT_TRUE(s.z_back().empty());
    EXPECT_THROW(s.observe(Vector{1.0, 2.0}), StreamError);
    EXPECT_THROW(s.observe(Vector{1.0, std::numeric_limits<double>::quiet_NaN(), 0.0}), StreamError);
    EXPECT_EQ(s.steps_taken(), 0u);
    s.observe(Vector{0.1, 0.2, 0.3});
    EXPECT_EQ(s.steps_taken(), 1u);
    EXPECT_THROW(AdaptState::start(Matrix(3, 1), AdaptAlgorithm::naive), ArgumentError);
    EXPECT_THROW(adapt_fast(init, Matrix(4, 2)), ShapeError);
    const AdaptState naive = AdaptState::start(init, AdaptAlgorithm::naive);
    EXPECT_EQ(naive.z_back().cols(), 5u);
}

TEST(Adapt, ScaleUpModesAgreeAndRoll) {
    ModelConfig cfg = adapt_config();
    const KoopaModel model = KoopaModel::create(cfg, adapt_mask());
    const Matrix series = wave(16 + 32, 2, 0.0);
    const Matrix lookback = series.slice_rows(0, 16);
    const Matrix truth = series.slice_rows(16, 48);

    const ScaleUpResult one = scale_up_forecast(model, lookback, 8, truth, ScaleUpMode::vanilla);
    EXPECT_LT(max_abs_diff(one.prediction, koopa_forward(model, lookback).prediction), 1e-12);
    EXPECT_EQ(one.rounds, 1u);

    const ScaleUpResult van = scale_up_forecast(model, lookback, 30, Matrix(), ScaleUpMode::vanilla);
    EXPECT_EQ(van.prediction.rows(), 30u);
    EXPECT_EQ(van.rounds, 4u);
    EXPECT_EQ(van.adaptation_steps, 0u);

    const ScaleUpResult fast = scale_up_forecast(model, lookback, 30, truth, ScaleUpMode::oa_fast);
    const ScaleUpResult naive = scale_up_forecast(model, lookback, 30, truth, ScaleUpMode::oa_naive);
    EXPECT_EQ(fast.adaptation_steps, 3u * 2u);
    EXPECT_LT(max_abs_diff(fast.prediction, naive.prediction), 1e-8);
    EXPECT_LT(max_abs_diff(fast.prediction.slice_rows(0, 8), van.prediction.slice_rows(0, 8)), 1e-12);
    EXPECT_TRUE(fast.prediction.all_finite());
}

TEST(Adapt, ScaleUpArgumentErrors) {
    ModelConfig cfg = adapt_config();
    const KoopaModel model = KoopaModel::create(cfg, adapt_mask());
    const Matrix series = wave(48, 2, 0.0);
    const Matrix lookback = series.slice_rows(0, 16);
    EXPECT_THROW(scale_up_forecast(model, lookback, 4, Matrix(), ScaleUpMode::vanilla), ArgumentError);
    EXPECT_THROW(scale_up_forecast(model, lookback, 24, series.slice_rows(16, 20), ScaleUpMode::oa_fast),
                 ArgumentError);
    EXPECT_THROW(scale_up_forecast(model, Matrix(15, 2), 24, Matrix(), ScaleUpMode::vanilla), ShapeError);
    cfg.segment_len = 3;
    cfg.horizon = 8;
    const KoopaModel odd = KoopaModel::create(cfg, adapt_mask());
    EXPECT_THROW(scale_up_forecast(odd, lookback, 16, series.slice_rows(16, 48), ScaleUpMode::oa_fast),
                 ArgumentError);
    EXPECT_NO_THROW(scale_up_forecast(odd, lookback, 16, Matrix(), ScaleUpMode::vanilla));
    EXPECT_EQ(parse_scale_up_mode("oa_naive"), ScaleUpMode::oa_naive);
    EXPECT_THROW(parse_scale_up_mode("oa"), ConfigError);
}

TEST(Adapt, BenchmarkRowsAndSlope) {
    AdaptBenchmarkOptions opts;
    opts.dims = {4, 8};
    opts.steps = {16};
    opts.repetitions = 1;
    const auto rows = adaptation_benchmark(opts);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].algorithm, AdaptAlgorithm::fast);
    EXPECT_EQ(rows[1].algorithm, AdaptAlgorithm::naive);
    EXPECT_EQ(rows[0].snapshots, 2u);
    EXPECT_EQ(rows[2].snapshots, 4u);
    const std::string csv = benchmark_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "algorithm,D,F,L,total_seconds,per_step_seconds");
    std::vector<AdaptBenchmarkRow> synthetic;
    for (std::size_t d : {10u, 20u, 40u}) {
        synthetic.push_back({AdaptAlgorithm::fast, d, 2, 1, 0.0, 3.0 * std::pow(static_cast<double>(d), 2.0)});
    }
    EXPECT_NEAR(complexity_slope(synthetic, AdaptAlgorithm::fast), 2.0, 1e-12);
    EXPECT_THROW(complexity_slope(synthetic, AdaptAlgorithm::naive), ArgumentError);
}
