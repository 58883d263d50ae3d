#include "koopa/error.hpp"
#include "koopa/spectral.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace koopa;
using namespace koopa::spectral;
using koopa::testing::gaussian_matrix;

namespace {

std::vector<Complex> naive_dft(const std::vector<Complex>& x, bool inverse) {
    const std::size_t n = x.size();
    std::vector<Complex> out(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        Complex s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
            s += x[j] * Complex(std::cos(ang), std::sin(ang));
        }
        out[k] = inverse ? s / static_cast<double>(n) : s;
    }
    return out;
}

double max_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

} // namespace

TEST(Fft, MatchesNaiveDftForMixedRadixLengths) {
    Rng rng(1);
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 6u, 7u, 8u, 12u, 13u, 24u, 30u, 49u, 96u, 97u, 144u, 210u}) {
        std::vector<Complex> x(n);
        for (auto& v : x) {
            v = Complex(rng.normal(), rng.normal());
        }
        FftPlan plan(n);
        std::vector<Complex> fwd(n);
        std::vector<Complex> inv(n);
        plan.forward(x, fwd);
        plan.inverse(x, inv);
        EXPECT_LT(max_diff(fwd, naive_dft(x, false)), 1e-10 * static_cast<double>(n)) << "n=" << n;
        EXPECT_LT(max_diff(inv, naive_dft(x, true)), 1e-10) << "n=" << n;
    }
    EXPECT_THROW(FftPlan(0), ArgumentError);
}

TEST(Fft, RealTransformRoundTripAndParseval) {
    Rng rng(2);
    for (std::size_t t : {2u, 3u, 8u, 15u, 24u, 48u, 96u, 101u}) {
        Vector x(t);
        double energy = 0.0;
        for (double& v : x) {
            v = rng.normal();
            energy += v * v;
        }
        const auto spec = rfft(x);
        ASSERT_EQ(spec.size(), bin_count(t));
        std::vector<Complex> xc(x.begin(), x.end());
        const auto full = naive_dft(xc, false);
        for (std::size_t k = 0; k < spec.size(); ++k) {
            EXPECT_LT(std::abs(spec[k] - full[k]), 1e-10);
        }
        const Vector back = inverse_rfft(spec, t);
        EXPECT_LT(max_abs_diff(back, x), 1e-12);
        EXPECT_NEAR(spectrum_energy(spec, t), energy, 1e-10 * energy);
    }
    EXPECT_THROW(rfft(Vector{1.0}), ArgumentError);
    EXPECT_THROW(inverse_rfft(std::vector<Complex>(3), 8), ArgumentError);
}

TEST(Mask, KeepsTopAmplitudeBinsWithLowerIndexTieBreak) {
    AmplitudeStats stats;
    stats.window_length = 10;
    stats.mean_amplitude = {5.0, 1.0, 3.0, 3.0, 0.5, 4.0};
    stats.window_count = 1;
    EXPECT_EQ(kept_bin_count(10, 0.5), 3u);
    const SpectrumMask m = build_mask(stats, 0.5);
    EXPECT_EQ(m.kept, (std::vector<std::size_t>{0, 2, 5}));
    EXPECT_TRUE(m.contains(2));
    EXPECT_FALSE(m.contains(3));
    EXPECT_EQ(build_mask(stats, 0.01).kept.size(), 1u);
    EXPECT_THROW(build_mask(stats, 0.0), ArgumentError);
    EXPECT_THROW(build_mask(stats, 1.5), ArgumentError);
}

TEST(Mask, AmplitudeStatisticsFindDominantTone) {
    const std::size_t t = 48;
    std::vector<Matrix> windows;
    Rng rng(3);
    for (int w = 0; w < 10; ++w) {
        Matrix x(t, 2);
        const double phase = rng.uniform(0.0, 6.0);
        for (std::size_t i = 0; i < t; ++i) {
            x(i, 0) = 3.0 * std::sin(2.0 * std::numbers::pi * 4.0 * static_cast<double>(i) / t + phase) +
                      0.1 * rng.normal();
            x(i, 1) = 2.0 * std::cos(2.0 * std::numbers::pi * 4.0 * static_cast<double>(i) / t) + 0.1 * rng.normal();
        }
        windows.push_back(x);
    }
    const AmplitudeStats stats = accumulate_amplitudes(windows);
    EXPECT_EQ(stats.window_count, 10u);
    const SpectrumMask m = build_mask(stats, 1.0 / static_cast<double>(bin_count(t)));
    EXPECT_EQ(m.kept, std::vector<std::size_t>{4});

    AmplitudeAccumulator a(t);
    AmplitudeAccumulator b(t);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        (i < 4 ? a : b).add(windows[i]);
    }
    a.merge(b);
    EXPECT_LT(max_abs_diff(a.finish().mean_amplitude, stats.mean_amplitude), 1e-12);
}

TEST(FourierFilter, ClosureAndEnergyPartition) {
    Rng rng(4);
    for (std::size_t t : {24u, 48u, 96u}) {
        SpectrumMask mask;
        mask.window_length = t;
        mask.kept = {0, 1, 3, t / 4, t / 2};
        mask.alpha = 0.1;
        FourierFilter filter(mask);
        const Matrix x = gaussian_matrix(rng, t, 3);
        const FilterOutput out = filter.apply(x);
        EXPECT_LE(max_abs_diff(add(out.invariant, out.variant), x), 4.0 * std::numeric_limits<double>::epsilon() * max_abs(x));
        EXPECT_LT(max_abs_diff(filter.project(out.invariant), out.invariant), 1e-12);
        EXPECT_LT(max_abs(filter.project(out.variant)), 1e-12);
        for (std::size_t c = 0; c < 3; ++c) {
            const Vector xi = out.invariant.col(c);
            const Vector xv = out.variant.col(c);
            const Vector xc = x.col(c);
            EXPECT_NEAR(dot(xi, xi) + dot(xv, xv), dot(xc, xc), 1e-10);
            EXPECT_NEAR(dot(xi, xv), 0.0, 1e-10);
        }
        const Matrix y = gaussian_matrix(rng, t, 3);
        double lhs = 0.0;
        double rhs = 0.0;
        const Matrix px = filter.project(x);
        const Matrix py = filter.project(y);
        for (std::size_t i = 0; i < x.size(); ++i) {
            lhs += px.data()[i] * y.data()[i];
            rhs += x.data()[i] * py.data()[i];
        }
        EXPECT_NEAR(lhs, rhs, 1e-10);
    }
}

TEST(FourierFilter, FullMaskKeepsEverything) {
    Rng rng(5);
    const Matrix x = gaussian_matrix(rng, 16, 2);
    const FilterOutput out = fourier_filter(x, SpectrumMask::full(16));
    EXPECT_LT(max_abs_diff(out.invariant, x), 1e-12);
    EXPECT_LT(max_abs(out.variant), 1e-12);
}

TEST(FourierFilter, RejectsMismatchedInput) {
    SpectrumMask bad;
    bad.window_length = 8;
    bad.kept = {9};
    EXPECT_THROW(FourierFilter{bad}, ArgumentError);
    EXPECT_THROW(fourier_filter(Matrix(10, 1), SpectrumMask::full(8)), ArgumentError);
}
