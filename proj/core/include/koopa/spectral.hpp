#pragma once

#include "koopa/matrix.hpp"

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace koopa::spectral {

using Complex = std::complex<double>;

/// Mixed-radix Cooley-Tukey plan for arbitrary lengths. Prime factors are
/// handled by a generic butterfly, so a prime length costs O(n^2).
class FftPlan {
public:
    explicit FftPlan(std::size_t n);

    std::size_t size() const noexcept { return n_; }

    /// Unnormalised forward transform, exp(-2 pi i jk / n).
    void forward(std::span<const Complex> in, std::span<Complex> out) const;
    /// Inverse transform including the 1/n factor.
    void inverse(std::span<const Complex> in, std::span<Complex> out) const;

private:
    void transform(std::span<const Complex> in, std::span<Complex> out, const std::vector<Complex>& twiddles) const;
    void work(Complex* out, const Complex* in, std::size_t fstride, std::size_t level,
              const std::vector<Complex>& twiddles, std::vector<Complex>& scratch) const;

    std::size_t n_;
    std::vector<std::size_t> factors_;    // radix per level
    std::vector<std::size_t> remainders_; // n / (product of radices up to and including level)
    std::vector<Complex> forward_twiddles_;
    std::vector<Complex> inverse_twiddles_;
};

/// One-sided DFT of a real signal: floor(T/2)+1 bins. Throws ArgumentError for T < 2.
std::vector<Complex> rfft(std::span<const double> signal);
/// Inverse of rfft for a signal of `length` samples.
Vector inverse_rfft(std::span<const Complex> spectrum, std::size_t length);

/// Signal energy sum(x^2) recovered from a one-sided spectrum (Parseval).
double spectrum_energy(std::span<const Complex> spectrum, std::size_t length);

inline std::size_t bin_count(std::size_t window_length) noexcept { return window_length / 2 + 1; }

struct AmplitudeStats {
    std::size_t window_length = 0;
    Vector mean_amplitude;
    std::size_t window_count = 0;
};

/// Running per-frequency magnitude sums over T x C windows. Partial
/// accumulators can be merged, so the statistics can be gathered in parallel.
class AmplitudeAccumulator {
public:
    explicit AmplitudeAccumulator(std::size_t window_length);

    void add(const Matrix& window);
    void merge(const AmplitudeAccumulator& other);
    AmplitudeStats finish() const;

    std::size_t window_count() const noexcept { return windows_; }

private:
    std::size_t window_length_;
    FftPlan plan_;
    Vector magnitude_sum_;
    std::size_t windows_ = 0;
    std::size_t series_ = 0; // windows x variates
};

/// Averages FFT magnitudes over every window and every variate.
AmplitudeStats accumulate_amplitudes(std::span<const Matrix> windows);

struct SpectrumMask {
    std::size_t window_length = 0;
    std::vector<std::size_t> kept; // sorted, unique
    double alpha = 1.0;

    bool contains(std::size_t bin) const;
    /// Every bin kept (alpha = 1).
    static SpectrumMask full(std::size_t window_length);
};

/// Number of bins the mask keeps for a given alpha: max(1, round(alpha * bins)).
std::size_t kept_bin_count(std::size_t window_length, double alpha);

/// Top-amplitude bins; ties go to the lower frequency index.
SpectrumMask build_mask(const AmplitudeStats& stats, double alpha);

struct FilterOutput {
    Matrix invariant;
    Matrix variant;
};

/// Applies a SpectrumMask column by column with a cached plan. The kept-bin
/// projection is an orthogonal (symmetric) projector, so `project` is also
/// its own adjoint.
class FourierFilter {
public:
    explicit FourierFilter(SpectrumMask mask);

    const SpectrumMask& mask() const noexcept { return mask_; }

    /// Part of x carried by the kept bins.
    Matrix project(const Matrix& x) const;
    /// invariant = project(x), variant = x - invariant.
    FilterOutput apply(const Matrix& x) const;

private:
    SpectrumMask mask_;
    FftPlan plan_;
    std::vector<bool> keep_full_; // length T, mirrored bins included
};

FilterOutput fourier_filter(const Matrix& x, const SpectrumMask& mask);

} // namespace koopa::spectral
