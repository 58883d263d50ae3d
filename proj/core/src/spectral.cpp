#include "koopa/spectral.hpp"

#include "koopa/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace koopa::spectral {
namespace {

std::vector<std::size_t> factorize(std::size_t n) {
    std::vector<std::size_t> f;
    for (std::size_t p = 2; p * p <= n; ++p) {
        while (n % p == 0) {
            f.push_back(p);
            n /= p;
        }
    }
    if (n > 1) {
        f.push_back(n);
    }
    return f;
}

} // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
    if (n == 0) {
        throw ArgumentError("FftPlan: length must be positive");
    }
    factors_ = factorize(n);
    if (factors_.empty()) {
        factors_.push_back(1);
    }
    std::size_t len = n;
    for (std::size_t p : factors_) {
        len /= p;
        remainders_.push_back(len);
    }
    forward_twiddles_.resize(n);
    inverse_twiddles_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double phase = -2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        forward_twiddles_[i] = {std::cos(phase), std::sin(phase)};
        inverse_twiddles_[i] = std::conj(forward_twiddles_[i]);
    }
}

void FftPlan::work(Complex* out, const Complex* in, std::size_t fstride, std::size_t level,
                   const std::vector<Complex>& twiddles, std::vector<Complex>& scratch) const {
    const std::size_t p = factors_[level];
    const std::size_t m = remainders_[level];
    if (m == 1) {
        for (std::size_t j = 0; j < p; ++j) {
            out[j] = in[j * fstride];
        }
    } else {
        for (std::size_t j = 0; j < p; ++j) {
            work(out + j * m, in + j * fstride, fstride * p, level + 1, twiddles, scratch);
        }
    }
    if (p == 1) {
        return;
    }
    if (p == 2) {
        for (std::size_t u = 0; u < m; ++u) {
            const Complex t = out[u + m] * twiddles[u * fstride];
            out[u + m] = out[u] - t;
            out[u] += t;
        }
        return;
    }
    for (std::size_t u = 0; u < m; ++u) {
        for (std::size_t q = 0; q < p; ++q) {
            scratch[q] = out[u + q * m];
        }
        for (std::size_t q1 = 0; q1 < p; ++q1) {
            const std::size_t k = u + q1 * m;
            Complex acc = scratch[0];
            std::size_t twidx = 0;
            for (std::size_t q = 1; q < p; ++q) {
                twidx += fstride * k;
                twidx %= n_;
                acc += scratch[q] * twiddles[twidx];
            }
            out[k] = acc;
        }
    }
}

void FftPlan::transform(std::span<const Complex> in, std::span<Complex> out,
                        const std::vector<Complex>& twiddles) const {
    if (in.size() != n_ || out.size() != n_) {
        throw ShapeError("FftPlan: expected buffers of length " + std::to_string(n_));
    }
    std::vector<Complex> scratch(*std::max_element(factors_.begin(), factors_.end()));
    if (in.data() == out.data()) {
        std::vector<Complex> copy(in.begin(), in.end());
        work(out.data(), copy.data(), 1, 0, twiddles, scratch);
    } else {
        work(out.data(), in.data(), 1, 0, twiddles, scratch);
    }
}

void FftPlan::forward(std::span<const Complex> in, std::span<Complex> out) const {
    transform(in, out, forward_twiddles_);
}

void FftPlan::inverse(std::span<const Complex> in, std::span<Complex> out) const {
    transform(in, out, inverse_twiddles_);
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (Complex& c : out) {
        c *= inv_n;
    }
}

std::vector<Complex> rfft(std::span<const double> signal) {
    const std::size_t t = signal.size();
    if (t < 2) {
        throw ArgumentError("rfft: signal length must be at least 2, got " + std::to_string(t));
    }
    FftPlan plan(t);
    std::vector<Complex> buf(signal.begin(), signal.end());
    std::vector<Complex> out(t);
    plan.forward(buf, out);
    out.resize(bin_count(t));
    return out;
}

Vector inverse_rfft(std::span<const Complex> spectrum, std::size_t length) {
    if (length < 2) {
        throw ArgumentError("inverse_rfft: length must be at least 2, got " + std::to_string(length));
    }
    if (spectrum.size() != bin_count(length)) {
        throw ArgumentError("inverse_rfft: expected " + std::to_string(bin_count(length)) + " bins for length " +
                            std::to_string(length) + ", got " + std::to_string(spectrum.size()));
    }
    std::vector<Complex> full(length);
    full[0] = spectrum[0].real();
    for (std::size_t k = 1; k < spectrum.size(); ++k) {
        full[k] = spectrum[k];
        if (length - k != k) {
            full[length - k] = std::conj(spectrum[k]);
        } else {
            full[k] = spectrum[k].real();
        }
    }
    FftPlan plan(length);
    std::vector<Complex> out(length);
    plan.inverse(full, out);
    Vector x(length);
    for (std::size_t i = 0; i < length; ++i) {
        x[i] = out[i].real();
    }
    return x;
}

double spectrum_energy(std::span<const Complex> spectrum, std::size_t length) {
    double e = 0.0;
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        const bool self_conjugate = k == 0 || 2 * k == length;
        e += (self_conjugate ? 1.0 : 2.0) * std::norm(spectrum[k]);
    }
    return e / static_cast<double>(length);
}

AmplitudeAccumulator::AmplitudeAccumulator(std::size_t window_length)
    : window_length_(window_length), plan_(std::max<std::size_t>(window_length, 1)),
      magnitude_sum_(bin_count(window_length), 0.0) {
    if (window_length < 2) {
        throw ArgumentError("amplitude statistics need windows of at least 2 rows");
    }
}

void AmplitudeAccumulator::add(const Matrix& window) {
    if (window.rows() != window_length_) {
        throw ArgumentError("accumulate_amplitudes: window has " + std::to_string(window.rows()) +
                            " rows, expected " + std::to_string(window_length_));
    }
    std::vector<Complex> buf(window_length_);
    std::vector<Complex> spec(window_length_);
    for (std::size_t c = 0; c < window.cols(); ++c) {
        for (std::size_t t = 0; t < window_length_; ++t) {
            buf[t] = window(t, c);
        }
        plan_.forward(buf, spec);
        for (std::size_t k = 0; k < magnitude_sum_.size(); ++k) {
            magnitude_sum_[k] += std::abs(spec[k]);
        }
    }
    ++windows_;
    series_ += window.cols();
}

void AmplitudeAccumulator::merge(const AmplitudeAccumulator& other) {
    if (other.window_length_ != window_length_) {
        throw ArgumentError("AmplitudeAccumulator::merge: window lengths differ");
    }
    for (std::size_t k = 0; k < magnitude_sum_.size(); ++k) {
        magnitude_sum_[k] += other.magnitude_sum_[k];
    }
    windows_ += other.windows_;
    series_ += other.series_;
}

AmplitudeStats AmplitudeAccumulator::finish() const {
    if (windows_ == 0) {
        throw ArgumentError("accumulate_amplitudes: no windows supplied");
    }
    AmplitudeStats s;
    s.window_length = window_length_;
    s.window_count = windows_;
    s.mean_amplitude.resize(magnitude_sum_.size());
    const double denom = series_ == 0 ? 1.0 : static_cast<double>(series_);
    for (std::size_t k = 0; k < magnitude_sum_.size(); ++k) {
        s.mean_amplitude[k] = magnitude_sum_[k] / denom;
    }
    return s;
}

AmplitudeStats accumulate_amplitudes(std::span<const Matrix> windows) {
    if (windows.empty()) {
        throw ArgumentError("accumulate_amplitudes: no windows supplied");
    }
    AmplitudeAccumulator acc(windows.front().rows());
    for (const Matrix& w : windows) {
        acc.add(w);
    }
    return acc.finish();
}

bool SpectrumMask::contains(std::size_t bin) const {
    return std::binary_search(kept.begin(), kept.end(), bin);
}

SpectrumMask SpectrumMask::full(std::size_t window_length) {
    SpectrumMask m;
    m.window_length = window_length;
    m.alpha = 1.0;
    m.kept.resize(bin_count(window_length));
    std::iota(m.kept.begin(), m.kept.end(), std::size_t{0});
    return m;
}

std::size_t kept_bin_count(std::size_t window_length, double alpha) {
    const double bins = static_cast<double>(bin_count(window_length));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(alpha * bins)));
}

SpectrumMask build_mask(const AmplitudeStats& stats, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ArgumentError("build_mask: alpha must lie in (0, 1], got " + std::to_string(alpha));
    }
    const std::size_t bins = stats.mean_amplitude.size();
    if (bins != bin_count(stats.window_length)) {
        throw ArgumentError("build_mask: amplitude statistics do not match window length");
    }
    std::vector<std::size_t> order(bins);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return stats.mean_amplitude[a] > stats.mean_amplitude[b];
    });
    const std::size_t keep = std::min(bins, kept_bin_count(stats.window_length, alpha));
    SpectrumMask m;
    m.window_length = stats.window_length;
    m.alpha = alpha;
    m.kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(m.kept.begin(), m.kept.end());
    return m;
}

FourierFilter::FourierFilter(SpectrumMask mask)
    : mask_(std::move(mask)), plan_(std::max<std::size_t>(mask_.window_length, 1)),
      keep_full_(mask_.window_length, false) {
    const std::size_t t = mask_.window_length;
    if (t < 2) {
        throw ArgumentError("FourierFilter: window length must be at least 2");
    }
    for (std::size_t k : mask_.kept) {
        if (k >= bin_count(t)) {
            throw ArgumentError("FourierFilter: mask bin " + std::to_string(k) + " out of range");
        }
        keep_full_[k] = true;
        keep_full_[(t - k) % t] = true;
    }
}

Matrix FourierFilter::project(const Matrix& x) const {
    const std::size_t t = mask_.window_length;
    if (x.rows() != t) {
        throw ArgumentError("fourier_filter: window has " + std::to_string(x.rows()) + " rows, mask expects " +
                            std::to_string(t));
    }
    Matrix out(t, x.cols());
    std::vector<Complex> buf(t);
    std::vector<Complex> spec(t);
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t i = 0; i < t; ++i) {
            buf[i] = x(i, c);
        }
        plan_.forward(buf, spec);
        for (std::size_t k = 0; k < t; ++k) {
            if (!keep_full_[k]) {
                spec[k] = 0.0;
            }
        }
        plan_.inverse(spec, buf);
        for (std::size_t i = 0; i < t; ++i) {
            out(i, c) = buf[i].real();
        }
    }
    return out;
}

FilterOutput FourierFilter::apply(const Matrix& x) const {
    FilterOutput out;
    out.invariant = project(x);
    out.variant = sub(x, out.invariant);
    return out;
}

FilterOutput fourier_filter(const Matrix& x, const SpectrumMask& mask) {
    return FourierFilter(mask).apply(x);
}

} // namespace koopa::spectral
