#include "koopa/eval.hpp"

#include "koopa/error.hpp"
#include "koopa/linalg.hpp"
#include "koopa/text.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace koopa::eval {
namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": prediction " + a.shape_string() + " and truth " + b.shape_string() +
                         " differ in shape");
    }
    if (a.empty()) {
        throw ShapeError(std::string(what) + ": empty input");
    }
}

double mase_scale(const Matrix& insample, std::size_t seasonality) {
    if (seasonality == 0) {
        throw ArgumentError("mase: seasonality must be positive");
    }
    if (insample.rows() <= seasonality) {
        throw ArgumentError("mase: in-sample series needs more than " + std::to_string(seasonality) + " rows");
    }
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t t = seasonality; t < insample.rows(); ++t) {
        for (std::size_t j = 0; j < insample.cols(); ++j) {
            s += std::abs(insample(t, j) - insample(t - seasonality, j));
            ++n;
        }
    }
    return s / static_cast<double>(n);
}

double population_std(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) {
        mean += x;
    }
    mean /= n;
    double var = 0.0;
    for (double x : v) {
        var += (x - mean) * (x - mean);
    }
    return std::sqrt(var / n);
}

double weight_spread(const std::vector<Matrix>& weights) {
    const std::size_t rows = weights.front().rows();
    const std::size_t cols = weights.front().cols() - 1; // intercept excluded
    std::vector<double> samples(weights.size());
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            for (std::size_t k = 0; k < weights.size(); ++k) {
                samples[k] = weights[k](i, j);
            }
            total += population_std(samples);
        }
    }
    return total / static_cast<double>(rows * cols);
}

} // namespace

double mse(const Matrix& pred, const Matrix& truth) {
    check_same_shape(pred, truth, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred.data()[i] - truth.data()[i];
        s += e * e;
    }
    return s / static_cast<double>(pred.size());
}

double mae(const Matrix& pred, const Matrix& truth) {
    check_same_shape(pred, truth, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        s += std::abs(pred.data()[i] - truth.data()[i]);
    }
    return s / static_cast<double>(pred.size());
}

double smape(const Matrix& pred, const Matrix& truth) {
    check_same_shape(pred, truth, "smape");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred.data()[i];
        const double t = truth.data()[i];
        const double denom = std::abs(p) + std::abs(t);
        if (denom > 0.0) {
            s += 200.0 * std::abs(p - t) / denom;
        }
    }
    return s / static_cast<double>(pred.size());
}

double mase(const Matrix& pred, const Matrix& truth, const Matrix& insample, std::size_t seasonality) {
    check_same_shape(pred, truth, "mase");
    if (insample.cols() != pred.cols()) {
        throw ShapeError("mase: in-sample series has " + std::to_string(insample.cols()) + " variates, forecast has " +
                         std::to_string(pred.cols()));
    }
    const double scale = mase_scale(insample, seasonality);
    if (!(scale > 0.0)) {
        throw MetricError("mase: in-sample seasonal differences are all zero");
    }
    return mae(pred, truth) / scale;
}

void MetricAccumulator::add(const Matrix& pred, const Matrix& truth, const Matrix& insample) {
    check_same_shape(pred, truth, "MetricAccumulator");
    if (horizon_se_.empty()) {
        horizon_se_.assign(pred.rows(), 0.0);
    } else if (horizon_se_.size() != pred.rows()) {
        throw ShapeError("MetricAccumulator: forecast length changed between windows");
    }
    for (std::size_t t = 0; t < pred.rows(); ++t) {
        for (std::size_t j = 0; j < pred.cols(); ++j) {
            const double p = pred(t, j);
            const double y = truth(t, j);
            const double e = p - y;
            se_ += e * e;
            ae_ += std::abs(e);
            const double denom = std::abs(p) + std::abs(y);
            if (denom > 0.0) {
                sm_ += 200.0 * std::abs(e) / denom;
            }
            horizon_se_[t] += e * e;
        }
    }
    entries_ += pred.size();
    horizon_count_ += pred.cols();
    ++windows_;
    if (insample.rows() > seasonality_) {
        const double scale = mase_scale(insample, seasonality_);
        if (scale > 0.0) {
            mase_sum_ += mae(pred, truth) / scale;
            ++mase_windows_;
        }
    }
}

MetricReport MetricAccumulator::finish() const {
    if (windows_ == 0) {
        throw ArgumentError("MetricAccumulator: no windows were added");
    }
    MetricReport r;
    const double n = static_cast<double>(entries_);
    r.mse = se_ / n;
    r.mae = ae_ / n;
    r.smape = sm_ / n;
    r.mase = mase_windows_ == 0 ? std::numeric_limits<double>::quiet_NaN()
                                : mase_sum_ / static_cast<double>(mase_windows_);
    r.window_count = windows_;
    r.mase_window_count = mase_windows_;
    for (double v : horizon_se_) {
        r.per_horizon_mse.push_back(v / static_cast<double>(horizon_count_));
    }
    return r;
}

MetricReport evaluate(const KoopaModel& model, const std::vector<data::WindowPair>& pairs, std::size_t seasonality) {
    MetricAccumulator acc(seasonality);
    for (const auto& w : pairs) {
        const ForecastResult fr = koopa_forward(model, w.lookback);
        acc.add(fr.prediction, w.target, w.lookback);
    }
    return acc.finish();
}

std::string metric_csv(const MetricReport& r) {
    std::ostringstream os;
    os << "mse,mae,smape,mase,windows\n"
       << text::format_double(r.mse) << ',' << text::format_double(r.mae) << ',' << text::format_double(r.smape)
       << ',' << text::format_double(r.mase) << ',' << r.window_count << '\n';
    return os.str();
}

Matrix repeat_last(const Matrix& lookback, std::size_t horizon) {
    if (lookback.rows() == 0) {
        throw ArgumentError("repeat_last: empty lookback");
    }
    Matrix out(horizon, lookback.cols());
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t j = 0; j < lookback.cols(); ++j) {
            out(t, j) = lookback(lookback.rows() - 1, j);
        }
    }
    return out;
}

Matrix seasonal_naive(const Matrix& lookback, std::size_t horizon, std::size_t season) {
    if (season == 0 || season > lookback.rows()) {
        throw ArgumentError("seasonal_naive: season " + std::to_string(season) + " must lie in [1, " +
                            std::to_string(lookback.rows()) + "]");
    }
    const std::size_t base = lookback.rows() - season;
    Matrix out(horizon, lookback.cols());
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t j = 0; j < lookback.cols(); ++j) {
            out(t, j) = lookback(base + t % season, j);
        }
    }
    return out;
}

Matrix linear_extrapolation(const Matrix& lookback, std::size_t horizon) {
    const std::size_t n = lookback.rows();
    if (n < 2) {
        throw ArgumentError("linear_extrapolation: need at least 2 lookback rows");
    }
    const double tm = 0.5 * static_cast<double>(n - 1);
    double stt = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        stt += (static_cast<double>(t) - tm) * (static_cast<double>(t) - tm);
    }
    Matrix out(horizon, lookback.cols());
    for (std::size_t j = 0; j < lookback.cols(); ++j) {
        double ym = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            ym += lookback(t, j);
        }
        ym /= static_cast<double>(n);
        double sty = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            sty += (static_cast<double>(t) - tm) * (lookback(t, j) - ym);
        }
        const double slope = sty / stt;
        for (std::size_t h = 0; h < horizon; ++h) {
            out(h, j) = ym + slope * (static_cast<double>(n + h) - tm);
        }
    }
    return out;
}

BaselineForecasts naive_baselines(const Matrix& lookback, std::size_t horizon, std::size_t season) {
    return {repeat_last(lookback, horizon), seasonal_naive(lookback, horizon, season),
            linear_extrapolation(lookback, horizon)};
}

Matrix fit_linear_map(const Matrix& x, const Matrix& y, double ridge) {
    if (x.rows() != y.rows() || x.rows() == 0) {
        throw ShapeError("fit_linear_map: " + x.shape_string() + " inputs and " + y.shape_string() +
                         " targets need the same positive row count");
    }
    const std::size_t n = x.rows();
    const std::size_t p = x.cols() + 1;
    Matrix xa(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j + 1 < p; ++j) {
            xa(i, j) = x(i, j);
        }
        xa(i, p - 1) = 1.0;
    }
    if (n >= p) {
        return transpose(matmul(pinv(xa), y));
    }
    Matrix gram = matmul_tn(xa, xa);
    for (std::size_t i = 0; i < p; ++i) {
        gram(i, i) += ridge;
    }
    return transpose(solve_spd(gram, matmul_tn(xa, y)));
}

DovReport degree_of_variation(const Matrix& series, const spectral::SpectrumMask& mask, std::size_t lookback,
                              std::size_t horizon, const DovOptions& options) {
    if (options.subsets == 0) {
        throw ArgumentError("degree_of_variation: subsets must be positive");
    }
    if (mask.window_length != lookback) {
        throw ArgumentError("degree_of_variation: mask window length " + std::to_string(mask.window_length) +
                            " differs from lookback " + std::to_string(lookback));
    }
    if (horizon == 0 || horizon > lookback) {
        throw ArgumentError("degree_of_variation: horizon must lie in [1, lookback]");
    }
    const std::size_t n = series.rows();
    const std::size_t span = lookback + horizon;
    const spectral::FourierFilter filter(mask);
    const std::size_t c = series.cols();

    DovReport rep;
    rep.subsets = options.subsets;
    std::vector<Matrix> w_inv;
    std::vector<Matrix> w_var;
    for (std::size_t s = 0; s < options.subsets; ++s) {
        const std::size_t begin = s * n / options.subsets;
        const std::size_t end = (s + 1) * n / options.subsets;
        if (end - begin < span) {
            throw ArgumentError("degree_of_variation: subset " + std::to_string(s) + " holds " +
                                std::to_string(end - begin) + " rows, at least " + std::to_string(span) +
                                " are required");
        }
        const std::size_t count = end - begin - span + 1;
        Matrix xi(count, lookback * c);
        Matrix xv(count, lookback * c);
        Matrix yi(count, horizon * c);
        Matrix yv(count, horizon * c);
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t o = begin + k;
            const spectral::FilterOutput in = filter.apply(series.slice_rows(o, o + lookback));
            const spectral::FilterOutput out = filter.apply(series.slice_rows(o + horizon, o + span));
            std::copy(in.invariant.data().begin(), in.invariant.data().end(), xi.row(k).begin());
            std::copy(in.variant.data().begin(), in.variant.data().end(), xv.row(k).begin());
            const std::size_t tail = (lookback - horizon) * c;
            std::copy(out.invariant.data().begin() + static_cast<std::ptrdiff_t>(tail), out.invariant.data().end(),
                      yi.row(k).begin());
            std::copy(out.variant.data().begin() + static_cast<std::ptrdiff_t>(tail), out.variant.data().end(),
                      yv.row(k).begin());
        }
        w_inv.push_back(fit_linear_map(xi, yi, options.ridge));
        w_var.push_back(fit_linear_map(xv, yv, options.ridge));
    }
    rep.std_invariant = weight_spread(w_inv);
    rep.std_variant = weight_spread(w_var);
    if (options.keep_weights) {
        for (auto* group : {&w_inv, &w_var}) {
            for (Matrix& w : *group) {
                w = w.slice_cols(0, w.cols() - 1);
            }
        }
        rep.weights_invariant = std::move(w_inv);
        rep.weights_variant = std::move(w_var);
    }
    return rep;
}

StabilityReport stability_report(const KoopaModel& model, const std::vector<Matrix>& lookbacks) {
    StabilityReport rep;
    auto add_points = [&](const Matrix& k, const std::string& id) {
        for (const auto& l : eigenvalues(k).eigenvalues) {
            rep.eigenvalues.push_back({id, l.real(), l.imag()});
        }
    };
    for (std::size_t b = 0; b < model.k_inv.size(); ++b) {
        rep.rows.push_back({"k_inv", b, 0, operator_stability(model.k_inv[b])});
        add_points(model.k_inv[b], "k_inv/" + std::to_string(b));
    }
    for (std::size_t w = 0; w < lookbacks.size(); ++w) {
        const ForecastResult fr = koopa_forward(model, lookbacks[w]);
        rep.rows.push_back({"k_var", 0, w, operator_stability(fr.k_var[0])});
        add_points(fr.k_var[0], "k_var/" + std::to_string(w));
    }
    return rep;
}

std::string stability_csv(const StabilityReport& r) {
    std::ostringstream os;
    os << "kind,block,window,stability\n";
    for (const auto& row : r.rows) {
        os << row.kind << ',' << row.block << ',' << row.window << ',' << text::format_double(row.stability) << '\n';
    }
    return os.str();
}

std::string eigenvalue_csv(const StabilityReport& r) {
    std::ostringstream os;
    os << "id,re,im\n";
    for (const auto& p : r.eigenvalues) {
        os << p.id << ',' << text::format_double(p.re) << ',' << text::format_double(p.im) << '\n';
    }
    return os.str();
}

} // namespace koopa::eval
