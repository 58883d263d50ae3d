#include "koopa/adaptation.hpp"

#include "koopa/error.hpp"
#include "koopa/rng.hpp"
#include "koopa/text.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>

namespace koopa {
namespace {

Matrix append_col(const Matrix& a, std::span<const double> v) {
    Matrix out(a.rows(), a.cols() + 1);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            out(r, c) = a(r, c);
        }
        out(r, a.cols()) = v[r];
    }
    return out;
}

void check_embedding(std::span<const double> z, std::size_t d, const char* what) {
    if (z.size() != d) {
        throw StreamError(std::string(what) + ": embedding of length " + std::to_string(z.size()) + ", expected " +
                          std::to_string(d));
    }
    for (double v : z) {
        if (!std::isfinite(v)) {
            throw StreamError(std::string(what) + ": non-finite value in incoming embedding");
        }
    }
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

std::string to_string(AdaptAlgorithm a) {
    return a == AdaptAlgorithm::naive ? "naive" : "fast";
}

AdaptState AdaptState::start(const Matrix& snapshots, AdaptAlgorithm algorithm, double rcond) {
    const std::size_t f = snapshots.cols();
    if (f < 2) {
        throw ArgumentError("AdaptState: need at least 2 initial snapshots, got " + std::to_string(f));
    }
    if (!snapshots.all_finite()) {
        throw StreamError("AdaptState: non-finite value in initial snapshots");
    }
    AdaptState s;
    s.algorithm_ = algorithm;
    s.rcond_ = rcond;
    const Matrix back = snapshots.slice_cols(0, f - 1);
    const Matrix fore = snapshots.slice_cols(1, f);
    const Matrix bp = pinv(back, rcond);
    s.k_var_ = matmul(fore, bp);
    s.x_proj_ = matmul(back, bp);
    s.last_ = snapshots.col(f - 1);
    if (algorithm == AdaptAlgorithm::naive) {
        s.z_back_ = back;
        s.z_fore_ = fore;
    } else {
        s.gram_pinv_ = matmul_tn(bp, bp);
    }
    return s;
}

void AdaptState::observe(std::span<const double> z) {
    check_embedding(z, dim(), "AdaptState::observe");
    if (algorithm_ == AdaptAlgorithm::naive) {
        observe_naive(z);
    } else {
        observe_fast(z);
    }
    last_.assign(z.begin(), z.end());
    ++steps_;
}

void AdaptState::observe_naive(std::span<const double> z) {
    z_back_ = append_col(z_back_, last_);
    z_fore_ = append_col(z_fore_, z);
    const Matrix bp = pinv(z_back_, rcond_);
    k_var_ = matmul(z_fore_, bp);
    x_proj_ = matmul(z_back_, bp);
}

void AdaptState::observe_fast(std::span<const double> z) {
    const std::size_t d = dim();
    const Vector& m = last_;
    const Vector xm = matvec(x_proj_, m);
    Vector r(d);
    for (std::size_t i = 0; i < d; ++i) {
        r[i] = m[i] - xm[i];
    }
    const Vector gm = matvec(gram_pinv_, m);
    const double mgm = dot(m, gm);
    const double r_norm = norm2(r);
    const bool degenerate = r_norm <= kDegenerateRatio * norm2(m);

    Vector b(d);
    if (degenerate) {
        const double denom = 1.0 + mgm;
        for (std::size_t i = 0; i < d; ++i) {
            b[i] = gm[i] / denom;
        }
        ++degenerate_;
    } else {
        const double rr = r_norm * r_norm;
        for (std::size_t i = 0; i < d; ++i) {
            b[i] = r[i] / rr;
        }
    }

    const Vector km = matvec(k_var_, m);
    Vector innovation(d);
    for (std::size_t i = 0; i < d; ++i) {
        innovation[i] = z[i] - km[i];
    }
    add_outer(k_var_, innovation, b);
    if (!degenerate) {
        add_outer(x_proj_, r, b);
    }
    add_outer(gram_pinv_, gm, b, -1.0);
    add_outer(gram_pinv_, b, gm, -1.0);
    add_outer(gram_pinv_, b, b, 1.0 + mgm);
}

AdaptTrace adapt(const Matrix& snapshots, const Matrix& stream, AdaptAlgorithm algorithm) {
    if (stream.cols() > 0 && stream.rows() != snapshots.rows()) {
        throw ShapeError("adapt: stream embeddings have dimension " + std::to_string(stream.rows()) +
                         ", snapshots have " + std::to_string(snapshots.rows()));
    }
    AdaptState state = AdaptState::start(snapshots, algorithm);
    AdaptTrace trace;
    trace.predictions.push_back(state.predict());
    trace.k_history.push_back(state.k_var());
    for (std::size_t l = 0; l < stream.cols(); ++l) {
        state.observe(stream.col(l));
        trace.predictions.push_back(state.predict());
        trace.k_history.push_back(state.k_var());
    }
    trace.degenerate_steps = state.degenerate_steps();
    return trace;
}

AdaptTrace adapt_naive(const Matrix& snapshots, const Matrix& stream) {
    return adapt(snapshots, stream, AdaptAlgorithm::naive);
}

AdaptTrace adapt_fast(const Matrix& snapshots, const Matrix& stream) {
    return adapt(snapshots, stream, AdaptAlgorithm::fast);
}

std::string to_string(ScaleUpMode m) {
    switch (m) {
    case ScaleUpMode::vanilla:
        return "vanilla";
    case ScaleUpMode::oa_naive:
        return "oa_naive";
    case ScaleUpMode::oa_fast:
        return "oa_fast";
    }
    return "vanilla";
}

ScaleUpMode parse_scale_up_mode(const std::string& name) {
    if (name == "vanilla") {
        return ScaleUpMode::vanilla;
    }
    if (name == "oa_naive") {
        return ScaleUpMode::oa_naive;
    }
    if (name == "oa_fast") {
        return ScaleUpMode::oa_fast;
    }
    throw ConfigError("unknown scale-up mode '" + name + "' (expected vanilla, oa_naive or oa_fast)");
}

ScaleUpResult scale_up_forecast(const KoopaModel& model, const Matrix& lookback, std::size_t horizon,
                                const Matrix& truth, ScaleUpMode mode) {
    const ModelConfig& cfg = model.config();
    const std::size_t t_len = cfg.lookback;
    const std::size_t h_tr = cfg.horizon;
    const std::size_t s = cfg.segment_length();
    const std::size_t c = cfg.variates;
    if (lookback.rows() != t_len || lookback.cols() != c) {
        throw ShapeError("scale_up_forecast: expected a " + std::to_string(t_len) + "x" + std::to_string(c) +
                         " lookback, got " + lookback.shape_string());
    }
    if (horizon < h_tr) {
        throw ArgumentError("scale_up_forecast: horizon " + std::to_string(horizon) +
                            " is shorter than the trained horizon " + std::to_string(h_tr));
    }
    const bool adaptive = mode != ScaleUpMode::vanilla;
    if (adaptive && h_tr % s != 0) {
        throw ArgumentError("scale_up_forecast: operator adaptation needs the trained horizon (" +
                            std::to_string(h_tr) + ") to be a multiple of the segment length (" + std::to_string(s) +
                            ")");
    }
    const std::size_t rounds = (horizon + h_tr - 1) / h_tr;
    const std::size_t needed_truth = (rounds - 1) * h_tr;
    if (adaptive && (truth.rows() < needed_truth || (truth.rows() > 0 && truth.cols() != c))) {
        throw ArgumentError("scale_up_forecast: operator adaptation needs " + std::to_string(needed_truth) +
                            " ground-truth rows with " + std::to_string(c) + " variates, got " + truth.shape_string());
    }

    NormStats frame;
    if (cfg.normalize) {
        frame = normalize_window(lookback, cfg.std_floor).stats;
    } else {
        frame.mean.assign(c, 0.0);
        frame.stddev.assign(c, 1.0);
    }
    Matrix series(t_len + needed_truth, c);
    const Matrix lookback_n = apply_normalization(lookback, frame);
    for (std::size_t r = 0; r < t_len; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
            series(r, j) = lookback_n(r, j);
        }
    }
    if (adaptive && needed_truth > 0) {
        const Matrix truth_n = apply_normalization(truth.slice_rows(0, needed_truth), frame);
        for (std::size_t r = 0; r < needed_truth; ++r) {
            for (std::size_t j = 0; j < c; ++j) {
                series(t_len + r, j) = truth_n(r, j);
            }
        }
    }

    const AdaptAlgorithm algorithm = mode == ScaleUpMode::oa_naive ? AdaptAlgorithm::naive : AdaptAlgorithm::fast;
    std::vector<AdaptState> states;
    ForwardOptions opts;
    opts.input_prenormalized = true;

    ScaleUpResult res;
    res.rounds = rounds;
    Matrix out_n(horizon, c);
    Matrix window = lookback_n;
    for (std::size_t k = 0; k < rounds; ++k) {
        const ForecastResult fr = koopa_forward(model, window, opts);
        const std::size_t emit = std::min(h_tr, horizon - k * h_tr);
        for (std::size_t r = 0; r < emit; ++r) {
            for (std::size_t j = 0; j < c; ++j) {
                out_n(k * h_tr + r, j) = fr.normalized_prediction(r, j);
            }
        }
        if (k + 1 == rounds) {
            break;
        }

        if (!adaptive) {
            Matrix next(t_len, c);
            for (std::size_t r = 0; r < t_len; ++r) {
                const std::size_t src = r + h_tr;
                for (std::size_t j = 0; j < c; ++j) {
                    next(r, j) = src < t_len ? window(src, j) : fr.normalized_prediction(src - t_len, j);
                }
            }
            window = std::move(next);
            continue;
        }
        // The ground truth for this round has arrived, so the next window is
        // read from it and the variant operator comes from the adapted state.
        window = series.slice_rows((k + 1) * h_tr, (k + 1) * h_tr + t_len);
        if (k == 0) {
            for (std::size_t b = 0; b < cfg.blocks; ++b) {
                states.push_back(AdaptState::start(fr.embeddings[b], algorithm));
            }
        }
        ForwardOptions plain;
        plain.input_prenormalized = true;
        for (std::size_t seg = 0; seg < h_tr / s; ++seg) {
            const std::size_t end = t_len + k * h_tr + (seg + 1) * s;
            const ForecastResult tr = koopa_forward(model, series.slice_rows(end - t_len, end), plain);
            for (std::size_t b = 0; b < cfg.blocks; ++b) {
                const Matrix& z = tr.embeddings[b];
                states[b].observe(z.col(z.cols() - 1));
            }
            ++res.adaptation_steps;
        }
        opts.overrides.assign(cfg.blocks, std::nullopt);
        for (std::size_t b = 0; b < cfg.blocks; ++b) {
            opts.overrides[b] = OperatorOverride{states[b].k_var(), states[b].last_embedding()};
        }
    }
    for (const AdaptState& st : states) {
        res.degenerate_steps += st.degenerate_steps();
    }
    res.prediction = denormalize(out_n, frame);
    return res;
}

std::vector<AdaptBenchmarkRow> adaptation_benchmark(const AdaptBenchmarkOptions& options) {
    if (options.repetitions == 0) {
        throw ArgumentError("adaptation_benchmark: repetitions must be positive");
    }
    std::vector<AdaptBenchmarkRow> rows;
    const Rng root(options.seed);
    for (std::size_t d : options.dims) {
        if (d < 1) {
            throw ArgumentError("adaptation_benchmark: dimensions must be positive");
        }
        const std::size_t f = options.snapshots == 0 ? std::max<std::size_t>(2, d / 2) : options.snapshots;
        for (std::size_t l : options.steps) {
            Rng rng = root.split(d * 1000003 + l);
            Matrix init(d, f);
            for (double& v : init.data()) {
                v = rng.normal();
            }
            Matrix stream(d, l);
            for (double& v : stream.data()) {
                v = rng.normal();
            }
            for (AdaptAlgorithm alg : {AdaptAlgorithm::fast, AdaptAlgorithm::naive}) {
                if (alg == AdaptAlgorithm::naive && !options.include_naive) {
                    continue;
                }
                std::vector<double> times;
                for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
                    AdaptState state = AdaptState::start(init, alg);
                    const auto t0 = std::chrono::steady_clock::now();
                    for (std::size_t i = 0; i < l; ++i) {
                        state.observe(stream.col(i));
                    }
                    const auto t1 = std::chrono::steady_clock::now();
                    times.push_back(std::chrono::duration<double>(t1 - t0).count());
                }
                const double total = median(times);
                rows.push_back({alg, d, f, l, total, l == 0 ? 0.0 : total / static_cast<double>(l)});
            }
        }
    }
    return rows;
}

std::string benchmark_csv(const std::vector<AdaptBenchmarkRow>& rows) {
    std::ostringstream os;
    os << "algorithm,D,F,L,total_seconds,per_step_seconds\n";
    for (const auto& r : rows) {
        os << to_string(r.algorithm) << ',' << r.dim << ',' << r.snapshots << ',' << r.steps << ','
           << text::format_double(r.total_seconds) << ',' << text::format_double(r.per_step_seconds) << '\n';
    }
    return os.str();
}

double complexity_slope(const std::vector<AdaptBenchmarkRow>& rows, AdaptAlgorithm algorithm) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& r : rows) {
        if (r.algorithm == algorithm && r.per_step_seconds > 0.0) {
            xs.push_back(std::log(static_cast<double>(r.dim)));
            ys.push_back(std::log(r.per_step_seconds));
        }
    }
    if (xs.size() < 2) {
        throw ArgumentError("complexity_slope: need timings for at least two dimensions");
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0.0) {
        throw ArgumentError("complexity_slope: all timings share one dimension");
    }
    return sxy / sxx;
}

} // namespace koopa
