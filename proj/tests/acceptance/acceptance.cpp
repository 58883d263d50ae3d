// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//
//   koopa_acceptance              run every criterion
//   koopa_acceptance 1 3 7        run a subset
//
// Exit status: 0 when nothing failed, 1 on any failure, 77 when every
// requested criterion was skipped.

#include "koopa/adaptation.hpp"
#include "koopa/data.hpp"
#include "koopa/error.hpp"
#include "koopa/eval.hpp"
#include "koopa/linalg.hpp"
#include "koopa/model.hpp"
#include "koopa/neural.hpp"
#include "koopa/spectral.hpp"
#include "koopa/text.hpp"
#include "koopa/train.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace koopa;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::fail;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

Matrix gaussian(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.data()) {
        v = rng.normal();
    }
    return m;
}

// Independent triple-loop product so the checks below do not lean on the
// library kernels they are validating.
Matrix naive_product(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            long double s = 0.0L;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                s += static_cast<long double>(a(i, k)) * b(k, j);
            }
            c(i, j) = static_cast<double>(s);
        }
    }
    return c;
}

// --- 1 ---------------------------------------------------------------------

Outcome adapt_equivalence() {
    const auto t0 = Clock::now();
    Rng rng(20230601);
    const std::size_t dims[] = {2, 4, 8, 16, 32};
    double worst = 0.0;
    for (int stream = 0; stream < 200; ++stream) {
        const std::size_t d = dims[stream % 5];
        const std::size_t f = d + 2 + rng() % (d - 1);
        const std::size_t l = 1 + rng() % 64;
        const Matrix init = gaussian(rng, d, f);
        const Matrix incoming = gaussian(rng, d, l);
        const AdaptTrace fast = adapt_fast(init, incoming);
        const AdaptTrace naive = adapt_naive(init, incoming);
        for (std::size_t i = 0; i < fast.predictions.size(); ++i) {
            worst = std::max(worst, max_abs_diff(fast.k_history[i], naive.k_history[i]));
            worst = std::max(worst, max_abs_diff(fast.predictions[i], naive.predictions[i]));
        }
    }
    const double secs = seconds_since(t0);
    const bool ok = worst <= 1e-8 && secs < 60.0;
    return {ok ? Status::pass : Status::fail,
            "200 streams, max |fast - naive| = " + fmt(worst) + " (limit 1e-8), " + fmt(secs) + " s (limit 60 s)"};
}

// --- 2 ---------------------------------------------------------------------

Outcome adapt_complexity() {
    const auto t0 = Clock::now();
    AdaptBenchmarkOptions fast_opts;
    fast_opts.dims = {16, 32, 64, 128};
    fast_opts.steps = {256};
    fast_opts.repetitions = 5;
    fast_opts.include_naive = false;
    std::vector<AdaptBenchmarkRow> rows = adaptation_benchmark(fast_opts);
    AdaptBenchmarkOptions naive_opts = fast_opts;
    naive_opts.repetitions = 1;
    naive_opts.include_naive = true;
    for (const auto& r : adaptation_benchmark(naive_opts)) {
        if (r.algorithm == AdaptAlgorithm::naive) {
            rows.push_back(r);
        }
    }
    const double slope = complexity_slope(rows, AdaptAlgorithm::fast);
    bool slower = true;
    std::string ratios;
    for (std::size_t d : {64u, 128u}) {
        double tf = 0.0;
        double tn = 0.0;
        for (const auto& r : rows) {
            if (r.dim == d) {
                (r.algorithm == AdaptAlgorithm::fast ? tf : tn) = r.total_seconds;
            }
        }
        slower = slower && tn > tf;
        ratios += " D=" + std::to_string(d) + " naive/fast=" + fmt(tn / tf);
    }
    const double secs = seconds_since(t0);
    const bool ok = slope < 2.6 && slower && secs < 120.0;
    return {ok ? Status::pass : Status::fail,
            "fast log-log slope " + fmt(slope) + " (limit 2.6);" + ratios + "; " + fmt(secs) + " s (limit 120 s)"};
}

// --- 3 ---------------------------------------------------------------------

Outcome edmd_exactness() {
    Rng rng(3);
    int ok_trials = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + rng() % 16;
        Matrix a = gaussian(rng, d, d);
        double radius = 0.0;
        for (const auto& l : eigenvalues(a).eigenvalues) {
            radius = std::max(radius, std::abs(l));
        }
        const double target = rng.uniform(0.5, 0.95);
        a = scale(a, target / radius);
        Matrix z(d, 2 * d);
        for (std::size_t i = 0; i < d; ++i) {
            z(i, 0) = rng.normal();
        }
        for (std::size_t t = 1; t < z.cols(); ++t) {
            z.set_col(t, naive_product(a, Matrix::column(z.col(t - 1))).col(0));
        }
        if (z.cols() < 2) {
            continue;
        }
        const double err = frobenius_norm(sub(edmd_fit(z), a));
        worst = std::max(worst, err);
        ok_trials += err < 1e-6 ? 1 : 0;
    }
    return {ok_trials == 100 ? Status::pass : Status::fail,
            std::to_string(ok_trials) + "/100 trials with ||K - A||_F < 1e-6 (worst " + fmt(worst) + ")"};
}

// --- 4 ---------------------------------------------------------------------

Outcome fourier_closure() {
    Rng rng(4);
    double closure = 0.0;
    double closure_ulps = 0.0;
    double roundtrip = 0.0;
    double parseval = 0.0;
    double partition = 0.0;
    for (std::size_t t : {24u, 48u, 96u, 144u, 192u, 288u}) {
        std::vector<Matrix> windows;
        for (int w = 0; w < 50; ++w) {
            windows.push_back(gaussian(rng, t, 1));
        }
        const spectral::SpectrumMask mask = spectral::build_mask(spectral::accumulate_amplitudes(windows), 0.2);
        const spectral::FourierFilter filter(mask);
        for (const Matrix& x : windows) {
            const spectral::FilterOutput parts = filter.apply(x);
            const Vector xs = x.col(0);
            const double err = max_abs_diff(add(parts.invariant, parts.variant), x);
            closure = std::max(closure, err);
            closure_ulps = std::max(closure_ulps, err / (std::numeric_limits<double>::epsilon() * max_abs(x)));
            const auto spec = spectral::rfft(xs);
            roundtrip = std::max(roundtrip, max_abs_diff(spectral::inverse_rfft(spec, t), xs));
            const double energy = dot(xs, xs);
            parseval = std::max(parseval, std::abs(spectral::spectrum_energy(spec, t) - energy) / energy);
            const Vector xi = parts.invariant.col(0);
            const Vector xv = parts.variant.col(0);
            partition = std::max(partition, std::abs(dot(xi, xi) + dot(xv, xv) - energy) / energy);
        }
    }
    // Closure is judged at floating-point resolution: x_var is formed as
    // x - x_inv, so the sum reproduces x up to one rounding per entry.
    const bool ok = closure_ulps <= 2.0 && roundtrip <= 1e-10 && parseval <= 1e-8 && partition <= 1e-8;
    return {ok ? Status::pass : Status::fail,
            "300 windows: closure " + fmt(closure) + " (" + fmt(closure_ulps) + " ulp of max|x|), roundtrip " +
                fmt(roundtrip) + " (limit 1e-10), Parseval " + fmt(parseval) + ", energy partition " +
                fmt(partition) + " (limit 1e-8)"};
}

// --- 5 ---------------------------------------------------------------------

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.lookback = 8;
    cfg.horizon = 4;
    cfg.variates = 1;
    cfg.embed_dim = 4;
    cfg.segment_len = 4;
    cfg.blocks = 2;
    cfg.hidden_dim = 8;
    cfg.hidden_layers = 1;
    cfg.activation = nn::Activation::tanh;
    cfg.k_inv_init_scale = 0.1;
    return cfg;
}

Outcome gradient_integrity() {
    const ModelConfig cfg = tiny_config();
    spectral::SpectrumMask mask;
    mask.window_length = 8;
    mask.kept = {1, 2};
    mask.alpha = 0.4;
    KoopaModel model = KoopaModel::create(cfg, mask);
    Matrix x(8, 1);
    Matrix y(4, 1);
    for (std::size_t i = 0; i < 8; ++i) {
        x(i, 0) = std::sin(0.7 * static_cast<double>(i) + 0.4) + 0.3 * std::cos(1.9 * static_cast<double>(i));
    }
    for (std::size_t i = 0; i < 4; ++i) {
        y(i, 0) = std::sin(0.7 * static_cast<double>(i + 8) + 0.4);
    }
    KoopaGrads grads = KoopaGrads::zeros_like(model);
    accumulate_sample_gradient(model, x, y, grads);
    auto analytic = grads.parameters();
    auto params = model.parameters();
    double worst_model = 0.0;
    const double h = 1e-6;
    for (std::size_t g = 0; g < params.size(); ++g) {
        for (std::size_t i = 0; i < params[g].size(); ++i) {
            const double saved = params[g][i];
            params[g][i] = saved + h;
            const double up = sample_loss(model, x, y);
            params[g][i] = saved - h;
            const double down = sample_loss(model, x, y);
            params[g][i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(numeric), std::abs(analytic[g][i]), 1e-6});
            worst_model = std::max(worst_model, std::abs(numeric - analytic[g][i]) / denom);
        }
    }
    double worst_layer = 0.0;
    Rng rng(5);
    for (const nn::Mlp* net : {&model.inv_encoder, &model.inv_decoder, &model.var_encoder, &model.var_decoder}) {
        for (nn::Activation act : {nn::Activation::tanh, nn::Activation::relu}) {
            Rng init = rng.split(static_cast<std::uint64_t>(act) + 10);
            const nn::Mlp probe = nn::Mlp::glorot(net->layer_dims(), act, init);
            Vector in(probe.input_dim());
            for (double& v : in) {
                v = rng.normal();
            }
            Vector target(probe.output_dim());
            for (double& v : target) {
                v = rng.normal();
            }
            worst_layer = std::max(worst_layer, nn::gradient_check(probe, in, nn::mse_loss(target)));
        }
    }
    const bool ok = worst_model < 1e-3 && worst_layer < 1e-4;
    return {ok ? Status::pass : Status::fail, "full model (" + std::to_string(model.parameter_count()) +
                                                  " params) worst rel err " + fmt(worst_model) +
                                                  " (limit 1e-3); per-MLP worst " + fmt(worst_layer) +
                                                  " (limit 1e-4)"};
}

// --- 6 ---------------------------------------------------------------------

Outcome penrose() {
    Rng rng(6);
    double worst = 0.0;
    int deficient = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng() % 20;
        const std::size_t n = 1 + rng() % 20;
        const std::size_t full = std::min(m, n);
        std::size_t rank = full;
        if (trial % 2 == 0) {
            rank = rng() % full;
            ++deficient;
        }
        Matrix a = rank == 0 ? Matrix(m, n, 0.0) : naive_product(gaussian(rng, m, rank), gaussian(rng, rank, n));
        const Matrix p = pinv(a);
        const Matrix ap = naive_product(a, p);
        const Matrix pa = naive_product(p, a);
        worst = std::max(worst, max_abs_diff(naive_product(ap, a), a));
        worst = std::max(worst, max_abs_diff(naive_product(pa, p), p));
        worst = std::max(worst, max_abs_diff(ap, transpose(ap)));
        worst = std::max(worst, max_abs_diff(pa, transpose(pa)));
    }
    return {worst <= 1e-8 ? Status::pass : Status::fail,
            "100 matrices (" + std::to_string(deficient) + " rank-deficient), worst Penrose residual " + fmt(worst) +
                " (limit 1e-8)"};
}

// --- 7 ---------------------------------------------------------------------

std::string etth2_path() {
    if (const char* env = std::getenv("KOOPA_ETTH2_CSV"); env != nullptr && *env != '\0') {
        return env;
    }
    return "data/ETTh2.csv";
}

Outcome etth2_desk_scale() {
    const std::string path = etth2_path();
    if (!std::filesystem::exists(path)) {
        return {Status::skip, "ETTh2 CSV not found at '" + path +
                                  "' (set KOOPA_ETTH2_CSV); the H=48 MSE target of 0.26 is not checked"};
    }
    const auto t0 = Clock::now();
    data::Dataset ds = data::load_csv(path);
    ModelConfig cfg;
    cfg.lookback = 96;
    cfg.horizon = 48;
    cfg.blocks = 3;
    cfg.segment_len = 48;
    cfg.batch_size = 32;
    cfg.lr = 1e-3;
    cfg.max_epochs = 10;
    cfg.variates = ds.variates();
    data::chronological_split(ds, {data::SplitPreset::etth}, cfg.lookback, cfg.horizon);
    data::fit_scaler(ds);
    const auto train_pairs = data::windows(ds, data::Split::train, cfg.lookback, cfg.horizon);
    const auto val_pairs = data::windows(ds, data::Split::val, cfg.lookback, cfg.horizon);
    const auto test_pairs = data::windows(ds, data::Split::test, cfg.lookback, cfg.horizon);
    KoopaModel model = KoopaModel::create(cfg, mask_from_windows(train_pairs, cfg));
    train(model, train_pairs, val_pairs);
    const eval::MetricReport rep = eval::evaluate(model, test_pairs);
    const double secs = seconds_since(t0);
    const bool ok = rep.mse <= 0.26;
    return {ok ? Status::pass : Status::fail, "test MSE " + fmt(rep.mse, 4) + " MAE " + fmt(rep.mae, 4) +
                                                  " (limit MSE 0.26), " + fmt(secs, 4) + " s"};
}

// --- 8 / 9 -------------------------------------------------------------------

constexpr std::uint64_t kPanel[10] = {11, 22, 33, 44, 55, 66, 77, 88, 99, 110};

data::SynthParams regime_params() {
    data::SynthParams p;
    p.rows = 2400;
    p.variates = 1;
    p.noise = 0.05;
    p.periods = {24.0, 12.0};
    p.regime_length = 240;
    p.regimes = 2;
    p.variant_scale = 0.6;
    return p;
}

ModelConfig scale_up_config(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.lookback = 96;
    cfg.horizon = 24;
    cfg.segment_len = 12;
    cfg.embed_dim = 16;
    cfg.blocks = 2;
    cfg.hidden_dim = 64;
    cfg.hidden_layers = 2;
    cfg.batch_size = 32;
    cfg.max_epochs = 6;
    cfg.patience = 2;
    cfg.lr = 2e-3;
    cfg.seed = seed;
    return cfg;
}

// Rolling forecast over ground-truth windows with each window's own
// operator. Separates the effect of operator adaptation from the effect of
// reading arrived ground truth.
Matrix truth_fed_rolling(const KoopaModel& model, const Matrix& lookback, const Matrix& truth, std::size_t h_te) {
    const ModelConfig& cfg = model.config();
    Matrix series(cfg.lookback + h_te, cfg.variates);
    for (std::size_t r = 0; r < series.rows(); ++r) {
        for (std::size_t j = 0; j < cfg.variates; ++j) {
            series(r, j) = r < cfg.lookback ? lookback(r, j) : truth(r - cfg.lookback, j);
        }
    }
    const NormStats frame = normalize_window(lookback, cfg.std_floor).stats;
    const Matrix series_n = apply_normalization(series, frame);
    ForwardOptions opts;
    opts.input_prenormalized = true;
    Matrix out(h_te, cfg.variates);
    for (std::size_t k = 0; k * cfg.horizon < h_te; ++k) {
        const ForecastResult fr =
            koopa_forward(model, series_n.slice_rows(k * cfg.horizon, k * cfg.horizon + cfg.lookback), opts);
        for (std::size_t r = 0; r < cfg.horizon && k * cfg.horizon + r < h_te; ++r) {
            for (std::size_t j = 0; j < cfg.variates; ++j) {
                out(k * cfg.horizon + r, j) = fr.normalized_prediction(r, j);
            }
        }
    }
    return denormalize(out, frame);
}

Outcome scale_up_promotion() {
    const auto t0 = Clock::now();
    int wins = 0;
    std::string per_seed;
    double mean_promotion = 0.0;
    double fed_gap = 0.0;
    for (std::uint64_t seed : kPanel) {
        data::Dataset ds = data::synth_generate(data::SynthKind::regime_switch_linear, regime_params(), seed).dataset;
        const ModelConfig cfg = scale_up_config(seed);
        const std::size_t h_te = 4 * cfg.horizon;
        data::chronological_split(ds, {}, cfg.lookback, h_te);
        data::fit_scaler(ds);
        const auto train_pairs = data::windows(ds, data::Split::train, cfg.lookback, cfg.horizon);
        const auto val_pairs = data::windows(ds, data::Split::val, cfg.lookback, cfg.horizon, 4);
        KoopaModel model = KoopaModel::create(cfg, mask_from_windows(train_pairs, cfg));
        train(model, train_pairs, val_pairs);
        const auto test_pairs = data::windows(ds, data::Split::test, cfg.lookback, h_te, cfg.horizon);
        double se_van = 0.0;
        double se_oa = 0.0;
        double se_fed = 0.0;
        for (const auto& w : test_pairs) {
            const ScaleUpResult van = scale_up_forecast(model, w.lookback, h_te, w.target, ScaleUpMode::vanilla);
            const ScaleUpResult oa = scale_up_forecast(model, w.lookback, h_te, w.target, ScaleUpMode::oa_fast);
            se_van += eval::mse(van.prediction, w.target);
            se_oa += eval::mse(oa.prediction, w.target);
            se_fed += eval::mse(truth_fed_rolling(model, w.lookback, w.target, h_te), w.target);
        }
        fed_gap += (se_oa - se_fed) / se_fed / 10.0;
        const bool win = se_oa <= se_van;
        wins += win ? 1 : 0;
        const double promotion = 1.0 - se_oa / se_van;
        mean_promotion += promotion / 10.0;
        per_seed += (per_seed.empty() ? "" : " ") + fmt(100.0 * promotion, 2) + "%";
    }
    const double secs = seconds_since(t0);
    return {wins >= 9 ? Status::pass : Status::fail,
            std::to_string(wins) + "/10 seeds with MSE(OA) <= MSE(vanilla) (need 9); promotion per seed [" +
                per_seed + "], mean " + fmt(100.0 * mean_promotion, 3) +
                "%; OA vs truth-fed rolling without adaptation: " + fmt(100.0 * fed_gap, 3) + "% MSE change, " +
                fmt(secs) + " s"};
}

Outcome dov_direction() {
    int ok_seeds = 0;
    std::string per_seed;
    for (std::uint64_t seed : kPanel) {
        data::Dataset ds = data::synth_generate(data::SynthKind::regime_switch_linear, regime_params(), seed).dataset;
        const std::size_t t = 48;
        const std::size_t h = 12;
        std::vector<Matrix> windows;
        for (std::size_t o = 0; o + t <= ds.rows(); o += 4) {
            windows.push_back(normalize_window(ds.values.slice_rows(o, o + t)).x);
        }
        const spectral::SpectrumMask mask = spectral::build_mask(spectral::accumulate_amplitudes(windows), 0.2);
        eval::DovOptions opts;
        opts.subsets = 10;
        const eval::DovReport rep = eval::degree_of_variation(ds.values, mask, t, h, opts);
        const bool ok = rep.std_variant > rep.std_invariant;
        ok_seeds += ok ? 1 : 0;
        per_seed += (per_seed.empty() ? "" : " ") + fmt(rep.std_variant / rep.std_invariant, 3);
    }
    return {ok_seeds == 10 ? Status::pass : Status::fail,
            std::to_string(ok_seeds) + "/10 seeds with std_variant > std_invariant; ratios [" + per_seed + "]"};
}

// --- 10 --------------------------------------------------------------------

Outcome explosion_policy() {
    data::SynthParams p;
    p.rows = 600;
    data::Dataset ds = data::synth_generate(data::SynthKind::sinusoid_mix, p, 10).dataset;
    ModelConfig cfg;
    cfg.lookback = 24;
    cfg.horizon = 12;
    cfg.segment_len = 12;
    cfg.embed_dim = 8;
    cfg.blocks = 2;
    cfg.hidden_dim = 16;
    cfg.hidden_layers = 1;
    cfg.batch_size = 16;
    cfg.max_epochs = 2;
    data::chronological_split(ds, {}, cfg.lookback, cfg.horizon);
    data::fit_scaler(ds);
    const auto train_pairs = data::windows(ds, data::Split::train, cfg.lookback, cfg.horizon);
    const auto val_pairs = data::windows(ds, data::Split::val, cfg.lookback, cfg.horizon);
    KoopaModel model = KoopaModel::create(cfg, mask_from_windows(train_pairs, cfg));

    std::size_t injected = 0;
    bool replaced_by_identity = true;
    TrainOptions opts;
    opts.operator_hook = [&](std::size_t block, Matrix& k) {
        if (block == 1 && injected < 2) {
            k(0, 1) = std::numeric_limits<double>::quiet_NaN();
            ++injected;
        }
    };
    std::vector<std::string> events;
    opts.on_event = [&](const std::string& e) { events.push_back(e); };
    const TrainLog log = train(model, train_pairs, val_pairs, opts);

    // The forward pass on its own must hand back the identity for the injected block.
    ForwardOptions fopts;
    fopts.operator_hook = [](std::size_t block, Matrix& k) {
        if (block == 0) {
            k(1, 1) = std::numeric_limits<double>::quiet_NaN();
        }
    };
    const ForecastResult fr = koopa_forward(model, train_pairs.front().lookback, fopts);
    replaced_by_identity = fr.k_var[0] == Matrix::identity(cfg.embed_dim) && fr.explosion_events == 1 &&
                           fr.prediction.all_finite();
    const bool continued = log.epochs.size() == cfg.max_epochs && model.all_finite();
    const bool logged = log.explosion_events == injected && !events.empty();
    const bool ok = injected == 2 && replaced_by_identity && continued && logged;
    return {ok ? Status::pass : Status::fail,
            "injected " + std::to_string(injected) + " NaN operators; replaced by identity: " +
                (replaced_by_identity ? "yes" : "no") + "; epochs completed " + std::to_string(log.epochs.size()) +
                "/" + std::to_string(cfg.max_epochs) + "; events logged " + std::to_string(log.explosion_events) +
                (events.empty() ? "" : " (\"" + events.front() + "\")")};
}

// --- 11 --------------------------------------------------------------------

Outcome baseline_sanity() {
    data::SynthParams p;
    p.rows = 3000;
    data::Dataset ds = data::synth_generate(data::SynthKind::sinusoid_mix, p, 11).dataset;
    ModelConfig cfg;
    cfg.lookback = 96;
    cfg.horizon = 48;
    cfg.embed_dim = 32;
    cfg.hidden_dim = 64;
    cfg.max_epochs = 5;
    data::chronological_split(ds, {}, cfg.lookback, cfg.horizon);
    data::fit_scaler(ds);
    const auto train_pairs = data::windows(ds, data::Split::train, cfg.lookback, cfg.horizon);
    const auto val_pairs = data::windows(ds, data::Split::val, cfg.lookback, cfg.horizon, 4);
    const auto test_pairs = data::windows(ds, data::Split::test, cfg.lookback, cfg.horizon);
    KoopaModel model = KoopaModel::create(cfg, mask_from_windows(train_pairs, cfg));
    train(model, train_pairs, val_pairs);
    const eval::MetricReport rep = eval::evaluate(model, test_pairs);
    double naive = 0.0;
    for (const auto& w : test_pairs) {
        naive += eval::mse(eval::repeat_last(w.lookback, cfg.horizon), w.target);
    }
    naive /= static_cast<double>(test_pairs.size());
    const double gain = 1.0 - rep.mse / naive;
    return {gain >= 0.3 ? Status::pass : Status::fail, "Koopa MSE " + fmt(rep.mse, 4) + " vs repeat-last " +
                                                           fmt(naive, 4) + ": improvement " + fmt(100.0 * gain, 3) +
                                                           "% (need >= 30%)"};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopa acceptance criteria"};
    std::vector<int> selected;
    app.add_option("criteria", selected, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all = {
        {1, "adaptation equivalence", adapt_equivalence},
        {2, "adaptation complexity", adapt_complexity},
        {3, "eDMD exactness", edmd_exactness},
        {4, "Fourier filter closure", fourier_closure},
        {5, "gradient integrity", gradient_integrity},
        {6, "pseudoinverse axioms", penrose},
        {7, "ETTh2 desk-scale MSE", etth2_desk_scale},
        {8, "scale-up promotion", scale_up_promotion},
        {9, "disentanglement direction", dov_direction},
        {10, "explosion policy", explosion_policy},
        {11, "baseline sanity", baseline_sanity},
    };
    int failed = 0;
    int skipped = 0;
    int ran = 0;
    for (const Criterion& c : all) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
            continue;
        }
        ++ran;
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {Status::fail, std::string("exception: ") + e.what()};
        }
        const char* tag = out.status == Status::pass ? "PASS" : out.status == Status::skip ? "SKIP" : "FAIL";
        std::cout << tag << " criterion " << c.id << " (" << c.name << "): " << out.detail << std::endl;
        failed += out.status == Status::fail ? 1 : 0;
        skipped += out.status == Status::skip ? 1 : 0;
    }
    if (failed > 0) {
        return 1;
    }
    return skipped == ran ? 77 : 0;
}
