#include "koopa/model.hpp"

#include "koopa/error.hpp"
#include "koopa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace koopa {
namespace {

struct InvTape {
    nn::GradientTape enc;
    nn::GradientTape dec;
    Vector z_back;
};

struct VarTape {
    std::vector<nn::GradientTape> enc;
    std::vector<nn::GradientTape> dec_fit;
    std::vector<nn::GradientTape> dec_pred;
    Matrix z;      // D x n snapshots
    Matrix a_pinv; // pinv(Z_back)
    Matrix k;
    bool k_constant = false;
    std::vector<Vector> chain; // anchor followed by the predicted embeddings
};

struct BlockTape {
    InvTape inv;
    VarTape var;
};

struct ModelTape {
    std::vector<BlockTape> blocks;
};

Vector run_mlp(const nn::Mlp& net, std::span<const double> x, nn::GradientTape* tape) {
    if (tape == nullptr) {
        return nn::mlp_apply(net, x);
    }
    nn::MlpOutput out = nn::mlp_forward(net, x);
    *tape = std::move(out.tape);
    return std::move(out.y);
}

void check_window(const ModelConfig& cfg, const Matrix& x, const char* what) {
    if (x.rows() != cfg.lookback || x.cols() != cfg.variates) {
        throw ShapeError(std::string(what) + ": expected a " + std::to_string(cfg.lookback) + "x" +
                         std::to_string(cfg.variates) + " window, got " + x.shape_string());
    }
}

std::vector<std::size_t> mlp_dims(const ModelConfig& cfg, std::size_t in, std::size_t out) {
    std::vector<std::size_t> dims{in};
    for (std::size_t l = 0; l < cfg.hidden_layers; ++l) {
        dims.push_back(cfg.hidden_dim);
    }
    dims.push_back(out);
    return dims;
}

Matrix inv_forward_impl(const KoopaModel& model, std::size_t block, const Matrix& x_inv, InvTape* tape) {
    const ModelConfig& cfg = model.config();
    const Vector flat = flatten(x_inv);
    Vector z_back = run_mlp(model.inv_encoder, flat, tape ? &tape->enc : nullptr);
    const Vector z_fore = matvec(model.k_inv[block], z_back);
    const Vector y = run_mlp(model.inv_decoder, z_fore, tape ? &tape->dec : nullptr);
    if (tape != nullptr) {
        tape->z_back = std::move(z_back);
    }
    return unflatten(y, cfg.horizon, cfg.variates);
}

TimeVarOutput var_forward_impl(const KoopaModel& model, std::size_t block, const Matrix& x_var,
                               const OperatorOverride* override_op,
                               const std::function<void(std::size_t, Matrix&)>& hook, VarTape* tape) {
    const ModelConfig& cfg = model.config();
    const std::size_t s = cfg.segment_length();
    const std::size_t n = cfg.lookback_segments();
    const std::size_t h = cfg.horizon_segments();
    const std::size_t d = cfg.embed_dim;
    const std::size_t c = cfg.variates;
    const std::size_t padded = n * s;
    const std::size_t pad = padded - cfg.lookback;

    const std::vector<Matrix> segs = segment(x_var, s);
    Matrix z(d, n);
    if (tape != nullptr) {
        tape->enc.resize(n);
        tape->dec_fit.resize(n);
        tape->dec_pred.resize(h);
    }
    for (std::size_t j = 0; j < n; ++j) {
        const Vector zj = run_mlp(model.var_encoder, flatten(segs[j]), tape ? &tape->enc[j] : nullptr);
        z.set_col(j, zj);
    }

    const Matrix z_back = z.slice_cols(0, n - 1);
    const Matrix z_fore = z.slice_cols(1, n);
    Matrix a_pinv;
    Matrix k;
    try {
        a_pinv = pinv(z_back);
        k = matmul(z_fore, a_pinv);
    } catch (const NumericError&) {
        k = Matrix(d, d, std::numeric_limits<double>::quiet_NaN());
    }
    if (hook) {
        hook(block, k);
    }
    TimeVarOutput out;
    k = explosion_check(k, &out.k_var_replaced);

    Matrix fit_padded(padded, c);
    for (std::size_t j = 0; j < n; ++j) {
        const Vector zhat = j == 0 ? z.col(0) : matvec(k, z.col(j - 1));
        const Vector seg = run_mlp(model.var_decoder, zhat, tape ? &tape->dec_fit[j] : nullptr);
        for (std::size_t r = 0; r < s; ++r) {
            for (std::size_t cc = 0; cc < c; ++cc) {
                fit_padded(j * s + r, cc) = seg[r * c + cc];
            }
        }
    }

    const Matrix& k_pred = override_op ? override_op->k_var : k;
    Vector p = override_op ? override_op->anchor : z.col(n - 1);
    if (k_pred.rows() != d || k_pred.cols() != d || p.size() != d) {
        throw ShapeError("time_var_forward: override operator or anchor does not match embed_dim " +
                         std::to_string(d));
    }
    if (tape != nullptr) {
        tape->chain.assign(1, p);
    }
    Matrix pred(h * s, c);
    for (std::size_t t = 0; t < h; ++t) {
        p = matvec(k_pred, p);
        if (tape != nullptr) {
            tape->chain.push_back(p);
        }
        const Vector seg = run_mlp(model.var_decoder, p, tape ? &tape->dec_pred[t] : nullptr);
        for (std::size_t r = 0; r < s; ++r) {
            for (std::size_t cc = 0; cc < c; ++cc) {
                pred(t * s + r, cc) = seg[r * c + cc];
            }
        }
    }

    out.x_var_fit = fit_padded.slice_rows(pad, padded);
    out.y_var = pred.slice_rows(0, cfg.horizon);
    out.k_var = k;
    out.embeddings = z;
    if (tape != nullptr) {
        tape->z = std::move(z);
        tape->a_pinv = std::move(a_pinv);
        tape->k = std::move(k);
        tape->k_constant = out.k_var_replaced || cfg.detach_kvar;
    }
    return out;
}

ForecastResult forward_impl(const KoopaModel& model, const Matrix& x, const ForwardOptions& options,
                            ModelTape* tape) {
    const ModelConfig& cfg = model.config();
    check_window(cfg, x, "koopa_forward");
    if (!options.overrides.empty() && options.overrides.size() != cfg.blocks) {
        throw ArgumentError("koopa_forward: expected one override slot per block (" + std::to_string(cfg.blocks) +
                            "), got " + std::to_string(options.overrides.size()));
    }

    ForecastResult res;
    Matrix cur;
    if (cfg.normalize && !options.input_prenormalized) {
        NormalizedWindow nw = normalize_window(x, cfg.std_floor);
        cur = std::move(nw.x);
        res.norm = std::move(nw.stats);
    } else {
        cur = x;
        res.norm.mean.assign(cfg.variates, 0.0);
        res.norm.stddev.assign(cfg.variates, 1.0);
    }

    if (tape != nullptr) {
        tape->blocks.resize(cfg.blocks);
    }
    Matrix total(cfg.horizon, cfg.variates);
    res.residual_trace.push_back(cur);
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        const spectral::FilterOutput parts = model.filter().apply(cur);
        BlockTape* bt = tape ? &tape->blocks[b] : nullptr;
        Matrix y_inv = inv_forward_impl(model, b, parts.invariant, bt ? &bt->inv : nullptr);
        const OperatorOverride* ov =
            options.overrides.empty() || !options.overrides[b] ? nullptr : &*options.overrides[b];
        TimeVarOutput tv = var_forward_impl(model, b, parts.variant, ov, options.operator_hook,
                                            bt ? &bt->var : nullptr);
        if (tv.k_var_replaced) {
            ++res.explosion_events;
        }
        cur = sub(parts.variant, tv.x_var_fit);
        total = add(total, add(tv.y_var, y_inv));
        res.residual_trace.push_back(cur);
        res.x_var.push_back(parts.variant);
        res.x_var_fit.push_back(std::move(tv.x_var_fit));
        res.k_var.push_back(std::move(tv.k_var));
        res.embeddings.push_back(std::move(tv.embeddings));
        res.per_block_contributions.push_back({std::move(tv.y_var), std::move(y_inv)});
    }
    res.normalized_prediction = total;
    res.prediction = denormalize(total, res.norm);
    return res;
}

Matrix inv_backward(const KoopaModel& model, std::size_t block, const InvTape& tape, const Matrix& dy,
                    KoopaGrads& grads) {
    const ModelConfig& cfg = model.config();
    const Vector dz_fore = nn::mlp_backward(model.inv_decoder, tape.dec, flatten(dy), grads.inv_decoder);
    add_outer(grads.k_inv[block], dz_fore, tape.z_back);
    const Vector dz_back = matvec_t(model.k_inv[block], dz_fore);
    const Vector dx = nn::mlp_backward(model.inv_encoder, tape.enc, dz_back, grads.inv_encoder);
    return unflatten(dx, cfg.lookback, cfg.variates);
}

void add_to_col(Matrix& m, std::size_t col, std::span<const double> v) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        m(r, col) += v[r];
    }
}

Matrix var_backward(const KoopaModel& model, const VarTape& tape, const Matrix& dfit, const Matrix& dy,
                    KoopaGrads& grads) {
    const ModelConfig& cfg = model.config();
    const std::size_t s = cfg.segment_length();
    const std::size_t n = cfg.lookback_segments();
    const std::size_t h = cfg.horizon_segments();
    const std::size_t d = cfg.embed_dim;
    const std::size_t c = cfg.variates;
    const std::size_t pad = n * s - cfg.lookback;

    auto segment_grad = [&](const Matrix& g, std::size_t row0, std::size_t offset) {
        Vector v(s * c, 0.0);
        for (std::size_t r = 0; r < s; ++r) {
            const std::size_t padded_row = row0 + r;
            if (padded_row < offset || padded_row - offset >= g.rows()) {
                continue;
            }
            for (std::size_t cc = 0; cc < c; ++cc) {
                v[r * c + cc] = g(padded_row - offset, cc);
            }
        }
        return v;
    };

    Matrix dz(d, n);
    Matrix dk(d, d);
    for (std::size_t j = 0; j < n; ++j) {
        const Vector dzhat =
            nn::mlp_backward(model.var_decoder, tape.dec_fit[j], segment_grad(dfit, j * s, pad), grads.var_decoder);
        if (j == 0) {
            add_to_col(dz, 0, dzhat);
        } else {
            const Vector prev = tape.z.col(j - 1);
            add_outer(dk, dzhat, prev);
            add_to_col(dz, j - 1, matvec_t(tape.k, dzhat));
        }
    }

    Vector g(d, 0.0);
    for (std::size_t t = h; t-- > 0;) {
        const Vector dp =
            nn::mlp_backward(model.var_decoder, tape.dec_pred[t], segment_grad(dy, t * s, 0), grads.var_decoder);
        for (std::size_t i = 0; i < d; ++i) {
            g[i] += dp[i];
        }
        add_outer(dk, g, tape.chain[t]);
        g = matvec_t(tape.k, g);
    }
    add_to_col(dz, n - 1, g);

    if (!tape.k_constant) {
        const Matrix z_back = tape.z.slice_cols(0, n - 1);
        const Matrix z_fore = tape.z.slice_cols(1, n);
        const Matrix df = matmul_nt(dk, tape.a_pinv);
        const Matrix da = pinv_backward(z_back, tape.a_pinv, matmul_tn(z_fore, dk));
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t j = 0; j + 1 < n; ++j) {
                dz(r, j + 1) += df(r, j);
                dz(r, j) += da(r, j);
            }
        }
    }

    Matrix dx(cfg.lookback, c);
    for (std::size_t j = 0; j < n; ++j) {
        const Vector dzj = dz.col(j);
        const Vector dseg = nn::mlp_backward(model.var_encoder, tape.enc[j], dzj, grads.var_encoder);
        for (std::size_t r = 0; r < s; ++r) {
            const std::size_t padded_row = j * s + r;
            const std::size_t row = padded_row < pad ? 0 : padded_row - pad;
            for (std::size_t cc = 0; cc < c; ++cc) {
                dx(row, cc) += dseg[r * c + cc];
            }
        }
    }
    return dx;
}

void model_backward(const KoopaModel& model, const ModelTape& tape, const Matrix& dy, KoopaGrads& grads) {
    const ModelConfig& cfg = model.config();
    Matrix dnext(cfg.lookback, cfg.variates);
    for (std::size_t b = cfg.blocks; b-- > 0;) {
        const BlockTape& bt = tape.blocks[b];
        Matrix dxvar = add(dnext, var_backward(model, bt.var, scale(dnext, -1.0), dy, grads));
        const Matrix dxinv = inv_backward(model, b, bt.inv, dy, grads);
        dnext = add(dxvar, model.filter().project(sub(dxinv, dxvar)));
    }
}

struct LossEval {
    double loss = 0.0;
    Matrix grad; // with respect to the normalised prediction
};

LossEval evaluate_loss(const ModelConfig& cfg, const ForecastResult& fr, const Matrix& target) {
    if (target.rows() != cfg.horizon || target.cols() != cfg.variates) {
        throw ShapeError("sample loss: expected a " + std::to_string(cfg.horizon) + "x" +
                         std::to_string(cfg.variates) + " target, got " + target.shape_string());
    }
    const std::size_t hh = cfg.horizon;
    const std::size_t c = cfg.variates;
    const double inv_n = 1.0 / static_cast<double>(hh * c);
    LossEval out{0.0, Matrix(hh, c)};
    for (std::size_t t = 0; t < hh; ++t) {
        for (std::size_t j = 0; j < c; ++j) {
            double e = 0.0;
            double chain = 1.0;
            if (cfg.loss_space == LossSpace::normalized) {
                const double tn = (target(t, j) - fr.norm.mean[j]) / fr.norm.stddev[j];
                e = fr.normalized_prediction(t, j) - tn;
            } else {
                e = fr.prediction(t, j) - target(t, j);
                chain = fr.norm.stddev[j];
            }
            out.loss += e * e * inv_n;
            out.grad(t, j) = 2.0 * e * inv_n * chain;
        }
    }
    return out;
}

} // namespace

// --- normalisation ---------------------------------------------------------

NormalizedWindow normalize_window(const Matrix& x, double std_floor) {
    if (x.rows() < 2) {
        throw ArgumentError("normalize_window: need at least 2 rows, got " + std::to_string(x.rows()));
    }
    NormalizedWindow out{Matrix(x.rows(), x.cols()), {Vector(x.cols(), 0.0), Vector(x.cols(), 0.0)}};
    const double n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t t = 0; t < x.rows(); ++t) {
            mean += x(t, j);
        }
        mean /= n;
        double var = 0.0;
        for (std::size_t t = 0; t < x.rows(); ++t) {
            const double e = x(t, j) - mean;
            var += e * e;
        }
        const double sd = std::max(std::sqrt(var / n), std_floor);
        out.stats.mean[j] = mean;
        out.stats.stddev[j] = sd;
        for (std::size_t t = 0; t < x.rows(); ++t) {
            out.x(t, j) = (x(t, j) - mean) / sd;
        }
    }
    return out;
}

Matrix apply_normalization(const Matrix& x, const NormStats& stats) {
    if (stats.mean.size() != x.cols() || stats.stddev.size() != x.cols()) {
        throw ShapeError("apply_normalization: statistics for " + std::to_string(stats.mean.size()) +
                         " variates, window has " + std::to_string(x.cols()));
    }
    Matrix out(x.rows(), x.cols());
    for (std::size_t t = 0; t < x.rows(); ++t) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out(t, j) = (x(t, j) - stats.mean[j]) / stats.stddev[j];
        }
    }
    return out;
}

Matrix denormalize(const Matrix& y, const NormStats& stats) {
    if (stats.mean.size() != y.cols() || stats.stddev.size() != y.cols()) {
        throw ShapeError("denormalize: statistics for " + std::to_string(stats.mean.size()) +
                         " variates, window has " + std::to_string(y.cols()));
    }
    Matrix out(y.rows(), y.cols());
    for (std::size_t t = 0; t < y.rows(); ++t) {
        for (std::size_t j = 0; j < y.cols(); ++j) {
            out(t, j) = y(t, j) * stats.stddev[j] + stats.mean[j];
        }
    }
    return out;
}

Matrix DataScaler::transform(const Matrix& x) const {
    if (empty()) {
        return x;
    }
    return apply_normalization(x, {mean, stddev});
}

Matrix DataScaler::inverse(const Matrix& x) const {
    if (empty()) {
        return x;
    }
    return denormalize(x, {mean, stddev});
}

// --- model -----------------------------------------------------------------

KoopaModel::KoopaModel(ModelConfig config, spectral::SpectrumMask mask) : config_(std::move(config)) {
    config_.validate();
    set_mask(std::move(mask));
    const std::size_t t = config_.lookback;
    const std::size_t h = config_.horizon;
    const std::size_t c = config_.variates;
    const std::size_t s = config_.segment_length();
    const std::size_t d = config_.embed_dim;
    inv_encoder = nn::Mlp(mlp_dims(config_, t * c, d), config_.activation);
    inv_decoder = nn::Mlp(mlp_dims(config_, d, h * c), config_.activation);
    var_encoder = nn::Mlp(mlp_dims(config_, s * c, d), config_.activation);
    var_decoder = nn::Mlp(mlp_dims(config_, d, s * c), config_.activation);
    k_inv.assign(config_.blocks, Matrix::identity(d));
}

KoopaModel KoopaModel::create(const ModelConfig& config, spectral::SpectrumMask mask) {
    KoopaModel m(config, std::move(mask));
    const ModelConfig& cfg = m.config();
    const Rng root(cfg.seed);
    Rng r1 = root.split(1);
    Rng r2 = root.split(2);
    Rng r3 = root.split(3);
    Rng r4 = root.split(4);
    m.inv_encoder = nn::Mlp::glorot(m.inv_encoder.layer_dims(), cfg.activation, r1);
    m.inv_decoder = nn::Mlp::glorot(m.inv_decoder.layer_dims(), cfg.activation, r2);
    m.var_encoder = nn::Mlp::glorot(m.var_encoder.layer_dims(), cfg.activation, r3);
    m.var_decoder = nn::Mlp::glorot(m.var_decoder.layer_dims(), cfg.activation, r4);
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        m.k_inv[b] = init_k_inv(cfg.embed_dim, root.split(100 + b)(), cfg.k_inv_init_scale);
    }
    return m;
}

void KoopaModel::set_mask(spectral::SpectrumMask mask) {
    if (mask.window_length != config_.lookback) {
        throw ArgumentError("KoopaModel: mask built for window length " + std::to_string(mask.window_length) +
                            ", model lookback is " + std::to_string(config_.lookback));
    }
    filter_ = spectral::FourierFilter(std::move(mask));
}

std::vector<std::span<double>> KoopaModel::parameters() {
    std::vector<std::span<double>> p;
    for (nn::Mlp* net : {&inv_encoder, &inv_decoder, &var_encoder, &var_decoder}) {
        const auto part = net->parameters();
        p.insert(p.end(), part.begin(), part.end());
    }
    for (Matrix& k : k_inv) {
        p.emplace_back(k.data());
    }
    return p;
}

std::size_t KoopaModel::parameter_count() const {
    std::size_t n = inv_encoder.parameter_count() + inv_decoder.parameter_count() + var_encoder.parameter_count() +
                    var_decoder.parameter_count();
    for (const Matrix& k : k_inv) {
        n += k.size();
    }
    return n;
}

bool KoopaModel::all_finite() const {
    return inv_encoder.all_finite() && inv_decoder.all_finite() && var_encoder.all_finite() &&
           var_decoder.all_finite() &&
           std::all_of(k_inv.begin(), k_inv.end(), [](const Matrix& k) { return k.all_finite(); });
}

KoopaGrads KoopaGrads::zeros_like(const KoopaModel& model) {
    KoopaGrads g;
    g.inv_encoder = nn::MlpGrads::zeros_like(model.inv_encoder);
    g.inv_decoder = nn::MlpGrads::zeros_like(model.inv_decoder);
    g.var_encoder = nn::MlpGrads::zeros_like(model.var_encoder);
    g.var_decoder = nn::MlpGrads::zeros_like(model.var_decoder);
    for (const Matrix& k : model.k_inv) {
        g.k_inv.emplace_back(k.rows(), k.cols());
    }
    return g;
}

void KoopaGrads::set_zero() {
    inv_encoder.set_zero();
    inv_decoder.set_zero();
    var_encoder.set_zero();
    var_decoder.set_zero();
    for (Matrix& k : k_inv) {
        std::fill(k.data().begin(), k.data().end(), 0.0);
    }
}

void KoopaGrads::add_scaled(const KoopaGrads& other, double s) {
    inv_encoder.add_scaled(other.inv_encoder, s);
    inv_decoder.add_scaled(other.inv_decoder, s);
    var_encoder.add_scaled(other.var_encoder, s);
    var_decoder.add_scaled(other.var_decoder, s);
    for (std::size_t b = 0; b < k_inv.size(); ++b) {
        auto dst = k_inv[b].data();
        auto src = other.k_inv[b].data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += s * src[i];
        }
    }
}

std::vector<std::span<double>> KoopaGrads::parameters() {
    std::vector<std::span<double>> p;
    for (nn::MlpGrads* g : {&inv_encoder, &inv_decoder, &var_encoder, &var_decoder}) {
        const auto part = g->parameters();
        p.insert(p.end(), part.begin(), part.end());
    }
    for (Matrix& k : k_inv) {
        p.emplace_back(k.data());
    }
    return p;
}

// --- building blocks -------------------------------------------------------

Vector flatten(const Matrix& x) {
    return Vector(x.data().begin(), x.data().end());
}

Matrix unflatten(std::span<const double> v, std::size_t rows, std::size_t cols) {
    if (v.size() != rows * cols) {
        throw ShapeError("unflatten: " + std::to_string(v.size()) + " values cannot form a " + std::to_string(rows) +
                         "x" + std::to_string(cols) + " matrix");
    }
    return Matrix(rows, cols, Vector(v.begin(), v.end()));
}

std::vector<Matrix> segment(const Matrix& x, std::size_t s) {
    if (s == 0) {
        throw ArgumentError("segment: segment length must be positive");
    }
    if (s > x.rows()) {
        throw ArgumentError("segment: segment length " + std::to_string(s) + " exceeds window length " +
                            std::to_string(x.rows()));
    }
    const std::size_t n = (x.rows() + s - 1) / s;
    const std::size_t pad = n * s - x.rows();
    std::vector<Matrix> out;
    out.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        Matrix seg(s, x.cols());
        for (std::size_t r = 0; r < s; ++r) {
            const std::size_t padded_row = j * s + r;
            const std::size_t row = padded_row < pad ? 0 : padded_row - pad;
            for (std::size_t c = 0; c < x.cols(); ++c) {
                seg(r, c) = x(row, c);
            }
        }
        out.push_back(std::move(seg));
    }
    return out;
}

Matrix edmd_fit(const Matrix& snapshots, double rcond) {
    const std::size_t m = snapshots.cols();
    if (m < 2) {
        throw ArgumentError("edmd_fit: need at least 2 snapshots, got " + std::to_string(m));
    }
    return matmul(snapshots.slice_cols(1, m), pinv(snapshots.slice_cols(0, m - 1), rcond));
}

Matrix explosion_check(const Matrix& k, bool* replaced) {
    if (!k.is_square()) {
        throw ShapeError("explosion_check: operator must be square, got " + k.shape_string());
    }
    const bool bad = !k.all_finite();
    if (replaced != nullptr) {
        *replaced = bad;
    }
    return bad ? Matrix::identity(k.rows()) : k;
}

Matrix init_k_inv(std::size_t d, std::uint64_t seed, double perturbation) {
    if (d == 0) {
        throw ArgumentError("init_k_inv: dimension must be positive");
    }
    Matrix k = Matrix::identity(d);
    if (perturbation != 0.0) {
        Rng rng(seed);
        for (double& v : k.data()) {
            v += perturbation * rng.normal();
        }
    }
    return k;
}

double operator_stability(const Matrix& k) {
    if (!k.is_square() || k.empty()) {
        throw ShapeError("operator_stability: operator must be square and non-empty, got " + k.shape_string());
    }
    const ComplexSpectrum spec = eigenvalues(k);
    double s = 0.0;
    for (const auto& l : spec.eigenvalues) {
        s += std::abs(std::abs(l) - 1.0);
    }
    return s / static_cast<double>(spec.eigenvalues.size());
}

Matrix pinv_backward(const Matrix& a, const Matrix& a_pinv, const Matrix& grad_pinv) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (a_pinv.rows() != n || a_pinv.cols() != m || grad_pinv.rows() != n || grad_pinv.cols() != m) {
        throw ShapeError("pinv_backward: inconsistent shapes " + a.shape_string() + ", " + a_pinv.shape_string() +
                         ", " + grad_pinv.shape_string());
    }
    const Matrix gt = transpose(grad_pinv);
    Matrix out = scale(matmul_nt(matmul_tn(a_pinv, grad_pinv), a_pinv), -1.0);
    const Matrix range_complement = sub(Matrix::identity(m), matmul(a, a_pinv));
    out = add(out, matmul(range_complement, matmul(gt, matmul_nt(a_pinv, a_pinv))));
    const Matrix null_complement = sub(Matrix::identity(n), matmul(a_pinv, a));
    out = add(out, matmul(matmul(matmul_tn(a_pinv, a_pinv), gt), null_complement));
    return out;
}

Matrix time_inv_forward(const KoopaModel& model, std::size_t block, const Matrix& x_inv) {
    const ModelConfig& cfg = model.config();
    check_window(cfg, x_inv, "time_inv_forward");
    if (block >= cfg.blocks) {
        throw ArgumentError("time_inv_forward: block " + std::to_string(block) + " out of range");
    }
    return inv_forward_impl(model, block, x_inv, nullptr);
}

TimeVarOutput time_var_forward(const KoopaModel& model, const Matrix& x_var, const OperatorOverride* override_op) {
    check_window(model.config(), x_var, "time_var_forward");
    return var_forward_impl(model, 0, x_var, override_op, {}, nullptr);
}

ForecastResult koopa_forward(const KoopaModel& model, const Matrix& x, const ForwardOptions& options) {
    return forward_impl(model, x, options, nullptr);
}

SampleOutcome accumulate_sample_gradient(const KoopaModel& model, const Matrix& lookback, const Matrix& target,
                                         KoopaGrads& grads, double weight, const ForwardOptions& options) {
    ForwardOptions opts;
    opts.operator_hook = options.operator_hook;
    ModelTape tape;
    const ForecastResult fr = forward_impl(model, lookback, opts, &tape);
    const LossEval le = evaluate_loss(model.config(), fr, target);
    model_backward(model, tape, scale(le.grad, weight), grads);
    return {le.loss, fr.explosion_events};
}

double sample_loss(const KoopaModel& model, const Matrix& lookback, const Matrix& target) {
    const ForecastResult fr = forward_impl(model, lookback, {}, nullptr);
    return evaluate_loss(model.config(), fr, target).loss;
}

} // namespace koopa
