#include "koopa/train.hpp"

#include "koopa/error.hpp"
#include "koopa/neural.hpp"
#include "koopa/rng.hpp"
#include "koopa/text.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace koopa {
namespace {

constexpr std::size_t kChunk = 4;

bool grads_finite(KoopaGrads& g) {
    for (const auto& part : g.parameters()) {
        for (double v : part) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

struct ChunkResult {
    KoopaGrads grads;
    double loss = 0.0;
    std::size_t explosions = 0;
};

// Gradients are summed per fixed-size chunk and the chunks reduced in
// order, so the result is the same for any thread count.
void batch_gradient(const KoopaModel& model, const std::vector<const data::WindowPair*>& batch,
                    const ForwardOptions& fopts, std::size_t threads, std::vector<ChunkResult>& chunks) {
    const std::size_t n_chunks = (batch.size() + kChunk - 1) / kChunk;
    if (chunks.size() < n_chunks) {
        chunks.resize(n_chunks, ChunkResult{KoopaGrads::zeros_like(model), 0.0, 0});
    }
    const double weight = 1.0 / static_cast<double>(batch.size());
    auto run_chunk = [&](std::size_t ci) {
        ChunkResult& cr = chunks[ci];
        cr.grads.set_zero();
        cr.loss = 0.0;
        cr.explosions = 0;
        const std::size_t end = std::min(batch.size(), (ci + 1) * kChunk);
        for (std::size_t i = ci * kChunk; i < end; ++i) {
            const SampleOutcome so =
                accumulate_sample_gradient(model, batch[i]->lookback, batch[i]->target, cr.grads, weight, fopts);
            cr.loss += so.loss * weight;
            cr.explosions += so.explosion_events;
        }
    };
    const std::size_t workers = std::min(threads, n_chunks);
    if (workers <= 1) {
        for (std::size_t ci = 0; ci < n_chunks; ++ci) {
            run_chunk(ci);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t ci = w; ci < n_chunks; ci += workers) {
                    run_chunk(ci);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace

spectral::SpectrumMask mask_from_windows(const std::vector<data::WindowPair>& train, const ModelConfig& config) {
    if (train.empty()) {
        throw ArgumentError("mask_from_windows: no training windows");
    }
    spectral::AmplitudeAccumulator acc(config.lookback);
    for (const auto& w : train) {
        acc.add(config.normalize ? normalize_window(w.lookback, config.std_floor).x : w.lookback);
    }
    return spectral::build_mask(acc.finish(), config.alpha);
}

double mean_loss(const KoopaModel& model, const std::vector<data::WindowPair>& pairs) {
    if (pairs.empty()) {
        throw ArgumentError("mean_loss: no windows");
    }
    double s = 0.0;
    for (const auto& w : pairs) {
        s += sample_loss(model, w.lookback, w.target);
    }
    return s / static_cast<double>(pairs.size());
}

TrainLog train(KoopaModel& model, const std::vector<data::WindowPair>& train_pairs,
               const std::vector<data::WindowPair>& val_pairs, const TrainOptions& options) {
    if (train_pairs.empty()) {
        throw ArgumentError("train: no training windows");
    }
    const ModelConfig& cfg = model.config();
    nn::AdamConfig acfg;
    acfg.lr = cfg.lr;
    nn::AdamState adam(acfg, model.parameters());
    KoopaGrads total = KoopaGrads::zeros_like(model);
    std::vector<ChunkResult> chunks;
    ForwardOptions fopts;
    fopts.operator_hook = options.operator_hook;

    TrainLog log;
    auto emit = [&](const std::string& msg) {
        log.events.push_back(msg);
        if (options.on_event) {
            options.on_event(msg);
        }
    };

    const Rng shuffle_root = Rng(cfg.seed).split(7);
    std::vector<std::size_t> order(train_pairs.size());
    const bool has_val = !val_pairs.empty();
    KoopaModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::size_t consecutive = 0;
    const std::size_t bs = cfg.batch_size;
    const std::size_t n_batches_all = (train_pairs.size() + bs - 1) / bs;
    const std::size_t n_batches =
        options.max_batches_per_epoch == 0 ? n_batches_all : std::min(n_batches_all, options.max_batches_per_epoch);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = shuffle_root.split(epoch);
        std::shuffle(order.begin(), order.end(), rng);

        EpochRecord rec;
        rec.epoch = epoch;
        double loss_sum = 0.0;
        std::size_t used = 0;
        for (std::size_t bi = 0; bi < n_batches; ++bi) {
            if (options.before_batch) {
                options.before_batch(epoch, bi, model);
            }
            std::vector<const data::WindowPair*> batch;
            for (std::size_t i = bi * bs; i < std::min(train_pairs.size(), (bi + 1) * bs); ++i) {
                batch.push_back(&train_pairs[order[i]]);
            }
            batch_gradient(model, batch, fopts, std::max<std::size_t>(1, options.threads), chunks);
            total.set_zero();
            double loss = 0.0;
            std::size_t explosions = 0;
            const std::size_t n_chunks = (batch.size() + kChunk - 1) / kChunk;
            for (std::size_t ci = 0; ci < n_chunks; ++ci) {
                total.add_scaled(chunks[ci].grads, 1.0);
                loss += chunks[ci].loss;
                explosions += chunks[ci].explosions;
            }
            if (explosions > 0) {
                rec.explosion_events += explosions;
                log.explosion_events += explosions;
                emit("epoch " + std::to_string(epoch) + " batch " + std::to_string(bi) + ": " +
                     std::to_string(explosions) + " non-finite K_var replaced by the identity");
            }
            if (!std::isfinite(loss) || !grads_finite(total)) {
                ++consecutive;
                ++rec.skipped_batches;
                std::size_t repaired = 0;
                for (Matrix& k : model.k_inv) {
                    if (!k.all_finite()) {
                        k = Matrix::identity(k.rows());
                        ++repaired;
                    }
                }
                log.explosion_events += repaired;
                rec.explosion_events += repaired;
                emit("epoch " + std::to_string(epoch) + " batch " + std::to_string(bi) +
                     ": non-finite loss or gradient, batch skipped; " + std::to_string(repaired) +
                     " K_inv reset to the identity");
                if (consecutive >= options.max_consecutive_explosions) {
                    throw TrainingError("training diverged after " + std::to_string(consecutive) +
                                            " consecutive non-finite batches",
                                        epoch, bi);
                }
                continue;
            }
            consecutive = 0;
            nn::adam_step(model.parameters(), total.parameters(), adam);
            loss_sum += loss;
            ++used;
        }
        rec.train_mse = used == 0 ? std::numeric_limits<double>::quiet_NaN() : loss_sum / static_cast<double>(used);
        rec.val_mse = has_val ? mean_loss(model, val_pairs) : rec.train_mse;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(rec);
        if (options.on_epoch) {
            options.on_epoch(rec);
        }
        if (std::isfinite(rec.val_mse) && rec.val_mse < best_val) {
            best_val = rec.val_mse;
            best = model;
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (cfg.patience > 0 && since_best >= cfg.patience) {
                log.early_stopped = true;
                break;
            }
        }
    }
    if (log.best_epoch > 0) {
        model = std::move(best);
    }
    log.best_val_mse = best_val;
    return log;
}

std::string training_log_csv(const TrainLog& log) {
    std::ostringstream os;
    os << "epoch,train_mse,val_mse,seconds\n";
    for (const auto& e : log.epochs) {
        os << e.epoch << ',' << text::format_double(e.train_mse) << ',' << text::format_double(e.val_mse) << ','
           << text::format_double(e.seconds) << '\n';
    }
    return os.str();
}

} // namespace koopa
