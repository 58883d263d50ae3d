#pragma once

#include "koopa/data.hpp"
#include "koopa/model.hpp"
#include "koopa/spectral.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace koopa {

/// Mask from the amplitude statistics of the training lookback windows,
/// each instance-normalised first when `config.normalize` is set.
spectral::SpectrumMask mask_from_windows(const std::vector<data::WindowPair>& train, const ModelConfig& config);

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
    double seconds = 0.0;
    std::size_t explosion_events = 0;
    std::size_t skipped_batches = 0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_mse = 0.0;
    bool early_stopped = false;
    std::size_t explosion_events = 0;
    std::vector<std::string> events;
};

struct TrainOptions {
    /// Worker threads for per-sample gradients. Results do not depend on it.
    std::size_t threads = 1;
    /// Consecutive non-finite batches tolerated before TrainingError.
    std::size_t max_consecutive_explosions = 5;
    /// Caps the batches per epoch (0 = all); for quick experiments.
    std::size_t max_batches_per_epoch = 0;
    std::function<void(const EpochRecord&)> on_epoch;
    std::function<void(const std::string&)> on_event;
    /// Applied to every fitted K_var during training (fault injection).
    std::function<void(std::size_t block, Matrix& k_var)> operator_hook;
    /// Called before each batch with (epoch, batch); may perturb the model
    /// (fault injection).
    std::function<void(std::size_t epoch, std::size_t batch, KoopaModel& model)> before_batch;
};

/// Mean sample loss over the pairs (the training objective, without gradients).
double mean_loss(const KoopaModel& model, const std::vector<data::WindowPair>& pairs);

/// Adam on the mean sample loss with per-epoch shuffling, validation-based
/// early stopping and best-validation weight restore. Non-finite K_var are
/// replaced by the identity inside the forward pass. A batch whose loss or
/// gradient is non-finite is skipped after resetting any non-finite K_inv
/// to the identity; too many consecutive skips raise TrainingError.
TrainLog train(KoopaModel& model, const std::vector<data::WindowPair>& train_pairs,
               const std::vector<data::WindowPair>& val_pairs, const TrainOptions& options = {});

/// CSV with header epoch,train_mse,val_mse,seconds.
std::string training_log_csv(const TrainLog& log);

} // namespace koopa
