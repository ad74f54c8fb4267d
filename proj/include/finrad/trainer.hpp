#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

#include "finrad/adam.hpp"
#include "finrad/loss.hpp"
#include "finrad/net.hpp"

namespace finrad::harness {

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 32;
    int max_epochs = 1;
    int patience = 5;
    double delta = 1e-4;
    uint64_t seed = 0;
    neural::LossKind loss = neural::LossKind::cross_entropy;
};

void validate(const TrainConfig& cfg);

/// Early-stopping bookkeeping. An epoch "improves" when the validation loss
/// drops by at least delta below the best so far; training stops after
/// `patience` consecutive non-improving epochs. The best epoch (1-indexed)
/// is the convergence epoch and its weights are the ones to keep.
struct EarlyStopper {
    int patience;
    double delta;
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int bad_epochs = 0;

    EarlyStopper(int patience_, double delta_)
        : patience(patience_), delta(delta_) {}

    struct Observation {
        bool improved;
        bool stop;
    };
    Observation observe(double val_loss, int epoch);
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    // Task metrics (IoU/Dice for segmentation). Train-side values are
    // running means over the epoch's training forward passes; val-side
    // values come from a dedicated end-of-epoch pass.
    double train_metric_a = 0.0;
    double train_metric_b = 0.0;
    double val_metric_a = 0.0;
    double val_metric_b = 0.0;
    bool has_metrics = false;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int convergence_epoch = 0;
};

/// Sample access for the generic loop: tensorized input and target by
/// dataset index. An optional per-sample metric hook is evaluated on the
/// validation split every epoch (mean over samples).
struct TrainData {
    std::function<neural::Tensor<float>(int)> input;
    std::function<neural::Tensor<float>(int)> target;
    std::vector<int> train_indices;
    std::vector<int> val_indices;
    std::function<std::pair<double, double>(const neural::Tensor<float>&, int)>
        val_metrics; // optional
};

/// Epoch loop with per-epoch seeded shuffling, minibatch gradient averaging,
/// Adam updates, early stopping, and best-epoch weight restoration. Throws
/// on non-finite losses (divergence) with the epoch in the message. Progress
/// lines "epoch,k,train_loss,val_loss" go to *progress when set.
TrainHistory train_model(neural::ModelGraph<float>& model, const TrainData& data,
                         const TrainConfig& cfg, std::ostream* progress = nullptr,
                         int progress_k = 0);

} // namespace finrad::harness
