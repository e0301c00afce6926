#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "sfit/dataset.hpp"
#include "sfit/mlp.hpp"

namespace sfit {

struct EarlyStopping {
    int patience = 5;        // epochs without min_delta improvement before stopping
    double min_delta = 1e-2;  // improvement below this does not reset patience
};

struct AdamConfig {
    double step_size = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 32;
    int max_epochs = 50;
    EarlyStopping early_stopping;
    // Per-class loss multipliers for imbalanced classification (training
    // objective only; validation loss stays unweighted).
    std::optional<Eigen::VectorXd> class_weights;
};

struct TrainResult {
    std::vector<double> train_loss;  // running batch-mean per epoch
    std::vector<double> val_loss;    // full validation pass per epoch
    int best_epoch = -1;             // 0-based epoch whose parameters were kept
    double best_val_loss = 0.0;
    int epochs_run = 0;
};

// Mean pointwise loss of the model on a dataset.
double eval_loss(const Model& model, const Dataset& d, LossKind kind);

// Minibatch Adam with seeded shuffling. The model is left holding the
// parameters of the best validation epoch (any improvement updates the kept
// parameters; only improvements exceeding min_delta reset patience).
// Throws on non-finite losses.
TrainResult train_mlp(Mlp& model, const Dataset& train, const Dataset& validation,
                      LossKind loss, const AdamConfig& cfg, std::uint64_t seed);

}  // namespace sfit
