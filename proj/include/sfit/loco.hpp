#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfit/engine.hpp"
#include "sfit/train.hpp"

namespace sfit {

// Dataset with the given design-matrix columns deleted (not zeroed); the
// schema shrinks accordingly.
Dataset drop_columns(const Dataset& d, const std::vector<std::size_t>& columns);

struct LocoConfig {
    double alpha = 0.05;
    LossKind delta_loss = LossKind::absolute;
    LossKind train_loss = LossKind::squared;
    MlpConfig architecture;  // input width matches the full design matrix
    AdamConfig adam;
    std::vector<std::size_t> units;  // unit ids to test; empty = all
    bool ci_for_all = false;
    std::uint64_t seed = 0;
    // When set, the full model is taken as given instead of trained here;
    // it is then excluded from the refit count and timings.
    const Mlp* pretrained_full = nullptr;
};

struct LocoItem {
    TestedItem item;
    double wall_seconds = 0.0;  // refit + evaluation for this unit
    bool failed = false;
    std::string error;
};

struct LocoReport {
    double alpha = 0.05;
    LossKind delta_loss = LossKind::absolute;
    std::vector<LocoItem> items;
    std::size_t refit_count = 0;  // trainings performed: tested units + 1
    double full_model_seconds = 0.0;
    double total_seconds = 0.0;
};

// Leave-one-covariate-out: train the full model, then for each tested unit
// retrain from scratch on the data with that unit's columns removed and
// sign-test the per-row loss increase on the inference set. A refit that
// fails to train marks its unit as failed and the run continues.
LocoReport loco_test(const Dataset& train, const Dataset& validation, const Dataset& d2,
                     const LocoConfig& cfg);

}  // namespace sfit
