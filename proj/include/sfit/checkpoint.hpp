#pragma once

#include <optional>
#include <string>

#include "sfit/dataset.hpp"
#include "sfit/mlp.hpp"

namespace sfit {

// Everything needed to reuse a trained model on new data.
struct Checkpoint {
    Mlp model;
    FeatureSchema schema;
    Standardization standardization;
    LossKind train_loss = LossKind::squared;
};

// JSON on disk. Doubles are written with shortest-round-trip formatting,
// so parameters and statistics survive save/load bit-for-bit.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sfit
