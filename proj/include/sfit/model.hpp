#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace sfit {

// Evaluation contract the test engine works against. predict takes an
// n x (p+1) design matrix (intercept included) and returns n x 1 values for
// regression or n x C class probabilities. It must be deterministic and
// safe to call repeatedly.
//
// The two optional capabilities power interaction screening (first-layer
// weights) and the β calibration loop (parameter re-randomization).
class Model {
public:
    virtual ~Model() = default;

    virtual Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const = 0;

    // h x (p+1) input-layer weight matrix, or nullptr if not applicable.
    virtual const Eigen::MatrixXd* first_layer_weights() const { return nullptr; }

    // Redraw all parameters from the init scheme; returns false when the
    // model cannot be randomized.
    virtual bool randomize(std::uint64_t /*seed*/) { return false; }
};

}  // namespace sfit
