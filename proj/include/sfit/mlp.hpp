#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sfit/model.hpp"

namespace sfit {

struct MlpConfig {
    // Full size chain: {input = p+1, hidden..., output}. Output 1 with
    // identity head for regression; C with softmax head for classification.
    std::vector<int> layer_sizes;
    bool softmax_head = false;
    std::uint64_t init_seed = 0;
};

// Fully-connected ReLU network. Weights W[l] have shape (out_l x in_l) so
// the input layer is exactly the h x (p+1) matrix used for interaction
// screening; biases start at zero, weights at He fan-in Gaussians.
class Mlp : public Model {
public:
    explicit Mlp(MlpConfig cfg);

    Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const override;
    const Eigen::MatrixXd* first_layer_weights() const override { return &W_.front(); }
    bool randomize(std::uint64_t seed) override;

    const MlpConfig& config() const { return cfg_; }
    std::size_t n_layers() const { return W_.size(); }
    std::vector<Eigen::MatrixXd>& weights() { return W_; }
    std::vector<Eigen::VectorXd>& biases() { return b_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return W_; }
    const std::vector<Eigen::VectorXd>& biases() const { return b_; }

    // Pre-activations and activations per layer, kept for backprop.
    struct Forward {
        std::vector<Eigen::MatrixXd> z;  // per layer, n x out_l
        std::vector<Eigen::MatrixXd> a;  // post-activation (a.back() is the output)
    };
    Forward forward(const Eigen::MatrixXd& X) const;

    struct Gradients {
        std::vector<Eigen::MatrixXd> dW;
        std::vector<Eigen::VectorXd> db;
    };
    // Backpropagate d(objective)/d(output pre-activation for softmax head,
    // or d/d(output) for identity head), already divided by batch size.
    Gradients backward(const Eigen::MatrixXd& X, const Forward& f,
                       const Eigen::MatrixXd& output_grad) const;

private:
    MlpConfig cfg_;
    std::vector<Eigen::MatrixXd> W_;
    std::vector<Eigen::VectorXd> b_;
};

// Row-wise softmax with max-subtraction for stability.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

}  // namespace sfit
