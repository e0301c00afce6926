#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sfit {

enum class LossKind { squared, absolute, cross_entropy };

inline std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::squared: return "squared";
        case LossKind::absolute: return "absolute";
        case LossKind::cross_entropy: return "cross_entropy";
    }
    return "?";
}

inline LossKind parse_loss(const std::string& s) {
    if (s == "squared") return LossKind::squared;
    if (s == "absolute") return LossKind::absolute;
    if (s == "cross_entropy") return LossKind::cross_entropy;
    throw std::invalid_argument("unknown loss '" + s + "'");
}

// Floor applied to predicted class probabilities before the log.
inline constexpr double kProbFloor = 1e-12;

// Per-row losses for scalar predictions (regression).
inline Eigen::VectorXd pointwise_loss(LossKind kind, const Eigen::VectorXd& pred,
                                      const Eigen::VectorXd& y) {
    if (pred.size() != y.size())
        throw std::invalid_argument("prediction/target length mismatch");
    switch (kind) {
        case LossKind::squared: return (y - pred).array().square();
        case LossKind::absolute: return (y - pred).array().abs();
        case LossKind::cross_entropy:
            throw std::invalid_argument("cross-entropy needs class probabilities");
    }
    return {};
}

// Per-row negative log-likelihood for class-probability predictions.
// prob is n x K (rows sum to 1), labels holds values in [0, K).
inline Eigen::VectorXd pointwise_nll(const Eigen::MatrixXd& prob,
                                     const Eigen::VectorXi& labels) {
    if (prob.rows() != labels.size())
        throw std::invalid_argument("probability/label length mismatch");
    Eigen::VectorXd out(prob.rows());
    for (Eigen::Index i = 0; i < prob.rows(); ++i) {
        int c = labels[i];
        if (c < 0 || c >= prob.cols())
            throw std::out_of_range("class label out of range");
        out[i] = -std::log(std::max(prob(i, c), kProbFloor));
    }
    return out;
}

// Class-weighted variant: row i is scaled by class_weights[label_i]. With all
// weights 1 this is bit-identical to the unweighted version (multiplying by
// the literal 1.0 is exact).
inline Eigen::VectorXd pointwise_nll_weighted(const Eigen::MatrixXd& prob,
                                              const Eigen::VectorXi& labels,
                                              const Eigen::VectorXd& class_weights) {
    if (class_weights.size() != prob.cols())
        throw std::invalid_argument("one weight per class required");
    if ((class_weights.array() <= 0.0).any())
        throw std::invalid_argument("class weights must be positive");
    Eigen::VectorXd out = pointwise_nll(prob, labels);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] *= class_weights[labels[i]];
    return out;
}

}  // namespace sfit
