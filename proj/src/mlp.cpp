#include "sfit/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "sfit/rng.hpp"

namespace sfit {

Mlp::Mlp(MlpConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.layer_sizes.size() < 2)
        throw std::invalid_argument("network needs at least input and output sizes");
    for (int s : cfg_.layer_sizes)
        if (s < 1) throw std::invalid_argument("layer sizes must be >= 1");
    W_.resize(cfg_.layer_sizes.size() - 1);
    b_.resize(W_.size());
    randomize(cfg_.init_seed);
}

bool Mlp::randomize(std::uint64_t seed) {
    auto eng = make_engine(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t l = 0; l < W_.size(); ++l) {
        const int fan_in = cfg_.layer_sizes[l];
        const int fan_out = cfg_.layer_sizes[l + 1];
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        W_[l].resize(fan_out, fan_in);
        for (Eigen::Index r = 0; r < W_[l].rows(); ++r)
            for (Eigen::Index c = 0; c < W_[l].cols(); ++c) W_[l](r, c) = sd * gauss(eng);
        b_[l] = Eigen::VectorXd::Zero(fan_out);
    }
    return true;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

Mlp::Forward Mlp::forward(const Eigen::MatrixXd& X) const {
    if (X.cols() != cfg_.layer_sizes.front())
        throw std::invalid_argument("input width does not match network");
    Forward f;
    f.z.resize(W_.size());
    f.a.resize(W_.size());
    const Eigen::MatrixXd* cur = &X;
    for (std::size_t l = 0; l < W_.size(); ++l) {
        f.z[l] = (*cur * W_[l].transpose()).rowwise() + b_[l].transpose();
        if (l + 1 < W_.size())
            f.a[l] = f.z[l].cwiseMax(0.0);  // ReLU on hidden layers
        else
            f.a[l] = cfg_.softmax_head ? softmax_rows(f.z[l]) : f.z[l];
        cur = &f.a[l];
    }
    return f;
}

Eigen::MatrixXd Mlp::predict(const Eigen::MatrixXd& X) const {
    return forward(X).a.back();
}

Mlp::Gradients Mlp::backward(const Eigen::MatrixXd& X, const Forward& f,
                             const Eigen::MatrixXd& output_grad) const {
    Gradients g;
    g.dW.resize(W_.size());
    g.db.resize(W_.size());
    Eigen::MatrixXd delta = output_grad;  // d(objective)/d(z_last) by contract
    for (std::size_t l = W_.size(); l-- > 0;) {
        const Eigen::MatrixXd& input = (l == 0) ? X : f.a[l - 1];
        g.dW[l] = delta.transpose() * input;
        g.db[l] = delta.colwise().sum().transpose();
        if (l > 0)
            delta = (delta * W_[l]).cwiseProduct(
                (f.z[l - 1].array() > 0.0).cast<double>().matrix());
    }
    return g;
}

}  // namespace sfit
