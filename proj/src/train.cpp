#include "sfit/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sfit/rng.hpp"

namespace sfit {

double eval_loss(const Model& model, const Dataset& d, LossKind kind) {
    return loss_rows(kind, model.predict(d.X), d.y).mean();
}

namespace {

// d(batch objective)/d(z_out), objective = mean over the batch of the
// pointwise loss. For the softmax head this is the usual prob-minus-onehot
// form (per-row class weight folded in when given).
Eigen::MatrixXd output_gradient(LossKind kind, const Eigen::MatrixXd& out,
                                const Dataset& batch,
                                const std::optional<Eigen::VectorXd>& class_weights) {
    const double inv_b = 1.0 / static_cast<double>(out.rows());
    if (kind == LossKind::cross_entropy) {
        Eigen::MatrixXd g = out;
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            const int c = batch.y.labels[i];
            g(i, c) -= 1.0;
            const double w = class_weights ? (*class_weights)[c] : 1.0;
            g.row(i) *= w * inv_b;
        }
        return g;
    }
    Eigen::ArrayXd resid = out.col(0).array() - batch.y.values.array();
    Eigen::MatrixXd g(out.rows(), 1);
    if (kind == LossKind::squared)
        g.col(0) = 2.0 * inv_b * resid;
    else  // absolute: subgradient, zero at exact ties
        g.col(0) = inv_b * resid.sign();
    return g;
}

double batch_objective(LossKind kind, const Eigen::MatrixXd& out, const Dataset& batch,
                       const std::optional<Eigen::VectorXd>& class_weights) {
    if (kind == LossKind::cross_entropy && class_weights)
        return pointwise_nll_weighted(out, batch.y.labels, *class_weights).mean();
    return loss_rows(kind, out, batch.y).mean();
}

}  // namespace

TrainResult train_mlp(Mlp& model, const Dataset& train, const Dataset& validation,
                      LossKind loss, const AdamConfig& cfg, std::uint64_t seed) {
    if (cfg.max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (train.n_rows() == 0 || validation.n_rows() == 0)
        throw std::invalid_argument("train and validation sets must be non-empty");
    if (cfg.class_weights && loss != LossKind::cross_entropy)
        throw std::invalid_argument("class weights require cross-entropy loss");

    auto& W = model.weights();
    auto& b = model.biases();
    const std::size_t L = W.size();
    std::vector<Eigen::MatrixXd> mW(L), vW(L);
    std::vector<Eigen::VectorXd> mb(L), vb(L);
    for (std::size_t l = 0; l < L; ++l) {
        mW[l] = Eigen::MatrixXd::Zero(W[l].rows(), W[l].cols());
        vW[l] = mW[l];
        mb[l] = Eigen::VectorXd::Zero(b[l].size());
        vb[l] = mb[l];
    }

    TrainResult res;
    res.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> bestW = W;
    std::vector<Eigen::VectorXd> bestb = b;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(train.n_rows()));
    std::iota(order.begin(), order.end(), 0);
    auto eng = make_engine(seed);

    long step = 0;
    int wait = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), eng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - begin);
            Dataset batch = train.take({order.begin() + static_cast<std::ptrdiff_t>(begin),
                                        order.begin() + static_cast<std::ptrdiff_t>(begin + count)});
            Mlp::Forward f = model.forward(batch.X);
            const double obj = batch_objective(loss, f.a.back(), batch, cfg.class_weights);
            if (!std::isfinite(obj)) throw std::runtime_error("training diverged: non-finite loss");
            epoch_loss += obj * static_cast<double>(count);
            seen += count;

            Mlp::Gradients g = model.backward(
                batch.X, f, output_gradient(loss, f.a.back(), batch, cfg.class_weights));

            ++step;
            const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t l = 0; l < L; ++l) {
                mW[l] = cfg.beta1 * mW[l] + (1.0 - cfg.beta1) * g.dW[l];
                vW[l] = cfg.beta2 * vW[l] + (1.0 - cfg.beta2) * g.dW[l].cwiseAbs2();
                W[l].array() -= cfg.step_size * (mW[l].array() / corr1) /
                                ((vW[l].array() / corr2).sqrt() + cfg.epsilon);
                mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * g.db[l];
                vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * g.db[l].cwiseAbs2();
                b[l].array() -= cfg.step_size * (mb[l].array() / corr1) /
                                ((vb[l].array() / corr2).sqrt() + cfg.epsilon);
            }
        }
        res.train_loss.push_back(epoch_loss / static_cast<double>(seen));

        const double vl = eval_loss(model, validation, loss);
        if (!std::isfinite(vl)) throw std::runtime_error("training diverged: non-finite loss");
        res.val_loss.push_back(vl);
        res.epochs_run = epoch + 1;

        const bool improved_any = vl < res.best_val_loss;
        const bool improved_enough = vl < res.best_val_loss - cfg.early_stopping.min_delta;
        if (improved_any) {
            res.best_val_loss = vl;
            res.best_epoch = epoch;
            bestW = W;
            bestb = b;
        }
        if (improved_enough)
            wait = 0;
        else if (++wait >= cfg.early_stopping.patience)
            break;
    }

    W = bestW;
    b = bestb;
    return res;
}

}  // namespace sfit
