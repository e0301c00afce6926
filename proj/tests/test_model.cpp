#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "sfit/checkpoint.hpp"
#include "sfit/mlp.hpp"
#include "sfit/rng.hpp"
#include "sfit/train.hpp"

using namespace sfit;

namespace {

Dataset make_regression(std::size_t n, std::size_t p, std::uint64_t seed,
                        double noise_sd = 0.0) {
    Dataset d;
    d.schema = FeatureSchema::continuous(p);
    auto eng = make_engine(seed);
    std::normal_distribution<double> gauss;
    d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
    d.X.col(0).setOnes();
    for (Eigen::Index i = 0; i < d.X.rows(); ++i)
        for (Eigen::Index j = 1; j < d.X.cols(); ++j) d.X(i, j) = gauss(eng);
    d.y.values = d.X.col(0) + 2.0 * d.X.col(1);
    if (noise_sd > 0)
        for (Eigen::Index i = 0; i < d.y.values.size(); ++i)
            d.y.values[i] += noise_sd * gauss(eng);
    return d;
}

void check_close(double got, double want, double tol) {
    CHECK(std::abs(got - want) <= tol * std::max({1.0, std::abs(got), std::abs(want)}));
}

}  // namespace

TEST_CASE("forward pass by hand, single hidden unit") {
    Mlp net({{2, 1, 1}, false, 0});
    net.weights()[0] << 0.0, 1.0;
    net.biases()[0] << 0.0;
    net.weights()[1] << 2.0;
    net.biases()[1] << 1.0;

    Eigen::MatrixXd X(2, 2);
    X << 1, 3,   // relu(3) = 3, 2*3 + 1 = 7
         1, -3;  // relu(-3) = 0, output is just the bias
    Eigen::MatrixXd out = net.predict(X);
    CHECK(out(0, 0) == 7.0);
    CHECK(out(1, 0) == 1.0);
}

TEST_CASE("forward pass by hand, two hidden units") {
    Mlp net({{3, 2, 1}, false, 0});
    net.weights()[0] << 1, 0, 0,
                        0, 1, -1;
    net.biases()[0] << 0.5, -0.5;
    net.weights()[1] << 1, 2;
    net.biases()[1] << 0.25;

    Eigen::MatrixXd X(1, 3);
    X << 1, 2, 3;
    // z0 = (1.5, 2-3-0.5) = (1.5, -1.5) -> a0 = (1.5, 0) -> 1.5 + 0.25
    CHECK(net.predict(X)(0, 0) == 1.75);
    CHECK_THROWS(net.predict(Eigen::MatrixXd::Zero(1, 4)));
}

TEST_CASE("softmax rows") {
    Eigen::MatrixXd logits(3, 2);
    logits << 0.0, std::log(2.0),
              1e4, -1e4,
              -700.0, -710.0;
    Eigen::MatrixXd p = softmax_rows(logits);
    CHECK(p(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(p(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK((p.row(i).array() >= 0.0).all());
        CHECK(p.row(i).allFinite());
    }
    // invariant under a per-row shift of the logits
    Eigen::MatrixXd shifted = logits;
    shifted.array() += 123.456;
    CHECK((softmax_rows(shifted) - p).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero network bias gradient equals -2 mean(y)") {
    Mlp net({{2, 1, 1}, false, 0});
    net.weights()[0].setZero();
    net.biases()[0].setZero();
    net.weights()[1].setZero();
    net.biases()[1].setZero();

    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 2);
    Eigen::VectorXd y(3);
    y << 1, 2, 3;

    Mlp::Forward f = net.forward(X);
    Eigen::MatrixXd grad = 2.0 / 3.0 * (f.a.back().col(0) - y);
    Mlp::Gradients g = net.backward(X, f, grad);
    CHECK(g.db[1][0] == -4.0);  // -2 * mean(y)
    // hidden pre-activations sit exactly at zero, so nothing flows further back
    CHECK(g.dW[1](0, 0) == 0.0);
    CHECK(g.dW[0].isZero(0.0));
    CHECK(g.db[0].isZero(0.0));
}

TEST_CASE("backprop matches central differences, regression head") {
    const MlpConfig cfg{{4, 5, 3, 1}, false, 917};
    Mlp net(cfg);
    Dataset batch = make_regression(7, 3, 4242);
    const Eigen::VectorXd& y = batch.y.values;

    auto objective = [&](const Mlp& m) {
        Eigen::ArrayXd r = m.predict(batch.X).col(0).array() - y.array();
        return r.square().mean();
    };

    Mlp::Forward f = net.forward(batch.X);
    Eigen::MatrixXd out_grad =
        2.0 / static_cast<double>(batch.n_rows()) * (f.a.back().col(0) - y);
    Mlp::Gradients g = net.backward(batch.X, f, out_grad);

    const double eps = 1e-5;
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        for (Eigen::Index r = 0; r < net.weights()[l].rows(); ++r)
            for (Eigen::Index c = 0; c < net.weights()[l].cols(); ++c) {
                Mlp probe = net;
                probe.weights()[l](r, c) += eps;
                const double up = objective(probe);
                probe.weights()[l](r, c) -= 2 * eps;
                const double dn = objective(probe);
                check_close(g.dW[l](r, c), (up - dn) / (2 * eps), 1e-6);
            }
        for (Eigen::Index r = 0; r < net.biases()[l].size(); ++r) {
            Mlp probe = net;
            probe.biases()[l][r] += eps;
            const double up = objective(probe);
            probe.biases()[l][r] -= 2 * eps;
            const double dn = objective(probe);
            check_close(g.db[l][r], (up - dn) / (2 * eps), 1e-6);
        }
    }
}

TEST_CASE("backprop matches central differences, weighted softmax head") {
    const MlpConfig cfg{{3, 4, 3}, true, 5150};
    Mlp net(cfg);
    const Eigen::Index n = 6;
    auto eng = make_engine(99);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd X(n, 3);
    X.col(0).setOnes();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 1; j < 3; ++j) X(i, j) = gauss(eng);
    Eigen::VectorXi labels(n);
    labels << 0, 2, 1, 1, 0, 2;
    Eigen::VectorXd w(3);
    w << 1.0, 2.0, 0.5;

    auto objective = [&](const Mlp& m) {
        Eigen::MatrixXd p = m.predict(X);
        double s = 0;
        for (Eigen::Index i = 0; i < n; ++i) s += -w[labels[i]] * std::log(p(i, labels[i]));
        return s / static_cast<double>(n);
    };

    Mlp::Forward f = net.forward(X);
    Eigen::MatrixXd out_grad = f.a.back();
    for (Eigen::Index i = 0; i < n; ++i) {
        out_grad(i, labels[i]) -= 1.0;
        out_grad.row(i) *= w[labels[i]] / static_cast<double>(n);
    }
    Mlp::Gradients g = net.backward(X, f, out_grad);

    const double eps = 1e-5;
    for (std::size_t l = 0; l < net.n_layers(); ++l)
        for (Eigen::Index r = 0; r < net.weights()[l].rows(); ++r)
            for (Eigen::Index c = 0; c < net.weights()[l].cols(); ++c) {
                Mlp probe = net;
                probe.weights()[l](r, c) += eps;
                const double up = objective(probe);
                probe.weights()[l](r, c) -= 2 * eps;
                const double dn = objective(probe);
                check_close(g.dW[l](r, c), (up - dn) / (2 * eps), 1e-6);
            }
}

TEST_CASE("initialization is seeded, He-scaled, zero-biased") {
    MlpConfig cfg{{501, 400, 1}, false, 31};
    Mlp a(cfg), b(cfg);
    CHECK(a.weights()[0] == b.weights()[0]);
    CHECK(a.weights()[1] == b.weights()[1]);
    CHECK(a.biases()[0].isZero(0.0));

    cfg.init_seed = 32;
    Mlp c(cfg);
    CHECK(a.weights()[0] != c.weights()[0]);

    CHECK(a.randomize(31));
    CHECK(a.weights()[0] == b.weights()[0]);  // randomize reproduces construction

    const Eigen::MatrixXd& W = b.weights()[0];
    const double sd = std::sqrt(W.array().square().mean());
    CHECK(sd == doctest::Approx(std::sqrt(2.0 / 501.0)).epsilon(0.05));
    CHECK(std::abs(W.mean()) < 3 * sd / std::sqrt(static_cast<double>(W.size())) * 2);

    CHECK_THROWS(Mlp({{3}, false, 0}));
    CHECK_THROWS(Mlp({{3, 0, 1}, false, 0}));
}

TEST_CASE("training learns a linear target and keeps the best epoch") {
    Dataset train = make_regression(400, 1, 7, 0.05);
    Dataset val = make_regression(120, 1, 8, 0.05);

    Mlp net({{2, 8, 1}, false, 21});
    AdamConfig cfg;
    cfg.step_size = 0.01;  // small task, default rate converges too slowly
    cfg.max_epochs = 60;
    cfg.early_stopping.min_delta = 1e-4;
    TrainResult res = train_mlp(net, train, val, LossKind::squared, cfg, 3);

    CHECK(res.epochs_run == static_cast<int>(res.val_loss.size()));
    CHECK(res.train_loss.size() == res.val_loss.size());
    CHECK(res.best_epoch >= 0);
    double best = res.val_loss[0];
    for (double v : res.val_loss) best = std::min(best, v);
    CHECK(res.best_val_loss == best);
    CHECK(res.val_loss[static_cast<std::size_t>(res.best_epoch)] == res.best_val_loss);
    // parameters rolled back to the best epoch
    CHECK(eval_loss(net, val, LossKind::squared) == doctest::Approx(res.best_val_loss).epsilon(1e-12));
    CHECK(res.best_val_loss < 0.05);

    // bitwise reproducible end to end
    Mlp net2({{2, 8, 1}, false, 21});
    TrainResult res2 = train_mlp(net2, train, val, LossKind::squared, cfg, 3);
    CHECK(res2.val_loss == res.val_loss);
    CHECK(net2.weights()[0] == net.weights()[0]);
    CHECK(net2.biases()[1] == net.biases()[1]);
}

TEST_CASE("patience counts epochs without sufficient improvement") {
    Dataset train = make_regression(64, 1, 12, 0.05);
    Dataset val = make_regression(32, 1, 13, 0.05);
    Mlp net({{2, 4, 1}, false, 1});
    AdamConfig cfg;
    cfg.max_epochs = 50;
    cfg.early_stopping.patience = 3;
    cfg.early_stopping.min_delta = 1e9;  // nothing ever counts as an improvement
    TrainResult res = train_mlp(net, train, val, LossKind::squared, cfg, 2);
    CHECK(res.epochs_run == 4);  // first epoch + patience exhausted
}

TEST_CASE("training input validation and divergence") {
    Dataset train = make_regression(50, 1, 3);
    Dataset val = make_regression(20, 1, 4);
    Mlp net({{2, 4, 1}, false, 5});

    AdamConfig bad;
    bad.max_epochs = 0;
    CHECK_THROWS(train_mlp(net, train, val, LossKind::squared, bad, 0));
    bad.max_epochs = 10;
    bad.batch_size = 0;
    CHECK_THROWS(train_mlp(net, train, val, LossKind::squared, bad, 0));

    AdamConfig weighted;
    weighted.class_weights = Eigen::VectorXd::Ones(2);
    CHECK_THROWS(train_mlp(net, train, val, LossKind::squared, weighted, 0));

    Dataset empty;
    empty.schema = train.schema;
    empty.X.resize(0, 2);
    empty.y.values.resize(0);
    CHECK_THROWS(train_mlp(net, empty, val, LossKind::squared, AdamConfig{}, 0));

    Dataset poisoned = train;
    poisoned.y.values[7] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH(
        static_cast<void>(train_mlp(net, poisoned, val, LossKind::squared, AdamConfig{}, 0)),
        doctest::Contains("diverged"));
}

TEST_CASE("checkpoint round trip is bit exact") {
    Checkpoint c{Mlp({{3, 4, 2}, true, 404}), FeatureSchema::continuous(2),
                 Standardization{}, LossKind::cross_entropy};
    c.model.weights()[0](0, 0) = 0.1;           // not exactly representable
    c.model.weights()[1](1, 2) = 1e-300;        // tiny but normal
    c.model.biases()[0][2] = -3.0e17;
    c.standardization.mean = Eigen::VectorXd::Zero(3);
    c.standardization.scale = Eigen::VectorXd::Ones(3);
    c.standardization.mean[1] = 0.2;
    c.standardization.scale[2] = 1.7;

    const char* path = "ckpt_tmp.json";
    save_checkpoint(c, path);
    Checkpoint r = load_checkpoint(path);
    std::remove(path);

    REQUIRE(r.model.n_layers() == 2);
    CHECK(r.model.config().softmax_head);
    CHECK(r.model.weights()[0] == c.model.weights()[0]);
    CHECK(r.model.weights()[1] == c.model.weights()[1]);
    CHECK(r.model.biases()[0] == c.model.biases()[0]);
    CHECK(r.model.biases()[1] == c.model.biases()[1]);
    CHECK(r.standardization.mean == c.standardization.mean);
    CHECK(r.standardization.scale == c.standardization.scale);
    CHECK(r.train_loss == LossKind::cross_entropy);
    REQUIRE(r.schema.n_columns() == 3);
    CHECK(r.schema.column(2).name == c.schema.column(2).name);
    CHECK(r.schema.n_units() == c.schema.n_units());

    Eigen::MatrixXd X(2, 3);
    X << 1, 0.3, -0.4, 1, 1.1, 2.2;
    CHECK(r.model.predict(X) == c.model.predict(X));

    CHECK_THROWS(load_checkpoint("missing-checkpoint.json"));
}
