#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "sfit/csv.hpp"
#include "sfit/dataset.hpp"
#include "sfit/mask.hpp"
#include "sfit/rng.hpp"
#include "sfit/schema.hpp"

using namespace sfit;

namespace {

Dataset small_regression(std::size_t n, std::size_t p, std::uint64_t seed) {
    Dataset d;
    d.schema = FeatureSchema::continuous(p);
    auto eng = make_engine(seed);
    std::normal_distribution<double> gauss;
    d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
    d.X.col(0).setOnes();
    for (Eigen::Index i = 0; i < d.X.rows(); ++i)
        for (Eigen::Index j = 1; j < d.X.cols(); ++j) d.X(i, j) = gauss(eng);
    d.y.values = d.X.col(1) * 2.0;
    return d;
}

}  // namespace

TEST_CASE("mask pins inactive columns to fill values") {
    FeatureSchema schema = FeatureSchema::continuous(3);
    Eigen::MatrixXd X(1, 4);
    X << 1, 3, 4, 5;
    Eigen::MatrixXd masked = apply_mask(X, schema, {2});
    CHECK(masked(0, 0) == 1.0);
    CHECK(masked(0, 1) == 0.0);
    CHECK(masked(0, 2) == 4.0);
    CHECK(masked(0, 3) == 0.0);

    // full active set is the identity
    Eigen::MatrixXd all = apply_mask(X, schema, {1, 2, 3});
    CHECK(all == X);
}

TEST_CASE("mask uses the categorical fill for dummy columns") {
    std::vector<Column> cols{{"intercept", ColumnKind::continuous},
                             {"a", ColumnKind::continuous},
                             {"b", ColumnKind::binary},
                             {"c", ColumnKind::continuous}};
    FeatureSchema schema(cols, 0.5);
    Eigen::MatrixXd X(1, 4);
    X << 1, 0, 1, 2.5;
    Eigen::MatrixXd masked = apply_mask(X, schema, {3});
    CHECK(masked(0, 0) == 1.0);
    CHECK(masked(0, 1) == 0.0);
    CHECK(masked(0, 2) == 0.5);
    CHECK(masked(0, 3) == 2.5);
}

TEST_CASE("mask is idempotent, pure, and never touches the intercept") {
    FeatureSchema schema = FeatureSchema::continuous(5);
    auto eng = make_engine(11);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd X(40, 6);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = gauss(eng);
    Eigen::MatrixXd before = X;
    KeepSet keep{2, 4};
    Eigen::MatrixXd once = apply_mask(X, schema, keep);
    Eigen::MatrixXd twice = apply_mask(once, schema, keep);
    CHECK(once == twice);
    CHECK(X == before);            // input untouched
    CHECK(once.col(0) == X.col(0));
    CHECK(once.col(2) == X.col(2));
    CHECK(once.col(4) == X.col(4));
    CHECK_THROWS(apply_mask(X, schema, {9}));
}

TEST_CASE("categorical fill must be strictly inside (0,1)") {
    std::vector<Column> cols{{"intercept", ColumnKind::continuous},
                             {"d", ColumnKind::binary}};
    CHECK_THROWS(FeatureSchema(cols, 0.0));
    CHECK_THROWS(FeatureSchema(cols, 1.0));
    CHECK_NOTHROW(FeatureSchema(cols, 0.25));
}

TEST_CASE("split sizes follow floor-then-distribute") {
    Dataset d = small_regression(10, 2, 5);
    Split s = split_dataset(d, {0.7, 0.2, 0.1}, 42);
    CHECK(s.train.n_rows() == 7);
    CHECK(s.validation.n_rows() == 2);
    CHECK(s.test.n_rows() == 1);

    Split again = split_dataset(d, {0.7, 0.2, 0.1}, 42);
    CHECK(s.train.X == again.train.X);
    CHECK(s.validation.X == again.validation.X);
    CHECK(s.test.X == again.test.X);

    CHECK_THROWS_WITH(static_cast<void>(split_dataset(d, {1.0, 0.0, 0.0}, 1)),
                      doctest::Contains("empty partition"));
    CHECK_THROWS(split_dataset(d, {0.5, 0.2, 0.1}, 1));  // does not sum to 1
}

TEST_CASE("split partitions are disjoint and exhaustive") {
    auto eng = make_engine(77);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 10 + eng() % 200;
        Dataset d = small_regression(n, 3, eng());
        Split s = split_dataset(d, {0.6, 0.25, 0.15}, eng());
        std::multiset<double> seen;
        for (const Dataset* part : {&s.train, &s.validation, &s.test})
            for (Eigen::Index i = 0; i < part->n_rows(); ++i) seen.insert(part->X(i, 1));
        std::multiset<double> expected;
        for (Eigen::Index i = 0; i < d.n_rows(); ++i) expected.insert(d.X(i, 1));
        CHECK(seen == expected);
        CHECK(s.train.n_rows() + s.validation.n_rows() + s.test.n_rows() == d.n_rows());
    }
}

TEST_CASE("population standardization") {
    FeatureSchema schema = FeatureSchema::continuous(1);
    Eigen::MatrixXd X(3, 2);
    X << 1, 1, 1, 2, 1, 3;
    Standardization s = fit_standardization(X, schema);
    CHECK(s.mean[1] == 2.0);
    CHECK(s.scale[1] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
    apply_standardization(X, s);
    CHECK(X(0, 1) == doctest::Approx(-1.2247448713915890).epsilon(1e-12));
    CHECK(X(1, 1) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(X(2, 1) == doctest::Approx(1.2247448713915890).epsilon(1e-12));
    CHECK(X.col(0) == Eigen::VectorXd::Ones(3));  // intercept untouched
}

TEST_CASE("standardization skips dummy columns and constant columns") {
    std::vector<Column> cols{{"intercept", ColumnKind::continuous},
                             {"num", ColumnKind::continuous},
                             {"dum", ColumnKind::binary}};
    FeatureSchema schema(cols);
    Eigen::MatrixXd X(4, 3);
    X << 1, 5, 1, 1, 5, 0, 1, 5, 1, 1, 5, 0;
    Standardization s = fit_standardization(X, schema);
    CHECK(s.scale[1] == 1.0);  // constant numeric column: centered only
    CHECK(s.mean[2] == 0.0);   // dummies untouched
    CHECK(s.scale[2] == 1.0);
    apply_standardization(X, s);
    CHECK(X.col(1) == Eigen::VectorXd::Zero(4));
    CHECK(X(0, 2) == 1.0);
}

TEST_CASE("partition by class splits and preserves rows") {
    Dataset d;
    d.schema = FeatureSchema::continuous(1);
    d.X.resize(6, 2);
    d.X << 1, 10, 1, 20, 1, 30, 1, 40, 1, 50, 1, 60;
    d.y.n_classes = 2;
    d.y.labels.resize(6);
    d.y.labels << 0, 1, 0, 1, 1, 0;
    std::vector<Dataset> parts = partition_by_class(d);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].n_rows() + parts[1].n_rows() == 6);
    CHECK(parts[0].X.col(1).sum() == 10 + 30 + 60);
    CHECK(parts[1].X.col(1).sum() == 20 + 40 + 50);

    std::vector<Dataset> by_col = partition_by_column(d, 1);
    CHECK(by_col.size() == 6);
    CHECK_THROWS(partition_by_column(d, 9));
}

TEST_CASE("pointwise losses") {
    Eigen::VectorXd y(1), pred(1);
    y << 2.5;
    pred << 2.0;
    CHECK(pointwise_loss(LossKind::absolute, pred, y)[0] == 0.5);
    CHECK(pointwise_loss(LossKind::squared, pred, y)[0] == 0.25);

    Eigen::MatrixXd prob(2, 3);
    prob << 1.0, 0.0, 0.0, 0.5, 0.25, 0.25;
    Eigen::VectorXi labels(2);
    labels << 0, 2;
    Eigen::VectorXd nll = pointwise_nll(prob, labels);
    CHECK(nll[0] == doctest::Approx(0.0).epsilon(1e-11));  // clipped perfect prediction
    CHECK(nll[0] <= -std::log(1.0 - 1e-11));
    CHECK(nll[1] == doctest::Approx(1.3862943611198906).epsilon(1e-12));
    CHECK((nll.array() >= 0.0).all());

    Eigen::VectorXi bad(2);
    bad << 0, 7;
    CHECK_THROWS(pointwise_nll(prob, bad));

    Eigen::VectorXd w3 = Eigen::VectorXd::Ones(3);
    CHECK(pointwise_nll_weighted(prob, labels, w3) == nll);  // unit weights exact
    Eigen::VectorXd w(3);
    w << 1.0, 1.0, 2.0;
    CHECK(pointwise_nll_weighted(prob, labels, w)[1] == doctest::Approx(2 * nll[1]));
    Eigen::VectorXd neg(3);
    neg << 1.0, -1.0, 1.0;
    CHECK_THROWS(pointwise_nll_weighted(prob, labels, neg));
}

TEST_CASE("csv loading with one-hot encoding") {
    const char* path = "csv_test_tmp.csv";
    {
        std::ofstream out(path);
        out << "color,size,y\n";
        out << "A,1,10\n";
        out << "B,2,20\n";
        out << "A,3,30\n";
    }
    CsvOptions opt;
    opt.target = "y";
    opt.categorical = {"color"};
    Dataset d = load_csv(path, opt);
    REQUIRE(d.schema.n_columns() == 4);  // intercept, color_A, color_B, size
    CHECK(d.schema.column(1).name == "color_A");
    CHECK(d.schema.column(2).name == "color_B");
    CHECK(d.schema.column(3).name == "size");
    CHECK(d.X.col(0) == Eigen::VectorXd::Ones(3));
    CHECK(d.X(0, 1) == 1.0);
    CHECK(d.X(1, 2) == 1.0);
    CHECK(d.X(2, 1) == 1.0);
    CHECK(d.X(1, 3) == 2.0);
    CHECK(d.y.values[2] == 30.0);
    CHECK(d.schema.n_units() == 3);  // dummies tested individually by default

    CsvOptions grouped = opt;
    grouped.group_dummies = true;
    Dataset g = load_csv(path, grouped);
    REQUIRE(g.schema.n_units() == 2);
    CHECK(g.schema.unit(0).name == "color");
    CHECK(g.schema.unit(0).columns == std::vector<std::size_t>{1, 2});

    CsvOptions missing = opt;
    missing.target = "nope";
    CHECK_THROWS(load_csv(path, missing));
    std::remove(path);
    CHECK_THROWS(load_csv("does_not_exist.csv", opt));
}

TEST_CASE("csv rejects non-numeric cells in numeric columns") {
    const char* path = "csv_bad_tmp.csv";
    {
        std::ofstream out(path);
        out << "a,y\nok,1\n";
    }
    CsvOptions opt;
    opt.target = "y";
    CHECK_THROWS_WITH(static_cast<void>(load_csv(path, opt)), doctest::Contains("non-numeric"));
    std::remove(path);
}

TEST_CASE("csv classification targets map to dense class ids") {
    const char* path = "csv_cls_tmp.csv";
    {
        std::ofstream out(path);
        out << "x,label\n0.5,yes\n1.5,no\n2.5,yes\n";
    }
    CsvOptions opt;
    opt.target = "label";
    opt.classification = true;
    Dataset d = load_csv(path, opt);
    CHECK(d.y.n_classes == 2);
    CHECK(d.y.labels[0] == d.y.labels[2]);
    CHECK(d.y.labels[0] != d.y.labels[1]);
    std::remove(path);
}
