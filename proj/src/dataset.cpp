#include "sfit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "sfit/rng.hpp"

namespace sfit {

Dataset Dataset::take(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    out.schema = schema;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.X.row(i) = X.row(rows[i]);
    out.y.n_classes = y.n_classes;
    if (y.is_classification()) {
        out.y.labels.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) out.y.labels[i] = y.labels[rows[i]];
    } else {
        out.y.values.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) out.y.values[i] = y.values[rows[i]];
    }
    return out;
}

Standardization fit_standardization(const Eigen::MatrixXd& X, const FeatureSchema& schema) {
    if (static_cast<std::size_t>(X.cols()) != schema.n_columns())
        throw std::invalid_argument("matrix width does not match schema");
    Standardization s;
    s.mean = Eigen::VectorXd::Zero(X.cols());
    s.scale = Eigen::VectorXd::Ones(X.cols());
    for (Eigen::Index j = 1; j < X.cols(); ++j) {
        if (schema.column(static_cast<std::size_t>(j)).kind != ColumnKind::continuous)
            continue;
        const double m = X.col(j).mean();
        const double var = (X.col(j).array() - m).square().mean();  // divide by n
        s.mean[j] = m;
        s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

void apply_standardization(Eigen::MatrixXd& X, const Standardization& s) {
    if (X.cols() != s.mean.size())
        throw std::invalid_argument("matrix width does not match standardization");
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (s.mean[j] != 0.0 || s.scale[j] != 1.0)
            X.col(j) = (X.col(j).array() - s.mean[j]) / s.scale[j];
}

Split split_dataset(const Dataset& d, const SplitFractions& f, std::uint64_t seed) {
    if (f.train < 0.0 || f.validation < 0.0 || f.test < 0.0)
        throw std::invalid_argument("split fractions must be nonnegative");
    if (std::fabs(f.train + f.validation + f.test - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");

    const Eigen::Index n = d.n_rows();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    auto eng = make_engine(seed);
    std::shuffle(idx.begin(), idx.end(), eng);

    std::size_t sizes[3] = {
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.train)),
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.validation)),
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.test))};
    std::size_t leftover = static_cast<std::size_t>(n) - sizes[0] - sizes[1] - sizes[2];
    for (std::size_t part = 0; leftover > 0; part = (part + 1) % 3, --leftover)
        ++sizes[part];
    if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0)
        throw std::invalid_argument("empty partition");

    auto slice = [&](std::size_t begin, std::size_t count) {
        return d.take({idx.begin() + static_cast<std::ptrdiff_t>(begin),
                       idx.begin() + static_cast<std::ptrdiff_t>(begin + count)});
    };
    Split out{slice(0, sizes[0]), slice(sizes[0], sizes[1]),
              slice(sizes[0] + sizes[1], sizes[2])};
    return out;
}

namespace {

std::vector<Dataset> partition_by_keys(const Dataset& d, const std::vector<double>& keys) {
    std::map<double, std::vector<Eigen::Index>> groups;
    for (Eigen::Index i = 0; i < d.n_rows(); ++i)
        groups[keys[static_cast<std::size_t>(i)]].push_back(i);
    std::vector<Dataset> out;
    out.reserve(groups.size());
    for (const auto& [key, rows] : groups) out.push_back(d.take(rows));
    return out;
}

}  // namespace

std::vector<Dataset> partition_by_class(const Dataset& d) {
    if (!d.y.is_classification())
        throw std::invalid_argument("class partition needs classification targets");
    std::vector<double> keys(static_cast<std::size_t>(d.n_rows()));
    for (Eigen::Index i = 0; i < d.n_rows(); ++i)
        keys[static_cast<std::size_t>(i)] = d.y.labels[i];
    return partition_by_keys(d, keys);
}

std::vector<Dataset> partition_by_column(const Dataset& d, std::size_t column) {
    if (column >= static_cast<std::size_t>(d.X.cols()))
        throw std::invalid_argument("partition column out of range");
    std::vector<double> keys(static_cast<std::size_t>(d.n_rows()));
    for (Eigen::Index i = 0; i < d.n_rows(); ++i)
        keys[static_cast<std::size_t>(i)] = d.X(i, static_cast<Eigen::Index>(column));
    return partition_by_keys(d, keys);
}

Eigen::VectorXd loss_rows(LossKind kind, const Eigen::MatrixXd& pred, const Targets& y) {
    if (kind == LossKind::cross_entropy) {
        if (!y.is_classification())
            throw std::invalid_argument("cross-entropy needs classification targets");
        return pointwise_nll(pred, y.labels);
    }
    if (y.is_classification())
        throw std::invalid_argument("regression loss on classification targets");
    if (pred.cols() != 1) throw std::invalid_argument("regression predictions must be a column");
    return pointwise_loss(kind, pred.col(0), y.values);
}

}  // namespace sfit
