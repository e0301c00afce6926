#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "sfit/loss.hpp"
#include "sfit/schema.hpp"

namespace sfit {

// Regression target or class index per row (classes are 0-based internally).
struct Targets {
    Eigen::VectorXd values;  // regression
    Eigen::VectorXi labels;  // classification
    int n_classes = 0;       // 0 => regression

    bool is_classification() const { return n_classes > 0; }
    Eigen::Index size() const {
        return is_classification() ? labels.size() : values.size();
    }
};

// Per-column affine transform fitted on the training rows. Only continuous
// non-intercept columns get non-trivial entries; everything else is identity.
struct Standardization {
    Eigen::VectorXd mean;   // length p+1
    Eigen::VectorXd scale;  // length p+1, entries > 0
};

struct Dataset {
    Eigen::MatrixXd X;  // n x (p+1), column 0 identically 1
    Targets y;
    FeatureSchema schema;

    Eigen::Index n_rows() const { return X.rows(); }
    Dataset take(const std::vector<Eigen::Index>& rows) const;
};

// Population form: scale is sqrt(mean((x - mean)^2)), i.e. divide by n.
// Constant columns get scale 1 so standardization leaves them centered.
Standardization fit_standardization(const Eigen::MatrixXd& X, const FeatureSchema& schema);
void apply_standardization(Eigen::MatrixXd& X, const Standardization& s);

struct SplitFractions {
    double train = 0.7;
    double validation = 0.2;
    double test = 0.1;
};

struct Split {
    Dataset train, validation, test;
};

// Seeded shuffle, then sizes floor(n*f) with the leftover rows handed to
// train, then validation, then test. Throws if any part ends up empty.
Split split_dataset(const Dataset& d, const SplitFractions& f, std::uint64_t seed);

// Disjoint sub-datasets per distinct value of the key: class labels, or a
// 0/1-ish grouping column of X. Returned in ascending key order.
std::vector<Dataset> partition_by_class(const Dataset& d);
std::vector<Dataset> partition_by_column(const Dataset& d, std::size_t column);

// Per-row losses of a prediction batch against the dataset's targets.
// pred is n x 1 for regression, n x C for classification.
Eigen::VectorXd loss_rows(LossKind kind, const Eigen::MatrixXd& pred, const Targets& y);

}  // namespace sfit
