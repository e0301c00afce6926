#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sfit/schema.hpp"

namespace sfit {

// Columns kept at their observed values during a masked prediction pass.
// Column 0 (intercept) is always kept and need not be listed.
using KeepSet = std::vector<std::size_t>;

inline KeepSet normalize_keep_set(const FeatureSchema& schema, KeepSet keep) {
    for (std::size_t j : keep)
        if (j >= schema.n_columns())
            throw std::out_of_range("keep set references column past schema end");
    keep.push_back(0);
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    return keep;
}

// X with every column outside `keep` pinned to its neutral fill value.
// The result has the same shape as X; kept columns are copied verbatim.
inline Eigen::MatrixXd apply_mask(const Eigen::MatrixXd& X, const FeatureSchema& schema,
                                  const KeepSet& keep) {
    if (static_cast<std::size_t>(X.cols()) != schema.n_columns())
        throw std::invalid_argument("matrix width does not match schema");
    KeepSet kept = normalize_keep_set(schema, keep);
    Eigen::MatrixXd out(X.rows(), X.cols());
    std::size_t ki = 0;
    for (std::size_t j = 0; j < schema.n_columns(); ++j) {
        if (ki < kept.size() && kept[ki] == j) {
            out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(j));
            ++ki;
        } else {
            out.col(static_cast<Eigen::Index>(j)).setConstant(schema.fill_value(j));
        }
    }
    return out;
}

}  // namespace sfit
