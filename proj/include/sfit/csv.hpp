#pragma once

#include <string>
#include <vector>

#include "sfit/dataset.hpp"

namespace sfit {

struct CsvOptions {
    char delimiter = ',';
    std::string target;                    // required: target column name
    bool classification = false;           // map distinct target values to classes
    std::vector<std::string> categorical;  // columns to one-hot encode
    std::vector<std::string> drop;         // columns to ignore (IDs etc.)
    bool group_dummies = false;  // one test unit per source column instead of per dummy
};

// Header + data rows -> design matrix with intercept column 0 prepended.
// Categorical columns expand to one 0/1 dummy per observed level (named
// "<column>_<level>", levels in sorted order); everything else must parse
// as a number. No standardization happens here — fit it on the training
// split afterwards.
Dataset load_csv(const std::string& path, const CsvOptions& options);

}  // namespace sfit
