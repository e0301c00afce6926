#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfit {

enum class ColumnKind { continuous, binary, categorical };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
};

// A unit is what gets tested/masked as one entity: either a single column or
// the block of indicator columns encoding one categorical variable.
struct TestUnit {
    std::string name;
    std::vector<std::size_t> columns;
};

// Describes the design matrix. Column 0 is always the intercept column
// (constant 1, never masked, never standardized, never tested).
class FeatureSchema {
public:
    FeatureSchema() = default;

    explicit FeatureSchema(std::vector<Column> cols, double categorical_fill = 0.5)
        : columns_(std::move(cols)), categorical_fill_(categorical_fill) {
        if (columns_.empty())
            throw std::invalid_argument("schema needs at least the intercept column");
        if (categorical_fill_ <= 0.0 || categorical_fill_ >= 1.0)
            throw std::invalid_argument("categorical fill value must lie strictly in (0,1)");
        // default: one unit per non-intercept column
        for (std::size_t j = 1; j < columns_.size(); ++j)
            units_.push_back({columns_[j].name, {j}});
    }

    // Schema for p_raw plain continuous features named x1..x{p_raw},
    // plus the intercept at column 0.
    static FeatureSchema continuous(std::size_t p_raw) {
        std::vector<Column> cols;
        cols.push_back({"intercept", ColumnKind::continuous});
        for (std::size_t j = 1; j <= p_raw; ++j)
            cols.push_back({"x" + std::to_string(j), ColumnKind::continuous});
        return FeatureSchema(std::move(cols));
    }

    std::size_t n_columns() const { return columns_.size(); }
    const Column& column(std::size_t j) const { return columns_.at(j); }
    const std::vector<Column>& columns() const { return columns_; }

    std::size_t n_units() const { return units_.size(); }
    const TestUnit& unit(std::size_t u) const { return units_.at(u); }
    const std::vector<TestUnit>& units() const { return units_; }

    // Replace the default one-column units (used to group one-hot blocks).
    void set_units(std::vector<TestUnit> units) {
        for (const auto& u : units) {
            if (u.columns.empty())
                throw std::invalid_argument("test unit '" + u.name + "' has no columns");
            for (std::size_t j : u.columns)
                if (j == 0 || j >= columns_.size())
                    throw std::invalid_argument("test unit '" + u.name +
                                                "' references invalid column");
        }
        units_ = std::move(units);
    }

    // Neutral value a column takes when masked out.
    double fill_value(std::size_t j) const {
        if (j == 0) return 1.0;  // intercept is never masked, value is its constant
        switch (columns_.at(j).kind) {
            case ColumnKind::continuous: return 0.0;  // == mean after standardization
            case ColumnKind::binary:
            case ColumnKind::categorical: return categorical_fill_;
        }
        return 0.0;
    }

    double categorical_fill() const { return categorical_fill_; }

private:
    std::vector<Column> columns_;
    std::vector<TestUnit> units_;
    double categorical_fill_ = 0.5;
};

}  // namespace sfit
