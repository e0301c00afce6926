#include "sfit/csv.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sfit {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, delim)) {
        // strip surrounding whitespace and optional quotes
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        cell = (b == std::string::npos) ? "" : cell.substr(b, e - b + 1);
        if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"')
            cell = cell.substr(1, cell.size() - 2);
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == delim) cells.push_back("");
    return cells;
}

double parse_number(const std::string& cell, const std::string& column, std::size_t row) {
    try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("non-numeric value '" + cell + "' in column '" + column +
                                 "', data row " + std::to_string(row + 1));
    }
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    const std::vector<std::string> header = split_line(line, options.delimiter);

    std::vector<std::vector<std::string>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> cells = split_line(line, options.delimiter);
        if (cells.size() != header.size())
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " cells, got " +
                                     std::to_string(cells.size()));
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw std::runtime_error("no data rows in " + path);

    const auto col_index = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? static_cast<std::ptrdiff_t>(-1)
                                  : std::distance(header.begin(), it);
    };
    const std::ptrdiff_t target_idx = col_index(options.target);
    if (target_idx < 0)
        throw std::runtime_error("target column '" + options.target + "' not found in " + path);
    for (const std::string& name : options.categorical)
        if (col_index(name) < 0)
            throw std::runtime_error("categorical column '" + name + "' not found in " + path);

    const std::set<std::string> categorical(options.categorical.begin(),
                                            options.categorical.end());
    std::set<std::string> dropped(options.drop.begin(), options.drop.end());
    dropped.insert(options.target);

    // Feature layout: intercept, then source columns in header order;
    // categorical sources expand into one dummy per sorted observed level.
    std::vector<Column> cols{{"intercept", ColumnKind::continuous}};
    std::vector<TestUnit> units;
    struct Source {
        std::size_t cell;                  // input column
        bool is_categorical;
        std::size_t first_output;          // column in the design matrix
        std::vector<std::string> levels;   // categorical only
    };
    std::vector<Source> sources;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (dropped.count(header[c])) continue;
        Source src;
        src.cell = c;
        src.is_categorical = categorical.count(header[c]) > 0;
        src.first_output = cols.size();
        if (src.is_categorical) {
            std::set<std::string> levels;
            for (const auto& r : rows) levels.insert(r[c]);
            src.levels.assign(levels.begin(), levels.end());
            std::vector<std::size_t> unit_cols;
            for (const std::string& level : src.levels) {
                unit_cols.push_back(cols.size());
                cols.push_back({header[c] + "_" + level, ColumnKind::binary});
            }
            if (options.group_dummies) units.push_back({header[c], unit_cols});
        } else {
            if (options.group_dummies) units.push_back({header[c], {cols.size()}});
            cols.push_back({header[c], ColumnKind::continuous});
        }
        sources.push_back(std::move(src));
    }
    if (sources.empty()) throw std::runtime_error("no feature columns left in " + path);

    Dataset d;
    d.schema = FeatureSchema(cols);
    if (options.group_dummies) d.schema.set_units(std::move(units));

    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    d.X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(cols.size()));
    d.X.col(0).setOnes();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        for (const Source& src : sources) {
            if (src.is_categorical) {
                const auto it =
                    std::lower_bound(src.levels.begin(), src.levels.end(), r[src.cell]);
                d.X(i, static_cast<Eigen::Index>(
                           src.first_output +
                           static_cast<std::size_t>(it - src.levels.begin()))) = 1.0;
            } else {
                d.X(i, static_cast<Eigen::Index>(src.first_output)) = parse_number(
                    r[src.cell], header[src.cell], static_cast<std::size_t>(i));
            }
        }
    }

    if (options.classification) {
        std::map<std::string, int> class_ids;
        for (const auto& r : rows) class_ids.emplace(r[static_cast<std::size_t>(target_idx)], 0);
        int next = 0;
        for (auto& [value, id] : class_ids) id = next++;
        d.y.n_classes = next;
        d.y.labels.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            d.y.labels[i] =
                class_ids.at(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(target_idx)]);
        if (next < 2)
            std::cerr << "warning: all rows of " << path << " fall in one target class\n";
    } else {
        d.y.values.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            d.y.values[i] = parse_number(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(target_idx)],
                                         options.target, static_cast<std::size_t>(i));
    }
    return d;
}

}  // namespace sfit
