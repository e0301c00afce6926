#include "sfit/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace sfit {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

const char* kind_name(ColumnKind k) {
    switch (k) {
        case ColumnKind::continuous: return "continuous";
        case ColumnKind::binary: return "binary";
        case ColumnKind::categorical: return "categorical";
    }
    return "?";
}

ColumnKind kind_from(const std::string& s) {
    if (s == "continuous") return ColumnKind::continuous;
    if (s == "binary") return ColumnKind::binary;
    if (s == "categorical") return ColumnKind::categorical;
    throw std::runtime_error("unknown column kind '" + s + "' in checkpoint");
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    json j;
    j["version"] = kCheckpointVersion;
    j["architecture"] = {{"layer_sizes", c.model.config().layer_sizes},
                         {"softmax_head", c.model.config().softmax_head},
                         {"init_seed", c.model.config().init_seed}};
    json weights = json::array(), biases = json::array();
    for (const auto& W : c.model.weights()) weights.push_back(matrix_to_json(W));
    for (const auto& b : c.model.biases()) biases.push_back(vector_to_json(b));
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);

    json cols = json::array();
    for (const Column& col : c.schema.columns())
        cols.push_back({{"name", col.name}, {"kind", kind_name(col.kind)}});
    json units = json::array();
    for (const TestUnit& u : c.schema.units())
        units.push_back({{"name", u.name}, {"columns", u.columns}});
    j["schema"] = {{"columns", std::move(cols)},
                   {"units", std::move(units)},
                   {"categorical_fill", c.schema.categorical_fill()}};
    j["standardization"] = {{"mean", vector_to_json(c.standardization.mean)},
                            {"scale", vector_to_json(c.standardization.scale)}};
    j["train_loss"] = to_string(c.train_loss);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint to " + path);
    out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint from " + path);
    json j = json::parse(in);
    if (j.at("version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version");

    MlpConfig mc;
    mc.layer_sizes = j.at("architecture").at("layer_sizes").get<std::vector<int>>();
    mc.softmax_head = j.at("architecture").at("softmax_head").get<bool>();
    mc.init_seed = j.at("architecture").at("init_seed").get<std::uint64_t>();

    std::vector<Column> cols;
    for (const json& cj : j.at("schema").at("columns"))
        cols.push_back({cj.at("name").get<std::string>(),
                        kind_from(cj.at("kind").get<std::string>())});
    FeatureSchema schema(std::move(cols),
                         j.at("schema").at("categorical_fill").get<double>());
    std::vector<TestUnit> units;
    for (const json& uj : j.at("schema").at("units"))
        units.push_back({uj.at("name").get<std::string>(),
                         uj.at("columns").get<std::vector<std::size_t>>()});
    schema.set_units(std::move(units));

    Checkpoint c{Mlp(mc), std::move(schema), {}, parse_loss(j.at("train_loss").get<std::string>())};
    const json& wj = j.at("weights");
    const json& bj = j.at("biases");
    if (wj.size() != c.model.weights().size())
        throw std::runtime_error("checkpoint layer count mismatch");
    for (std::size_t l = 0; l < wj.size(); ++l) {
        Eigen::MatrixXd W = matrix_from_json(wj[l]);
        Eigen::VectorXd b = vector_from_json(bj[l]);
        if (W.rows() != c.model.weights()[l].rows() || W.cols() != c.model.weights()[l].cols())
            throw std::runtime_error("checkpoint weight shape mismatch");
        c.model.weights()[l] = std::move(W);
        c.model.biases()[l] = std::move(b);
    }
    c.standardization.mean = vector_from_json(j.at("standardization").at("mean"));
    c.standardization.scale = vector_from_json(j.at("standardization").at("scale"));
    return c;
}

}  // namespace sfit
