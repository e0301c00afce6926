#include "sfit/loco.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "sfit/rng.hpp"

namespace sfit {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Dataset drop_columns(const Dataset& d, const std::vector<std::size_t>& columns) {
    std::vector<bool> dropped(static_cast<std::size_t>(d.X.cols()), false);
    for (std::size_t c : columns) {
        if (c == 0) throw std::invalid_argument("cannot drop the intercept column");
        if (c >= dropped.size()) throw std::out_of_range("drop column out of range");
        dropped[c] = true;
    }
    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < dropped.size(); ++c)
        if (!dropped[c]) kept.push_back(c);

    Dataset out;
    out.y = d.y;
    out.X.resize(d.X.rows(), static_cast<Eigen::Index>(kept.size()));
    std::vector<Column> cols;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        out.X.col(static_cast<Eigen::Index>(i)) = d.X.col(static_cast<Eigen::Index>(kept[i]));
        cols.push_back(d.schema.column(kept[i]));
    }
    out.schema = FeatureSchema(std::move(cols), d.schema.categorical_fill());
    return out;
}

LocoReport loco_test(const Dataset& train, const Dataset& validation, const Dataset& d2,
                     const LocoConfig& cfg) {
    const FeatureSchema& schema = train.schema;
    std::vector<std::size_t> units = cfg.units;
    if (units.empty()) {
        units.resize(schema.n_units());
        std::iota(units.begin(), units.end(), 0);
    }

    LocoReport rep;
    rep.alpha = cfg.alpha;
    rep.delta_loss = cfg.delta_loss;
    const auto run_start = std::chrono::steady_clock::now();

    const Mlp* full_model = cfg.pretrained_full;
    std::optional<Mlp> own_full;
    if (full_model == nullptr) {
        MlpConfig full_cfg = cfg.architecture;
        full_cfg.init_seed = derive_seed(cfg.seed, "loco-full-init");
        own_full.emplace(full_cfg);
        train_mlp(*own_full, train, validation, cfg.train_loss, cfg.adam,
                  derive_seed(cfg.seed, "loco-full-train"));
        ++rep.refit_count;
        rep.full_model_seconds = seconds_since(run_start);
        full_model = &*own_full;
    }

    const Eigen::VectorXd full_losses =
        loss_rows(cfg.delta_loss, full_model->predict(d2.X), d2.y);

    for (std::size_t u : units) {
        const auto t0 = std::chrono::steady_clock::now();
        LocoItem li;
        li.item.name = schema.unit(u).name;
        li.item.columns.assign(schema.unit(u).columns.begin(), schema.unit(u).columns.end());
        try {
            std::vector<std::size_t> cols = li.item.columns;
            Dataset tr = drop_columns(train, cols);
            Dataset va = drop_columns(validation, cols);
            Dataset inf = drop_columns(d2, cols);

            MlpConfig reduced_cfg = cfg.architecture;
            reduced_cfg.layer_sizes.front() = static_cast<int>(tr.X.cols());
            reduced_cfg.init_seed = derive_seed(cfg.seed, "loco-refit-init", u);
            Mlp reduced(reduced_cfg);
            train_mlp(reduced, tr, va, cfg.train_loss, cfg.adam,
                      derive_seed(cfg.seed, "loco-refit-train", u));
            ++rep.refit_count;

            Eigen::VectorXd deltas =
                loss_rows(cfg.delta_loss, reduced.predict(inf.X), inf.y) - full_losses;
            li.item = test_deltas(li.item.name, li.item.columns, deltas, cfg.alpha);
            if (li.item.significant || cfg.ci_for_all) attach_ci(li.item, deltas, cfg.alpha);
        } catch (const std::exception& e) {
            li.failed = true;
            li.error = e.what();
        }
        li.wall_seconds = seconds_since(t0);
        rep.items.push_back(std::move(li));
    }
    rep.total_seconds = seconds_since(run_start);
    return rep;
}

}  // namespace sfit
