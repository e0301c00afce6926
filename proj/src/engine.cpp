#include "sfit/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "sfit/rng.hpp"

namespace sfit {

SfitContext::SfitContext(const Model& model, const Dataset& d2, LossKind loss)
    : model_(&model), d2_(&d2), loss_(loss) {
    if (d2.n_rows() == 0) throw std::invalid_argument("inference set is empty");
}

const Eigen::VectorXd& SfitContext::masked_losses(const KeepSet& keep) {
    KeepSet key = normalize_keep_set(d2_->schema, keep);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Eigen::MatrixXd masked = apply_mask(d2_->X, d2_->schema, key);
    ++passes_;
    Eigen::VectorXd losses = loss_rows(loss_, model_->predict(masked), d2_->y);
    return cache_.emplace(std::move(key), std::move(losses)).first->second;
}

const Eigen::VectorXd& SfitContext::full_losses() {
    if (!full_) {
        ++passes_;
        full_ = loss_rows(loss_, model_->predict(d2_->X), d2_->y);
    }
    return *full_;
}

Eigen::VectorXd delta_series(SfitContext& ctx, const KeepSet& extra, double beta,
                             const KeepSet& baseline) {
    if (beta < 0.0 || beta >= 1.0) throw std::invalid_argument("beta must lie in [0,1)");
    KeepSet with = baseline;
    with.insert(with.end(), extra.begin(), extra.end());
    for (std::size_t j : extra)
        for (std::size_t b : baseline)
            if (j == b) throw std::invalid_argument("tested columns overlap the baseline set");
    const Eigen::VectorXd& base = ctx.masked_losses(baseline);
    const Eigen::VectorXd& intro = ctx.masked_losses(with);
    return (1.0 - beta) * base - intro;
}

TestedItem test_deltas(const std::string& name, std::vector<std::size_t> columns,
                       const Eigen::VectorXd& deltas, double alpha) {
    TestedItem item;
    item.name = name;
    item.columns = std::move(columns);
    SignTestResult t = sign_test(deltas, alpha);
    item.n2 = t.n;
    item.n_plus = t.n_plus;
    item.p_value = t.p_value;
    item.significant = t.significant;
    item.m_hat = median(deltas);
    return item;
}

void attach_ci(TestedItem& item, const Eigen::VectorXd& deltas, double alpha) {
    item.has_ci = true;
    item.ci_exact = median_ci_exact(deltas, alpha);
    if (item.n2 >= 30) {
        item.ci_asymptotic = median_ci_asymptotic(deltas, alpha);
    } else {
        item.ci_asymptotic.lo = item.ci_exact.lo;
        item.ci_asymptotic.hi = item.ci_exact.hi;
        item.ci_asymptotic.lo_index = 1 + item.ci_exact.k;
        item.ci_asymptotic.hi_index = item.n2 - item.ci_exact.k;
        item.ci_asymptotic_is_exact = true;
    }
}

KeepSet units_columns(const FeatureSchema& schema, const std::vector<std::size_t>& unit_ids) {
    KeepSet cols;
    for (std::size_t u : unit_ids) {
        const TestUnit& unit = schema.unit(u);
        cols.insert(cols.end(), unit.columns.begin(), unit.columns.end());
    }
    return cols;
}

FirstOrderReport sfit_first_order(SfitContext& ctx, const FirstOrderConfig& cfg) {
    const FeatureSchema& schema = ctx.data().schema;
    FirstOrderReport rep;
    rep.config = cfg;
    rep.loss = ctx.loss_kind();
    const std::size_t passes_before = ctx.prediction_passes();

    std::vector<Eigen::VectorXd> deltas(schema.n_units());
    std::vector<double> pvals(schema.n_units());
    for (std::size_t u = 0; u < schema.n_units(); ++u) {
        KeepSet cols(schema.unit(u).columns.begin(), schema.unit(u).columns.end());
        deltas[u] = delta_series(ctx, cols, cfg.beta, cfg.baseline);
        TestedItem item = test_deltas(schema.unit(u).name, cols, deltas[u], cfg.alpha);
        pvals[u] = item.p_value;
        rep.units.push_back(std::move(item));
    }

    if (cfg.fdr != FdrMethod::none) {
        std::vector<bool> keep = fdr_reject(pvals, cfg.alpha, cfg.fdr);
        for (std::size_t u = 0; u < rep.units.size(); ++u) rep.units[u].significant = keep[u];
    }
    for (std::size_t u = 0; u < rep.units.size(); ++u) {
        if (rep.units[u].significant) rep.s1.push_back(u);
        if (rep.units[u].significant || cfg.ci_for_all)
            attach_ci(rep.units[u], deltas[u], cfg.alpha);
    }
    rep.prediction_passes = ctx.prediction_passes() - passes_before;
    return rep;
}

GateOutcome global_higher_order_check(SfitContext& ctx, const std::vector<std::size_t>& s1_units,
                                      double alpha) {
    const FeatureSchema& schema = ctx.data().schema;
    KeepSet s1_cols = units_columns(schema, s1_units);
    Eigen::VectorXd deltas = ctx.masked_losses(s1_cols) - ctx.full_losses();
    GateOutcome gate;
    gate.item = test_deltas("gate", s1_cols, deltas, alpha);
    gate.passed = gate.item.significant;
    if (gate.passed) attach_ci(gate.item, deltas, alpha);
    return gate;
}

Eigen::MatrixXd abs_weight_gram(const Eigen::MatrixXd& W) {
    Eigen::MatrixXd A = W.cwiseAbs();
    return A.transpose() * A;
}

CandidatePairs screen_interactions(const Eigen::MatrixXd& W, std::size_t l,
                                   const FeatureSchema& schema) {
    for (const TestUnit& u : schema.units())
        if (u.columns.size() != 1)
            throw std::invalid_argument("weight screening needs single-column units");
    if (static_cast<std::size_t>(W.cols()) != schema.n_columns())
        throw std::invalid_argument("weight matrix width does not match schema");
    const std::size_t p = schema.n_columns() - 1;
    if (l > p - 1) l = p - 1;  // cannot list more partners than exist
    if (l == 0) throw std::invalid_argument("candidate list length must be >= 1");

    Eigen::MatrixXd G = abs_weight_gram(W);
    CandidatePairs out;
    out.source = "weight-screen";
    out.l = l;
    out.per_unit.resize(schema.n_units());
    for (std::size_t u = 0; u < schema.n_units(); ++u) {
        const std::size_t j = schema.unit(u).columns[0];
        std::vector<std::size_t> partners;
        for (std::size_t k = 1; k <= p; ++k)
            if (k != j) partners.push_back(k);
        std::stable_sort(partners.begin(), partners.end(), [&](std::size_t a, std::size_t b) {
            const double ga = G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a));
            const double gb = G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(b));
            if (ga != gb) return ga > gb;
            return a < b;  // ties broken toward the lower feature index
        });
        partners.resize(std::min(l, partners.size()));
        // columns -> unit ids (single-column units: unit id = column - 1)
        for (std::size_t& k : partners) k -= 1;
        out.per_unit[u] = std::move(partners);
    }
    return out;
}

CandidatePairs exhaustive_candidates(const FeatureSchema& schema) {
    CandidatePairs out;
    out.source = "exhaustive";
    out.l = schema.n_units() >= 1 ? schema.n_units() - 1 : 0;
    out.per_unit.resize(schema.n_units());
    for (std::size_t u = 0; u < schema.n_units(); ++u)
        for (std::size_t v = 0; v < schema.n_units(); ++v)
            if (v != u) out.per_unit[u].push_back(v);
    return out;
}

SecondOrderReport sfit_second_order(SfitContext& ctx, const SecondOrderConfig& cfg,
                                    const std::vector<std::size_t>& s1_units) {
    const FeatureSchema& schema = ctx.data().schema;
    SecondOrderReport rep;
    rep.config = cfg;
    const std::size_t passes_before = ctx.prediction_passes();

    rep.gate = global_higher_order_check(ctx, s1_units, cfg.alpha);
    if (!rep.gate.passed) {
        rep.candidates.source = "none (gate failed)";
        rep.prediction_passes = ctx.prediction_passes() - passes_before;
        return rep;
    }

    if (cfg.candidates) {
        rep.candidates = *cfg.candidates;
    } else if (const Eigen::MatrixXd* W = ctx.model().first_layer_weights();
               W != nullptr && schema.n_units() >= 2 &&
               schema.n_units() + 1 == schema.n_columns()) {
        rep.candidates = screen_interactions(*W, cfg.l, schema);
    } else {
        rep.candidates = exhaustive_candidates(schema);
    }

    const std::set<std::size_t> s1(s1_units.begin(), s1_units.end());
    std::set<std::size_t> s2;
    for (std::size_t j = 0; j < schema.n_units(); ++j) {
        if (!cfg.exhaustive_units) {
            if (s1.count(j)) continue;      // scan only the first-order complement
            if (s2.count(j)) continue;      // already promoted via an earlier pair
        }
        for (std::size_t k : rep.candidates.per_unit[j]) {
            if (k == j) continue;
            KeepSet jk = units_columns(schema, {j, k});
            // When the partner is already known significant — first order, or
            // promoted earlier in this scan — it goes into the reference, so
            // the pair measures j's increment over k rather than re-crediting
            // k's established effect to the new pair.
            KeepSet reference =
                (s1.count(k) || s2.count(k)) ? units_columns(schema, {k}) : KeepSet{};
            Eigen::VectorXd deltas =
                (1.0 - cfg.beta) * ctx.masked_losses(reference) - ctx.masked_losses(jk);
            TestedItem item = test_deltas(schema.unit(j).name + ":" + schema.unit(k).name,
                                        jk, deltas, cfg.alpha);
            const bool hit = item.significant;
            if (hit || cfg.ci_for_all) attach_ci(item, deltas, cfg.alpha);
            rep.pairs.push_back(std::move(item));
            if (hit) {
                s2.insert(j);
                if (!s1.count(k)) s2.insert(k);
                if (cfg.stop_on_hit && !cfg.exhaustive_units) break;
            }
        }
    }
    rep.s2.assign(s2.begin(), s2.end());
    rep.prediction_passes = ctx.prediction_passes() - passes_before;
    return rep;
}

std::vector<double> default_beta_grid() {
    return {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
}

BetaCalibration calibrate_beta(const MlpConfig& architecture, const Dataset& dv, double alpha,
                               const std::vector<double>& grid, std::size_t n_random_models,
                               LossKind loss, std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("beta grid is empty");
    if (n_random_models < 1) throw std::invalid_argument("need at least one random model");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1])
            throw std::invalid_argument("beta grid must be strictly increasing");

    BetaCalibration cal;
    cal.grid = grid;
    cal.alpha = alpha;
    cal.n_random_models = n_random_models;
    cal.avg_fraction_significant.assign(grid.size(), 0.0);

    // The masked loss vectors of a random model do not depend on beta, so
    // each model is evaluated once and every grid entry recounts them.
    for (std::size_t r = 0; r < n_random_models; ++r) {
        MlpConfig cfg = architecture;
        cfg.init_seed = derive_seed(seed, "calibration-model", r);
        Mlp model(cfg);
        SfitContext ctx(model, dv, loss);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            FirstOrderConfig fo;
            fo.alpha = alpha;
            fo.beta = grid[g];
            FirstOrderReport rep = sfit_first_order(ctx, fo);
            cal.avg_fraction_significant[g] +=
                static_cast<double>(rep.s1.size()) /
                static_cast<double>(dv.schema.n_units());
        }
    }
    for (double& f : cal.avg_fraction_significant) f /= static_cast<double>(n_random_models);

    cal.chosen_beta = grid.back();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (cal.avg_fraction_significant[g] <= alpha) {
            cal.chosen_beta = grid[g];
            cal.satisfied = true;
            break;
        }
    }
    return cal;
}

std::vector<PartReport> sfit_partitioned(const Model& model, const Dataset& d2, LossKind loss,
                                         const FirstOrderConfig& cfg) {
    std::vector<Dataset> parts = partition_by_class(d2);
    std::vector<PartReport> out;
    for (const Dataset& part : parts) {
        PartReport pr;
        pr.part_name = "class " + std::to_string(part.y.labels[0]);
        pr.n_rows = static_cast<std::size_t>(part.n_rows());
        SfitContext ctx(model, part, loss);
        pr.report = sfit_first_order(ctx, cfg);
        out.push_back(std::move(pr));
    }
    return out;
}

}  // namespace sfit
