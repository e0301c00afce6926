#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfit/dataset.hpp"
#include "sfit/mask.hpp"
#include "sfit/mlp.hpp"
#include "sfit/model.hpp"
#include "sfit/sign_test.hpp"
#include "sfit/train.hpp"

namespace sfit {

// Shared evaluation state for one (model, inference set, loss) triple.
// Per-row loss vectors are cached by kept-column set, so re-testing with a
// different alpha/beta (or the second-order pass revisiting a mask) costs
// no extra model evaluations. One cache miss = one batched prediction pass.
class SfitContext {
public:
    SfitContext(const Model& model, const Dataset& d2, LossKind loss);

    // Per-row losses with only `keep` (plus the intercept) left active.
    const Eigen::VectorXd& masked_losses(const KeepSet& keep);
    // Per-row losses on the untouched design matrix.
    const Eigen::VectorXd& full_losses();

    const Dataset& data() const { return *d2_; }
    const Model& model() const { return *model_; }
    LossKind loss_kind() const { return loss_; }
    std::size_t n2() const { return static_cast<std::size_t>(d2_->n_rows()); }
    std::size_t prediction_passes() const { return passes_; }

private:
    const Model* model_;
    const Dataset* d2_;
    LossKind loss_;
    std::map<KeepSet, Eigen::VectorXd> cache_;  // keyed by normalized keep set
    std::optional<Eigen::VectorXd> full_;
    std::size_t passes_ = 0;
};

// Δ_i = (1-β)·L(Y_i, μ(X^{baseline})) − L(Y_i, μ(X^{baseline ∪ extra})).
// The default baseline is the intercept-only mask.
Eigen::VectorXd delta_series(SfitContext& ctx, const KeepSet& extra, double beta,
                             const KeepSet& baseline = {});

// Everything recorded about one tested item (feature, pair, or gate).
struct TestedItem {
    std::string name;
    std::vector<std::size_t> columns;  // design-matrix columns introduced
    std::size_t n2 = 0;
    std::size_t n_plus = 0;
    double p_value = 1.0;
    bool significant = false;  // final decision (post-FDR where applicable)
    double m_hat = 0.0;
    bool has_ci = false;
    ExactCi ci_exact;
    AsymptoticCi ci_asymptotic;
    bool ci_asymptotic_is_exact = false;  // n2 < 30 fallback
};

// Sign test + median for a delta series, packaged for reporting.
TestedItem test_deltas(const std::string& name, std::vector<std::size_t> columns,
                       const Eigen::VectorXd& deltas, double alpha);

// Attach both interval flavors; below 30 rows the index approximation is
// unreliable, so the exact bounds stand in (flagged).
void attach_ci(TestedItem& item, const Eigen::VectorXd& deltas, double alpha);

struct FirstOrderConfig {
    double alpha = 0.05;
    double beta = 1e-2;
    FdrMethod fdr = FdrMethod::none;
    bool ci_for_all = false;     // default: CI only for significant items
    KeepSet baseline;            // columns always kept (besides the intercept)
};

struct FirstOrderReport {
    FirstOrderConfig config;
    LossKind loss = LossKind::absolute;
    std::vector<TestedItem> units;      // one per test unit, schema order
    std::vector<std::size_t> s1;        // significant unit indices (ascending)
    std::size_t prediction_passes = 0;  // passes consumed by this call
};

// Algorithm: shared baseline pass, one masked pass per unit, sign test per
// unit, optional FDR adjustment across the family of per-unit p-values.
FirstOrderReport sfit_first_order(SfitContext& ctx, const FirstOrderConfig& cfg);

// Columns spanned by the units in `unit_ids`.
KeepSet units_columns(const FeatureSchema& schema, const std::vector<std::size_t>& unit_ids);

struct GateOutcome {
    TestedItem item;  // Δ_i = L(masked to S1) − L(unmasked), no (1-β) factor
    bool passed = false;
};

// Sign test for "does anything beyond the S1 features matter": compares the
// model restricted to the already-significant set against the full model.
GateOutcome global_higher_order_check(SfitContext& ctx, const std::vector<std::size_t>& s1_units,
                                      double alpha);

// Ordered partner lists for the pair scan.
struct CandidatePairs {
    // per_unit[j] lists partner unit ids, best first; entry j absent for the
    // intercept-free indexing (j is a unit id).
    std::vector<std::vector<std::size_t>> per_unit;
    std::string source = "exhaustive";  // "weight-screen" | "exhaustive" | "user"
    std::size_t l = 0;
};

// G = |W|ᵀ|W| over the input-layer weights; feature j's candidates are the
// l largest off-diagonal entries of row j (intercept excluded, ties to the
// lower index). Requires every test unit to be a single column.
CandidatePairs screen_interactions(const Eigen::MatrixXd& W, std::size_t l,
                                   const FeatureSchema& schema);
CandidatePairs exhaustive_candidates(const FeatureSchema& schema);
Eigen::MatrixXd abs_weight_gram(const Eigen::MatrixXd& W);

struct SecondOrderConfig {
    double alpha = 0.05;
    double beta = 1e-3;
    std::size_t l = 10;            // candidate list cap for weight screening
    bool exhaustive_units = false; // scan all units, not just the S1 complement
    bool stop_on_hit = true;       // leave a unit's partner scan after one hit
    bool ci_for_all = false;
    std::optional<CandidatePairs> candidates;  // override the default source
};

struct SecondOrderReport {
    SecondOrderConfig config;
    GateOutcome gate;
    std::vector<TestedItem> pairs;      // every tested pair, scan order
    std::vector<std::size_t> s2;        // units reaching significance via pairs
    CandidatePairs candidates;
    std::size_t prediction_passes = 0;
};

// Algorithm: run the global gate; if it passes, scan units outside S1
// (skipping any already promoted into S2), testing partners in candidate
// order. A pair (j,k) keeps k's observed values alongside j; the reference
// loss keeps k when k is already known significant (first order, or promoted
// into S2 earlier in the scan), otherwise the plain baseline — so a pair with
// an established variable measures j's increment over it instead of counting
// that variable's effect twice. Significant pairs promote j (and k when k is
// outside S1).
SecondOrderReport sfit_second_order(SfitContext& ctx, const SecondOrderConfig& cfg,
                                    const std::vector<std::size_t>& s1_units);

struct BetaCalibration {
    std::vector<double> grid;
    std::vector<double> avg_fraction_significant;  // per grid entry
    double chosen_beta = 0.0;
    bool satisfied = false;  // false: no grid value met alpha; largest returned
    std::size_t n_random_models = 0;
    double alpha = 0.05;
};

std::vector<double> default_beta_grid();  // 1e-6 .. 1e-1, log-spaced, 6 values

// Pick the smallest β at which models with randomized parameters (same
// architecture, untrained) no longer produce discoveries above rate alpha.
// Each random model costs one set of masked passes; the β grid itself is
// evaluated by recounting cached losses.
BetaCalibration calibrate_beta(const MlpConfig& architecture, const Dataset& dv, double alpha,
                               const std::vector<double>& grid, std::size_t n_random_models,
                               LossKind loss, std::uint64_t seed);

struct PartReport {
    std::string part_name;  // class label or column value
    std::size_t n_rows = 0;
    FirstOrderReport report;
};

// Independent first-order runs on each class (or each value of a grouping
// column) of the inference set.
std::vector<PartReport> sfit_partitioned(const Model& model, const Dataset& d2, LossKind loss,
                                         const FirstOrderConfig& cfg);

}  // namespace sfit
