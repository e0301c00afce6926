#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sfit/engine.hpp"
#include "sfit/loco.hpp"
#include "sfit/train.hpp"

namespace sfit {

// Seven independent standard-normal features plus intercept;
// Y = 3 + 4*x1 + x1*x2 + 3*x3^2 + 2*x4*x5 + eps, eps ~ N(0, 0.01^2).
Dataset gen_main_dgp(std::size_t n, std::uint64_t seed);

// Two unit-variance features with correlation 0.85;
// Y = 2 + x1 + x2 + eps, eps ~ N(0, 10) (variance 10).
Dataset gen_correlated_toy(std::size_t n, std::uint64_t seed);

struct PowerStudyConfig {
    std::size_t n_trials = 30;
    std::size_t n_train = 100000;
    std::size_t n_validation = 20000;
    std::size_t n2 = 10000;              // main inference-set size
    std::vector<std::size_t> n2_extra;   // additional sweep cells
    double alpha = 0.05;
    double beta1 = 1e-2;
    double beta2 = 1e-3;
    std::vector<double> beta2_extra;     // additional pair-test sweep cells
    std::vector<int> hidden = {150, 50};
    AdamConfig adam;
    LossKind train_loss = LossKind::squared;
    LossKind delta_loss = LossKind::absolute;
    std::size_t candidate_list_length = 2;
    bool check_third_order = true;       // re-run the gate with S1 ∪ S2 kept
};

// Heavy pieces of one simulation trial, reusable for timing studies.
struct MainTrial {
    Dataset train, validation, inference;
    Mlp model;
    TrainResult training;
    double train_seconds = 0.0;
};
MainTrial prepare_main_trial(const PowerStudyConfig& cfg, std::uint64_t trial_seed);

struct TrialSummary {
    std::vector<std::size_t> s1;            // unit ids (0-based; unit u is x{u+1})
    std::map<std::string, double> m_hat;    // first-order medians by feature name
    std::vector<std::string> sig_pairs;     // significant pair names, scan order
    std::map<std::string, double> pair_m_hat;
    bool gate2_passed = false;
    bool gate3_passed = false;              // gate re-run keeping S1 ∪ S2
    bool screen_row2_top_is_1 = false;      // |W|ᵀ|W| row checks on the fitted net
    bool screen_rows_4_5_mutual = false;
    double sfit_first_order_seconds = 0.0;
    double train_seconds = 0.0;
    int epochs = 0;
    double val_loss = 0.0;
};
TrialSummary analyze_main_trial(const MainTrial& trial, const PowerStudyConfig& cfg);

struct CellStats {
    double alpha = 0.05;
    double beta1 = 0.0;  // first-order rows
    double beta2 = 0.0;  // pair rows
    std::size_t n2 = 0;
    std::map<std::string, std::size_t> first_order_hits;  // feature -> trials selected
    std::map<std::string, std::size_t> pair_hits;
    std::size_t trials = 0;
};

struct PowerStudyResult {
    PowerStudyConfig config;
    std::vector<TrialSummary> trials;  // completed trials only
    std::vector<CellStats> cells;      // main cell first, then sweep cells
    std::size_t failed_trials = 0;
};

// Repeated end-to-end trials on the main DGP: fresh data and training per
// trial, first- and second-order testing, selection frequencies per sweep
// cell. A trial whose training diverges is recorded and skipped.
PowerStudyResult run_power_study(const PowerStudyConfig& cfg, std::uint64_t seed);

struct LocoComparisonConfig {
    std::size_t n_trials = 300;
    std::size_t n_train = 1000;
    std::size_t n_validation = 250;
    std::size_t n2 = 1000;
    double alpha = 0.05;
    double beta = 1e-2;
    // No hidden layers: the toy response is linear, and a linear fit pins down
    // each variable's own coefficient even at correlation 0.85. Hidden-layer
    // nets fit the sum just as well but are free to split it unevenly between
    // the two inputs, which occasionally zeroes one variable's solo effect and
    // costs the test its power. The contrast with LOCO is unchanged — LOCO
    // fails here for any model class because dropping either variable barely
    // hurts the joint fit.
    std::vector<int> hidden = {};
    // The collinear coordinate improves the loss by well under 1e-2 per epoch
    // (the loss scale is ~13 here), so the stock stopping rule quits while
    // that coordinate is still drifting toward its least-squares value.
    AdamConfig adam = [] {
        AdamConfig a;
        a.early_stopping.min_delta = 1e-3;
        a.early_stopping.patience = 20;
        a.max_epochs = 200;
        return a;
    }();
    LossKind train_loss = LossKind::squared;
    LossKind delta_loss = LossKind::absolute;
};

struct LocoComparisonResult {
    LocoComparisonConfig config;
    std::map<std::string, double> sfit_rate;  // per-feature selection rates
    std::map<std::string, double> loco_rate;
    double sfit_both_rate = 0.0;  // trials with every feature selected by SFIT
    double sfit_total_seconds = 0.0;  // testing only (model shared with LOCO)
    double loco_total_seconds = 0.0;  // refits + testing
    std::size_t trials_completed = 0;
    std::size_t failed_trials = 0;
};

// SFIT and LOCO on identical data each trial (correlated-toy DGP): the
// collinearity contrast plus a wall-time comparison. SFIT reuses LOCO's
// full model, so its cost is pure testing.
LocoComparisonResult run_loco_comparison(const LocoComparisonConfig& cfg, std::uint64_t seed);

}  // namespace sfit
