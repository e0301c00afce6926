#include "sfit/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <set>

#include "sfit/rng.hpp"

namespace sfit {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd standard_normals(std::size_t n, std::size_t p, std::mt19937_64& eng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < Z.rows(); ++i)
        for (Eigen::Index j = 0; j < Z.cols(); ++j) Z(i, j) = gauss(eng);
    return Z;
}

}  // namespace

Dataset gen_main_dgp(std::size_t n, std::uint64_t seed) {
    auto eng = make_engine(seed);
    Eigen::MatrixXd Z = standard_normals(n, 7, eng);
    std::normal_distribution<double> noise(0.0, 0.01);

    Dataset d;
    d.schema = FeatureSchema::continuous(7);
    d.X.resize(static_cast<Eigen::Index>(n), 8);
    d.X.col(0).setOnes();
    d.X.rightCols(7) = Z;
    d.y.values.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
        const auto x = [&](int j) { return Z(i, j - 1); };
        d.y.values[i] = 3.0 + 4.0 * x(1) + x(1) * x(2) + 3.0 * x(3) * x(3) +
                        2.0 * x(4) * x(5) + noise(eng);
    }
    return d;
}

Dataset gen_correlated_toy(std::size_t n, std::uint64_t seed) {
    auto eng = make_engine(seed);
    Eigen::MatrixXd Z = standard_normals(n, 2, eng);
    std::normal_distribution<double> noise(0.0, std::sqrt(10.0));
    const double rho = 0.85;
    const double resid = std::sqrt(1.0 - rho * rho);

    Dataset d;
    d.schema = FeatureSchema::continuous(2);
    d.X.resize(static_cast<Eigen::Index>(n), 3);
    d.X.col(0).setOnes();
    d.X.col(1) = Z.col(0);
    d.X.col(2) = rho * Z.col(0) + resid * Z.col(1);
    d.y.values.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < d.X.rows(); ++i)
        d.y.values[i] = 2.0 + d.X(i, 1) + d.X(i, 2) + noise(eng);
    return d;
}

MainTrial prepare_main_trial(const PowerStudyConfig& cfg, std::uint64_t trial_seed) {
    MainTrial t{gen_main_dgp(cfg.n_train, derive_seed(trial_seed, "train-data")),
                gen_main_dgp(cfg.n_validation, derive_seed(trial_seed, "validation-data")),
                gen_main_dgp(cfg.n2, derive_seed(trial_seed, "inference-data")),
                Mlp([&] {
                    MlpConfig mc;
                    mc.layer_sizes.push_back(static_cast<int>(8));
                    for (int h : cfg.hidden) mc.layer_sizes.push_back(h);
                    mc.layer_sizes.push_back(1);
                    mc.init_seed = derive_seed(trial_seed, "init");
                    return mc;
                }()),
                {},
                0.0};
    const auto t0 = std::chrono::steady_clock::now();
    t.training = train_mlp(t.model, t.train, t.validation, cfg.train_loss, cfg.adam,
                           derive_seed(trial_seed, "train-shuffle"));
    t.train_seconds = seconds_since(t0);
    return t;
}

TrialSummary analyze_main_trial(const MainTrial& trial, const PowerStudyConfig& cfg) {
    TrialSummary s;
    s.train_seconds = trial.train_seconds;
    s.epochs = trial.training.epochs_run;
    s.val_loss = trial.training.best_val_loss;

    SfitContext ctx(trial.model, trial.inference, cfg.delta_loss);

    const auto t0 = std::chrono::steady_clock::now();
    FirstOrderConfig fo;
    fo.alpha = cfg.alpha;
    fo.beta = cfg.beta1;
    FirstOrderReport first = sfit_first_order(ctx, fo);
    s.sfit_first_order_seconds = seconds_since(t0);

    s.s1 = first.s1;
    for (const TestedItem& it : first.units) s.m_hat[it.name] = it.m_hat;

    SecondOrderConfig so;
    so.alpha = cfg.alpha;
    so.beta = cfg.beta2;
    so.l = cfg.candidate_list_length;
    SecondOrderReport second = sfit_second_order(ctx, so, first.s1);
    s.gate2_passed = second.gate.passed;
    for (const TestedItem& it : second.pairs) {
        if (!it.significant) continue;
        s.sig_pairs.push_back(it.name);
        s.pair_m_hat[it.name] = it.m_hat;
    }

    if (cfg.check_third_order) {
        std::set<std::size_t> kept(first.s1.begin(), first.s1.end());
        kept.insert(second.s2.begin(), second.s2.end());
        GateOutcome g3 = global_higher_order_check(
            ctx, std::vector<std::size_t>(kept.begin(), kept.end()), cfg.alpha);
        s.gate3_passed = g3.passed;
    }

    if (const Eigen::MatrixXd* W = trial.model.first_layer_weights()) {
        Eigen::MatrixXd G = abs_weight_gram(*W);
        auto row_argmax = [&](Eigen::Index row) {
            Eigen::Index best = 0;
            double best_val = -1.0;
            for (Eigen::Index k = 1; k < G.cols(); ++k) {
                if (k == row) continue;
                if (G(row, k) > best_val) {
                    best_val = G(row, k);
                    best = k;
                }
            }
            return best;
        };
        s.screen_row2_top_is_1 = row_argmax(2) == 1;
        s.screen_rows_4_5_mutual = row_argmax(4) == 5 && row_argmax(5) == 4;
    }
    return s;
}

PowerStudyResult run_power_study(const PowerStudyConfig& cfg, std::uint64_t seed) {
    PowerStudyResult res;
    res.config = cfg;

    CellStats main_cell;
    main_cell.alpha = cfg.alpha;
    main_cell.beta1 = cfg.beta1;
    main_cell.beta2 = cfg.beta2;
    main_cell.n2 = cfg.n2;
    std::vector<CellStats> beta_cells;
    for (double b2 : cfg.beta2_extra) {
        CellStats c = main_cell;
        c.beta2 = b2;
        beta_cells.push_back(c);
    }
    std::vector<CellStats> n2_cells;
    for (std::size_t m : cfg.n2_extra) {
        CellStats c = main_cell;
        c.n2 = m;
        n2_cells.push_back(c);
    }

    for (std::size_t t = 0; t < cfg.n_trials; ++t) {
        const std::uint64_t trial_seed = derive_seed(seed, "trial", t);
        try {
            MainTrial trial = prepare_main_trial(cfg, trial_seed);
            TrialSummary summary = analyze_main_trial(trial, cfg);

            // make zero-hit features visible in the per-cell tables
            const FeatureSchema& sch = trial.inference.schema;
            for (std::size_t u = 0; u < sch.n_units(); ++u) {
                main_cell.first_order_hits.insert({sch.unit(u).name, 0});
                for (CellStats& cell : n2_cells)
                    cell.first_order_hits.insert({sch.unit(u).name, 0});
            }

            ++main_cell.trials;
            for (std::size_t u : summary.s1)
                ++main_cell.first_order_hits[trial.inference.schema.unit(u).name];
            for (const std::string& pr : summary.sig_pairs) ++main_cell.pair_hits[pr];

            if (!beta_cells.empty() || !n2_cells.empty()) {
                SfitContext ctx(trial.model, trial.inference, cfg.delta_loss);
                FirstOrderConfig fo;
                fo.alpha = cfg.alpha;
                fo.beta = cfg.beta1;
                FirstOrderReport first = sfit_first_order(ctx, fo);
                for (CellStats& cell : beta_cells) {
                    SecondOrderConfig so;
                    so.alpha = cfg.alpha;
                    so.beta = cell.beta2;
                    so.l = cfg.candidate_list_length;
                    SecondOrderReport second = sfit_second_order(ctx, so, first.s1);
                    ++cell.trials;
                    for (const TestedItem& it : second.pairs)
                        if (it.significant) ++cell.pair_hits[it.name];
                }
                for (CellStats& cell : n2_cells) {
                    std::vector<Eigen::Index> rows(
                        std::min<std::size_t>(cell.n2,
                                              static_cast<std::size_t>(trial.inference.n_rows())));
                    std::iota(rows.begin(), rows.end(), 0);
                    Dataset sub = trial.inference.take(rows);
                    SfitContext sub_ctx(trial.model, sub, cfg.delta_loss);
                    FirstOrderReport sub_first = sfit_first_order(sub_ctx, fo);
                    ++cell.trials;
                    for (std::size_t u : sub_first.s1)
                        ++cell.first_order_hits[sub.schema.unit(u).name];
                }
            }
            res.trials.push_back(std::move(summary));
        } catch (const std::exception& e) {
            ++res.failed_trials;
            std::cerr << "trial " << t << " failed: " << e.what() << "\n";
        }
    }

    res.cells.push_back(std::move(main_cell));
    for (CellStats& c : beta_cells) res.cells.push_back(std::move(c));
    for (CellStats& c : n2_cells) res.cells.push_back(std::move(c));
    return res;
}

LocoComparisonResult run_loco_comparison(const LocoComparisonConfig& cfg, std::uint64_t seed) {
    LocoComparisonResult res;
    res.config = cfg;
    std::map<std::string, std::size_t> sfit_hits, loco_hits;
    std::size_t both_hits = 0;

    for (std::size_t t = 0; t < cfg.n_trials; ++t) {
        const std::uint64_t trial_seed = derive_seed(seed, "toy-trial", t);
        try {
            Dataset train = gen_correlated_toy(cfg.n_train, derive_seed(trial_seed, "train-data"));
            Dataset val =
                gen_correlated_toy(cfg.n_validation, derive_seed(trial_seed, "validation-data"));
            Dataset infer = gen_correlated_toy(cfg.n2, derive_seed(trial_seed, "inference-data"));

            MlpConfig mc;
            mc.layer_sizes.push_back(static_cast<int>(train.X.cols()));
            for (int h : cfg.hidden) mc.layer_sizes.push_back(h);
            mc.layer_sizes.push_back(1);
            mc.init_seed = derive_seed(trial_seed, "init");
            Mlp model(mc);
            train_mlp(model, train, val, cfg.train_loss, cfg.adam,
                      derive_seed(trial_seed, "train-shuffle"));

            const auto sfit_t0 = std::chrono::steady_clock::now();
            SfitContext ctx(model, infer, cfg.delta_loss);
            FirstOrderConfig fo;
            fo.alpha = cfg.alpha;
            fo.beta = cfg.beta;
            FirstOrderReport first = sfit_first_order(ctx, fo);
            res.sfit_total_seconds += seconds_since(sfit_t0);

            std::set<std::size_t> chosen(first.s1.begin(), first.s1.end());
            for (std::size_t u : chosen) ++sfit_hits[infer.schema.unit(u).name];
            if (chosen.size() == infer.schema.n_units()) ++both_hits;

            const auto loco_t0 = std::chrono::steady_clock::now();
            LocoConfig lc;
            lc.alpha = cfg.alpha;
            lc.delta_loss = cfg.delta_loss;
            lc.train_loss = cfg.train_loss;
            lc.architecture = mc;
            lc.adam = cfg.adam;
            lc.seed = trial_seed;
            lc.pretrained_full = &model;
            LocoReport loco = loco_test(train, val, infer, lc);
            res.loco_total_seconds += seconds_since(loco_t0);
            for (const LocoItem& li : loco.items)
                if (!li.failed && li.item.significant) ++loco_hits[li.item.name];

            ++res.trials_completed;
        } catch (const std::exception& e) {
            ++res.failed_trials;
            std::cerr << "toy trial " << t << " failed: " << e.what() << "\n";
        }
    }

    const double denom = std::max<std::size_t>(res.trials_completed, 1);
    for (const auto& [name, hits] : sfit_hits)
        res.sfit_rate[name] = static_cast<double>(hits) / denom;
    for (const auto& [name, hits] : loco_hits)
        res.loco_rate[name] = static_cast<double>(hits) / denom;
    res.sfit_both_rate = static_cast<double>(both_hits) / denom;
    return res;
}

}  // namespace sfit
