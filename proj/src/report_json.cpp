#include "sfit/report_json.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "sfit/rng.hpp"

namespace sfit {

namespace {

Json ci_json(const TestedItem& item) {
    Json ci;
    ci["exact"] = {{"lo", item.ci_exact.lo},
                   {"hi", item.ci_exact.hi},
                   {"coverage", item.ci_exact.coverage},
                   {"order_statistic_k", item.ci_exact.k},
                   {"widest_fallback", item.ci_exact.widest_fallback}};
    ci["asymptotic"] = {{"lo", item.ci_asymptotic.lo},
                        {"hi", item.ci_asymptotic.hi},
                        {"lo_index", item.ci_asymptotic.lo_index},
                        {"hi_index", item.ci_asymptotic.hi_index},
                        {"exact_fallback", item.ci_asymptotic_is_exact}};
    return ci;
}

Json names_of(const FeatureSchema& schema, const std::vector<std::size_t>& unit_ids) {
    Json arr = Json::array();
    for (std::size_t u : unit_ids) arr.push_back(schema.unit(u).name);
    return arr;
}

}  // namespace

Json to_json(const TestedItem& item) {
    Json j;
    j["name"] = item.name;
    j["columns"] = item.columns;
    j["n2"] = item.n2;
    j["n_plus"] = item.n_plus;
    j["p_value"] = item.p_value;
    j["significant"] = item.significant;
    j["m_hat"] = item.m_hat;
    if (item.has_ci) j["ci"] = ci_json(item);
    return j;
}

Json to_json(const FirstOrderReport& rep, const FeatureSchema& schema) {
    Json j;
    j["method"] = "sfit-first-order";
    j["alpha"] = rep.config.alpha;
    j["beta"] = rep.config.beta;
    j["loss"] = to_string(rep.loss);
    j["fdr"] = to_string(rep.config.fdr);
    j["significant_set"] = names_of(schema, rep.s1);
    Json items = Json::array();
    for (const TestedItem& it : rep.units) items.push_back(to_json(it));
    j["features"] = std::move(items);
    j["prediction_passes"] = rep.prediction_passes;
    return j;
}

Json to_json(const SecondOrderReport& rep, const FeatureSchema& schema) {
    Json j;
    j["method"] = "sfit-second-order";
    j["alpha"] = rep.config.alpha;
    j["beta"] = rep.config.beta;
    j["gate"] = {{"passed", rep.gate.passed}, {"test", to_json(rep.gate.item)}};
    j["significant_set"] = names_of(schema, rep.s2);
    Json pairs = Json::array();
    for (const TestedItem& it : rep.pairs) pairs.push_back(to_json(it));
    j["pairs"] = std::move(pairs);
    j["candidates"] = {{"source", rep.candidates.source}, {"l", rep.candidates.l}};
    j["prediction_passes"] = rep.prediction_passes;
    return j;
}

Json to_json(const BetaCalibration& cal) {
    Json j;
    j["method"] = "beta-calibration";
    j["alpha"] = cal.alpha;
    j["grid"] = cal.grid;
    j["avg_fraction_significant"] = cal.avg_fraction_significant;
    j["n_random_models"] = cal.n_random_models;
    j["chosen_beta"] = cal.chosen_beta;
    j["satisfied"] = cal.satisfied;
    return j;
}

Json to_json(const LocoReport& rep) {
    Json j;
    j["method"] = "loco";
    j["alpha"] = rep.alpha;
    j["loss"] = to_string(rep.delta_loss);
    Json items = Json::array();
    for (const LocoItem& li : rep.items) {
        Json item = to_json(li.item);
        item["wall_seconds"] = li.wall_seconds;
        if (li.failed) item["error"] = li.error;
        items.push_back(std::move(item));
    }
    j["features"] = std::move(items);
    j["refit_count"] = rep.refit_count;
    j["full_model_seconds"] = rep.full_model_seconds;
    j["total_seconds"] = rep.total_seconds;
    return j;
}

Json to_json(const PowerStudyResult& res) {
    Json j;
    j["method"] = "power-study";
    j["trials_completed"] = res.trials.size();
    j["trials_failed"] = res.failed_trials;
    Json cells = Json::array();
    for (const CellStats& c : res.cells) {
        Json cj;
        cj["alpha"] = c.alpha;
        cj["beta1"] = c.beta1;
        cj["beta2"] = c.beta2;
        cj["n2"] = c.n2;
        cj["trials"] = c.trials;
        cj["first_order_hits"] = c.first_order_hits;
        cj["pair_hits"] = c.pair_hits;
        cells.push_back(std::move(cj));
    }
    j["cells"] = std::move(cells);
    Json trials = Json::array();
    for (const TrialSummary& t : res.trials) {
        Json tj;
        tj["s1_units"] = t.s1;
        tj["m_hat"] = t.m_hat;
        tj["significant_pairs"] = t.sig_pairs;
        tj["pair_m_hat"] = t.pair_m_hat;
        tj["gate2_passed"] = t.gate2_passed;
        tj["gate3_passed"] = t.gate3_passed;
        tj["screen_row2_top_is_1"] = t.screen_row2_top_is_1;
        tj["screen_rows_4_5_mutual"] = t.screen_rows_4_5_mutual;
        tj["train_seconds"] = t.train_seconds;
        tj["sfit_first_order_seconds"] = t.sfit_first_order_seconds;
        tj["epochs"] = t.epochs;
        tj["val_loss"] = t.val_loss;
        trials.push_back(std::move(tj));
    }
    j["trials"] = std::move(trials);
    return j;
}

Json to_json(const LocoComparisonResult& res) {
    Json j;
    j["method"] = "loco-comparison";
    j["trials_completed"] = res.trials_completed;
    j["trials_failed"] = res.failed_trials;
    j["sfit_rate"] = res.sfit_rate;
    j["loco_rate"] = res.loco_rate;
    j["sfit_all_selected_rate"] = res.sfit_both_rate;
    j["sfit_total_seconds"] = res.sfit_total_seconds;
    j["loco_total_seconds"] = res.loco_total_seconds;
    j["loco_over_sfit_time_ratio"] =
        res.sfit_total_seconds > 0.0 ? res.loco_total_seconds / res.sfit_total_seconds : 0.0;
    return j;
}

Json report_envelope(const std::string& command, const Json& effective_config,
                     std::uint64_t seed) {
    Json j;
    j["schema_version"] = kReportSchemaVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = effective_config;
    j["config_hash"] = fnv1a64(effective_config.dump());
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["generated_at"] = buf;  // informational; excluded from config_hash
    return j;
}

void write_json(const Json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace sfit
