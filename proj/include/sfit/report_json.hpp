#pragma once

#include <json.hpp>
#include <string>

#include "sfit/engine.hpp"
#include "sfit/loco.hpp"
#include "sfit/sim.hpp"

namespace sfit {

// Report files are versioned so downstream consumers can detect layout
// changes.
inline constexpr int kReportSchemaVersion = 1;

using Json = nlohmann::ordered_json;

Json to_json(const TestedItem& item);
Json to_json(const FirstOrderReport& rep, const FeatureSchema& schema);
Json to_json(const SecondOrderReport& rep, const FeatureSchema& schema);
Json to_json(const BetaCalibration& cal);
Json to_json(const LocoReport& rep);
Json to_json(const PowerStudyResult& res);
Json to_json(const LocoComparisonResult& res);

// Standard wrapper: schema_version, command, root seed, the effective
// config (echoed verbatim), a hash of that config, and a timestamp. The
// timestamp is the only field allowed to differ between identical runs and
// is excluded from the hash.
Json report_envelope(const std::string& command, const Json& effective_config,
                     std::uint64_t seed);

void write_json(const Json& j, const std::string& path);

}  // namespace sfit
