#pragma once

#include "covthresh/estimators.hpp"
#include "covthresh/lower_bound.hpp"
#include "covthresh/losses.hpp"
#include "covthresh/model_spaces.hpp"
#include "covthresh/risk.hpp"
#include "covthresh/rng.hpp"

#include <json.hpp>

namespace covthresh {

using Json = nlohmann::ordered_json;

/// Doubles that JSON cannot hold (inf, nan) are written as strings
/// "inf", "-inf", "nan" and read back from them.
Json number_to_json(double x);
double number_from_json(const Json& j);

Json to_json(const RngSeed& seed);
RngSeed seed_from_json(const Json& j);

/// All eight fields plus the optional condition record.
Json to_json(const LeastFavorableConfig& cfg);
Json to_json(const ThetaIndex& theta);
ThetaIndex theta_from_json(const Json& j);

/// {rule, gamma, eta?, corrections: [...], keep_diagonal}
Json to_json(const EstimatorSpec& spec);
EstimatorSpec estimator_from_json(const Json& j);

/// {kind, w?, phi?, normalized}. Custom generators cannot be read back.
Json to_json(const LossSpec& spec);
LossSpec loss_from_json(const Json& j);

Json to_json(const TruthSpec& truth);
/// Explicit truths are read from the CSV named by "path", resolved against
/// `base_dir` when relative.
TruthSpec truth_from_json(const Json& j, const std::string& base_dir);

Json to_json(const RiskRecord& record);
RiskRecord record_from_json(const Json& j);

Json to_json(const RateFit& fit);
Json to_json(const GroupFit& fit);
Json to_json(const AlphaResult& alpha);
Json to_json(const EnvelopeReport& env);
Json to_json(const AffinityEstimate& est);

/// Grid configuration file:
/// {"truths": [...] or "truth": {...}, "n": [...], "p": [...],
///  "pairing": "product" | "zip", "estimators": [...], "losses": [...],
///  "replicates": int, "seed": int}
/// Entries are parsed strictly; completeness is left to GridConfig::validate.
GridConfig grid_from_json(const Json& j, const std::string& base_dir);

}  // namespace covthresh
