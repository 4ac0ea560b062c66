#include "covthresh/serialization.hpp"

#include "covthresh/errors.hpp"

#include <cmath>
#include <filesystem>
#include <memory>

namespace covthresh {

namespace {

const Json& require(const Json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key)) {
        throw InputError(std::string(where) + ": missing field '" + key + "'");
    }
    return j.at(key);
}

Index index_from_json(const Json& j, const char* what) {
    if (!j.is_number_integer()) throw InputError(std::string(what) + " must be an integer");
    const auto v = j.get<std::int64_t>();
    if (v < 0) throw InputError(std::string(what) + " must be non-negative");
    return static_cast<Index>(v);
}

std::vector<Index> indices_from_json(const Json& j, const char* what) {
    std::vector<Index> out;
    if (j.is_array()) {
        for (const auto& v : j) out.push_back(index_from_json(v, what));
    } else {
        out.push_back(index_from_json(j, what));
    }
    return out;
}

PhiKind phi_from_string(const std::string& s) {
    if (s == "stein") return PhiKind::stein;
    if (s == "von-neumann" || s == "vn") return PhiKind::von_neumann;
    if (s == "squared-frobenius") return PhiKind::squared_frobenius;
    throw InputError("unknown phi '" + s + "' (expected stein, von-neumann or squared-frobenius)");
}

template <class F>
auto wrap_json_errors(const char* where, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string(where) + ": " + e.what());
    }
}

}  // namespace

Json number_to_json(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

double number_from_json(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "nan") return std::nan("");
        if (s == "inf") return HUGE_VAL;
        if (s == "-inf") return -HUGE_VAL;
    }
    throw InputError("expected a number, got " + j.dump());
}

Json to_json(const RngSeed& seed) { return Json{{"seed", seed.seed}, {"stream", seed.stream}}; }

RngSeed seed_from_json(const Json& j) {
    return wrap_json_errors("seed", [&] {
        return RngSeed{require(j, "seed", "seed").get<std::uint64_t>(),
                       require(j, "stream", "seed").get<std::uint64_t>()};
    });
}

Json to_json(const LeastFavorableConfig& cfg) {
    Json j{{"p", cfg.p},
           {"n", cfg.n},
           {"q", number_to_json(cfg.q)},
           {"c", number_to_json(cfg.c)},
           {"upsilon", number_to_json(cfg.upsilon)},
           {"r", cfg.r},
           {"k", cfg.k},
           {"epsilon", number_to_json(cfg.epsilon)}};
    if (cfg.condc_m) j["condc_m"] = number_to_json(*cfg.condc_m);
    if (cfg.condc_holds) j["condc_holds"] = *cfg.condc_holds;
    return j;
}

Json to_json(const ThetaIndex& theta) {
    Json gamma = Json::array();
    for (auto g : theta.gamma) gamma.push_back(static_cast<int>(g));
    return Json{{"gamma", gamma}, {"lambda", theta.lambda}};
}

ThetaIndex theta_from_json(const Json& j) {
    return wrap_json_errors("theta", [&] {
        ThetaIndex t;
        for (const auto& g : require(j, "gamma", "theta")) {
            const int v = g.get<int>();
            if (v != 0 && v != 1) throw StructureError("theta: gamma entries must be 0 or 1");
            t.gamma.push_back(static_cast<std::uint8_t>(v));
        }
        for (const auto& row : require(j, "lambda", "theta")) t.lambda.push_back(indices_from_json(row, "lambda"));
        return t;
    });
}

Json to_json(const EstimatorSpec& spec) {
    Json j{{"rule", to_string(spec.rule)}, {"gamma", number_to_json(spec.gamma)}};
    if (spec.rule == ThresholdRule::adaptive_lasso) j["eta"] = number_to_json(spec.eta);
    Json corrections = Json::array();
    if (spec.psd_project) corrections.push_back("psd-project");
    if (spec.bregman_guard) corrections.push_back("bregman-guard");
    j["corrections"] = corrections;
    j["keep_diagonal"] = spec.keep_diagonal;
    if (spec.bregman_guard && spec.guard_reading == GuardReading::min_only) j["guard_reading"] = "min-only";
    return j;
}

EstimatorSpec estimator_from_json(const Json& j) {
    return wrap_json_errors("estimator", [&] {
        if (j.is_string()) {
            EstimatorSpec s = estimator_from_label(j.get<std::string>(), 2.0);
            s.validate();
            return s;
        }
        EstimatorSpec s;
        s.rule = rule_from_string(require(j, "rule", "estimator").get<std::string>());
        if (j.contains("gamma")) s.gamma = number_from_json(j.at("gamma"));
        if (j.contains("eta")) s.eta = number_from_json(j.at("eta"));
        if (j.contains("corrections")) {
            for (const auto& c : j.at("corrections")) {
                const auto name = c.get<std::string>();
                if (name == "psd-project") s.psd_project = true;
                else if (name == "bregman-guard") s.bregman_guard = true;
                else throw InputError("estimator: unknown correction '" + name + "'");
            }
        }
        if (j.contains("keep_diagonal")) s.keep_diagonal = j.at("keep_diagonal").get<bool>();
        if (j.contains("guard_reading")) {
            const auto r = j.at("guard_reading").get<std::string>();
            if (r == "min-only") s.guard_reading = GuardReading::min_only;
            else if (r == "both-extremes") s.guard_reading = GuardReading::both_extremes;
            else throw InputError("estimator: unknown guard_reading '" + r + "'");
        }
        s.validate();
        return s;
    });
}

Json to_json(const LossSpec& spec) {
    Json j{{"kind", to_string(spec.kind)}};
    if (spec.kind == LossKind::operator_norm) j["w"] = number_to_json(spec.w);
    if (spec.kind == LossKind::bregman) {
        j["phi"] = spec.phi == PhiKind::custom && spec.custom ? spec.custom->name : to_string(spec.phi);
    }
    j["normalized"] = spec.normalized;
    return j;
}

LossSpec loss_from_json(const Json& j) {
    return wrap_json_errors("loss", [&] {
        if (j.is_string()) return loss_from_name(j.get<std::string>(), false);
        const bool normalized = j.contains("normalized") && j.at("normalized").get<bool>();
        if (j.contains("name")) return loss_from_name(j.at("name").get<std::string>(), normalized);
        const auto kind = require(j, "kind", "loss").get<std::string>();
        LossSpec s;
        if (kind == "operator") {
            s = LossSpec::op(j.contains("w") ? number_from_json(j.at("w")) : 2.0);
        } else if (kind == "frobenius-squared") {
            s = LossSpec::frobenius();
        } else if (kind == "bregman") {
            s = LossSpec::bregman(phi_from_string(require(j, "phi", "loss").get<std::string>()));
        } else {
            throw InputError("loss: unknown kind '" + kind + "'");
        }
        s.normalized = normalized;
        s.validate();
        return s;
    });
}

Json to_json(const TruthSpec& truth) {
    switch (truth.kind) {
        case TruthKind::explicit_matrix:
            return Json{{"kind", "explicit"}, {"path", truth.source}};
        case TruthKind::banded:
            return Json{{"kind", "banded"},
                        {"bandwidth", truth.bandwidth},
                        {"value", number_to_json(truth.value)},
                        {"block", truth.block}};
        case TruthKind::polynomial_decay:
            return Json{{"kind", "polynomial"},
                        {"q", number_to_json(truth.q)},
                        {"scale", number_to_json(truth.scale)},
                        {"bandwidth", truth.bandwidth}};
        case TruthKind::family_member:
            return Json{{"kind", "family"},
                        {"q", number_to_json(truth.q)},
                        {"c", number_to_json(truth.c)},
                        {"upsilon", number_to_json(truth.upsilon)}};
    }
    return Json{};
}

TruthSpec truth_from_json(const Json& j, const std::string& base_dir) {
    return wrap_json_errors("truth", [&] {
        TruthSpec t;
        const auto kind = require(j, "kind", "truth").get<std::string>();
        if (kind == "explicit") {
            t.kind = TruthKind::explicit_matrix;
            std::filesystem::path path = require(j, "path", "truth").get<std::string>();
            if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
            t.source = require(j, "path", "truth").get<std::string>();
            t.matrix = std::make_shared<const SymmetricMatrix>(load_symmetric_csv(path.string()));
        } else if (kind == "banded") {
            t.kind = TruthKind::banded;
            t.bandwidth = index_from_json(require(j, "bandwidth", "truth"), "bandwidth");
            t.value = number_from_json(require(j, "value", "truth"));
            if (j.contains("block")) t.block = index_from_json(j.at("block"), "block");
        } else if (kind == "polynomial") {
            t.kind = TruthKind::polynomial_decay;
            t.q = number_from_json(require(j, "q", "truth"));
            t.scale = number_from_json(require(j, "scale", "truth"));
            t.bandwidth = index_from_json(require(j, "bandwidth", "truth"), "bandwidth");
            if (!(t.q > 0.0 && t.q < 1.0)) throw InputError("truth: polynomial decay needs q in (0, 1)");
        } else if (kind == "family") {
            t.kind = TruthKind::family_member;
            t.q = number_from_json(require(j, "q", "truth"));
            t.c = number_from_json(require(j, "c", "truth"));
            t.upsilon = number_from_json(require(j, "upsilon", "truth"));
        } else {
            throw InputError("truth: unknown kind '" + kind + "' (expected explicit, banded, polynomial, family)");
        }
        return t;
    });
}

Json to_json(const RiskRecord& r) {
    return Json{{"cell_id", r.cell_id},
                {"truth", r.truth},
                {"q", number_to_json(r.q)},
                {"c", number_to_json(r.c)},
                {"estimator", to_json(r.estimator)},
                {"loss", to_json(r.loss)},
                {"n", r.n},
                {"p", r.p},
                {"replicates", r.replicates},
                {"failures", r.failures},
                {"mean_risk", number_to_json(r.mean_risk)},
                {"std_error", number_to_json(r.std_error)},
                {"median_risk", number_to_json(r.median_risk)},
                {"seed", to_json(r.seed)},
                {"wall_time", number_to_json(r.wall_time)}};
}

RiskRecord record_from_json(const Json& j) {
    return wrap_json_errors("record", [&] {
        RiskRecord r;
        r.cell_id = require(j, "cell_id", "record").get<std::uint64_t>();
        r.truth = require(j, "truth", "record").get<std::string>();
        r.q = number_from_json(require(j, "q", "record"));
        r.c = number_from_json(require(j, "c", "record"));
        r.estimator = estimator_from_json(require(j, "estimator", "record"));
        r.loss = loss_from_json(require(j, "loss", "record"));
        r.n = index_from_json(require(j, "n", "record"), "n");
        r.p = index_from_json(require(j, "p", "record"), "p");
        r.replicates = index_from_json(require(j, "replicates", "record"), "replicates");
        r.failures = j.contains("failures") ? index_from_json(j.at("failures"), "failures") : 0;
        r.mean_risk = number_from_json(require(j, "mean_risk", "record"));
        r.std_error = number_from_json(require(j, "std_error", "record"));
        r.median_risk = j.contains("median_risk") ? number_from_json(j.at("median_risk")) : std::nan("");
        r.seed = seed_from_json(require(j, "seed", "record"));
        r.wall_time = j.contains("wall_time") ? number_from_json(j.at("wall_time")) : 0.0;
        return r;
    });
}

Json to_json(const RateFit& fit) {
    Json j{{"cells", fit.cells},
           {"slope", number_to_json(fit.slope)},
           {"intercept", number_to_json(fit.intercept)},
           {"r_squared", number_to_json(fit.r_squared)}};
    j["target_exponent"] = fit.target_exponent ? number_to_json(*fit.target_exponent) : Json(nullptr);
    return j;
}

Json to_json(const GroupFit& g) {
    Json j{{"truth", g.truth}, {"estimator", to_json(g.estimator)}, {"loss", to_json(g.loss)}};
    if (g.fit) {
        j["fit"] = to_json(*g.fit);
        j["slope"] = number_to_json(g.fit->slope);
    } else {
        j["fit"] = nullptr;
        j["slope"] = nullptr;
        j["error"] = g.error;
    }
    return j;
}

Json to_json(const AlphaResult& alpha) {
    Json j{{"bound", number_to_json(alpha.bound)}};
    j["exact"] = alpha.exact ? number_to_json(*alpha.exact) : Json(nullptr);
    j["pair_count"] = alpha.pair_count;
    j["budget_exceeded"] = alpha.budget_exceeded;
    return j;
}

Json to_json(const EnvelopeReport& env) {
    Json j;
    j["value"] = env.value ? number_to_json(*env.value) : Json(nullptr);
    j["ratio"] = number_to_json(env.ratio);
    j["divergent"] = env.divergent;
    j["truncated_at_cap"] = env.truncated_at_cap;
    j["terms"] = env.terms;
    j["target"] = number_to_json(env.target);
    j["below_target"] = env.below_target;
    return j;
}

Json to_json(const AffinityEstimate& est) {
    return Json{{"value", number_to_json(est.value)},
                {"std_error", number_to_json(est.std_error)},
                {"samples", est.samples},
                {"seed", to_json(est.seed)}};
}

GridConfig grid_from_json(const Json& j, const std::string& base_dir) {
    return wrap_json_errors("grid", [&] {
        if (!j.is_object()) throw InputError("grid: expected a JSON object");
        GridConfig g;
        if (j.contains("truths")) {
            for (const auto& t : j.at("truths")) g.truths.push_back(truth_from_json(t, base_dir));
        } else if (j.contains("truth")) {
            g.truths.push_back(truth_from_json(j.at("truth"), base_dir));
        }
        if (j.contains("n")) g.n = indices_from_json(j.at("n"), "n");
        if (j.contains("p")) g.p = indices_from_json(j.at("p"), "p");
        if (j.contains("pairing")) {
            const auto s = j.at("pairing").get<std::string>();
            if (s == "zip") g.pairing = Pairing::zip;
            else if (s == "product") g.pairing = Pairing::product;
            else throw InputError("grid: pairing must be 'zip' or 'product'");
        }
        if (j.contains("estimators")) {
            for (const auto& e : j.at("estimators")) g.estimators.push_back(estimator_from_json(e));
        }
        if (j.contains("losses")) {
            for (const auto& l : j.at("losses")) g.losses.push_back(loss_from_json(l));
        }
        if (j.contains("replicates")) g.replicates = index_from_json(j.at("replicates"), "replicates");
        if (j.contains("seed")) g.seed = j.at("seed").get<std::uint64_t>();
        return g;
    });
}

}  // namespace covthresh
