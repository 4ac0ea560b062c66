// covthresh: thresholding estimates, risk simulations and lower-bound reports.
//
// Exit codes: 0 success, 2 input error, 3 domain error, 4 budget exceeded.

#include "covthresh/csv.hpp"
#include "covthresh/errors.hpp"
#include "covthresh/estimators.hpp"
#include "covthresh/lower_bound.hpp"
#include "covthresh/losses.hpp"
#include "covthresh/matrix.hpp"
#include "covthresh/model_spaces.hpp"
#include "covthresh/risk.hpp"
#include "covthresh/sampling.hpp"
#include "covthresh/serialization.hpp"
#include "covthresh/version.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace covthresh;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitDomain = 3;
constexpr int kExitBudget = 4;

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw InputError("write to '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
}

fs::path ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory '" + dir + "'");
    return fs::path(dir);
}

struct Manifest {
    std::string command;
    Json arguments = Json::object();
    std::vector<std::string> argv;
    std::uint64_t seed = 0;
    std::string start = utc_timestamp();
    std::vector<std::string> outputs;
    Json extra = Json::object();

    void write(const fs::path& path) const {
        Json j{{"command", command},
               {"arguments", arguments},
               {"argv", argv},
               {"version", kVersion},
               {"seed", seed},
               {"start", start},
               {"end", utc_timestamp()},
               {"outputs", outputs}};
        for (const auto& [k, v] : extra.items()) j[k] = v;
        write_json(path, j);
    }
};

// ---------------------------------------------------------------------------
// Shared estimator flags
// ---------------------------------------------------------------------------

struct EstimatorFlags {
    std::string rule = "hard";
    double gamma = 2.0;
    double eta = 3.0;
    bool psd_project = false;
    bool bregman_guard = false;
    bool keep_diagonal = false;

    void attach(CLI::App* app) {
        app->add_option("--rule", rule, "Threshold rule")->check(CLI::IsMember({"hard", "soft", "alasso"}));
        app->add_option("--gamma", gamma, "Threshold constant, t = gamma sqrt(log p / n)");
        app->add_option("--eta", eta, "Adaptive-lasso exponent");
        app->add_flag("--psd-project", psd_project, "Project the estimate onto the PSD cone");
        app->add_flag("--bregman-guard", bregman_guard, "Fall back to I_p outside the eigenvalue window");
        app->add_flag("--keep-diagonal", keep_diagonal, "Leave the diagonal unthresholded");
    }

    EstimatorSpec spec() const {
        EstimatorSpec s;
        s.rule = rule_from_string(rule);
        s.gamma = gamma;
        s.eta = eta;
        s.psd_project = psd_project;
        s.bregman_guard = bregman_guard;
        s.keep_diagonal = keep_diagonal;
        s.validate();
        return s;
    }
};

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateArgs {
    std::string input;
    std::string output;
    std::string out_dir = ".";
    bool covariance = false;
    std::optional<long long> n;
    EstimatorFlags est;
};

int cmd_estimate(const EstimateArgs& a, const std::vector<std::string>& argv) {
    Manifest m;
    m.command = "estimate";
    m.argv = argv;
    const EstimatorSpec spec = a.est.spec();
    SymmetricMatrix star = SymmetricMatrix::identity(1);
    Index n = 0;
    if (a.covariance) {
        if (!a.n) throw InputError("--covariance needs --n, the sample size behind the matrix");
        if (*a.n < 1) throw InputError("--n must be >= 1");
        star = load_symmetric_csv(a.input);
        n = static_cast<Index>(*a.n);
    } else {
        const DataMatrix x = load_data_csv(a.input);
        n = x.n();
        star = mle_covariance(x);
    }
    const SymmetricMatrix hat = apply_estimator(star, spec, n);
    const fs::path out = a.output.empty() ? ensure_dir(a.out_dir) / "estimate.csv" : fs::path(a.output);
    save_symmetric_csv(hat, out.string());
    m.arguments = Json{{"input", a.input},
                       {"covariance", a.covariance},
                       {"n", n},
                       {"p", star.dim()},
                       {"threshold", threshold_level(spec.gamma, star.dim(), n)},
                       {"estimator", to_json(spec)},
                       {"output", out.string()}};
    m.outputs = {out.string()};
    m.write(fs::path(out.string() + ".manifest.json"));
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::optional<std::string> loss;
    bool normalized = false;
    bool timing = false;
    EstimatorFlags est;
    bool estimator_override = false;
};

std::string loss_file_tag(const LossSpec& loss) {
    return loss.short_name() + (loss.normalized && loss.kind != LossKind::operator_norm ? "-normalized" : "");
}

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
    Manifest m;
    m.command = "simulate";
    m.argv = argv;
    const fs::path config_path(a.config);
    GridConfig grid = grid_from_json(read_json_file(a.config), config_path.parent_path().string());
    if (a.seed) grid.seed = *a.seed;
    if (a.loss) grid.losses = {loss_from_name(*a.loss, a.normalized)};
    if (a.estimator_override) grid.estimators = {a.est.spec()};
    grid.validate();
    if (a.threads < 1) throw InputError("--threads must be >= 1");
    m.seed = grid.seed;

    const auto start = std::chrono::steady_clock::now();
    const auto records = run_grid(grid, a.threads);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const fs::path dir = ensure_dir(a.out_dir);
    std::vector<LossSpec> losses;
    for (const auto& r : records) {
        if (std::find(losses.begin(), losses.end(), r.loss) == losses.end()) losses.push_back(r.loss);
    }
    for (const auto& loss : losses) {
        std::vector<RiskRecord> subset;
        for (const auto& r : records) {
            if (r.loss == loss) subset.push_back(r);
        }
        const fs::path path = losses.size() == 1 ? dir / "risk.csv" : dir / ("risk_" + loss_file_tag(loss) + ".csv");
        export_csv(subset, path.string(), a.timing);
        m.outputs.push_back(path.string());
    }

    Json recs = Json::array();
    Json timings = Json::array();
    for (const auto& r : records) {
        Json j = to_json(r);
        if (!a.timing) j.erase("wall_time");
        recs.push_back(std::move(j));
        timings.push_back(Json{{"cell_id", r.cell_id}, {"wall_time", r.wall_time}});
    }
    write_json(dir / "risk.json", recs);
    m.outputs.push_back((dir / "risk.json").string());

    Json fits = Json::array();
    std::string points = "group,cell_id,x,y,y_err\n";
    const auto groups = rate_fits_by_group(records);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        fits.push_back(to_json(groups[g]));
        for (const auto& r : records) {
            if (r.truth != groups[g].truth || !(r.estimator == groups[g].estimator) || !(r.loss == groups[g].loss)) {
                continue;
            }
            const double x = std::log(std::log(static_cast<double>(r.p)) / static_cast<double>(r.n));
            points += std::to_string(g) + "," + std::to_string(r.cell_id) + "," + csv::format_double(x) + "," +
                      csv::format_double(std::log(r.mean_risk)) + "," +
                      csv::format_double(r.std_error / r.mean_risk) + "\n";
        }
    }
    write_json(dir / "rate_fit.json", Json{{"regressor", "log(log p / n)"}, {"groups", fits}});
    m.outputs.push_back((dir / "rate_fit.json").string());
    write_text(dir / "rate_points.csv", points);
    m.outputs.push_back((dir / "rate_points.csv").string());

    Json estimators = Json::array();
    for (const auto& e : grid.estimators) estimators.push_back(to_json(e));
    Json loss_json = Json::array();
    for (const auto& l : grid.losses) loss_json.push_back(to_json(l));
    Json truths = Json::array();
    for (const auto& t : grid.truths) truths.push_back(to_json(t));
    m.arguments = Json{{"config", a.config},
                       {"out", a.out_dir},
                       {"threads", a.threads},
                       {"timing", a.timing},
                       {"grid",
                        {{"truths", truths},
                         {"n", grid.n},
                         {"p", grid.p},
                         {"pairing", grid.pairing == Pairing::zip ? "zip" : "product"},
                         {"estimators", estimators},
                         {"losses", loss_json},
                         {"replicates", grid.replicates},
                         {"seed", grid.seed}}}};
    m.extra["wall_time"] = elapsed;
    m.extra["cell_wall_times"] = timings;
    m.outputs.push_back((dir / "manifest.json").string());
    m.write(dir / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// lowerbound
// ---------------------------------------------------------------------------

struct LowerBoundArgs {
    std::string config;
    std::string out_dir = ".";
    std::string output;
    std::optional<long long> p, n;
    std::optional<double> q, c, upsilon, condc_m;
    std::uint64_t seed = 0;
    std::uint64_t budget = 1'000'000;
    std::uint64_t samples = 100'000;
    unsigned threads = 1;
};

int cmd_lowerbound(const LowerBoundArgs& a, const std::vector<std::string>& argv) {
    Manifest m;
    m.command = "lowerbound";
    m.argv = argv;
    m.seed = a.seed;
    Json in = Json::object();
    if (!a.config.empty()) in = read_json_file(a.config);
    if (!in.is_object()) throw InputError("lowerbound config must be a JSON object");
    auto pick_index = [&](const std::optional<long long>& flag, const char* key) -> Index {
        if (flag) return static_cast<Index>(*flag);
        if (!in.contains(key)) throw InputError(std::string("lowerbound: missing '") + key + "'");
        if (!in.at(key).is_number_integer()) throw InputError(std::string("lowerbound: '") + key + "' must be an integer");
        return static_cast<Index>(in.at(key).get<long long>());
    };
    auto pick_real = [&](const std::optional<double>& flag, const char* key) -> double {
        if (flag) return *flag;
        if (!in.contains(key)) throw InputError(std::string("lowerbound: missing '") + key + "'");
        return number_from_json(in.at(key));
    };
    const Index p = pick_index(a.p, "p");
    const Index n = pick_index(a.n, "n");
    const double q = pick_real(a.q, "q");
    const double c = pick_real(a.c, "c");
    const double upsilon = pick_real(a.upsilon, "upsilon");
    std::optional<double> condc_m = a.condc_m;
    if (!condc_m && in.contains("M")) condc_m = number_from_json(in.at("M"));
    if (a.threads < 1) throw InputError("--threads must be >= 1");

    const LeastFavorableConfig cfg = build_config(p, n, q, c, upsilon, condc_m);
    const AlphaResult alpha = per_comparison_alpha(cfg, a.budget);
    const EnvelopeReport envelope = chi_square_mixture_bound(cfg);
    const double chi_exact = exact_chi_square_small(cfg, n, a.budget);

    AffinityEstimate affinity;
    if (cfg.k == 0) {
        // Both mixtures are the single law N(0, I): the affinity is exactly 1.
        affinity.value = 1.0;
        affinity.seed = {a.seed, 0};
    } else {
        const MixtureSpec off = gamma_mixture(cfg, 0, false, a.budget);
        const MixtureSpec on = gamma_mixture(cfg, 0, true, a.budget);
        affinity = tv_affinity_mc(off, on, a.samples, RngSeed{a.seed, 0}, a.threads);
    }
    const LowerBoundAssembly lb = assemble_lower_bound(cfg, std::clamp(affinity.value, 0.0, 1.0));

    Json report{{"config", to_json(cfg)},
                {"alpha_bound", number_to_json(alpha.bound)},
                {"alpha_exact", alpha.exact ? number_to_json(*alpha.exact) : Json(nullptr)},
                {"alpha", to_json(alpha)},
                {"chi_square_exact", number_to_json(chi_exact)},
                {"chi_square_envelope", envelope.value ? number_to_json(*envelope.value) : Json(nullptr)},
                {"envelope", to_json(envelope)},
                {"divergent", envelope.divergent},
                {"affinity_estimate", to_json(affinity)},
                {"affinity_floor", kAffinityFloor},
                {"lower_bound", number_to_json(lb.lower_bound)},
                {"rate_target", number_to_json(lb.rate_target)}};

    const fs::path out = a.output.empty() ? ensure_dir(a.out_dir) / "lowerbound.json" : fs::path(a.output);
    write_json(out, report);
    m.arguments = Json{{"config", a.config},
                       {"p", p},
                       {"n", n},
                       {"q", q},
                       {"c", c},
                       {"upsilon", upsilon},
                       {"budget", a.budget},
                       {"samples", a.samples},
                       {"threads", a.threads},
                       {"output", out.string()}};
    if (condc_m) m.arguments["M"] = *condc_m;
    m.outputs = {out.string()};
    m.write(fs::path(out.string() + ".manifest.json"));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thresholding covariance estimation: estimates, risk grids and lower bounds"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    const std::vector<std::string> args(argv, argv + argc);

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "Threshold a sample covariance");
    estimate->add_option("--input", est.input, "Data CSV (one observation per row) or covariance CSV")
        ->required();
    estimate->add_flag("--covariance", est.covariance, "Input is a covariance matrix");
    estimate->add_option("--n", est.n, "Sample size behind a --covariance input");
    estimate->add_option("--output", est.output, "Estimate CSV path (default <out>/estimate.csv)");
    estimate->add_option("--out", est.out_dir, "Output directory");
    est.est.attach(estimate);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a risk grid");
    simulate->add_option("--config", sim.config, "Grid configuration JSON")->required();
    simulate->add_option("--out", sim.out_dir, "Output directory");
    simulate->add_option("--seed", sim.seed, "Master seed (overrides the config)");
    simulate->add_option("--threads", sim.threads, "Worker threads");
    simulate->add_option("--loss", sim.loss, "Single loss replacing the config losses")
        ->check(CLI::IsMember({"op1", "op2", "opinf", "fro", "stein", "vn", "bregman-fro"}));
    simulate->add_flag("--normalized", sim.normalized, "Divide Frobenius and Bregman losses by p");
    simulate->add_flag("--timing", sim.timing, "Write wall times into the CSV and JSON records");
    sim.est.attach(simulate);

    LowerBoundArgs lba;
    auto* lower = app.add_subcommand("lowerbound", "Lower-bound report for a least-favorable configuration");
    lower->add_option("--config", lba.config, "JSON with p, n, q, c, upsilon and optional M");
    lower->add_option("--p", lba.p, "Dimension");
    lower->add_option("--n", lba.n, "Sample size");
    lower->add_option("--q", lba.q, "Sparsity exponent in [0, 1)");
    lower->add_option("--c", lba.c, "Class radius");
    lower->add_option("--upsilon", lba.upsilon, "Perturbation constant");
    lower->add_option("--M", lba.condc_m, "Constant of the radius condition");
    lower->add_option("--seed", lba.seed, "Seed for the affinity estimate");
    lower->add_option("--budget", lba.budget, "Enumeration budget");
    lower->add_option("--samples", lba.samples, "Affinity Monte Carlo samples");
    lower->add_option("--threads", lba.threads, "Worker threads");
    lower->add_option("--out", lba.out_dir, "Output directory");
    lower->add_option("--output", lba.output, "Report path (default <out>/lowerbound.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*estimate) return cmd_estimate(est, args);
        if (*simulate) {
            sim.estimator_override = simulate->count("--rule") + simulate->count("--gamma") + simulate->count("--eta") +
                                         simulate->count("--psd-project") + simulate->count("--bregman-guard") +
                                         simulate->count("--keep-diagonal") >
                                     0;
            return cmd_simulate(sim, args);
        }
        if (*lower) return cmd_lowerbound(lba, args);
    } catch (const BudgetError& e) {
        std::cerr << "budget exceeded: " << e.what() << " (count " << (e.exact() ? "" : ">= ") << e.count()
                  << ")\n";
        return kExitBudget;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
