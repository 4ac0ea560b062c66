#include "covthresh/risk.hpp"

#include "covthresh/csv.hpp"
#include "covthresh/errors.hpp"
#include "covthresh/model_spaces.hpp"
#include "covthresh/parallel.hpp"
#include "covthresh/sampling.hpp"
#include "covthresh/serialization.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace covthresh {

namespace {

std::string short_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return ec == std::errc() ? std::string(buf, ptr) : csv::format_double(x);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Combo {
    EstimatorSpec estimator;
    LossSpec loss;
};

struct Summary {
    Index failures = 0;
    double mean = 0.0;
    double std_error = 0.0;
    double median = 0.0;
};

Summary summarize(const std::vector<double>& values, Index replicates, const std::string& context) {
    Summary s;
    std::vector<double> ok;
    ok.reserve(values.size());
    for (double v : values) {
        if (std::isnan(v)) ++s.failures;
        else ok.push_back(v);
    }
    if (s.failures * 100 > replicates) {
        throw DomainError(context + ": " + std::to_string(s.failures) + " of " + std::to_string(replicates) +
                          " replicates failed (limit 1%)");
    }
    const double m = static_cast<double>(ok.size());
    double sum = 0.0;
    for (double v : ok) sum += v;
    s.mean = sum / m;
    if (ok.size() > 1) {
        double ss = 0.0;
        for (double v : ok) ss += (v - s.mean) * (v - s.mean);
        s.std_error = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
    }
    std::vector<double> sorted = ok;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    s.median = sorted.size() % 2 == 1 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    return s;
}

// Loss of every combo on every replicate; NaN marks a domain failure.
std::vector<std::vector<double>> evaluate_cell(const SymmetricMatrix& truth, const std::vector<Combo>& combos,
                                               Index n, Index replicates, RngSeed seed, unsigned threads) {
    const GaussianSampler sampler(truth);
    std::vector<std::vector<double>> losses(combos.size(),
                                            std::vector<double>(static_cast<std::size_t>(replicates)));
    parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t r) {
        const SymmetricMatrix star = mle_covariance(sampler.draw(n, seed.child(r)));
        for (std::size_t c = 0; c < combos.size(); ++c) {
            double value;
            try {
                value = normalized_loss(apply_estimator(star, combos[c].estimator, n), truth, combos[c].loss);
            } catch (const DomainError&) {
                value = std::nan("");
            }
            losses[c][r] = value;
        }
    });
    return losses;
}

std::string w_or_phi(const LossSpec& loss) {
    switch (loss.kind) {
        case LossKind::operator_norm:
            return loss.w == kInfNorm ? "inf" : short_double(loss.w);
        case LossKind::frobenius_squared:
            return "";
        case LossKind::bregman:
            return loss.phi == PhiKind::custom && loss.custom ? loss.custom->name : to_string(loss.phi);
    }
    return "";
}

LossSpec loss_from_columns(const std::string& kind_field, const std::string& w_field) {
    std::string kind = kind_field;
    bool normalized = false;
    if (kind.size() > 2 && kind.compare(kind.size() - 2, 2, "/p") == 0) {
        normalized = true;
        kind.resize(kind.size() - 2);
    }
    LossSpec loss;
    if (kind == "operator") {
        loss = LossSpec::op(w_field == "inf" ? kInfNorm : csv::parse_double(w_field));
    } else if (kind == "frobenius-squared") {
        loss = LossSpec::frobenius();
    } else if (kind == "bregman") {
        if (w_field == "stein") loss = LossSpec::bregman(PhiKind::stein);
        else if (w_field == "von-neumann") loss = LossSpec::bregman(PhiKind::von_neumann);
        else if (w_field == "squared-frobenius") loss = LossSpec::bregman(PhiKind::squared_frobenius);
        else throw ParseError("risk CSV: cannot rebuild phi '" + w_field + "'");
    } else {
        throw ParseError("risk CSV: unknown loss_kind '" + kind_field + "'");
    }
    loss.normalized = normalized;
    return loss;
}

std::uint64_t parse_u64(const std::string& field, const char* what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError(std::string("risk CSV: bad ") + what + " '" + field + "'");
    }
    return v;
}

const char* const kCsvHeader =
    "cell_id,n,p,q,c,rule,gamma,loss_kind,w_or_phi,replicates,mean_risk,std_error,seed,wall_time";

}  // namespace

// ---------------------------------------------------------------------------
// Truths
// ---------------------------------------------------------------------------

std::string TruthSpec::label() const {
    switch (kind) {
        case TruthKind::explicit_matrix:
            return "explicit(" + source + ")";
        case TruthKind::banded:
            return "banded(b=" + std::to_string(bandwidth) + ",v=" + short_double(value) +
                   (block > 0 ? ",block=" + std::to_string(block) : "") + ")";
        case TruthKind::polynomial_decay:
            return "polynomial(q=" + short_double(q) + ",s=" + short_double(scale) +
                   ",b=" + std::to_string(bandwidth) + ")";
        case TruthKind::family_member:
            return "family(q=" + short_double(q) + ",c=" + short_double(c) + ",u=" + short_double(upsilon) + ")";
    }
    return "?";
}

SymmetricMatrix TruthSpec::build(Index p, Index n, RngSeed seed) const {
    if (p < 1) throw InputError("TruthSpec: p must be >= 1");
    switch (kind) {
        case TruthKind::explicit_matrix: {
            if (!matrix) throw InputError("TruthSpec: explicit truth without a matrix");
            if (matrix->dim() != p) {
                throw InputError("TruthSpec: explicit truth has dimension " + std::to_string(matrix->dim()) +
                                 ", grid asks for p = " + std::to_string(p));
            }
            return *matrix;
        }
        case TruthKind::banded: {
            if (bandwidth < 0) throw InputError("TruthSpec: bandwidth must be >= 0");
            if (block < 0) throw InputError("TruthSpec: block must be >= 0");
            Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p);
            for (Index i = 0; i < p; ++i) {
                for (Index j = i + 1; j < p && j - i <= bandwidth; ++j) {
                    if (block > 0 && i / block != j / block) continue;
                    m(i, j) = m(j, i) = value;
                }
            }
            return SymmetricMatrix::from_lower(std::move(m));
        }
        case TruthKind::polynomial_decay: {
            if (!(q > 0.0 && q < 1.0)) throw InputError("TruthSpec: polynomial decay needs q in (0, 1)");
            if (bandwidth < 0) throw InputError("TruthSpec: bandwidth must be >= 0");
            constexpr double kGolden = 0.6180339887498949;
            Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p);
            for (Index i = 0; i < p; ++i) {
                const double u = std::fmod(static_cast<double>(i + 1) * kGolden, 1.0);
                for (Index j = i + 1; j < p && j - i <= bandwidth; ++j) {
                    m(i, j) = m(j, i) = scale * std::pow(static_cast<double>(j - i) + u, -1.0 / q);
                }
            }
            return SymmetricMatrix::from_lower(std::move(m));
        }
        case TruthKind::family_member: {
            const LeastFavorableConfig cfg = build_config(p, n, q, c, upsilon);
            return materialize_sigma(cfg, sample_theta(cfg, seed));
        }
    }
    throw InputError("TruthSpec: unknown kind");
}

std::pair<double, double> TruthSpec::sparsity_class(const SymmetricMatrix& built) const {
    if (kind == TruthKind::family_member) return {q, c};
    // Each distance d contributes at most two entries of size <= scale d^{-1/q}
    // to a column, so k |x|_(k)^q <= 2 scale^q for every p.
    if (kind == TruthKind::polynomial_decay) return {q, 2.0 * std::pow(scale, q)};
    const Membership m = class_membership(built, SparsityClassSpec{0.0, 1e300, SparsityKind::weak});
    return {0.0, m.max_column_radius};
}

// ---------------------------------------------------------------------------
// Cells and grids
// ---------------------------------------------------------------------------

RiskRecord run_risk_cell(const SymmetricMatrix& truth, const EstimatorSpec& est, const LossSpec& loss, Index n,
                         Index replicates, RngSeed seed, unsigned threads) {
    if (replicates < 1) throw InputError("run_risk_cell: replicates must be >= 1");
    if (n < 2) throw InputError("run_risk_cell: n must be >= 2");
    est.validate();
    loss.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto losses = evaluate_cell(truth, {Combo{est, loss}}, n, replicates, seed, threads);
    const Summary s = summarize(losses[0], replicates, "run_risk_cell");
    RiskRecord rec;
    rec.truth = "explicit";
    const Membership m = class_membership(truth, SparsityClassSpec{0.0, 1e300, SparsityKind::weak});
    rec.c = m.max_column_radius;
    rec.estimator = est;
    rec.loss = loss;
    rec.n = n;
    rec.p = truth.dim();
    rec.replicates = replicates;
    rec.failures = s.failures;
    rec.mean_risk = s.mean;
    rec.std_error = s.std_error;
    rec.median_risk = s.median;
    rec.seed = seed;
    rec.wall_time = seconds_since(start);
    return rec;
}

void GridConfig::validate() const {
    if (truths.empty()) throw InputError("grid: no truth matrices");
    if (n.empty() || p.empty()) throw InputError("grid: n and p must be non-empty");
    if (pairing == Pairing::zip && n.size() != p.size()) {
        throw InputError("grid: zip pairing needs n and p of equal length");
    }
    if (estimators.empty()) throw InputError("grid: no estimators");
    if (losses.empty()) throw InputError("grid: no losses");
    if (replicates < 1) throw InputError("grid: replicates must be >= 1");
    for (Index v : n) {
        if (v < 2) throw InputError("grid: every n must be >= 2");
    }
    for (Index v : p) {
        if (v < 2) throw InputError("grid: every p must be >= 2");
    }
    for (const auto& e : estimators) e.validate();
    for (const auto& l : losses) l.validate();
}

std::vector<RiskRecord> run_grid(const GridConfig& grid, unsigned threads) {
    grid.validate();
    std::vector<std::pair<Index, Index>> sizes;
    if (grid.pairing == Pairing::zip) {
        for (std::size_t i = 0; i < grid.n.size(); ++i) sizes.emplace_back(grid.n[i], grid.p[i]);
    } else {
        for (Index n : grid.n) {
            for (Index p : grid.p) sizes.emplace_back(n, p);
        }
    }
    std::vector<Combo> combos;
    for (const auto& e : grid.estimators) {
        for (const auto& l : grid.losses) {
            Combo c{e, l};
            if (l.kind == LossKind::bregman && (l.phi == PhiKind::stein || l.phi == PhiKind::von_neumann)) {
                c.estimator.bregman_guard = true;
            }
            combos.push_back(std::move(c));
        }
    }
    const RngSeed master{grid.seed, 0};
    const RngSeed truth_master{grid.seed, 1};
    std::vector<RiskRecord> out;
    std::uint64_t cell = 0;
    for (const auto& truth_spec : grid.truths) {
        for (const auto& [n, p] : sizes) {
            const auto start = std::chrono::steady_clock::now();
            const RngSeed cell_seed = master.child(cell);
            const SymmetricMatrix truth = truth_spec.build(p, n, truth_master.child(cell));
            const auto [q, c] = truth_spec.sparsity_class(truth);
            const auto losses = evaluate_cell(truth, combos, n, grid.replicates, cell_seed, threads);
            const double per_record = seconds_since(start) / static_cast<double>(combos.size());
            for (std::size_t k = 0; k < combos.size(); ++k) {
                std::ostringstream ctx;
                ctx << "cell " << out.size() << " (" << truth_spec.label() << ", n=" << n << ", p=" << p << ", "
                    << combos[k].estimator.label() << ", " << combos[k].loss.short_name() << ")";
                const Summary s = summarize(losses[k], grid.replicates, ctx.str());
                RiskRecord rec;
                rec.cell_id = out.size();
                rec.truth = truth_spec.label();
                rec.q = q;
                rec.c = c;
                rec.estimator = combos[k].estimator;
                rec.loss = combos[k].loss;
                rec.n = n;
                rec.p = p;
                rec.replicates = grid.replicates;
                rec.failures = s.failures;
                rec.mean_risk = s.mean;
                rec.std_error = s.std_error;
                rec.median_risk = s.median;
                rec.seed = cell_seed;
                rec.wall_time = per_record;
                out.push_back(std::move(rec));
            }
            ++cell;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rate fits
// ---------------------------------------------------------------------------

RateFit rate_fit(const std::vector<RiskRecord>& records) {
    if (records.size() < 3) {
        throw InputError("rate_fit: needs >= 3 cells, got " + std::to_string(records.size()));
    }
    const RiskRecord& first = records.front();
    std::vector<double> x, y;
    RateFit fit;
    for (const auto& r : records) {
        if (r.q != first.q || r.c != first.c || !(r.estimator == first.estimator) || !(r.loss == first.loss)) {
            throw InputError("rate_fit: records must share q, c, estimator and loss");
        }
        if (!(r.mean_risk > 0.0)) throw InputError("rate_fit: mean_risk must be positive");
        if (r.p < 2) throw InputError("rate_fit: p must be >= 2");
        x.push_back(std::log(std::log(static_cast<double>(r.p)) / static_cast<double>(r.n)));
        y.push_back(std::log(r.mean_risk));
        fit.cells.push_back(r.cell_id);
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (*hi - *lo < std::log(4.0)) {
        throw InputError("rate_fit: ill-conditioned fit, log p / n spans a factor below 4");
    }
    const double m = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - fit.intercept - fit.slope * x[i];
        ss_res += e * e;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    if (first.loss.kind == LossKind::operator_norm) {
        fit.target_exponent = 1.0 - first.q;
    } else if (first.loss.normalized) {
        fit.target_exponent = 1.0 - first.q / 2.0;
    }
    return fit;
}

std::vector<GroupFit> rate_fits_by_group(const std::vector<RiskRecord>& records) {
    std::vector<GroupFit> groups;
    std::vector<std::vector<RiskRecord>> members;
    for (const auto& r : records) {
        std::size_t g = 0;
        for (; g < groups.size(); ++g) {
            const RiskRecord& head = members[g].front();
            if (head.truth == r.truth && head.q == r.q && head.c == r.c && head.estimator == r.estimator &&
                head.loss == r.loss) {
                break;
            }
        }
        if (g == groups.size()) {
            groups.push_back(GroupFit{r.truth, r.estimator, r.loss, std::nullopt, ""});
            members.emplace_back();
        }
        members[g].push_back(r);
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        try {
            groups[g].fit = rate_fit(members[g]);
        } catch (const InputError& e) {
            groups[g].error = e.what();
        }
    }
    return groups;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

std::string to_csv(const std::vector<RiskRecord>& records, bool with_timing) {
    for (const auto& r : records) {
        if (!(r.loss == records.front().loss)) {
            throw InputError("export_csv: records mix loss specs; CSV holds a single loss schema");
        }
    }
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
        out << r.cell_id << ',' << r.n << ',' << r.p << ',' << csv::format_double(r.q) << ','
            << csv::format_double(r.c) << ',' << r.estimator.label() << ',' << csv::format_double(r.estimator.gamma)
            << ',' << to_string(r.loss.kind) << (r.loss.normalized ? "/p" : "") << ',' << w_or_phi(r.loss) << ','
            << r.replicates << ',' << csv::format_double(r.mean_risk) << ',' << csv::format_double(r.std_error)
            << ',' << r.seed.seed << ':' << r.seed.stream << ','
            << (with_timing ? csv::format_double(r.wall_time) : "") << '\n';
    }
    return out.str();
}

void export_csv(const std::vector<RiskRecord>& records, const std::string& path, bool with_timing) {
    const std::string text = to_csv(records, with_timing);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("export_csv: cannot write '" + path + "'");
    out << text;
    if (!out) throw InputError("export_csv: write to '" + path + "' failed");
}

std::vector<RiskRecord> import_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("import_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("import_csv: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ParseError("import_csv: unexpected header '" + line + "'");
    std::vector<RiskRecord> out;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split_line(line);
        if (f.size() != 14) throw ParseError("import_csv: expected 14 fields, got " + std::to_string(f.size()));
        RiskRecord r;
        r.cell_id = parse_u64(f[0], "cell_id");
        r.n = static_cast<Index>(parse_u64(f[1], "n"));
        r.p = static_cast<Index>(parse_u64(f[2], "p"));
        r.q = csv::parse_double(f[3]);
        r.c = csv::parse_double(f[4]);
        r.estimator = estimator_from_label(f[5], csv::parse_double(f[6]));
        r.loss = loss_from_columns(f[7], f[8]);
        r.replicates = static_cast<Index>(parse_u64(f[9], "replicates"));
        r.mean_risk = csv::parse_double(f[10]);
        r.std_error = csv::parse_double(f[11]);
        const auto colon = f[12].find(':');
        if (colon == std::string::npos) throw ParseError("import_csv: seed must be seed:stream");
        r.seed.seed = parse_u64(f[12].substr(0, colon), "seed");
        r.seed.stream = parse_u64(f[12].substr(colon + 1), "stream");
        r.wall_time = f[13].empty() ? 0.0 : csv::parse_double(f[13]);
        r.median_risk = std::nan("");
        out.push_back(std::move(r));
    }
    return out;
}

void export_json(const std::vector<RiskRecord>& records, const std::string& path) {
    Json arr = Json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("export_json: cannot write '" + path + "'");
    out << arr.dump(2) << '\n';
    if (!out) throw InputError("export_json: write to '" + path + "' failed");
}

std::vector<RiskRecord> import_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("import_json: cannot open '" + path + "'");
    Json arr;
    try {
        arr = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("import_json: ") + e.what());
    }
    if (!arr.is_array()) throw ParseError("import_json: expected an array of records");
    std::vector<RiskRecord> out;
    for (const auto& j : arr) out.push_back(record_from_json(j));
    return out;
}

}  // namespace covthresh
