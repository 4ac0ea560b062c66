#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "covthresh_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(COVTHRESH_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

void write(const std::string& name, const std::string& text) {
    std::ofstream out(path(name), std::ios::binary);
    out << text;
}

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

nlohmann::json load_json(const std::string& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

const char* kGrid = R"({"truth": {"kind": "banded", "bandwidth": 2, "block": 3, "value": 0.5},
 "n": [50, 100, 200, 400], "p": [20, 40, 40, 80], "pairing": "zip",
 "estimators": ["hard"], "losses": ["op2"], "replicates": 8, "seed": 17})";

}  // namespace

TEST_CASE("estimate") {
    write("id.csv", "1,0,0\n0,1,0\n0,0,1\n");
    REQUIRE(run("estimate --input " + path("id.csv") + " --covariance --n 100 --output " + path("id_out.csv")) == 0);
    CHECK(slurp(path("id_out.csv")) == "1,0,0\n0,1,0\n0,0,1\n");
    const auto manifest = load_json(path("id_out.csv") + ".manifest.json");
    CHECK(manifest["command"] == "estimate");
    CHECK(manifest.contains("version"));
    CHECK(manifest.contains("start"));
    CHECK(manifest.contains("end"));
    CHECK(manifest["outputs"].size() == 1);

    write("bad.csv", "1,2\n3,x\n");
    CHECK(run("estimate --input " + path("bad.csv") + " --output " + path("bad_out.csv")) == 2);
    CHECK(run("estimate --input " + path("missing.csv") + " --output " + path("m.csv")) == 2);
    CHECK(run("estimate --input " + path("id.csv") + " --covariance") == 2);
    CHECK(run("estimate --input " + path("id.csv") + " --rule bogus") == 2);

    write("indef.csv", "1,0.9,0.9\n0.9,1,-0.9\n0.9,-0.9,1\n");
    REQUIRE(run("estimate --input " + path("indef.csv") + " --covariance --n 1000 --psd-project --output " +
                path("psd.csv")) == 0);
    std::ifstream in(path("psd.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);

    write("data.csv", "1,2\n2,1\n0,0\n1,1\n");
    CHECK(run("estimate --input " + path("data.csv") + " --output " + path("data_out.csv")) == 0);
}

TEST_CASE("simulate") {
    write("grid.json", kGrid);
    REQUIRE(run("simulate --config " + path("grid.json") + " --out " + path("sim1")) == 0);
    REQUIRE(run("simulate --config " + path("grid.json") + " --out " + path("sim2") + " --threads 4") == 0);
    const std::string csv1 = slurp(path("sim1/risk.csv"));
    CHECK(!csv1.empty());
    CHECK(csv1 == slurp(path("sim2/risk.csv")));
    CHECK(slurp(path("sim1/risk.json")) == slurp(path("sim2/risk.json")));
    CHECK(slurp(path("sim1/rate_fit.json")) == slurp(path("sim2/rate_fit.json")));

    const auto fits = load_json(path("sim1/rate_fit.json"));
    REQUIRE(fits["groups"].size() == 1);
    CHECK(fits["groups"][0]["slope"].is_number());
    CHECK(fs::exists(path("sim1/rate_points.csv")));
    const auto manifest = load_json(path("sim1/manifest.json"));
    CHECK(manifest["command"] == "simulate");
    CHECK(manifest["seed"] == 17);

    // Seed override changes the numbers.
    REQUIRE(run("simulate --config " + path("grid.json") + " --out " + path("sim3") + " --seed 18") == 0);
    CHECK(slurp(path("sim3/risk.csv")) != csv1);

    // Loss override; several losses give one CSV per loss.
    REQUIRE(run("simulate --config " + path("grid.json") + " --out " + path("sim4") + " --loss fro --normalized") == 0);
    CHECK(slurp(path("sim4/risk.csv")).find("frobenius-squared/p") != std::string::npos);
    write("grid2.json", R"({"truth": {"kind": "banded", "bandwidth": 1, "value": 0.3},
        "n": [40], "p": [10], "estimators": ["hard"], "losses": ["op2", "stein"], "replicates": 4})");
    REQUIRE(run("simulate --config " + path("grid2.json") + " --out " + path("sim5")) == 0);
    CHECK(fs::exists(path("sim5/risk_op2.csv")));
    CHECK(fs::exists(path("sim5/risk_stein.csv")));

    write("empty.json", R"({"n": [], "p": []})");
    CHECK(run("simulate --config " + path("empty.json") + " --out " + path("sim_empty")) == 2);
    write("broken.json", "{ not json");
    CHECK(run("simulate --config " + path("broken.json") + " --out " + path("sim_broken")) == 2);

    // An indefinite explicit truth cannot be sampled: domain error.
    write("indef_truth.csv", "1,0.9,0.9\n0.9,1,-0.9\n0.9,-0.9,1\n");
    write("grid3.json", R"({"truth": {"kind": "explicit", "path": "indef_truth.csv"},
        "n": [40], "p": [3], "estimators": ["hard"], "losses": ["op2"], "replicates": 4})");
    CHECK(run("simulate --config " + path("grid3.json") + " --out " + path("sim6")) == 3);
}

TEST_CASE("lowerbound") {
    REQUIRE(run("lowerbound --p 8 --n 20 --q 0 --c 1 --upsilon 0.1 --output " + path("k0.json")) == 0);
    const auto k0 = load_json(path("k0.json"));
    CHECK(k0["config"]["k"] == 0);
    CHECK(k0["lower_bound"] == 0.0);

    write("tiny.json", R"({"p": 8, "n": 20, "q": 0, "c": 4, "upsilon": 0.1})");
    REQUIRE(run("lowerbound --config " + path("tiny.json") + " --samples 5000 --output " + path("tiny_out.json")) ==
            0);
    REQUIRE(run("lowerbound --config " + path("tiny.json") + " --samples 5000 --threads 3 --output " +
                path("tiny_out2.json")) == 0);
    CHECK(slurp(path("tiny_out.json")) == slurp(path("tiny_out2.json")));
    const auto tiny = load_json(path("tiny_out.json"));
    CHECK(tiny["config"]["k"] == 1);
    CHECK(tiny["config"]["r"] == 4);
    CHECK(tiny["chi_square_exact"].is_number());
    CHECK(tiny["alpha_exact"].is_number());
    // p/4 - 1 - k = 0 here: the envelope series diverges and is reported as such.
    CHECK(tiny["divergent"] == true);
    CHECK(tiny["chi_square_envelope"].is_null());
    CHECK(tiny["affinity_estimate"]["value"].get<double>() > 0.0);
    CHECK(tiny.contains("rate_target"));
    CHECK(fs::exists(path("tiny_out.json") + ".manifest.json"));

    // A convergent envelope at a larger p, exact part over budget.
    CHECK(run("lowerbound --p 40 --n 20 --q 0 --c 4 --upsilon 0.1 --budget 1000 --output " + path("big.json")) == 4);
    CHECK(run("lowerbound --p 8 --n 20 --q 0 --c 4 --output " + path("missing_upsilon.json")) == 2);
    CHECK(run("lowerbound --p 8 --n 20 --q 1.5 --c 4 --upsilon 0.1 --output " + path("bad_q.json")) == 2);
}
