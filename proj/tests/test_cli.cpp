#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsd_app.hpp"

namespace fs = std::filesystem;
using qsd::cli::run_cli;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("qsd_cli_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

nlohmann::json slurp_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

}  // namespace

TEST_CASE("validation failures exit with code 2 and name the field", "[cli]") {
    const auto r = cli({"simulate", "--model", "brownian", "--epsilon", "0", "--n-particles", "1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("N must be >= 2") != std::string::npos);

    const auto bad_model = cli({"simulate", "--model", "pearson"});
    CHECK(bad_model.code == 2);
    CHECK(bad_model.err.find("wright-fisher") != std::string::npos);  // catalog listed

    const auto bad_eps = cli({"spectral", "--model", "logistic-feller", "--epsilon", "0"});
    CHECK(bad_eps.code == 2);

    const auto bad_param = cli({"spectral", "--model", "brownian", "--param", "gamma=1"});
    CHECK(bad_param.code == 2);

    const auto no_sub = cli({});
    CHECK(no_sub.code == 2);
}

TEST_CASE("spectral writes density, grid file and lambda sidecar", "[cli]") {
    TempDir tmp;
    const auto out = tmp.file("brownian.csv");
    const auto r = cli({"spectral", "--model", "brownian", "--epsilon", "0", "--grid", "2000",
                        "--bins", "50", "--out", out});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("lambda=") != std::string::npos);

    const auto side = slurp_json(tmp.file("brownian.json"));
    CHECK(side.at("lambda").get<double>() ==
          Catch::Approx(std::numbers::pi * std::numbers::pi / 2.0).margin(1e-4));
    CHECK(side.at("model") == "brownian");
    CHECK(side.contains("residual"));
    CHECK(side.contains("wall_time_s"));

    const auto hist = qsd::io::read_density_csv(out);
    CHECK(hist.bins() == 50);
    CHECK(hist.total_mass == Catch::Approx(1.0).margin(1e-9));

    const auto grid_csv = slurp(tmp.file("brownian_grid.csv"));
    CHECK(grid_csv.rfind("grid,v,density", 0) == 0);
}

TEST_CASE("compare: identical files give tv=0 and exit 0, tight tolerance fails", "[cli]") {
    TempDir tmp;
    const auto a = tmp.file("a.csv");
    const auto b = tmp.file("b.csv");
    REQUIRE(cli({"spectral", "--model", "brownian", "--epsilon", "0", "--grid", "500", "--bins",
                 "40", "--out", a})
                .code == 0);
    REQUIRE(cli({"spectral", "--model", "constant-drift", "--param", "drift=1", "--epsilon", "0",
                 "--grid", "500", "--bins", "40", "--out", b})
                .code == 0);

    const auto same = cli({"compare", a, a, "--tol", "1e-12"});
    CHECK(same.code == 0);
    CHECK(same.out.find("tv=0 ") != std::string::npos);

    const auto diff = cli({"compare", a, b, "--tol", "0.001"});
    CHECK(diff.code == 1);
    CHECK(diff.out.find("exceeds tolerance") != std::string::npos);

    const auto loose = cli({"compare", a, b, "--tol", "0.9"});
    CHECK(loose.code == 0);

    const auto missing = cli({"compare", a, tmp.file("nope.csv")});
    CHECK(missing.code == 2);
}

TEST_CASE("check-hypotheses prints the JSON report", "[cli]") {
    const auto r = cli({"check-hypotheses", "--model", "wright-fisher"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    REQUIRE(j.at("hypotheses").size() == 3);
    for (const auto& e : j["hypotheses"]) CHECK(e.at("verdict") == "pass");
}

TEST_CASE("eps-sweep validates the sequence and prints the table", "[cli]") {
    const auto bad = cli({"eps-sweep", "--model", "logistic-feller", "--eps", "0.1,0.2", "--grid",
                          "2000"});
    CHECK(bad.code == 2);

    TempDir tmp;
    const auto out = tmp.file("sweep.json");
    const auto r = cli({"eps-sweep", "--model", "logistic-feller", "--eps", "0.2,0.1", "--grid",
                        "30000", "--out", out});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("epsilon lambda tv_to_next") != std::string::npos);
    const auto j = slurp_json(out);
    REQUIRE(j.at("entries").size() == 2);
    CHECK(j.at("entries")[0].at("lambda").get<double>() >
          j.at("entries")[1].at("lambda").get<double>());
    CHECK(j.at("tv_successive").size() == 1);

    const auto single = cli({"eps-sweep", "--model", "logistic-feller", "--eps", "0.1", "--grid",
                             "2000"});
    CHECK(single.code == 0);
    CHECK(single.out.find("-") != std::string::npos);  // no successor distance
}

TEST_CASE("simulate writes CSV + sidecar and is byte-identical across workers", "[cli]") {
    TempDir tmp;
    const auto base = std::vector<std::string>{
        "simulate", "--model", "wright-fisher", "--epsilon", "0.01",   "--n-particles", "80",
        "--dt",     "1e-3",    "--burn-in",     "2",         "--epochs", "20",          "--seed",
        "11",       "--bins",  "30"};

    auto w1 = base;
    w1.insert(w1.end(), {"--workers", "1", "--out", tmp.file("w1.csv")});
    auto w8 = base;
    w8.insert(w8.end(), {"--workers", "8", "--out", tmp.file("w8.csv")});
    REQUIRE(cli(w1).code == 0);
    REQUIRE(cli(w8).code == 0);
    CHECK(slurp(tmp.file("w1.csv")) == slurp(tmp.file("w8.csv")));
    CHECK(slurp(tmp.file("w1_z.csv")) == slurp(tmp.file("w8_z.csv")));  // pushed-back coordinates

    const auto side = slurp_json(tmp.file("w1.json"));
    CHECK(side.at("model") == "wright-fisher");
    CHECK(side.at("epsilon").get<double>() == 0.01);
    CHECK(side.at("n_particles").get<int>() == 80);
    CHECK(side.at("seed").get<int>() == 11);
    CHECK(side.contains("jump_count"));
    CHECK(side.contains("wall_time_s"));
}

TEST_CASE("simulate honors the finite-time mode", "[cli]") {
    TempDir tmp;
    const auto out = tmp.file("ft.csv");
    const auto r = cli({"simulate", "--model", "brownian", "--epsilon", "0", "--n-particles", "200",
                        "--dt", "1e-3", "--horizon", "0.25", "--seed", "3", "--bins", "20", "--out",
                        out});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("finite-time run") != std::string::npos);
    const auto side = slurp_json(tmp.file("ft.json"));
    CHECK(side.at("horizon").get<double>() == 0.25);
    CHECK(side.contains("mass_loss"));
    const auto hist = qsd::io::read_density_csv(out);
    CHECK(hist.total_mass == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("config file supplies defaults, flags win", "[cli]") {
    TempDir tmp;
    const auto cfg_path = tmp.file("run.json");
    {
        nlohmann::json j;
        j["model"] = "brownian";
        j["epsilon"] = 0.0;
        j["n_particles"] = 50;
        j["dt"] = 1e-3;
        j["epochs"] = 5;
        j["seed"] = 21;
        j["bins"] = 10;
        j["out"] = tmp.file("from_config.csv");
        std::ofstream f(cfg_path);
        f << j.dump();
    }
    REQUIRE(cli({"simulate", "--config", cfg_path}).code == 0);
    const auto side = slurp_json(tmp.file("from_config.json"));
    CHECK(side.at("seed").get<int>() == 21);
    CHECK(side.at("n_particles").get<int>() == 50);

    // flag overrides the config seed
    REQUIRE(cli({"simulate", "--config", cfg_path, "--seed", "99", "--out",
                 tmp.file("override.csv")})
                .code == 0);
    const auto side2 = slurp_json(tmp.file("override.json"));
    CHECK(side2.at("seed").get<int>() == 99);
    CHECK(side2.at("n_particles").get<int>() == 50);  // still from the config
}

TEST_CASE("point and file initial conditions", "[cli]") {
    TempDir tmp;
    const auto r = cli({"simulate", "--model", "brownian", "--epsilon", "0", "--n-particles", "50",
                        "--dt", "1e-3", "--horizon", "0", "--init", "point:0.5", "--bins", "10",
                        "--out", tmp.file("pt.csv")});
    REQUIRE(r.code == 0);
    const auto hist = qsd::io::read_density_csv(tmp.file("pt.csv"));
    CHECK(hist.masses[5] == Catch::Approx(1.0));

    const auto bad = cli({"simulate", "--model", "brownian", "--epsilon", "0", "--init",
                          "point:1.5", "--out", tmp.file("bad.csv")});
    CHECK(bad.code == 2);

    const auto samples = tmp.file("samples.txt");
    {
        std::ofstream f(samples);
        f << "0.25\n0.75\n";
    }
    const auto rf = cli({"simulate", "--model", "brownian", "--epsilon", "0", "--n-particles",
                         "100", "--dt", "1e-3", "--horizon", "0", "--init", "file:" + samples,
                         "--bins", "4", "--out", tmp.file("fs.csv")});
    REQUIRE(rf.code == 0);
    const auto h = qsd::io::read_density_csv(tmp.file("fs.csv"));
    CHECK(h.masses[0] + h.masses[1] == Catch::Approx(h.masses[2] + h.masses[3]).margin(0.2));
}

TEST_CASE("help exits zero", "[cli]") {
    CHECK(cli({"--help"}).code == 0);
}
