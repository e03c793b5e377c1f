#pragma once

// Command-line front end: simulate | spectral | compare | check-hypotheses |
// eps-sweep. Kept in a header so the test suite can drive the exact binary
// logic in-process.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsd/catalog.hpp"
#include "qsd/density_grid.hpp"
#include "qsd/errors.hpp"
#include "qsd/fv.hpp"
#include "qsd/hypotheses.hpp"
#include "qsd/io.hpp"
#include "qsd/mc.hpp"
#include "qsd/model.hpp"
#include "qsd/parallel.hpp"
#include "qsd/spectral.hpp"

namespace qsd::cli {

constexpr int kExitOk = 0;
constexpr int kExitCompareFailed = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

/// Flat run configuration; mirrors the JSON config schema. Flags win over
/// the config file.
struct SimConfig {
    std::string model_id = "brownian";
    std::map<std::string, double> params;
    double epsilon = 0.001;
    std::uint64_t n_particles = 1000;
    double dt = 1e-4;
    std::uint64_t burn_in = 0;
    std::uint64_t epochs = 1;
    std::optional<double> horizon;
    std::uint64_t seed = 1;
    std::uint64_t bins = 100;
    std::uint64_t grid = 10000;
    std::string init = "uniform";
    std::string out = "qsd_out.csv";
    int workers = default_workers();

    void validate_common() const {
        if (n_particles < 2) throw ValidationError("n_particles: N must be >= 2");
        if (!(dt > 0.0)) throw ValidationError("dt: must be > 0");
        if (bins < 1) throw ValidationError("bins: must be >= 1");
        if (workers < 1) throw ValidationError("workers: must be >= 1");
        if (horizon && !(*horizon >= 0.0)) throw ValidationError("horizon: must be >= 0");
        if (epochs < 1) throw ValidationError("epochs: must be >= 1");
    }
};

namespace detail {

inline std::map<std::string, double> parse_params(const std::vector<std::string>& kvs) {
    std::map<std::string, double> out;
    for (const auto& kv : kvs) {
        const auto pos = kv.find('=');
        if (pos == std::string::npos || pos == 0) {
            throw ValidationError("param: expected key=value, got '" + kv + "'");
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(kv.substr(pos + 1), &used);
            if (used != kv.size() - pos - 1) throw std::invalid_argument(kv);
            out[kv.substr(0, pos)] = v;
        } catch (const std::exception&) {
            throw ValidationError("param: value of '" + kv.substr(0, pos) + "' is not a number");
        }
    }
    return out;
}

inline std::vector<double> parse_eps_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ValidationError("eps: '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw ValidationError("eps: empty list");
    return out;
}

inline void load_config_file(SimConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("config: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ValidationError("config: " + path + " is not valid JSON: " + e.what());
    }
    if (j.contains("model")) cfg.model_id = j.at("model").get<std::string>();
    if (j.contains("params")) cfg.params = j.at("params").get<std::map<std::string, double>>();
    if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
    if (j.contains("n_particles")) cfg.n_particles = j.at("n_particles").get<std::uint64_t>();
    if (j.contains("dt")) cfg.dt = j.at("dt").get<double>();
    if (j.contains("burn_in")) cfg.burn_in = j.at("burn_in").get<std::uint64_t>();
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::uint64_t>();
    if (j.contains("horizon")) cfg.horizon = j.at("horizon").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("bins")) cfg.bins = j.at("bins").get<std::uint64_t>();
    if (j.contains("grid")) cfg.grid = j.at("grid").get<std::uint64_t>();
    if (j.contains("init")) cfg.init = j.at("init").get<std::string>();
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
}

inline InitialSampler make_init(const std::string& spec, const Interval& iv) {
    if (spec == "uniform") return uniform_init(iv);
    if (spec.starts_with("point:")) {
        double x = 0.0;
        try {
            x = std::stod(spec.substr(6));
        } catch (const std::exception&) {
            throw ValidationError("init: bad point value in '" + spec + "'");
        }
        if (!iv.contains(x)) {
            throw ValidationError("init: point " + std::to_string(x) +
                                  " not inside the killing interval");
        }
        return point_init(x);
    }
    if (spec.starts_with("file:")) {
        const std::string path = spec.substr(5);
        std::ifstream f(path);
        if (!f) throw ValidationError("init: cannot open sample file " + path);
        std::vector<double> samples;
        double v = 0.0;
        while (f >> v) {
            if (!iv.contains(v)) {
                throw ValidationError("init: sample " + std::to_string(v) +
                                      " not inside the killing interval");
            }
            samples.push_back(v);
        }
        if (samples.empty()) throw ValidationError("init: sample file " + path + " is empty");
        return samples_init(std::move(samples));
    }
    throw ValidationError("init: expected uniform, point:<x> or file:<path>, got '" + spec + "'");
}

inline std::string stem_of(const std::string& path) {
    if (path.size() > 4 && path.ends_with(".csv")) return path.substr(0, path.size() - 4);
    return path;
}

inline nlohmann::json sidecar_base(const SimConfig& cfg) {
    nlohmann::json j;
    j["model"] = cfg.model_id;
    j["params"] = cfg.params;
    j["epsilon"] = cfg.epsilon;
    j["n_particles"] = cfg.n_particles;
    j["dt"] = cfg.dt;
    j["burn_in"] = cfg.burn_in;
    j["epochs"] = cfg.epochs;
    j["seed"] = cfg.seed;
    j["bins"] = cfg.bins;
    if (cfg.horizon) j["horizon"] = *cfg.horizon;
    if (cfg.init != "uniform") j["init"] = cfg.init;
    return j;
}

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

inline int cmd_simulate(const SimConfig& cfg, std::ostream& out) {
    cfg.validate_common();
    const detail::Timer timer;
    const DiffusionModel model = make_model(cfg.model_id, cfg.params);
    const Interval iv = truncate(model.domain, cfg.epsilon);
    const InitialSampler init = detail::make_init(cfg.init, iv);

    Histogram hist{{0.0, 1.0}, {0.0}, 0.0};
    std::uint64_t jump_count = 0;
    nlohmann::json extra;
    if (cfg.horizon) {
        FvRunConfig rc;
        rc.n_particles = cfg.n_particles;
        rc.step.dt = cfg.dt;
        rc.seed = cfg.seed;
        rc.workers = cfg.workers;
        const ParticleSystem sys = with_drift(model, [&](auto drift) {
            return run_finite_time(init, *cfg.horizon, drift, iv, rc);
        });
        hist = empirical_measure(sys).binned(cfg.bins, iv);
        jump_count = sys.jump_count;
        extra["mass_loss"] = mass_loss_factor(sys.size(), sys.jump_count);
        out << "finite-time run: T=" << *cfg.horizon << " jump_count=" << jump_count
            << " mass_loss=" << io::format_double(extra["mass_loss"].get<double>()) << "\n";
    } else {
        ErgodicConfig ec;
        ec.n_particles = cfg.n_particles;
        ec.step.dt = cfg.dt;
        ec.burn_in_epochs = cfg.burn_in;
        ec.sample_epochs = cfg.epochs;
        ec.bins = cfg.bins;
        ec.seed = cfg.seed;
        ec.workers = cfg.workers;
        ec.init = init;
        const ErgodicRunReport rep =
            with_drift(model, [&](auto drift) { return run_ergodic(drift, iv, ec); });
        hist = rep.average;
        jump_count = rep.jump_count;
        extra["jump_rate"] = rep.jump_rate;
        out << "ergodic run: epochs=" << rep.sample_epochs << " (+" << rep.burn_in_epochs
            << " burn-in) jump_count=" << jump_count << " jump_rate=" << rep.jump_rate << "\n";
        if (rep.boundary_warning) {
            out << "warning: boundary mass exceeded the non-degeneracy threshold during sampling\n";
        }
    }

    io::write_density_csv(cfg.out, hist);
    nlohmann::json sidecar = detail::sidecar_base(cfg);
    sidecar["jump_count"] = jump_count;
    sidecar.update(extra);
    sidecar["wall_time_s"] = timer.seconds();
    io::write_json_file(detail::stem_of(cfg.out) + ".json", sidecar);
    out << "wrote " << cfg.out << "\n";

    if (!model.transform.trivial) {
        const std::string zpath = detail::stem_of(cfg.out) + "_z.csv";
        io::write_density_csv(zpath, pushforward(hist, model.transform.inverse));
        nlohmann::json zc = sidecar;
        zc["coordinates"] = "original";
        io::write_json_file(detail::stem_of(zpath) + ".json", zc);
        out << "wrote " << zpath << "\n";
    }
    return kExitOk;
}

inline int cmd_spectral(const SimConfig& cfg, std::ostream& out) {
    if (cfg.bins < 1) throw ValidationError("bins: must be >= 1");
    const detail::Timer timer;
    const DiffusionModel model = make_model(cfg.model_id, cfg.params);
    const Interval iv = truncate(model.domain, cfg.epsilon);
    const EigenResult res = solve_ground_state(model, iv, cfg.grid);

    const Histogram binned =
        bin_grid_density(res.grid, res.qsd_density, uniform_edges(iv.lo, iv.hi, cfg.bins));
    io::write_density_csv(cfg.out, binned);
    const std::string stem = detail::stem_of(cfg.out);
    io::write_grid_csv(stem + "_grid.csv", res.grid, res.v, res.qsd_density);

    nlohmann::json sidecar = detail::sidecar_base(cfg);
    sidecar["grid"] = cfg.grid;
    sidecar["lambda"] = res.lambda;
    sidecar["residual"] = res.residual;
    sidecar["wall_time_s"] = timer.seconds();
    io::write_json_file(stem + ".json", sidecar);
    io::write_json_file(stem + "_grid.json", sidecar);

    out << "lambda=" << io::format_double(res.lambda) << "\n";
    out << "wrote " << cfg.out << " and " << stem << "_grid.csv\n";

    if (!model.transform.trivial) {
        const std::string zpath = stem + "_z.csv";
        io::write_density_csv(zpath, pushforward(binned, model.transform.inverse));
        nlohmann::json zc = sidecar;
        zc["coordinates"] = "original";
        io::write_json_file(stem + "_z.json", zc);
        out << "wrote " << zpath << "\n";
    }
    return kExitOk;
}

inline int cmd_compare(const std::string& file_a, const std::string& file_b, double tol,
                       std::ostream& out) {
    const Histogram a = io::read_density_csv(file_a).normalized();
    const Histogram b = io::read_density_csv(file_b).normalized();
    const double tv = distance_tv(a, b);
    const double w1 = distance_w1(a, b);
    out << "tv=" << io::format_double(tv) << " w1=" << io::format_double(w1) << "\n";
    if (tv <= tol) {
        out << "within tolerance " << io::format_double(tol) << "\n";
        return kExitOk;
    }
    out << "exceeds tolerance " << io::format_double(tol) << "\n";
    return kExitCompareFailed;
}

inline int cmd_check_hypotheses(const SimConfig& cfg, std::ostream& out) {
    const DiffusionModel model = make_model(cfg.model_id, cfg.params);
    const nlohmann::json j = io::hypothesis_report_json(check_hypotheses(model));
    out << j.dump(2) << "\n";
    if (cfg.out != "qsd_out.csv") io::write_json_file(cfg.out, j);
    return kExitOk;
}

inline int cmd_eps_sweep(const SimConfig& cfg, const std::vector<double>& eps_list,
                         std::ostream& out) {
    const detail::Timer timer;
    const DiffusionModel model = make_model(cfg.model_id, cfg.params);
    const EpsSweepReport rep = eps_sweep(model, eps_list, cfg.grid);
    out << "epsilon lambda tv_to_next\n";
    for (std::size_t i = 0; i < rep.entries.size(); ++i) {
        out << io::format_double(rep.entries[i].epsilon) << ' '
            << io::format_double(rep.entries[i].lambda) << ' '
            << (i < rep.tv_successive.size() ? io::format_double(rep.tv_successive[i]) : "-")
            << "\n";
    }
    if (cfg.out != "qsd_out.csv") {
        nlohmann::json j;
        j["model"] = cfg.model_id;
        j["params"] = cfg.params;
        j["grid"] = cfg.grid;
        j["entries"] = nlohmann::json::array();
        for (const auto& e : rep.entries) {
            j["entries"].push_back({{"epsilon", e.epsilon}, {"lambda", e.lambda}});
        }
        j["tv_successive"] = rep.tv_successive;
        j["wall_time_s"] = timer.seconds();
        io::write_json_file(cfg.out, j);
        out << "wrote " << cfg.out << "\n";
    }
    return kExitOk;
}

/// Parses and runs one CLI invocation; returns the process exit code.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fleming-Viot particle approximation of quasi-stationary distributions of "
                 "killed 1-d diffusions, with spectral and Monte Carlo oracles"};
    app.require_subcommand(1);

    SimConfig cfg;
    std::string config_path;
    std::vector<std::string> param_kvs;
    std::string eps_csv;
    std::string file_a, file_b;
    double tol = std::numeric_limits<double>::infinity();

    const auto add_common = [&](CLI::App* sub, bool sim_opts) {
        sub->add_option("--config", config_path, "JSON config file (flags win)");
        sub->add_option("--model", cfg.model_id, "catalog model id");
        sub->add_option("--param", param_kvs, "model parameter key=value (repeatable)");
        sub->add_option("--epsilon", cfg.epsilon, "truncation parameter");
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--bins", cfg.bins, "histogram bins");
        sub->add_option("--out", cfg.out, "output CSV path");
        sub->add_option("--workers", cfg.workers, "max parallel workers (does not change results)");
        if (sim_opts) {
            sub->add_option("--n-particles", cfg.n_particles, "particle count N");
            sub->add_option("--dt", cfg.dt, "time step");
            sub->add_option("--burn-in", cfg.burn_in, "burn-in epochs");
            sub->add_option("--epochs", cfg.epochs, "sampling epochs");
            sub->add_option("--horizon", [&cfg](const std::vector<std::string>& vals) {
                cfg.horizon = std::stod(vals.at(0));
                return true;
            }, "finite-time mode: simulate to T instead of the ergodic average");
            sub->add_option("--init", cfg.init, "initial condition: uniform | point:<x> | file:<path>");
        }
    };

    auto* sim = app.add_subcommand("simulate", "run the Fleming-Viot particle system");
    add_common(sim, true);
    auto* spec = app.add_subcommand("spectral", "solve the Sturm-Liouville ground state");
    add_common(spec, false);
    spec->add_option("--grid", cfg.grid, "interior grid points");
    auto* cmp = app.add_subcommand("compare", "TV/W1 distance between two density CSVs");
    cmp->add_option("file_a", file_a, "first density CSV")->required();
    cmp->add_option("file_b", file_b, "second density CSV")->required();
    cmp->add_option("--tol", tol, "exit 0 iff TV <= tol");
    auto* hyp = app.add_subcommand("check-hypotheses", "numerically check (H1)-(H3) / (HH1)-(HH3)");
    add_common(hyp, false);
    auto* sweep = app.add_subcommand("eps-sweep", "solve a decreasing sequence of truncations");
    add_common(sweep, false);
    sweep->add_option("--grid", cfg.grid, "interior grid points of the widest truncation");
    sweep->add_option("--eps", eps_csv, "comma-separated strictly decreasing epsilon list")
        ->required();

    std::vector<const char*> argv;
    argv.push_back("qsd");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        // config file first, then re-apply flags so they win
        if (!config_path.empty()) {
            const auto given = [](CLI::App* sub, const std::string& name) {
                const auto* opt = sub->get_option_no_throw(name);
                return opt != nullptr && opt->count() > 0;
            };
            SimConfig from_file = cfg;
            detail::load_config_file(from_file, config_path);
            for (auto* sub : {sim, spec, hyp, sweep}) {
                if (!sub->parsed()) continue;
                if (given(sub, "--model")) from_file.model_id = cfg.model_id;
                if (given(sub, "--epsilon")) from_file.epsilon = cfg.epsilon;
                if (given(sub, "--seed")) from_file.seed = cfg.seed;
                if (given(sub, "--bins")) from_file.bins = cfg.bins;
                if (given(sub, "--out")) from_file.out = cfg.out;
                if (given(sub, "--workers")) from_file.workers = cfg.workers;
                if (given(sub, "--grid")) from_file.grid = cfg.grid;
                if (given(sub, "--n-particles")) from_file.n_particles = cfg.n_particles;
                if (given(sub, "--dt")) from_file.dt = cfg.dt;
                if (given(sub, "--burn-in")) from_file.burn_in = cfg.burn_in;
                if (given(sub, "--epochs")) from_file.epochs = cfg.epochs;
                if (given(sub, "--horizon")) from_file.horizon = cfg.horizon;
                if (given(sub, "--init")) from_file.init = cfg.init;
            }
            cfg = from_file;
        }
        if (!param_kvs.empty()) cfg.params = detail::parse_params(param_kvs);

        if (sim->parsed()) return cmd_simulate(cfg, out);
        if (spec->parsed()) return cmd_spectral(cfg, out);
        if (cmp->parsed()) return cmd_compare(file_a, file_b, tol, out);
        if (hyp->parsed()) return cmd_check_hypotheses(cfg, out);
        if (sweep->parsed()) return cmd_eps_sweep(cfg, detail::parse_eps_list(eps_csv), out);
        err << "error: no subcommand\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IncompatibleRangesError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        err << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace qsd::cli
