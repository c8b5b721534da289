#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dlock/config.hpp"

namespace fs = std::filesystem;
using namespace dlock;

namespace {

struct Overrides {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<int> max_steps;
    bool unicycle = false;
};

Json load_json(const std::string& path) {
    if (path.empty()) return config_defaults();
    std::ifstream is(path);
    if (!is) throw ConfigError("config", "cannot open '" + path + "'");
    Json j;
    try {
        is >> j;
    } catch (const Json::parse_error& e) {
        throw ConfigError("config", std::string("parse error: ") + e.what());
    }
    return j;
}

ScenarioConfig resolve(const Overrides& o) {
    Json j = load_json(o.config_path);
    ScenarioConfig cfg = parse_config(j);
    if (o.mode) cfg.mode = mode_from_string(*o.mode);
    if (o.seed) cfg.seed = *o.seed;
    if (o.dt) {
        if (*o.dt <= 0.0) throw ConfigError("params.dt", "must be positive");
        cfg.params.dt = *o.dt;
    }
    if (o.max_steps) {
        if (*o.max_steps < 1) throw ConfigError("max_steps", "must be at least 1");
        cfg.max_steps = *o.max_steps;
    }
    const std::string err = cfg.validate();
    if (!err.empty()) throw ConfigError(err, "invalid scenario");
    return cfg;
}

void write_file(const fs::path& p, const std::string& body) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << body;
}

int cmd_run(const Overrides& o) {
    const auto t0 = std::chrono::steady_clock::now();
    ScenarioConfig cfg = resolve(o);
    TrajectoryLog log = run(cfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(o.out_dir);
    const fs::path traj = fs::path(o.out_dir) / "trajectory.csv";
    const fs::path summary = fs::path(o.out_dir) / "summary.json";
    const fs::path manifest = fs::path(o.out_dir) / "manifest.json";

    {
        std::ofstream os(traj);
        write_trajectory_csv(log, cfg, os, o.unicycle);
    }
    write_file(summary, summary_json(log, cfg).dump(2) + "\n");
    Json man{{"artifact_version", kArtifactVersion},
             {"config_digest", config_digest(cfg)},
             {"mode", mode_name(cfg.mode)},
             {"seed", static_cast<double>(cfg.seed)},
             {"outputs", {traj.string(), summary.string()}},
             {"wall_clock_s", wall},
             {"summary", summary_json(log, cfg)}};
    write_file(manifest, man.dump(2) + "\n");

    std::cout << summary_json(log, cfg).dump(2) << "\n";
    return 0;
}

int cmd_compare(const Overrides& o) {
    ScenarioConfig base = resolve(o);
    fs::create_directories(o.out_dir);

    const ControllerMode modes[] = {ControllerMode::Baseline, ControllerMode::AlwaysOn,
                                    ControllerMode::Adaptive};
    std::vector<TrajectoryLog> logs;
    Json verdict = Json::object();
    size_t max_len = 0;
    for (ControllerMode m : modes) {
        ScenarioConfig cfg = base;
        cfg.mode = m;
        cfg.stop_on_deadlock = (m == ControllerMode::Baseline);
        logs.push_back(run(cfg));
        max_len = std::max(max_len, logs.back().steps.size());
        verdict[mode_name(m)] = {{"deadlock", logs.back().deadlock},
                                 {"converged", logs.back().converged},
                                 {"steps_to_convergence", logs.back().steps_to_convergence},
                                 {"final_avg_goal_distance", logs.back().final_avg_goal_distance},
                                 {"min_h", logs.back().min_h_overall}};
    }

    // Fig.-1-style joined table: distance per mode plus the adaptive indicator.
    std::ostringstream os;
    os << std::setprecision(17);
    os << "t,dist_baseline,dist_always_on,dist_adaptive,zeta_adaptive\n";
    for (size_t s = 0; s < max_len; ++s) {
        os << s * base.params.dt;
        for (const auto& log : logs) {
            const size_t idx = std::min(s, log.steps.size() - 1);
            os << ',' << log.steps[idx].avg_goal_distance;
        }
        const auto& ad = logs[2];
        os << ',' << ad.steps[std::min(s, ad.steps.size() - 1)].avg_zeta << "\n";
    }
    write_file(fs::path(o.out_dir) / "compare.csv", os.str());
    write_file(fs::path(o.out_dir) / "verdict.json", verdict.dump(2) + "\n");
    std::cout << verdict.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const Overrides& o, std::vector<int> n_list, int trials) {
    if (n_list.empty()) n_list = {4, 8, 12};
    Json base_json = load_json(o.config_path);
    ScenarioConfig proto = parse_config(base_json);
    if (o.dt) proto.params.dt = *o.dt;
    const int steps = o.max_steps.value_or(500);
    const std::uint64_t seed0 = o.seed.value_or(proto.seed);

    fs::create_directories(o.out_dir);
    std::ostringstream os;
    os << std::setprecision(17);
    os << "N,mode,trials,mean_final_dist,min_final_dist,max_final_dist\n";
    for (int N : n_list) {
        for (ControllerMode m : {ControllerMode::AlwaysOn, ControllerMode::Adaptive}) {
            double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
            for (int trial = 0; trial < trials; ++trial) {
                ScenarioConfig cfg = make_jittered_ring_scenario(
                    N, 10.0, proto.params, m, seed0 + static_cast<std::uint64_t>(trial));
                cfg.max_steps = steps;
                cfg.stop_on_deadlock = false;
                TrajectoryLog log = run(cfg);
                const double dist = log.converged ? 0.0 : log.final_avg_goal_distance;
                sum += dist;
                lo = std::min(lo, dist);
                hi = std::max(hi, dist);
            }
            os << N << ',' << mode_name(m) << ',' << trials << ',' << sum / trials << ','
               << lo << ',' << hi << "\n";
        }
    }
    write_file(fs::path(o.out_dir) / "sweep.csv", os.str());
    std::cout << os.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized CLF-CBF multi-agent simulator"};
    app.require_subcommand(1);

    Overrides o;
    std::vector<int> n_list;
    int trials = 10;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", o.config_path, "scenario config file (JSON)");
        cmd->add_option("--out-dir", o.out_dir, "output directory");
        cmd->add_option("--seed", o.seed, "override the scenario seed");
        cmd->add_option("--dt", o.dt, "override the integration step [s]");
        cmd->add_option("--max-steps", o.max_steps, "override the step budget");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "simulate one scenario");
    add_common(run_cmd);
    run_cmd->add_option("--mode", o.mode, "baseline | always_on | adaptive");
    run_cmd->add_flag("--unicycle", o.unicycle, "append near-identity (v, w) columns");

    CLI::App* cmp_cmd = app.add_subcommand("compare", "run all three modes on one scenario");
    add_common(cmp_cmd);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "jittered-ring scaling sweep");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--n-list", n_list, "agent counts (default 4 8 12)");
    sweep_cmd->add_option("--trials", trials, "trials per agent count");

    CLI::App* def_cmd = app.add_subcommand("defaults", "print the materialized default config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (def_cmd->parsed()) {
            std::cout << config_defaults().dump(2) << "\n";
            return 0;
        }
        if (run_cmd->parsed()) return cmd_run(o);
        if (cmp_cmd->parsed()) return cmd_compare(o);
        if (sweep_cmd->parsed()) return cmd_sweep(o, n_list, trials);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
