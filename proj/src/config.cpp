#include "dlock/config.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "dlock/unicycle.hpp"

namespace dlock {

namespace {

Json params_json(const ControllerParams& p) {
    return Json{{"gamma_gain", p.gamma.gain}, {"alpha_gain", p.alpha.gain},
                {"beta_gain", p.beta.gain},   {"p", p.p},
                {"q", p.q},                   {"phi", p.phi},
                {"c", p.c},                   {"t", p.t},
                {"epsilon", p.epsilon},       {"omega_c", p.omega_c},
                {"psi_scale", p.psi_scale},   {"psi_floor", p.psi_floor},
                {"dt", p.dt},
                {"w_default", p.w_default},   {"zeta_floor", p.zeta_floor},
                {"row_floor", p.row_floor},   {"deg_tol", p.deg_tol},
                {"q_reset_steps", p.q_reset_steps}, {"q_max_angle", p.q_max_angle},
                {"h_tol", p.h_tol},   {"v_tol", p.v_tol}};
}

double get_num(const Json& j, const std::string& path, const std::string& key, double dflt) {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_number()) throw ConfigError(path + "." + key, "expected a number");
    return j.at(key).get<double>();
}

Vec get_vec(const Json& j, const std::string& path, int d) {
    if (!j.is_array() || static_cast<int>(j.size()) != d)
        throw ConfigError(path, "expected an array of length " + std::to_string(d));
    Vec v(d);
    for (int k = 0; k < d; ++k) {
        if (!j[k].is_number()) throw ConfigError(path, "expected numeric entries");
        v(k) = j[k].get<double>();
    }
    return v;
}

ControllerParams parse_params(const Json& j) {
    ControllerParams dflt;
    ControllerParams p;
    p.gamma.gain = get_num(j, "params", "gamma_gain", dflt.gamma.gain);
    p.alpha.gain = get_num(j, "params", "alpha_gain", dflt.alpha.gain);
    p.beta.gain = get_num(j, "params", "beta_gain", dflt.beta.gain);
    p.p = get_num(j, "params", "p", dflt.p);
    p.q = get_num(j, "params", "q", dflt.q);
    p.phi = get_num(j, "params", "phi", dflt.phi);
    p.c = get_num(j, "params", "c", dflt.c);
    p.t = get_num(j, "params", "t", dflt.t);
    p.epsilon = get_num(j, "params", "epsilon", dflt.epsilon);
    p.omega_c = get_num(j, "params", "omega_c", dflt.omega_c);
    p.psi_scale = get_num(j, "params", "psi_scale", dflt.psi_scale);
    p.psi_floor = get_num(j, "params", "psi_floor", dflt.psi_floor);
    p.dt = get_num(j, "params", "dt", dflt.dt);
    p.w_default = get_num(j, "params", "w_default", dflt.w_default);
    p.zeta_floor = get_num(j, "params", "zeta_floor", dflt.zeta_floor);
    p.row_floor = get_num(j, "params", "row_floor", dflt.row_floor);
    p.deg_tol = get_num(j, "params", "deg_tol", dflt.deg_tol);
    p.q_reset_steps = static_cast<int>(get_num(j, "params", "q_reset_steps", dflt.q_reset_steps));
    p.q_max_angle = get_num(j, "params", "q_max_angle", dflt.q_max_angle);
    p.h_tol = get_num(j, "params", "h_tol", dflt.h_tol);
    p.v_tol = get_num(j, "params", "v_tol", dflt.v_tol);
    for (const auto& [key, val] : j.items()) {
        (void)val;
        static const char* known[] = {"gamma_gain", "alpha_gain", "beta_gain", "p", "q",
                                      "phi", "c", "t", "epsilon", "omega_c", "psi_scale",
                                      "psi_floor", "dt", "w_default", "zeta_floor", "row_floor",
                                      "deg_tol", "q_reset_steps", "q_max_angle", "h_tol",
                                      "v_tol"};
        bool ok = false;
        for (const char* k : known) ok |= (key == k);
        if (!ok) throw ConfigError("params." + key, "unknown field");
    }
    if (p.gamma.gain <= 0) throw ConfigError("params.gamma_gain", "must be positive");
    if (p.alpha.gain <= 0) throw ConfigError("params.alpha_gain", "must be positive");
    if (p.beta.gain <= 0) throw ConfigError("params.beta_gain", "must be positive");
    if (p.p <= 0) throw ConfigError("params.p", "must be positive");
    if (p.q <= 0) throw ConfigError("params.q", "must be positive");
    if (p.phi <= 0) throw ConfigError("params.phi", "must be positive");
    if (p.t <= 0) throw ConfigError("params.t", "must be positive");
    if (p.epsilon <= 0) throw ConfigError("params.epsilon", "must be positive");
    if (p.psi_scale <= 0) throw ConfigError("params.psi_scale", "must be positive");
    if (!(p.psi_floor >= 0 && p.psi_floor < 1))
        throw ConfigError("params.psi_floor", "must lie in [0,1)");
    if (!(p.q_max_angle > 0 && p.q_max_angle <= std::numbers::pi))
        throw ConfigError("params.q_max_angle", "must lie in (0,pi]");
    if (p.dt <= 0) throw ConfigError("params.dt", "must be positive");
    if (!(p.w_default > 0 && p.w_default < 1))
        throw ConfigError("params.w_default", "must lie in (0,1)");
    return p;
}

}  // namespace

ControllerMode mode_from_string(const std::string& s) {
    if (s == "baseline") return ControllerMode::Baseline;
    if (s == "always_on") return ControllerMode::AlwaysOn;
    if (s == "adaptive") return ControllerMode::Adaptive;
    throw ConfigError("mode", "unknown mode '" + s + "'");
}

Json config_defaults() {
    ScenarioConfig cfg = make_ring_scenario(4, 10.0, ControllerParams{},
                                            ControllerMode::Adaptive);
    return materialize_config(cfg);
}

ScenarioConfig parse_config(const Json& j) {
    if (!j.is_object()) throw ConfigError("", "config must be an object");
    if (j.contains("version") && j.at("version").get<int>() != kConfigVersion)
        throw ConfigError("version", "unsupported config version");

    ScenarioConfig cfg;
    cfg.d = static_cast<int>(get_num(j, "", "d", 2));
    cfg.mode = mode_from_string(j.value("mode", "adaptive"));
    cfg.max_steps = static_cast<int>(get_num(j, "", "max_steps", cfg.max_steps));
    cfg.goal_tolerance = get_num(j, "", "goal_tolerance", cfg.goal_tolerance);
    cfg.v_stall = get_num(j, "", "v_stall", cfg.v_stall);
    cfg.stall_window = static_cast<int>(get_num(j, "", "stall_window", cfg.stall_window));
    cfg.seed = static_cast<std::uint64_t>(get_num(j, "", "seed", 0));
    cfg.params = parse_params(j.value("params", Json::object()));

    if (j.contains("ring")) {
        const Json& r = j.at("ring");
        const int n = static_cast<int>(get_num(r, "ring", "n", 4));
        const double R = get_num(r, "ring", "radius", 10.0);
        const double jitter = get_num(r, "ring", "jitter_deg", 0.0);
        const double ar = get_num(r, "ring", "agent_radius", 1.0);
        if (n < 2) throw ConfigError("ring.n", "need at least two agents");
        ScenarioConfig ring =
            (jitter > 0.0)
                ? make_jittered_ring_scenario(n, R, cfg.params, cfg.mode, cfg.seed, jitter, ar)
                : make_ring_scenario(n, R, cfg.params, cfg.mode, ar);
        cfg.agents = ring.agents;
    }
    if (j.contains("agents")) {
        const Json& arr = j.at("agents");
        if (!arr.is_array()) throw ConfigError("agents", "expected an array");
        for (size_t k = 0; k < arr.size(); ++k) {
            const std::string path = "agents[" + std::to_string(k) + "]";
            const Json& a = arr[k];
            AgentState st = AgentState::make(get_vec(a.at("x"), path + ".x", cfg.d),
                                             get_vec(a.at("goal"), path + ".goal", cfg.d),
                                             get_num(a, path, "radius", 1.0));
            st.frozen = a.value("frozen", false);
            if (st.radius <= 0.0) throw ConfigError(path + ".radius", "must be positive");
            cfg.agents.push_back(st);
        }
    }
    if (j.contains("obstacles")) {
        const Json& arr = j.at("obstacles");
        if (!arr.is_array()) throw ConfigError("obstacles", "expected an array");
        for (size_t k = 0; k < arr.size(); ++k) {
            const std::string path = "obstacles[" + std::to_string(k) + "]";
            const Json& a = arr[k];
            const Vec x = get_vec(a.at("x"), path + ".x", cfg.d);
            AgentState st = AgentState::make(x, x, get_num(a, path, "radius", 1.0));
            st.frozen = true;
            cfg.agents.push_back(st);
        }
    }
    if (cfg.agents.empty()) throw ConfigError("agents", "no agents defined");

    const std::string err = cfg.validate();
    if (!err.empty()) throw ConfigError(err, "invalid scenario");
    return cfg;
}

Json materialize_config(const ScenarioConfig& cfg) {
    Json agents = Json::array();
    for (const auto& a : cfg.agents) {
        Json pos = Json::array(), goal = Json::array();
        for (int k = 0; k < cfg.d; ++k) {
            pos.push_back(a.x(k));
            goal.push_back(a.goal(k));
        }
        agents.push_back(Json{{"x", pos}, {"goal", goal}, {"radius", a.radius},
                              {"frozen", a.frozen}});
    }
    return Json{{"version", kConfigVersion},
                {"d", cfg.d},
                {"mode", mode_name(cfg.mode)},
                {"max_steps", cfg.max_steps},
                {"goal_tolerance", cfg.goal_tolerance},
                {"v_stall", cfg.v_stall},
                {"stall_window", cfg.stall_window},
                {"seed", static_cast<double>(cfg.seed)},
                {"params", params_json(cfg.params)},
                {"agents", agents}};
}

std::string config_digest(const ScenarioConfig& cfg) {
    const std::string s = materialize_config(cfg).dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

void write_trajectory_csv(const TrajectoryLog& log, const ScenarioConfig& cfg,
                          std::ostream& os, bool unicycle_cols, double nid_l) {
    os << std::setprecision(17);
    os << "t,agent,x,y,ux,uy,omega,delta,zeta,risk,min_h,qp_status,fallback";
    if (unicycle_cols) os << ",v,w";
    os << "\n";
    std::vector<double> theta(cfg.agents.size(), 0.0);
    for (const auto& rec : log.steps) {
        for (size_t i = 0; i < rec.decisions.size(); ++i) {
            const ControlDecision& d = rec.decisions[i];
            os << rec.time << ',' << i << ',' << rec.positions[i](0) << ','
               << rec.positions[i](1) << ',' << d.u(0) << ',' << d.u(1) << ','
               << (d.omega.size() ? d.omega(0) : 0.0) << ',' << d.delta << ','
               << d.zeta << ',' << d.risk << ',' << rec.min_h << ','
               << static_cast<int>(d.qp_status) << ',' << (d.fallback_used ? 1 : 0);
            if (unicycle_cols) {
                if (d.u.norm() > 1e-9) theta[i] = std::atan2(d.u(1), d.u(0));
                UnicyclePose pose{rec.positions[i](0), rec.positions[i](1), theta[i]};
                const UnicycleCommand cmd = nid_map(d.u, pose, nid_l);
                os << ',' << cmd.v << ',' << cmd.w;
            }
            os << "\n";
        }
    }
}

Json summary_json(const TrajectoryLog& log, const ScenarioConfig& cfg) {
    return Json{{"mode", mode_name(cfg.mode)},
                {"steps", static_cast<int>(log.steps.size())},
                {"converged", log.converged},
                {"steps_to_convergence", log.steps_to_convergence},
                {"deadlock", log.deadlock},
                {"min_h", log.min_h_overall},
                {"final_avg_goal_distance", log.final_avg_goal_distance},
                {"fallback_count", log.fallback_count},
                {"max_kkt_residual", log.max_kkt_residual},
                {"trajectory_schema_version", kTrajectorySchemaVersion}};
}

}  // namespace dlock
