#include "dlock/sim.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace dlock {

std::string ScenarioConfig::validate() const {
    if (d != 2 && d != 3) return "d";
    if (agents.empty()) return "agents";
    if (params.dt <= 0.0) return "params.dt";
    if (max_steps < 1) return "max_steps";
    if (goal_tolerance <= 0.0) return "goal_tolerance";
    for (size_t i = 0; i < agents.size(); ++i) {
        std::ostringstream path;
        if (agents[i].radius <= 0.0) {
            path << "agents[" << i << "].radius";
            return path.str();
        }
        if (static_cast<int>(agents[i].x.size()) != d ||
            static_cast<int>(agents[i].goal.size()) != d) {
            path << "agents[" << i << "].x";
            return path.str();
        }
        // Nonradiality guard: the rotated CLF degenerates when the goal sits
        // at the rotation origin.
        if (mode != ControllerMode::Baseline && !agents[i].frozen &&
            agents[i].goal.norm() < 1e-9) {
            path << "agents[" << i << "].goal";
            return path.str();
        }
    }
    for (size_t i = 0; i < agents.size(); ++i)
        for (size_t j = i + 1; j < agents.size(); ++j)
            if (h_pair(agents[i], agents[j]) <= 0.0) {
                std::ostringstream path;
                path << "agents[" << j << "].x";
                return path.str();
            }
    return "";
}

World World::from_config(const ScenarioConfig& cfg) {
    World w;
    w.agents = cfg.agents;
    w.controllers.resize(cfg.agents.size());
    return w;
}

ScenarioConfig make_ring_scenario(int N, double R, const ControllerParams& prm,
                                  ControllerMode mode, double agent_radius) {
    ScenarioConfig cfg;
    cfg.params = prm;
    cfg.mode = mode;
    for (int k = 0; k < N; ++k) {
        const double th = std::numbers::pi - 2.0 * std::numbers::pi * k / N;
        Vec x(2), goal(2);
        x << R * std::cos(th), R * std::sin(th);
        goal = -x;
        cfg.agents.push_back(AgentState::make(x, goal, agent_radius));
    }
    return cfg;
}

ScenarioConfig make_jittered_ring_scenario(int N, double R, const ControllerParams& prm,
                                           ControllerMode mode, std::uint64_t seed,
                                           double jitter_deg, double agent_radius) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-jitter_deg * std::numbers::pi / 180.0,
                                                  jitter_deg * std::numbers::pi / 180.0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        ScenarioConfig cfg;
        cfg.params = prm;
        cfg.mode = mode;
        cfg.seed = seed;
        for (int k = 0; k < N; ++k) {
            const double th = std::numbers::pi - 2.0 * std::numbers::pi * k / N + jitter(rng);
            Vec x(2);
            x << R * std::cos(th), R * std::sin(th);
            cfg.agents.push_back(AgentState::make(x, Vec(-x), agent_radius));
        }
        bool ok = true;
        for (size_t i = 0; i < cfg.agents.size() && ok; ++i)
            for (size_t j = i + 1; j < cfg.agents.size() && ok; ++j)
                if (h_pair(cfg.agents[i], cfg.agents[j]) < 0.5) ok = false;
        if (ok) return cfg;
    }
    throw std::runtime_error("make_jittered_ring_scenario: no safe layout found");
}

void sim_step(World& world, const ScenarioConfig& cfg, const Dynamics& dyn,
              TrajectoryLog& log) {
    const std::vector<AgentState> snapshot = world.agents;
    const int N = static_cast<int>(snapshot.size());

    StepRecord rec;
    rec.time = world.step_count * cfg.params.dt;
    rec.decisions.resize(N);

    for (int i = 0; i < N; ++i) {
        if (snapshot[i].frozen) {
            ControlDecision d;
            d.u = Vec::Zero(dyn.m);
            d.omega = Vec::Zero(so_dim(dyn.d));
            rec.decisions[i] = d;
            continue;
        }
        const ClfModel clf = ClfModel::goal_quadratic(snapshot[i].goal);
        rec.decisions[i] =
            world.controllers[i].decide(i, snapshot, cfg.mode, cfg.params, dyn, clf);
    }

    // Integrate from the shared snapshot.
    for (int i = 0; i < N; ++i) {
        AgentState& a = world.agents[i];
        if (a.frozen) continue;
        const ControlDecision& d = rec.decisions[i];
        a.x = snapshot[i].x +
              cfg.params.dt * (dyn.f(snapshot[i].x) + dyn.g(snapshot[i].x) * d.u);
        if (d.request_q_reset)
            a.Q = Mat::Identity(dyn.d, dyn.d);
        else
            a.Q = clamp_rotation(integrate_rotation(snapshot[i].Q, d.omega, cfg.params.dt),
                                 cfg.params.q_max_angle);
        a.last_u = d.u;
        a.last_omega = d.omega;
    }
    ++world.step_count;

    double min_h = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j)
            min_h = std::min(min_h, h_pair(snapshot[i], snapshot[j]));
    double dist = 0.0, zeta = 0.0;
    int movers = 0;
    for (int i = 0; i < N; ++i) {
        if (snapshot[i].frozen) continue;
        dist += (snapshot[i].x - snapshot[i].goal).norm();
        zeta += rec.decisions[i].zeta;
        ++movers;
    }
    rec.min_h = (N > 1) ? min_h : 0.0;
    rec.avg_goal_distance = movers ? dist / movers : 0.0;
    rec.avg_zeta = movers ? zeta / movers : 0.0;
    for (int i = 0; i < N; ++i) rec.positions.push_back(snapshot[i].x);

    log.min_h_overall = std::min(log.min_h_overall, rec.min_h);
    for (int i = 0; i < N; ++i) {
        if (rec.decisions[i].fallback_used) ++log.fallback_count;
        log.max_kkt_residual =
            std::max(log.max_kkt_residual, rec.decisions[i].kkt_residual);
    }
    log.steps.push_back(std::move(rec));
}

// An agent counts as stalled only when both controls are quiet: a paused
// position with the virtual frame still rotating is a resolution manoeuvre,
// not an equilibrium.
static bool decision_stalled(const ControlDecision& d, double v_stall) {
    return d.u.norm() < v_stall && d.omega.norm() < v_stall;
}

bool detect_deadlock(const TrajectoryLog& log, const ScenarioConfig& cfg) {
    int streak = 0;
    for (const auto& rec : log.steps) {
        bool all_stalled = true;
        bool someone_away = false;
        for (size_t i = 0; i < rec.decisions.size(); ++i) {
            if (cfg.agents[i].frozen) continue;
            if (!decision_stalled(rec.decisions[i], cfg.v_stall)) all_stalled = false;
            if ((rec.positions[i] - cfg.agents[i].goal).norm() > cfg.goal_tolerance)
                someone_away = true;
        }
        streak = (all_stalled && someone_away) ? streak + 1 : 0;
        if (streak >= cfg.stall_window) return true;
    }
    return false;
}

TrajectoryLog run(const ScenarioConfig& cfg) {
    const std::string err = cfg.validate();
    if (!err.empty()) throw std::invalid_argument("invalid config: " + err);

    const Dynamics dyn = Dynamics::single_integrator(cfg.d);
    World world = World::from_config(cfg);
    TrajectoryLog log;
    log.min_h_overall = std::numeric_limits<double>::infinity();

    int stall_streak = 0;
    for (int step = 0; step < cfg.max_steps; ++step) {
        sim_step(world, cfg, dyn, log);

        bool all_converged = true;
        for (const auto& a : world.agents)
            if (!a.frozen && (a.x - a.goal).norm() > cfg.goal_tolerance)
                all_converged = false;
        if (all_converged) {
            log.converged = true;
            log.steps_to_convergence = world.step_count;
            break;
        }

        const StepRecord& rec = log.steps.back();
        bool all_stalled = true;
        for (size_t i = 0; i < rec.decisions.size(); ++i)
            if (!cfg.agents[i].frozen && !decision_stalled(rec.decisions[i], cfg.v_stall))
                all_stalled = false;
        stall_streak = all_stalled ? stall_streak + 1 : 0;
        if (cfg.stop_on_deadlock && stall_streak >= 2 * cfg.stall_window) break;
    }

    log.deadlock = detect_deadlock(log, cfg);
    double dist = 0.0;
    int movers = 0;
    for (const auto& a : world.agents)
        if (!a.frozen) {
            dist += (a.x - a.goal).norm();
            ++movers;
        }
    log.final_avg_goal_distance = movers ? dist / movers : 0.0;
    return log;
}

}  // namespace dlock
