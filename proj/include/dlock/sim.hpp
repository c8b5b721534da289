#ifndef DLOCK_SIM_HPP
#define DLOCK_SIM_HPP

#include <cstdint>
#include <string>

#include "dlock/controller.hpp"

namespace dlock {

struct ScenarioConfig {
    int d = 2;
    ControllerMode mode = ControllerMode::Adaptive;
    ControllerParams params;
    std::vector<AgentState> agents;
    int max_steps = 5000;
    double goal_tolerance = 0.1;   // [m]
    double v_stall = 1e-3;         // [m/s]
    int stall_window = 100;        // steps
    std::uint64_t seed = 0;
    bool stop_on_deadlock = true;

    // Rejects invalid configs; returns a human-readable field path on failure.
    std::string validate() const;
};

struct StepRecord {
    double time = 0.0;
    std::vector<Vec> positions;
    std::vector<ControlDecision> decisions;
    double min_h = 0.0;            // min pairwise h_ij
    double avg_goal_distance = 0.0;
    double avg_zeta = 0.0;
};

struct TrajectoryLog {
    std::vector<StepRecord> steps;
    bool converged = false;
    int steps_to_convergence = -1;
    bool deadlock = false;
    double min_h_overall = 0.0;
    double final_avg_goal_distance = 0.0;
    int fallback_count = 0;
    double max_kkt_residual = 0.0;
};

struct World {
    std::vector<AgentState> agents;
    std::vector<AgentController> controllers;
    int step_count = 0;

    static World from_config(const ScenarioConfig& cfg);
};

// Evenly spaced agents on a circle of radius R with antipodal goals.
// N = 4, R = 10 reproduces the four-agent swap layout.
ScenarioConfig make_ring_scenario(int N, double R, const ControllerParams& prm,
                                  ControllerMode mode, double agent_radius = 1.0);

// Seeded angular jitter (uniform within +/- jitter_deg), resampled until every
// initial pair is strictly safe.
ScenarioConfig make_jittered_ring_scenario(int N, double R, const ControllerParams& prm,
                                           ControllerMode mode, std::uint64_t seed,
                                           double jitter_deg = 10.0,
                                           double agent_radius = 1.0);

// One snapshot/decide/integrate step (explicit Euler on x, exact exponential
// on Q). Appends a record to the log.
void sim_step(World& world, const ScenarioConfig& cfg, const Dynamics& dyn,
              TrajectoryLog& log);

TrajectoryLog run(const ScenarioConfig& cfg);

// True iff every agent stalled below v_stall for stall_window consecutive
// steps while someone was still away from the goal.
bool detect_deadlock(const TrajectoryLog& log, const ScenarioConfig& cfg);

}  // namespace dlock

#endif
