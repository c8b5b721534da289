#ifndef DLOCK_CONTROLLER_HPP
#define DLOCK_CONTROLLER_HPP

#include "dlock/cbf.hpp"
#include "dlock/deadlock.hpp"
#include "dlock/qp.hpp"

namespace dlock {

enum class ControllerMode { Baseline, AlwaysOn, Adaptive };

const char* mode_name(ControllerMode m);

struct PairSnapshot {
    int neighbor = -1;
    double h = 0.0;
    double D = 0.0;
    double h_D = 0.0;
    bool deadlock_row_included = false;
};

struct ControlDecision {
    Vec u;
    Vec omega;
    double delta = 0.0;
    double zeta = 0.0;
    double risk = 0.0;
    QpStatus qp_status = QpStatus::Optimal;
    std::vector<int> active_set;
    double kkt_residual = 0.0;
    bool fallback_used = false;
    bool request_q_reset = false;
    std::vector<PairSnapshot> pairs;
};

// Builds the per-agent QP over z = (u, omega, delta); Baseline drops the
// omega block and the deadlock rows. Assembly is total (no errors).
QpProblem assemble_qp(int i, const std::vector<AgentState>& snapshot,
                      ControllerMode mode, const ControllerParams& prm,
                      const Dynamics& dyn, const ClfModel& clf);

// Per-agent controller: owns the warm-start cache and the rotation-reset
// streak. decide() reads only the immutable snapshot, never another agent's
// in-step decision.
class AgentController {
  public:
    ControlDecision decide(int i, const std::vector<AgentState>& snapshot,
                           ControllerMode mode, const ControllerParams& prm,
                           const Dynamics& dyn, const ClfModel& clf);

  private:
    std::vector<int> warm_;
    int slack_streak_ = 0;
};

// Effective indicator value for the agent under the given mode.
double effective_zeta(int i, const std::vector<AgentState>& snapshot,
                      ControllerMode mode, const ControllerParams& prm,
                      const Dynamics& dyn, double* risk_out = nullptr);

}  // namespace dlock

#endif
