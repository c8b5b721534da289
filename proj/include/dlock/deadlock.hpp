#ifndef DLOCK_DEADLOCK_HPP
#define DLOCK_DEADLOCK_HPP

#include "dlock/cbf.hpp"

namespace dlock {

struct PsiValue {
    double psi = 1.0;
    double psi_prime = 0.0;
};

// Gaussian weighting psi(h) = exp(-(h/scale)^2); positive, psi'(0)=0, decays
// to zero at range. Negative h is clamped to 0 before evaluation.
PsiValue psi_fn(double h, const ControllerParams& prm);

struct DeadlockGeometry {
    double D = 0.0;       // collinearity measure, >= 0
    double h_D = 0.0;     // psi(h) (D - epsilon)
    Vec grad_x_hD;        // d h_D / d x_i
    Vec grad_Q_hD;        // d h_D / d(rotation), one entry per so(d) dof
    Vec grad_x_D;
    Vec grad_Q_D;
    double psi = 1.0;
    double psi_prime = 0.0;
};

// D = 0.5 gradVq^T G (P_f + P_{G grad h}) G gradVq; zero exactly when
// f, G gradVq and G grad h are simultaneously collinear.
double collinearity(const AgentState& ai, const AgentState& aj,
                    const Dynamics& dyn, const ClfModel& clf);

// Auxiliary barrier h_D with its full analytic gradient stack.
DeadlockGeometry aux_cbf(const AgentState& ai, const AgentState& aj,
                         const Dynamics& dyn, const ClfModel& clf,
                         const ControllerParams& prm);

struct EquilibriumDiagnostics {
    double F_V = 0.0;
    double F_h = 0.0;
    double Delta = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    bool lambdas_defined = true;      // false when Delta is singular
    bool in_Omega_clf_only = false;   // CLF active, CBF inactive region
    bool in_Omega_clf_cbf = false;    // both constraints active region
    bool boundary_ambiguous = false;  // classification within 1e-12 of a set boundary
    bool near_boundary_equilibrium = false;
};

// Closed-form equilibrium classifiers for the baseline controller. Evaluated
// against the plain task CLF V (not V_q).
EquilibriumDiagnostics equilibrium_diagnostics(const AgentState& ai, const AgentState& aj,
                                               const Dynamics& dyn, const ClfModel& clf,
                                               const ControllerParams& prm);

}  // namespace dlock

#endif
