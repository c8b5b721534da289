#include "dlock/deadlock.hpp"

namespace dlock {

PsiValue psi_fn(double h, const ControllerParams& prm) {
    PsiValue out;
    const double s = prm.psi_scale;
    const double hc = std::max(h, 0.0);
    out.psi = std::exp(-(hc / s) * (hc / s));
    out.psi_prime = (h > 0.0) ? -2.0 * hc / (s * s) * out.psi : 0.0;
    return out;
}

namespace {

struct PairGeometry {
    Vec grad_Vq;   // Q^T grad V(Qx)
    Mat H_Vq;      // Q^T H_V Q
    Vec grad_h;    // 2 (x_i - x_j)
    Mat H_h;
    Vec f;
    Mat G;         // g g^T
    Vec v;         // G grad_Vq
    Vec w;         // G grad_h
};

PairGeometry pair_geometry(const AgentState& ai, const AgentState& aj,
                           const Dynamics& dyn, const ClfModel& clf) {
    PairGeometry p;
    const Vec xr = ai.Q * ai.x;
    p.grad_Vq = ai.Q.transpose() * clf.grad(xr);
    p.H_Vq = ai.Q.transpose() * clf.hess(xr) * ai.Q;
    p.grad_h = 2.0 * (ai.x - aj.x);
    p.H_h = 2.0 * Mat::Identity(dyn.d, dyn.d);
    p.f = dyn.f(ai.x);
    const Mat g = dyn.g(ai.x);
    p.G = g * g.transpose();
    p.v = p.G * p.grad_Vq;
    p.w = p.G * p.grad_h;
    return p;
}

}  // namespace

double collinearity(const AgentState& ai, const AgentState& aj,
                    const Dynamics& dyn, const ClfModel& clf) {
    const PairGeometry p = pair_geometry(ai, aj, dyn, clf);
    const Mat P = projection(p.f) + projection(p.w);
    return 0.5 * p.v.dot(P * p.v);
}

DeadlockGeometry aux_cbf(const AgentState& ai, const AgentState& aj,
                         const Dynamics& dyn, const ClfModel& clf,
                         const ControllerParams& prm) {
    const PairGeometry p = pair_geometry(ai, aj, dyn, clf);
    const Mat P_fw = projection(p.f) + projection(p.w);
    const Mat P_v = projection(p.v);

    DeadlockGeometry out;
    out.D = 0.5 * p.v.dot(P_fw * p.v);

    Mat gamma_v = Mat::Zero(dyn.d, dyn.d);
    Mat gamma_h = Mat::Zero(dyn.d, dyn.d);
    if (!dyn.state_independent_g && dyn.dg) {
        const Mat g = dyn.g(ai.x);
        const auto grads = dyn.dg(ai.x);
        gamma_v = gamma_op(g, grads, p.grad_Vq);
        gamma_h = gamma_op(g, grads, p.grad_h);
    }
    const Mat df = dyn.df(ai.x);

    out.grad_x_D = (p.H_Vq * p.G + gamma_v.transpose()) * (P_fw * p.v) +
                   (p.H_h * p.G + gamma_h.transpose()) * (P_v * p.w) +
                   df.transpose() * (P_v * p.f);
    out.grad_Q_D = (p.H_Vq * o_d(ai.x) - o_d(p.grad_Vq)).transpose() * (p.G * (P_fw * p.v));

    const double h = h_pair(ai, aj);
    const PsiValue ps = psi_fn(h, prm);
    out.psi = ps.psi;
    out.psi_prime = ps.psi_prime;
    out.h_D = ps.psi * (out.D - prm.epsilon);
    out.grad_x_hD = ps.psi * out.grad_x_D + ps.psi_prime * (out.D - prm.epsilon) * p.grad_h;
    out.grad_Q_hD = ps.psi * out.grad_Q_D;
    return out;
}

EquilibriumDiagnostics equilibrium_diagnostics(const AgentState& ai, const AgentState& aj,
                                               const Dynamics& dyn, const ClfModel& clf,
                                               const ControllerParams& prm) {
    EquilibriumDiagnostics out;
    const Vec gV = clf.grad(ai.x);
    const Vec gh = 2.0 * (ai.x - aj.x);
    const Vec f = dyn.f(ai.x);
    const Mat g = dyn.g(ai.x);
    const Mat G = g * g.transpose();

    const double V = clf.value(ai.x);
    const double h = h_pair(ai, aj);
    const Vec LgV = g.transpose() * gV;
    const Vec Lgh = g.transpose() * gh;
    out.F_V = gV.dot(f) + prm.gamma(V);
    out.F_h = gh.dot(f) + prm.alpha(h);

    const double cross = gV.dot(G * gh);
    const double pv = 1.0 / prm.p + LgV.squaredNorm();
    out.Delta = cross * cross - pv * Lgh.squaredNorm();

    constexpr double kBoundaryTol = 1e-12;
    if (gh.norm() <= 1e-12) {
        out.lambda1 = out.F_V / pv;
        out.lambda2 = 0.0;  // any non-negative value satisfies the condition
    } else if (std::abs(out.Delta) <= 1e-12) {
        out.lambdas_defined = false;
    } else {
        out.lambda1 = (out.F_h * cross - out.F_V * Lgh.squaredNorm()) / out.Delta;
        out.lambda2 = (out.F_h * pv - out.F_V * cross) / out.Delta;
    }

    const double lhs = cross / pv * out.F_V;
    out.in_Omega_clf_only = (lhs < out.F_h + kBoundaryTol) && (out.F_V >= -kBoundaryTol);
    out.in_Omega_clf_cbf = out.lambdas_defined &&
                           out.lambda1 >= -kBoundaryTol && out.lambda2 >= -kBoundaryTol;
    out.boundary_ambiguous = std::abs(lhs - out.F_h) <= kBoundaryTol ||
                             std::abs(out.F_V) <= kBoundaryTol ||
                             (out.lambdas_defined &&
                              (std::abs(out.lambda1) <= kBoundaryTol ||
                               std::abs(out.lambda2) <= kBoundaryTol));

    const Vec vel = f + g * ai.last_u;
    out.near_boundary_equilibrium = out.lambdas_defined &&
                                    out.lambda1 >= 0.0 && out.lambda2 >= 0.0 &&
                                    std::abs(h) <= prm.h_tol && vel.norm() <= prm.v_tol;
    return out;
}

}  // namespace dlock
