#ifndef DLOCK_CBF_HPP
#define DLOCK_CBF_HPP

#include <functional>
#include <optional>
#include <vector>

#include "dlock/linalg.hpp"

namespace dlock {

// Linear extended class-K function k*s. Kept as a struct so gains stay named.
struct ClassK {
    double gain = 1.0;
    double operator()(double s) const { return gain * s; }
};

// Control-affine dynamics x' = f(x) + g(x) u. The simulation uses single
// integrators; the general hooks feed the Gamma terms of the deadlock module.
struct Dynamics {
    int d = 2;
    int m = 2;
    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> g;
    std::function<Mat(const Vec&)> df;       // Jacobian of f
    bool state_independent_g = true;          // Gamma terms vanish
    std::function<std::vector<Mat>(const Vec&)> dg;  // Jacobian per column of g

    static Dynamics single_integrator(int d) {
        Dynamics dyn;
        dyn.d = d;
        dyn.m = d;
        dyn.f = [d](const Vec&) { return Vec::Zero(d); };
        dyn.g = [d](const Vec&) { return Mat::Identity(d, d); };
        dyn.df = [d](const Vec&) { return Mat::Zero(d, d); };
        dyn.state_independent_g = true;
        return dyn;
    }
};

// Task CLF seam. Only the goal-distance form ships, but the deadlock module
// consumes it through value/grad/hess so other twice-differentiable choices fit.
struct ClfModel {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
    std::function<Mat(const Vec&)> hess;

    static ClfModel goal_quadratic(const Vec& goal) {
        ClfModel m;
        m.value = [goal](const Vec& x) { return (x - goal).squaredNorm(); };
        m.grad = [goal](const Vec& x) { return Vec(2.0 * (x - goal)); };
        const int d = static_cast<int>(goal.size());
        m.hess = [d](const Vec&) { return Mat(2.0 * Mat::Identity(d, d)); };
        return m;
    }
};

struct AgentState {
    Vec x;           // position [m]
    Mat Q;           // virtual rotation, SO(d)
    Vec goal;        // [m]
    double radius = 1.0;
    Vec last_u;      // executed control from the previous step [m/s]
    Vec last_omega;  // [rad/s]
    bool frozen = false;  // static obstacle: never moves, takes no responsibility

    static AgentState make(const Vec& x, const Vec& goal, double radius) {
        AgentState a;
        const int d = static_cast<int>(x.size());
        a.x = x;
        a.Q = Mat::Identity(d, d);
        a.goal = goal;
        a.radius = radius;
        a.last_u = Vec::Zero(d);
        a.last_omega = Vec::Zero(so_dim(d));
        return a;
    }
};

struct ControllerParams {
    ClassK gamma{0.2};   // CLF decrease rate
    ClassK alpha{1.0};   // safety CBF decay rate
    ClassK beta{1.0};    // auxiliary CBF decay rate
    double p = 10.0;     // slack weight
    double q = 30.0;     // rotational control weight
    double phi = 5.0;    // risk offset
    double c = -20.0;    // indicator sigmoid center
    double t = 2.0;      // indicator sigmoid steepness
    double epsilon = 5.0;      // collinearity barrier threshold
    double omega_c = 0.5;      // fallback rotation rate [rad/s]
    double psi_scale = 30.0;   // interaction range of the deadlock barrier
    double dt = 0.02;          // [s]
    double w_default = 0.5;    // pairwise responsibility weight

    double zeta_floor = 1e-9;  // deadlock rows below this indicator are dropped
    double psi_floor = 0.1;    // deadlock rows beyond this barrier range are dropped
    double row_floor = 1e-12;  // rows with smaller coefficients and rhs are vacuous
    double deg_tol = 1e-8;     // collinearity level treated as the degenerate case
    int q_reset_steps = 50;    // slack steps before the virtual rotation resets
    double q_max_angle = 1.5707963267948966;  // virtual rotation windup cap [rad]
    double h_tol = 0.5;        // |h| threshold for the equilibrium classifier
    double v_tol = 1e-3;       // speed threshold for the equilibrium classifier

    std::optional<double> force_zeta;  // test hook; AlwaysOn pins it to 1
};

// Responsibility weight of agent i against agent j. A mover takes the full
// constraint against a frozen obstacle.
inline double responsibility_weight(const AgentState& ai, const AgentState& aj,
                                    const ControllerParams& prm) {
    if (aj.frozen) return 1.0;
    if (ai.frozen) return 0.0;
    return prm.w_default;
}

// V(x) = ||x - goal||^2
inline double clf_value(const AgentState& a) {
    return (a.x - a.goal).squaredNorm();
}

inline Vec clf_grad(const AgentState& a) {
    return 2.0 * (a.x - a.goal);
}

// V_q(x, Q) = V(Q x)
inline double clf_q_value(const AgentState& a) {
    return (a.Q * a.x - a.goal).squaredNorm();
}

// Row coefficients of V_q' = cx . x' + cw . w under Q' = Q hat(w).
struct ClfQDerivative {
    Vec grad_x_coeff;      // Q^T grad V(Qx), multiplies x'
    Vec grad_omega_coeff;  // O_d(x)^T Q^T grad V(Qx), multiplies w
};

inline ClfQDerivative clf_q_derivative_terms(const AgentState& a) {
    const Vec gv = 2.0 * (a.Q * a.x - a.goal);
    ClfQDerivative d;
    d.grad_x_coeff = a.Q.transpose() * gv;
    d.grad_omega_coeff = o_d(a.x).transpose() * d.grad_x_coeff;
    return d;
}

// h_ij = ||x_i - x_j||^2 - (r_i + r_j)^2
inline double h_pair(const AgentState& ai, const AgentState& aj) {
    const double rr = ai.radius + aj.radius;
    return (ai.x - aj.x).squaredNorm() - rr * rr;
}

inline Vec h_pair_grad(const AgentState& ai, const AgentState& aj) {
    return 2.0 * (ai.x - aj.x);
}

struct PairLie {
    double Lf_h = 0.0;
    Vec Lg_h;  // row coefficients on u_i
};

inline PairLie h_pair_lie(const AgentState& ai, const AgentState& aj, const Dynamics& dyn) {
    const Vec gh = h_pair_grad(ai, aj);
    PairLie l;
    l.Lf_h = gh.dot(dyn.f(ai.x));
    l.Lg_h = dyn.g(ai.x).transpose() * gh;
    return l;
}

// h_ij' evaluated with both agents' executed controls from the last step.
inline double h_pair_rate_last(const AgentState& ai, const AgentState& aj, const Dynamics& dyn) {
    const Vec vi = dyn.f(ai.x) + dyn.g(ai.x) * ai.last_u;
    const Vec vj = dyn.f(aj.x) + dyn.g(aj.x) * aj.last_u;
    return 2.0 * (ai.x - aj.x).dot(vi - vj);
}

// CBF-inspired risk: mean over neighbors of (-h' - alpha(h)) plus the offset.
// Single-agent scenarios degenerate to the offset itself.
inline double risk(int i, const std::vector<AgentState>& agents, const Dynamics& dyn,
                   const ControllerParams& prm) {
    const int n = static_cast<int>(agents.size());
    if (n < 2) return prm.phi;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double h = h_pair(agents[i], agents[j]);
        acc += -h_pair_rate_last(agents[i], agents[j], dyn) - prm.alpha(h);
    }
    return acc / (n - 1) + prm.phi;
}

// Sigmoid indicator, overflow-free in both tails.
inline double indicator(double R, const ControllerParams& prm) {
    const double a = prm.t * (R - prm.c);
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

}  // namespace dlock

#endif
