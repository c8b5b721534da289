#include <random>

#include "dlock/deadlock.hpp"
#include "doctest.h"

using namespace dlock;

namespace {

Vec rand_vec(std::mt19937_64& rng, int d, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = nd(rng);
    return v;
}

Mat rand_rotation2(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> th(0.0, 2.0 * std::numbers::pi);
    const double a = th(rng);
    Mat Q(2, 2);
    Q << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return Q;
}

struct RandomPair {
    AgentState ai;
    AgentState aj;
};

// Generic pair with nonzero separation; rotated Q on agent i.
RandomPair random_pair(std::mt19937_64& rng) {
    RandomPair p;
    Vec xi = rand_vec(rng, 2, 5.0);
    Vec xj = xi + rand_vec(rng, 2, 4.0);
    while ((xj - xi).norm() < 0.5) xj = xi + rand_vec(rng, 2, 4.0);
    p.ai = AgentState::make(xi, rand_vec(rng, 2, 5.0), 1.0);
    p.aj = AgentState::make(xj, rand_vec(rng, 2, 5.0), 1.0);
    p.ai.Q = rand_rotation2(rng);
    return p;
}

}  // namespace

TEST_CASE("psi: unit at contact, flat derivative at zero, decays, clamps negatives") {
    ControllerParams prm;
    prm.psi_scale = 1.0;
    CHECK(psi_fn(0.0, prm).psi == doctest::Approx(1.0));
    CHECK(psi_fn(0.0, prm).psi_prime == doctest::Approx(0.0));
    CHECK(psi_fn(-3.0, prm).psi == doctest::Approx(1.0));
    CHECK(psi_fn(-3.0, prm).psi_prime == 0.0);
    CHECK(psi_fn(1.0, prm).psi == doctest::Approx(std::exp(-1.0)));
    CHECK(psi_fn(10.0, prm).psi < psi_fn(1.0, prm).psi);
    CHECK(psi_fn(100.0, prm).psi >= 0.0);

    // finite-difference check of psi'
    for (double h : {0.3, 1.0, 2.5, 5.0}) {
        const double eps = 1e-6;
        const double fd = (psi_fn(h + eps, prm).psi - psi_fn(h - eps, prm).psi) / (2.0 * eps);
        CHECK(psi_fn(h, prm).psi_prime == doctest::Approx(fd).epsilon(1e-6));
    }

    prm.psi_scale = 3.0;
    CHECK(psi_fn(3.0, prm).psi == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("collinearity: hand case with perpendicular gradients") {
    // f = 0, G = I, gradVq = (-2, 0), grad h = (0, -2)
    Dynamics dyn = Dynamics::single_integrator(2);
    Vec xi = Vec::Zero(2), goal(2), xj(2);
    goal << 1.0, 0.0;
    xj << 0.0, 1.0;
    AgentState ai = AgentState::make(xi, goal, 0.1);
    AgentState aj = AgentState::make(xj, goal, 0.1);
    ClfModel clf = ClfModel::goal_quadratic(goal);
    // D = 0.5 (|v|^2 |w|^2 - (v.w)^2) = 0.5 * 4 * 4 = 8
    CHECK(collinearity(ai, aj, dyn, clf) == doctest::Approx(8.0));
}

TEST_CASE("collinearity: nonnegative, zero exactly on collinear configurations") {
    Dynamics dyn = Dynamics::single_integrator(2);
    std::mt19937_64 rng(53);
    for (int k = 0; k < 500; ++k) {
        RandomPair p = random_pair(rng);
        ClfModel clf = ClfModel::goal_quadratic(p.ai.goal);
        const double D = collinearity(p.ai, p.aj, dyn, clf);
        CHECK(D >= -1e-9);

        // D vanishes iff the 2x2 wedge of v = G gradVq and w = G grad h does
        const Vec v = p.ai.Q.transpose() * (2.0 * (p.ai.Q * p.ai.x - p.ai.goal));
        const Vec w = 2.0 * (p.ai.x - p.aj.x);
        const double wedge = v(0) * w(1) - v(1) * w(0);
        if (D < 1e-10) {
            CHECK(std::abs(wedge) < 2e-5);
        } else {
            CHECK(0.5 * wedge * wedge == doctest::Approx(D).epsilon(1e-9));
        }
    }
}

TEST_CASE("collinearity: exactly zero on a head-on configuration") {
    Dynamics dyn = Dynamics::single_integrator(2);
    Vec xi(2), xj(2), goal(2);
    xi << -10.0, 0.0;
    xj << 10.0, 0.0;
    goal << 10.0, 0.0;
    AgentState ai = AgentState::make(xi, goal, 1.0);
    AgentState aj = AgentState::make(xj, Vec(-goal), 1.0);
    ClfModel clf = ClfModel::goal_quadratic(goal);
    CHECK(collinearity(ai, aj, dyn, clf) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("collinearity: invariant to flipping the goal through the agent") {
    Dynamics dyn = Dynamics::single_integrator(2);
    std::mt19937_64 rng(59);
    for (int k = 0; k < 100; ++k) {
        RandomPair p = random_pair(rng);
        p.ai.Q = Mat::Identity(2, 2);
        ClfModel clf = ClfModel::goal_quadratic(p.ai.goal);
        const double D1 = collinearity(p.ai, p.aj, dyn, clf);
        AgentState flipped = p.ai;
        flipped.goal = 2.0 * p.ai.x - p.ai.goal;  // gradVq -> -gradVq
        ClfModel clf2 = ClfModel::goal_quadratic(flipped.goal);
        const double D2 = collinearity(flipped, p.aj, dyn, clf2);
        CHECK(D1 == doctest::Approx(D2).epsilon(1e-9));
    }
}

TEST_CASE("aux_cbf: barrier value and psi bookkeeping") {
    Dynamics dyn = Dynamics::single_integrator(2);
    std::mt19937_64 rng(61);
    ControllerParams prm;
    for (int k = 0; k < 200; ++k) {
        RandomPair p = random_pair(rng);
        ClfModel clf = ClfModel::goal_quadratic(p.ai.goal);
        DeadlockGeometry g = aux_cbf(p.ai, p.aj, dyn, clf, prm);
        const double h = h_pair(p.ai, p.aj);
        PsiValue psi = psi_fn(h, prm);
        CHECK(g.psi == doctest::Approx(psi.psi));
        CHECK(g.D == doctest::Approx(collinearity(p.ai, p.aj, dyn, clf)).epsilon(1e-12));
        CHECK(g.h_D == doctest::Approx(psi.psi * (g.D - prm.epsilon)).epsilon(1e-12));
    }
}

TEST_CASE("aux_cbf: analytic gradients match finite differences") {
    Dynamics dyn = Dynamics::single_integrator(2);
    std::mt19937_64 rng(67);
    ControllerParams prm;
    const double eps = 1e-6;
    int checked = 0;
    for (int k = 0; k < 300; ++k) {
        RandomPair p = random_pair(rng);
        ClfModel clf = ClfModel::goal_quadratic(p.ai.goal);
        DeadlockGeometry g = aux_cbf(p.ai, p.aj, dyn, clf, prm);

        auto rel_ok = [](double analytic, double fd) {
            return std::abs(analytic - fd) <= 1e-5 * std::max(1.0, std::abs(fd));
        };

        for (int i = 0; i < 2; ++i) {
            AgentState ap = p.ai, am = p.ai;
            ap.x(i) += eps;
            am.x(i) -= eps;
            DeadlockGeometry gp = aux_cbf(ap, p.aj, dyn, clf, prm);
            DeadlockGeometry gm = aux_cbf(am, p.aj, dyn, clf, prm);
            CHECK_MESSAGE(rel_ok(g.grad_x_D(i), (gp.D - gm.D) / (2.0 * eps)), "grad_x_D ", k);
            CHECK_MESSAGE(rel_ok(g.grad_x_hD(i), (gp.h_D - gm.h_D) / (2.0 * eps)),
                          "grad_x_hD ", k);
        }

        Vec wdir(1);
        wdir << 1.0;
        AgentState qp = p.ai, qm = p.ai;
        qp.Q = integrate_rotation(p.ai.Q, wdir, eps);
        qm.Q = integrate_rotation(p.ai.Q, wdir, -eps);
        DeadlockGeometry gp = aux_cbf(qp, p.aj, dyn, clf, prm);
        DeadlockGeometry gm = aux_cbf(qm, p.aj, dyn, clf, prm);
        CHECK_MESSAGE(rel_ok(g.grad_Q_D(0), (gp.D - gm.D) / (2.0 * eps)), "grad_Q_D ", k);
        CHECK_MESSAGE(rel_ok(g.grad_Q_hD(0), (gp.h_D - gm.h_D) / (2.0 * eps)), "grad_Q_hD ", k);
        ++checked;
    }
    CHECK(checked == 300);
}

TEST_CASE("equilibrium_diagnostics: symmetric boundary stall classified as equilibrium") {
    Dynamics dyn = Dynamics::single_integrator(2);
    ControllerParams prm;
    Vec xi(2), xj(2), goal(2);
    xi << -1.0, 0.0;
    xj << 1.0, 0.0;
    goal << 10.0, 0.0;
    AgentState ai = AgentState::make(xi, goal, 1.0);  // h = 4 - 4 = 0
    AgentState aj = AgentState::make(xj, Vec(-goal), 1.0);
    ClfModel clf = ClfModel::goal_quadratic(goal);
    EquilibriumDiagnostics d = equilibrium_diagnostics(ai, aj, dyn, clf, prm);
    REQUIRE(d.lambdas_defined);
    // hand values: F_V = gamma * 121, F_h = 0, cross = 88, Delta = -1.6
    CHECK(d.F_V == doctest::Approx(prm.gamma(121.0)));
    CHECK(d.F_h == doctest::Approx(0.0));
    CHECK(d.Delta == doctest::Approx(88.0 * 88.0 - (1.0 / prm.p + 484.0) * 16.0));
    CHECK(d.lambda1 >= 0.0);
    CHECK(d.lambda2 >= 0.0);
    CHECK(d.near_boundary_equilibrium);
}

TEST_CASE("equilibrium_diagnostics: moving or separated agents are not flagged") {
    Dynamics dyn = Dynamics::single_integrator(2);
    ControllerParams prm;
    Vec xi(2), xj(2), goal(2);
    xi << -8.0, 0.0;
    xj << 8.0, 0.0;
    goal << 10.0, 0.0;
    AgentState ai = AgentState::make(xi, goal, 1.0);
    AgentState aj = AgentState::make(xj, Vec(-goal), 1.0);
    ClfModel clf = ClfModel::goal_quadratic(goal);
    // far from the boundary: |h| large
    CHECK_FALSE(equilibrium_diagnostics(ai, aj, dyn, clf, prm).near_boundary_equilibrium);

    // at the boundary but moving
    ai.x << -1.0, 0.0;
    aj.x << 1.0, 0.0;
    ai.last_u << 0.5, 0.0;
    CHECK_FALSE(equilibrium_diagnostics(ai, aj, dyn, clf, prm).near_boundary_equilibrium);
}

TEST_CASE("equilibrium_diagnostics: coincident positions take the grad-h zero branch") {
    Dynamics dyn = Dynamics::single_integrator(2);
    ControllerParams prm;
    Vec x(2), goal(2);
    x << 3.0, 0.0;
    goal << 10.0, 0.0;
    AgentState ai = AgentState::make(x, goal, 1.0);
    AgentState aj = AgentState::make(x, goal, 1.0);
    ClfModel clf = ClfModel::goal_quadratic(goal);
    EquilibriumDiagnostics d = equilibrium_diagnostics(ai, aj, dyn, clf, prm);
    const double Fv = prm.gamma(49.0);
    const double pv = 1.0 / prm.p + 196.0;  // |L_gV|^2 = |2(x-goal)|^2
    CHECK(d.lambda1 == doctest::Approx(Fv / pv));
    CHECK(d.lambda2 == doctest::Approx(0.0));
}
