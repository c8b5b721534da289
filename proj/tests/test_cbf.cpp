#include <random>

#include "dlock/cbf.hpp"
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
}  // namespace

TEST_CASE("clf: value and finite-difference gradient") {
    std::mt19937_64 rng(31);
    for (int k = 0; k < 200; ++k) {
        AgentState a = AgentState::make(rand_vec(rng, 2, 5.0), rand_vec(rng, 2, 5.0), 1.0);
        CHECK(clf_value(a) == doctest::Approx((a.x - a.goal).squaredNorm()));
        const Vec g = clf_grad(a);
        const double eps = 1e-6;
        for (int i = 0; i < 2; ++i) {
            AgentState ap = a, am = a;
            ap.x(i) += eps;
            am.x(i) -= eps;
            const double fd = (clf_value(ap) - clf_value(am)) / (2.0 * eps);
            CHECK(g(i) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("clf_q: reduces to clf at identity, derivative terms match finite differences") {
    std::mt19937_64 rng(37);
    for (int k = 0; k < 200; ++k) {
        AgentState a = AgentState::make(rand_vec(rng, 2, 5.0), rand_vec(rng, 2, 5.0), 1.0);
        CHECK(clf_q_value(a) == doctest::Approx(clf_value(a)));

        a.Q = rand_rotation2(rng);
        const ClfQDerivative d = clf_q_derivative_terms(a);
        const double eps = 1e-6;
        for (int i = 0; i < 2; ++i) {
            AgentState ap = a, am = a;
            ap.x(i) += eps;
            am.x(i) -= eps;
            const double fd = (clf_q_value(ap) - clf_q_value(am)) / (2.0 * eps);
            CHECK(d.grad_x_coeff(i) == doctest::Approx(fd).epsilon(1e-6));
        }
        // Q' = Q hat(w): perturb along Q exp(eps hat(w))
        Vec w(1);
        w << 1.0;
        AgentState ap = a, am = a;
        ap.Q = integrate_rotation(a.Q, w, eps);
        am.Q = integrate_rotation(a.Q, w, -eps);
        const double fd = (clf_q_value(ap) - clf_q_value(am)) / (2.0 * eps);
        CHECK(d.grad_omega_coeff(0) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("h_pair: hand value, symmetry, translation invariance") {
    AgentState a = AgentState::make(Vec::Zero(2), Vec::Zero(2), 1.0);
    Vec xb(2);
    xb << 4.0, 0.0;
    AgentState b = AgentState::make(xb, Vec::Zero(2), 1.0);
    CHECK(h_pair(a, b) == doctest::Approx(16.0 - 4.0));
    CHECK(h_pair(a, b) == doctest::Approx(h_pair(b, a)));

    std::mt19937_64 rng(41);
    for (int k = 0; k < 100; ++k) {
        const Vec shift = rand_vec(rng, 2, 10.0);
        AgentState a2 = a, b2 = b;
        a2.x += shift;
        b2.x += shift;
        CHECK(h_pair(a2, b2) == doctest::Approx(h_pair(a, b)));
        CHECK((h_pair_grad(a2, b2) - h_pair_grad(a, b)).norm() < 1e-12);
    }
}

TEST_CASE("h_pair_lie: single integrator reduces to the gradient") {
    std::mt19937_64 rng(43);
    Dynamics dyn = Dynamics::single_integrator(2);
    for (int k = 0; k < 100; ++k) {
        AgentState a = AgentState::make(rand_vec(rng, 2, 5.0), Vec::Zero(2), 1.0);
        AgentState b = AgentState::make(rand_vec(rng, 2, 5.0), Vec::Zero(2), 1.0);
        PairLie l = h_pair_lie(a, b, dyn);
        CHECK(l.Lf_h == 0.0);
        CHECK((l.Lg_h - h_pair_grad(a, b)).norm() < 1e-14);
    }
}

TEST_CASE("risk: stationary distant agents sit at the offset minus the barrier term") {
    Dynamics dyn = Dynamics::single_integrator(2);
    ControllerParams prm;
    Vec xb(2);
    xb << 100.0, 0.0;
    std::vector<AgentState> agents{AgentState::make(Vec::Zero(2), Vec::Zero(2), 1.0),
                                   AgentState::make(xb, Vec::Zero(2), 1.0)};
    const double h = 100.0 * 100.0 - 4.0;
    CHECK(risk(0, agents, dyn, prm) == doctest::Approx(-prm.alpha(h) + prm.phi));
}

TEST_CASE("risk: head-on closed form") {
    Dynamics dyn = Dynamics::single_integrator(2);
    ControllerParams prm;
    const double dist = 6.0, v = 1.5, r = 1.0;
    Vec xb(2), ua(2), ub(2);
    xb << dist, 0.0;
    ua << v, 0.0;
    ub << -v, 0.0;
    std::vector<AgentState> agents{AgentState::make(Vec::Zero(2), Vec::Zero(2), r),
                                   AgentState::make(xb, Vec::Zero(2), r)};
    agents[0].last_u = ua;
    agents[1].last_u = ub;
    const double h = dist * dist - 4.0 * r * r;
    // h' = 2(x_i - x_j).(u_i - u_j) = -4 dist v
    CHECK(risk(0, agents, dyn, prm) ==
          doctest::Approx(4.0 * dist * v - prm.alpha(h) + prm.phi));
    CHECK(risk(1, agents, dyn, prm) == doctest::Approx(risk(0, agents, dyn, prm)));
}

TEST_CASE("risk: common translation of both agents changes nothing") {
    Dynamics dyn = Dynamics::single_integrator(2);
    ControllerParams prm;
    std::mt19937_64 rng(47);
    for (int k = 0; k < 50; ++k) {
        std::vector<AgentState> agents{
            AgentState::make(rand_vec(rng, 2, 5.0), Vec::Zero(2), 1.0),
            AgentState::make(rand_vec(rng, 2, 5.0) + Vec::Constant(2, 10.0), Vec::Zero(2), 1.0)};
        agents[0].last_u = rand_vec(rng, 2);
        agents[1].last_u = rand_vec(rng, 2);
        const double base = risk(0, agents, dyn, prm);
        const Vec drift = rand_vec(rng, 2, 3.0);
        agents[0].last_u += drift;
        agents[1].last_u += drift;
        CHECK(risk(0, agents, dyn, prm) == doctest::Approx(base).epsilon(1e-10));
    }
}

TEST_CASE("risk: single agent degenerates to the offset") {
    Dynamics dyn = Dynamics::single_integrator(2);
    ControllerParams prm;
    std::vector<AgentState> agents{AgentState::make(Vec::Zero(2), Vec::Zero(2), 1.0)};
    CHECK(risk(0, agents, dyn, prm) == prm.phi);
}

TEST_CASE("indicator: midpoint, known value, saturation, monotonicity") {
    ControllerParams prm;
    prm.c = 0.0;
    prm.t = 1.0;
    CHECK(indicator(0.0, prm) == doctest::Approx(0.5));
    CHECK(indicator(std::log(3.0), prm) == doctest::Approx(0.75));
    CHECK(indicator(1000.0, prm) == doctest::Approx(1.0));
    CHECK(indicator(-1000.0, prm) == doctest::Approx(0.0));
    CHECK(indicator(-1000.0, prm) >= 0.0);
    CHECK(std::isfinite(indicator(-1e6, prm)));
    CHECK(std::isfinite(indicator(1e6, prm)));

    double prev = -1.0;
    for (double R = -20.0; R <= 20.0; R += 0.25) {
        const double z = indicator(R, prm);
        CHECK(z > prev);
        prev = z;
    }

    prm.c = 2.0;
    prm.t = 3.0;
    CHECK(indicator(2.0, prm) == doctest::Approx(0.5));
}

TEST_CASE("responsibility_weight: frozen obstacles shift the burden") {
    ControllerParams prm;
    AgentState a = AgentState::make(Vec::Zero(2), Vec::Zero(2), 1.0);
    AgentState b = a;
    CHECK(responsibility_weight(a, b, prm) == prm.w_default);
    b.frozen = true;
    CHECK(responsibility_weight(a, b, prm) == 1.0);
    CHECK(responsibility_weight(b, a, prm) == 0.0);
}
