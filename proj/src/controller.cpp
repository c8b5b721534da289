#include "dlock/controller.hpp"

#include <algorithm>

namespace dlock {

const char* mode_name(ControllerMode m) {
    switch (m) {
        case ControllerMode::Baseline: return "baseline";
        case ControllerMode::AlwaysOn: return "always_on";
        case ControllerMode::Adaptive: return "adaptive";
    }
    return "?";
}

double effective_zeta(int i, const std::vector<AgentState>& snapshot,
                      ControllerMode mode, const ControllerParams& prm,
                      const Dynamics& dyn, double* risk_out) {
    const double R = risk(i, snapshot, dyn, prm);
    if (risk_out) *risk_out = R;
    if (mode == ControllerMode::AlwaysOn) return 1.0;
    if (prm.force_zeta) return *prm.force_zeta;
    return indicator(R, prm);
}

QpProblem assemble_qp(int i, const std::vector<AgentState>& snapshot,
                      ControllerMode mode, const ControllerParams& prm,
                      const Dynamics& dyn, const ClfModel& clf) {
    const AgentState& a = snapshot[i];
    const int m = dyn.m;
    const int s = so_dim(dyn.d);
    const bool baseline = (mode == ControllerMode::Baseline);
    const int n = baseline ? m + 1 : m + s + 1;
    const int idelta = n - 1;

    QpProblem qp;
    qp.H = Mat::Zero(n, n);
    for (int j = 0; j < m; ++j) qp.H(j, j) = 2.0;
    if (!baseline)
        for (int j = 0; j < s; ++j) qp.H(m + j, m + j) = 2.0 * prm.q;
    qp.H(idelta, idelta) = 2.0 * prm.p;
    qp.f = Vec::Zero(n);

    const Vec f = dyn.f(a.x);
    const Mat g = dyn.g(a.x);
    const Vec gV = clf.grad(a.x);
    const double LfV = gV.dot(f);
    const Vec LgV = g.transpose() * gV;
    const double V = clf.value(a.x);

    std::vector<Vec> rows;
    std::vector<double> rhs;
    std::vector<ConstraintLabel> labels;

    // CLF row
    {
        Vec row = Vec::Zero(n);
        double b = 0.0;
        if (baseline) {
            row.head(m) = LgV;
            row(idelta) = -1.0;
            b = -(LfV + prm.gamma(V));
        } else {
            const double zeta = effective_zeta(i, snapshot, mode, prm, dyn);
            const ClfQDerivative dq = clf_q_derivative_terms(a);
            const double Vq = clf_q_value(a);
            row.head(m) = (1.0 - zeta) * LgV + zeta * (g.transpose() * dq.grad_x_coeff);
            row.segment(m, s) = zeta * dq.grad_omega_coeff;
            row(idelta) = -1.0;
            b = -((1.0 - zeta) * (LfV + prm.gamma(V)) +
                  zeta * (dq.grad_x_coeff.dot(f) + prm.gamma(Vq)));
        }
        rows.push_back(row);
        rhs.push_back(b);
        labels.push_back({ConstraintKind::Clf, -1});
    }

    // Safety rows
    const int N = static_cast<int>(snapshot.size());
    for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        const PairLie lie = h_pair_lie(a, snapshot[j], dyn);
        const double h = h_pair(a, snapshot[j]);
        const double W = responsibility_weight(a, snapshot[j], prm);
        Vec row = Vec::Zero(n);
        row.head(m) = -lie.Lg_h;
        rows.push_back(row);
        rhs.push_back(lie.Lf_h + W * prm.alpha(h));
        labels.push_back({ConstraintKind::Safety, j});
    }

    // Deadlock rows, scaled by the indicator; dropped when it underflows the
    // floor, when the pair is beyond the barrier range, or when every
    // coefficient and the rhs are numerically vacuous.
    if (!baseline) {
        const double zeta = effective_zeta(i, snapshot, mode, prm, dyn);
        if (zeta >= prm.zeta_floor) {
            for (int j = 0; j < N; ++j) {
                if (j == i) continue;
                const DeadlockGeometry geo = aux_cbf(a, snapshot[j], dyn, clf, prm);
                if (geo.psi < prm.psi_floor) continue;
                Vec row = Vec::Zero(n);
                row.head(m) = -zeta * (g.transpose() * geo.grad_x_hD);
                row.segment(m, s) = -zeta * geo.grad_Q_hD;
                const double b = zeta * (geo.grad_x_hD.dot(f) + prm.beta(geo.h_D));
                const double scale = std::max(row.lpNorm<Eigen::Infinity>(), std::abs(b));
                if (scale < prm.row_floor) continue;
                rows.push_back(row);
                rhs.push_back(b);
                labels.push_back({ConstraintKind::Deadlock, j});
            }
        }
    }

    qp.A = Mat::Zero(static_cast<int>(rows.size()), n);
    qp.b = Vec::Zero(static_cast<int>(rows.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
        qp.A.row(static_cast<int>(r)) = rows[r].transpose();
        qp.b(static_cast<int>(r)) = rhs[r];
    }
    qp.labels = labels;
    return qp;
}

ControlDecision AgentController::decide(int i, const std::vector<AgentState>& snapshot,
                                        ControllerMode mode, const ControllerParams& prm,
                                        const Dynamics& dyn, const ClfModel& clf) {
    const int m = dyn.m;
    const int s = so_dim(dyn.d);
    ControlDecision dec;
    dec.u = Vec::Zero(m);
    dec.omega = Vec::Zero(s);

    dec.zeta = effective_zeta(i, snapshot, mode, prm, dyn, &dec.risk);

    const int N = static_cast<int>(snapshot.size());
    QpProblem qp = assemble_qp(i, snapshot, mode, prm, dyn, clf);
    std::vector<bool> row_included(N, false);
    for (const auto& l : qp.labels)
        if (l.kind == ConstraintKind::Deadlock) row_included[l.neighbor] = true;

    bool degenerate = false;
    bool any_deadlock_row = false;
    for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        PairSnapshot ps;
        ps.neighbor = j;
        ps.h = h_pair(snapshot[i], snapshot[j]);
        const DeadlockGeometry geo = aux_cbf(snapshot[i], snapshot[j], dyn, clf, prm);
        ps.D = geo.D;
        ps.h_D = geo.h_D;
        ps.deadlock_row_included = row_included[j];
        dec.pairs.push_back(ps);
        if (row_included[j]) any_deadlock_row = true;
        if (row_included[j] && geo.D <= prm.deg_tol) degenerate = true;
    }

    bool fallback = false;
    if (degenerate && mode != ControllerMode::Baseline) {
        fallback = true;
        dec.qp_status = QpStatus::Infeasible;
    } else {
        QpSolution sol = qp_solve(qp, warm_.empty() ? nullptr : &warm_);
        dec.qp_status = sol.status;
        if (sol.status == QpStatus::Optimal) {
            dec.u = sol.z.head(m);
            if (mode != ControllerMode::Baseline) dec.omega = sol.z.segment(m, s);
            dec.delta = sol.z(sol.z.size() - 1);
            dec.active_set = sol.active_set;
            dec.kkt_residual = sol.kkt_residual;
            warm_ = sol.active_set;
            // A feasible QP can still pin the agent at a multi-constraint
            // vertex (two touching neighbors plus a deadlock row at its
            // boundary). A stall inside an active interaction gets the same
            // treatment as infeasibility: rotate the virtual frame. A stall
            // with no deadlock row in range is the rotated-goal equilibrium
            // instead; there the right response is the reset streak below.
            if (mode != ControllerMode::Baseline && any_deadlock_row &&
                dec.zeta >= prm.zeta_floor && dec.u.norm() < prm.v_tol &&
                (snapshot[i].x - snapshot[i].goal).norm() > 1.0)
                fallback = true;
        } else {
            fallback = true;
        }
    }

    if (fallback) {
        dec.fallback_used = true;
        dec.u.setZero();
        dec.omega = (mode == ControllerMode::Baseline)
                        ? Vec::Zero(s)
                        : Vec::Constant(s, prm.omega_c);
        dec.delta = 0.0;
        warm_.clear();
    }

    // The virtual rotation resets once the resolution episode is over: the
    // indicator dropped below the floor, or every deadlock row stayed slack,
    // for q_reset_steps consecutive steps.
    bool deadlock_active = false;
    for (size_t r = 0; r < qp.labels.size(); ++r)
        if (qp.labels[r].kind == ConstraintKind::Deadlock && !fallback &&
            std::find(dec.active_set.begin(), dec.active_set.end(), static_cast<int>(r)) !=
                dec.active_set.end())
            deadlock_active = true;
    if (fallback && any_deadlock_row)
        deadlock_active = true;
    if (dec.zeta < prm.zeta_floor || !deadlock_active)
        ++slack_streak_;
    else
        slack_streak_ = 0;
    const bool q_rotated =
        (snapshot[i].Q - Mat::Identity(dyn.d, dyn.d)).norm() > 1e-12;
    dec.request_q_reset = q_rotated && slack_streak_ >= prm.q_reset_steps;
    return dec;
}

}  // namespace dlock
