#include "dlock/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dlock {

namespace {

constexpr double kFeasTol = 1e-8;
constexpr double kActiveTol = 1e-9;
constexpr double kMultTol = 1e-10;

Mat regularized(const Mat& H) {
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    if (es.eigenvalues().minCoeff() < 1e-12)
        return H + 1e-10 * Mat::Identity(H.rows(), H.cols());
    return H;
}

// Solve the equality-constrained subproblem on working set W:
//   min 0.5 z^T H z + f^T z  s.t.  A_W z = b_W
// Returns false when the KKT system is singular.
bool solve_eqp(const Mat& H, const Vec& f, const Mat& A, const Vec& b,
               const std::vector<int>& W, Vec* z, Vec* mu) {
    const int n = static_cast<int>(H.rows());
    const int w = static_cast<int>(W.size());
    Mat K = Mat::Zero(n + w, n + w);
    K.topLeftCorner(n, n) = H;
    Vec rhs(n + w);
    rhs.head(n) = -f;
    for (int j = 0; j < w; ++j) {
        K.block(0, n + j, n, 1) = A.row(W[j]).transpose();
        K.block(n + j, 0, 1, n) = A.row(W[j]);
        rhs(n + j) = b(W[j]);
    }
    Eigen::FullPivLU<Mat> lu(K);
    if (!lu.isInvertible()) return false;
    Vec sol = lu.solve(rhs);
    sol += lu.solve(rhs - K * sol);  // one refinement pass tightens the KKT residual
    *z = sol.head(n);
    *mu = sol.tail(w);
    return true;
}

bool rows_independent(const Mat& A, const std::vector<int>& W, int extra) {
    Mat S(static_cast<int>(W.size()) + 1, A.cols());
    for (size_t j = 0; j < W.size(); ++j) S.row(static_cast<int>(j)) = A.row(W[j]);
    S.row(S.rows() - 1) = A.row(extra);
    Eigen::ColPivHouseholderQR<Mat> qr(S.transpose());
    qr.setThreshold(1e-10);
    return qr.rank() == S.rows();
}

double max_violation(const Mat& A, const Vec& b, const Vec& z) {
    if (b.size() == 0) return 0.0;
    return (A * z - b).maxCoeff();
}

struct LoopResult {
    QpStatus status;
    Vec z;
    Vec lambda;
    std::vector<int> active;
};

// Primal active-set loop from a feasible point. Lowest-index (Bland-style)
// tie breaking both for entering and leaving constraints.
LoopResult active_set_loop(const Mat& H, const Vec& f, const Mat& A, const Vec& b,
                           Vec z, std::vector<int> W) {
    const int n = static_cast<int>(H.rows());
    const int k = static_cast<int>(b.size());
    const int cap = 100 * std::max(k, 1);
    Vec lambda = Vec::Zero(k);
    for (int iter = 0; iter < cap; ++iter) {
        Vec z_eq, mu;
        if (!solve_eqp(H, f, A, b, W, &z_eq, &mu)) {
            // Dependent working set; drop the most recently added row.
            if (W.empty()) return {QpStatus::MaxIter, z, lambda, W};
            W.pop_back();
            continue;
        }
        if ((z_eq - z).norm() <= 1e-11 * (1.0 + z.norm())) {
            int leave = -1;
            for (size_t j = 0; j < W.size(); ++j) {
                if (mu(static_cast<int>(j)) < -kMultTol &&
                    (leave < 0 || W[j] < W[static_cast<size_t>(leave)]))
                    leave = static_cast<int>(j);
            }
            if (leave < 0) {
                lambda.setZero();
                for (size_t j = 0; j < W.size(); ++j)
                    lambda(W[j]) = std::max(mu(static_cast<int>(j)), 0.0);
                return {QpStatus::Optimal, z_eq, lambda, W};
            }
            W.erase(W.begin() + leave);
            continue;
        }
        const Vec p = z_eq - z;
        double alpha = 1.0;
        int blocker = -1;
        for (int i = 0; i < k; ++i) {
            if (std::find(W.begin(), W.end(), i) != W.end()) continue;
            const double ap = A.row(i).dot(p);
            if (ap <= 1e-12) continue;
            double step = (b(i) - A.row(i).dot(z)) / ap;
            step = std::max(step, 0.0);
            if (step < alpha - 1e-14 || (std::abs(step - alpha) <= 1e-14 && blocker >= 0 && i < blocker)) {
                alpha = std::min(step, alpha);
                blocker = i;
            }
        }
        z += alpha * p;
        if (blocker >= 0 && alpha < 1.0) {
            if (rows_independent(A, W, blocker) && static_cast<int>(W.size()) < n)
                W.push_back(blocker);
            // Dependent blocker: keep iterating; the cap bounds cycling.
        }
    }
    return {QpStatus::MaxIter, z, lambda, W};
}

// Phase-1 feasibility subproblem in (z, s):
//   min s + eps (||z||^2 + s^2)  s.t.  A z - s <= b, -s <= 0
// started from (0, max violation + 1), which is strictly feasible. The linear
// objective drives s to exactly zero whenever the original rows admit a point;
// the eps term keeps the Hessian positive definite and the point small.
bool phase1(const Mat& A, const Vec& b, int n, Vec* z_out) {
    const int k = static_cast<int>(b.size());
    Mat Hp = Mat::Identity(n + 1, n + 1) * 2e-10;
    Vec fp = Vec::Zero(n + 1);
    fp(n) = 1.0;
    Mat Ap = Mat::Zero(k + 1, n + 1);
    Vec bp = Vec::Zero(k + 1);
    Ap.topLeftCorner(k, n) = A;
    Ap.col(n).head(k).setConstant(-1.0);
    bp.head(k) = b;
    Ap(k, n) = -1.0;
    Vec z0 = Vec::Zero(n + 1);
    z0(n) = std::max(0.0, b.size() ? (-b).maxCoeff() : 0.0) + 1.0;
    LoopResult r = active_set_loop(Hp, fp, Ap, bp, z0, {});
    Vec cand = r.z.head(n);
    if (max_violation(A, b, cand) <= kFeasTol) {
        *z_out = cand;
        return true;
    }
    return false;
}

}  // namespace

double qp_objective(const QpProblem& p, const Vec& z) {
    return 0.5 * z.dot(p.H * z) + p.f.dot(z);
}

double qp_kkt_residual(const QpProblem& p, const Vec& z, const Vec& lambda) {
    double r = (p.H * z + p.f + (p.k() ? (p.A.transpose() * lambda).eval() : Vec::Zero(p.n()))).lpNorm<Eigen::Infinity>();
    if (p.k()) {
        const Vec s = p.A * z - p.b;
        r = std::max(r, std::max(0.0, s.maxCoeff()));
        r = std::max(r, std::max(0.0, -lambda.minCoeff()));
        r = std::max(r, (lambda.array() * s.array()).abs().maxCoeff());
    }
    return r;
}

QpSolution qp_solve(const QpProblem& p, const std::vector<int>* warm_start) {
    const int n = p.n();
    const int k = p.k();
    const Mat H = regularized(p.H);

    QpSolution out;
    out.lambda = Vec::Zero(k);

    // Unconstrained minimizer first.
    Vec z_uc = H.llt().solve(-p.f);
    if (k == 0 || max_violation(p.A, p.b, z_uc) <= kActiveTol) {
        out.z = z_uc;
        out.status = QpStatus::Optimal;
        out.kkt_residual = qp_kkt_residual(p, out.z, out.lambda);
        return out;
    }

    Vec z0;
    std::vector<int> W0;
    bool have_start = false;
    if (warm_start && !warm_start->empty()) {
        std::vector<int> W;
        for (int i : *warm_start)
            if (i >= 0 && i < k && static_cast<int>(W.size()) < n) W.push_back(i);
        Vec z_eq, mu;
        if (!W.empty() && solve_eqp(H, p.f, p.A, p.b, W, &z_eq, &mu) &&
            max_violation(p.A, p.b, z_eq) <= kFeasTol) {
            z0 = z_eq;
            W0 = W;
            have_start = true;
        }
    }
    if (!have_start) {
        if (!phase1(p.A, p.b, n, &z0)) {
            out.status = QpStatus::Infeasible;
            return out;
        }
        for (int i = 0; i < k && static_cast<int>(W0.size()) < n; ++i)
            if (std::abs(p.A.row(i).dot(z0) - p.b(i)) <= kActiveTol && rows_independent(p.A, W0, i))
                W0.push_back(i);
    }

    LoopResult r = active_set_loop(H, p.f, p.A, p.b, z0, W0);
    out.z = r.z;
    out.lambda = r.lambda;
    out.active_set = r.active;
    std::sort(out.active_set.begin(), out.active_set.end());
    out.status = r.status;
    if (out.status == QpStatus::Optimal)
        out.kkt_residual = qp_kkt_residual(p, out.z, out.lambda);
    return out;
}

QpSolution qp_oracle_solve(const QpProblem& p) {
    const int n = p.n();
    const int k = p.k();
    const Mat H = regularized(p.H);
    QpSolution best;
    best.status = QpStatus::Infeasible;
    best.lambda = Vec::Zero(k);
    double best_obj = std::numeric_limits<double>::infinity();
    for (unsigned long mask = 0; mask < (1ul << k); ++mask) {
        std::vector<int> S;
        for (int i = 0; i < k; ++i)
            if (mask & (1ul << i)) S.push_back(i);
        if (static_cast<int>(S.size()) > n) continue;
        Vec z, mu;
        if (!solve_eqp(H, p.f, p.A, p.b, S, &z, &mu)) continue;
        if (k && max_violation(p.A, p.b, z) > kFeasTol) continue;
        if (S.size() && mu.minCoeff() < -1e-9) continue;
        const double obj = 0.5 * z.dot(H * z) + p.f.dot(z);
        if (obj < best_obj - 1e-12) {
            best_obj = obj;
            best.z = z;
            best.lambda = Vec::Zero(k);
            for (size_t j = 0; j < S.size(); ++j)
                best.lambda(S[j]) = std::max(mu(static_cast<int>(j)), 0.0);
            best.active_set = S;
            best.status = QpStatus::Optimal;
        }
    }
    if (best.status == QpStatus::Optimal)
        best.kkt_residual = qp_kkt_residual(p, best.z, best.lambda);
    return best;
}

}  // namespace dlock
