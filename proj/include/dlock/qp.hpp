#ifndef DLOCK_QP_HPP
#define DLOCK_QP_HPP

#include <optional>
#include <string>
#include <vector>

#include "dlock/linalg.hpp"

namespace dlock {

enum class ConstraintKind { Clf, Safety, Deadlock };

struct ConstraintLabel {
    ConstraintKind kind = ConstraintKind::Clf;
    int neighbor = -1;  // agent index for Safety/Deadlock rows
};

// min 0.5 z^T H z + f^T z  s.t.  A z <= b, H symmetric PSD.
struct QpProblem {
    Mat H;
    Vec f;
    Mat A;  // k x n, may have zero rows (k = 0)
    Vec b;
    std::vector<ConstraintLabel> labels;

    int n() const { return static_cast<int>(H.rows()); }
    int k() const { return static_cast<int>(b.size()); }
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

struct QpSolution {
    Vec z;
    Vec lambda;                 // one multiplier per constraint, >= 0
    std::vector<int> active_set;
    QpStatus status = QpStatus::Infeasible;
    double kkt_residual = 0.0;
};

// Primal active-set solver with phase-1 feasibility, Bland-style tie breaking
// and a hard iteration cap. Deterministic for identical inputs.
QpSolution qp_solve(const QpProblem& p,
                    const std::vector<int>* warm_start = nullptr);

// Exhaustive active-set enumeration reference. Test oracle only; O(2^k).
QpSolution qp_oracle_solve(const QpProblem& p);

double qp_objective(const QpProblem& p, const Vec& z);

// Max of stationarity, primal feasibility and complementary slackness residuals.
double qp_kkt_residual(const QpProblem& p, const Vec& z, const Vec& lambda);

}  // namespace dlock

#endif
