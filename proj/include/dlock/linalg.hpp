#ifndef DLOCK_LINALG_HPP
#define DLOCK_LINALG_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dlock {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Rotational degrees of freedom of SO(d).
inline int so_dim(int d) { return d * (d - 1) / 2; }

inline int dim_from_so(int so) {
    if (so == 1) return 2;
    if (so == 3) return 3;
    throw std::invalid_argument("unsupported rotational dimension");
}

// Skew-symmetric matrix from the rotational control vector.
// d=2: [[0,-w],[w,0]], d=3: cross-product matrix.
inline Mat hat(const Vec& omega) {
    const int d = dim_from_so(static_cast<int>(omega.size()));
    Mat W = Mat::Zero(d, d);
    if (d == 2) {
        W(0, 1) = -omega(0);
        W(1, 0) = omega(0);
    } else {
        W(0, 1) = -omega(2); W(0, 2) = omega(1);
        W(1, 0) = omega(2);  W(1, 2) = -omega(0);
        W(2, 0) = -omega(1); W(2, 1) = omega(0);
    }
    return W;
}

// O_d(x) satisfies hat(w) * x = O_d(x) * w for all w.
inline Mat o_d(const Vec& x) {
    const int d = static_cast<int>(x.size());
    if (d == 2) {
        Mat O(2, 1);
        O(0, 0) = -x(1);
        O(1, 0) = x(0);
        return O;
    }
    if (d == 3) {
        // hat(w) x = w cross x = -x cross w = -hat(x) w
        Vec wx(3);
        wx << x(0), x(1), x(2);
        return -hat(wx);
    }
    throw std::invalid_argument("o_d: only d in {2,3} supported");
}

// Nearest rotation matrix (polar projection via SVD).
inline Mat orthonormalize(const Mat& Q) {
    Eigen::JacobiSVD<Mat> svd(Q, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < 0) {
        Mat U = svd.matrixU();
        U.col(U.cols() - 1) *= -1.0;
        R = U * svd.matrixV().transpose();
    }
    return R;
}

inline double orthonormality_error(const Mat& Q) {
    return (Q.transpose() * Q - Mat::Identity(Q.rows(), Q.cols())).norm();
}

// One step of Q' = Q hat(w): returns Q * exp(dt * hat(w)), re-projected onto SO(d).
inline Mat integrate_rotation(const Mat& Q, const Vec& omega, double dt) {
    const int d = static_cast<int>(Q.rows());
    if (orthonormality_error(Q) > 1e-9)
        throw std::invalid_argument("integrate_rotation: Q is not orthonormal");
    Mat R;
    if (d == 2) {
        const double a = omega(0) * dt;
        R = Mat(2, 2);
        R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    } else if (d == 3) {
        // Rodrigues
        const double th = omega.norm() * dt;
        Mat W = hat(omega);
        if (th < 1e-12) {
            R = Mat::Identity(3, 3) + dt * W + 0.5 * dt * dt * W * W;
        } else {
            Mat K = W / omega.norm();
            R = Mat::Identity(3, 3) + std::sin(th) * K + (1.0 - std::cos(th)) * K * K;
        }
    } else {
        throw std::invalid_argument("integrate_rotation: only d in {2,3} supported");
    }
    return orthonormalize(Q * R);
}

// Rotation angle of Q in [0, pi] (d = 2 or 3).
inline double rotation_angle(const Mat& Q) {
    const int d = static_cast<int>(Q.rows());
    const double c = std::clamp((Q.trace() - (d - 2)) / 2.0, -1.0, 1.0);
    return std::acos(c);
}

// Clamp the rotation angle of Q to at most max_angle, preserving the axis.
// Beyond pi/2 the rotated goal starts pointing away from the task, so the
// virtual frame is kept inside a useful windup range.
inline Mat clamp_rotation(const Mat& Q, double max_angle) {
    const double a = rotation_angle(Q);
    if (a <= max_angle || a < 1e-12) return Q;
    const int d = static_cast<int>(Q.rows());
    if (d == 2) {
        const double signed_a = std::atan2(Q(1, 0), Q(0, 0));
        const double b = std::copysign(max_angle, signed_a);
        Mat R(2, 2);
        R << std::cos(b), -std::sin(b), std::sin(b), std::cos(b);
        return R;
    }
    // d == 3: scale the log map down to the cap.
    Mat W = (Q - Q.transpose()) / (2.0 * std::sin(a));  // unit-axis hat
    const double b = max_angle;
    return orthonormalize(Mat::Identity(3, 3) + std::sin(b) * W +
                          (1.0 - std::cos(b)) * W * W);
}

// Scaled orthogonal projection P_v = ||v||^2 I - v v^T.
inline Mat projection(const Vec& v) {
    const int d = static_cast<int>(v.size());
    return v.squaredNorm() * Mat::Identity(d, d) - v * v.transpose();
}

// Gamma_{a,b} = sum_i (a_i^T b I + a_i b^T) grad_a_i for the columns a_i of a
// matrix-valued function and their Jacobians. Zero when the columns are
// state-independent.
inline Mat gamma_op(const Mat& a_cols, const std::vector<Mat>& a_grads, const Vec& b) {
    const int d = static_cast<int>(a_cols.rows());
    const int m = static_cast<int>(a_cols.cols());
    if (static_cast<int>(a_grads.size()) != m)
        throw std::invalid_argument("gamma_op: one gradient per column required");
    if (b.size() != d)
        throw std::invalid_argument("gamma_op: b dimension mismatch");
    Mat G = Mat::Zero(d, d);
    for (int i = 0; i < m; ++i) {
        const Vec ai = a_cols.col(i);
        G += (ai.dot(b) * Mat::Identity(d, d) + ai * b.transpose()) * a_grads[i];
    }
    return G;
}

}  // namespace dlock

#endif
