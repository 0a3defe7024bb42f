#ifndef LRMEQ_TESTS_ORACLES_HPP
#define LRMEQ_TESTS_ORACLES_HPP
//
// Test-side oracles, deliberately independent of the library's solver path:
// everything here works on the vectorized Mm system with dense matrices and
// plain vector arithmetic.
//

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "lrmeq/matrix_equation.hpp"

namespace oracle {

using lrmeq::Index;
using lrmeq::Matrix;
using lrmeq::MatrixEquationProblem;
using lrmeq::Vector;

// vec stacks columns
inline Vector vec(const Matrix& x) {
    return Eigen::Map<const Vector>(x.data(), x.size());
}

inline Matrix unvec(const Vector& v, Index rows, Index cols) {
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

// The block-diagonal system matrix assembled entry-wise from the Kronecker
// structure: A = I_m (x) A0 + sum_k scale_k D_k (x) A_k.
inline Matrix kronecker_system(const MatrixEquationProblem& prob) {
    const Index M = prob.rows(), m = prob.cols();
    Matrix big = Matrix::Zero(M * m, M * m);
    for (Index i = 0; i < m; ++i) {
        Matrix block = Matrix(prob.A[0]);
        for (std::size_t k = 1; k < prob.A.size(); ++k)
            block += (prob.scale[k - 1] * prob.D[k - 1](i)) * Matrix(prob.A[k]);
        big.block(i * M, i * M, M, M) = block;
    }
    return big;
}

inline Vector stacked_rhs(const MatrixEquationProblem& prob) {
    return vec(prob.B.dense());
}

// Left-preconditioned operator wrapper: y = P^{-1} (A_big x) with P applied
// per M-sized block through its own dense LU.
struct PreconditionedSystem {
    Matrix a_big;          // Mm x Mm
    Eigen::PartialPivLU<Matrix> p_lu;  // M x M
    Index M = 0, m = 0;

    PreconditionedSystem(const MatrixEquationProblem& prob, const Matrix& p)
        : a_big(kronecker_system(prob)), p_lu(p), M(prob.rows()), m(prob.cols()) {}

    Vector precond(const Vector& v) const {
        Vector out(v.size());
        for (Index i = 0; i < m; ++i) out.segment(i * M, M) = p_lu.solve(v.segment(i * M, M));
        return out;
    }

    Vector apply(const Vector& v) const { return precond(a_big * v); }
};

// Textbook restarted GMRES recording the iterate after every inner step.
struct GmresTrace {
    std::vector<Vector> iterates;  // x_1, x_2, ...
    std::vector<double> ls_residual;
};

inline GmresTrace gmres_trace(const PreconditionedSystem& sys, const Vector& b, const Vector& x0,
                              int iterations) {
    GmresTrace trace;
    const Vector r0 = sys.precond(b - sys.a_big * x0);
    const double beta = r0.norm();
    if (beta == 0.0) return trace;
    std::vector<Vector> basis{r0 / beta};

    const int l = iterations;
    Matrix h = Matrix::Zero(l + 1, l);
    std::vector<double> cs, sn;
    Vector g = Vector::Zero(l + 1);
    g(0) = beta;

    for (int i = 0; i < l; ++i) {
        Vector w = sys.apply(basis[i]);
        for (int k = 0; k <= i; ++k) {
            h(k, i) = basis[k].dot(w);
            w -= h(k, i) * basis[k];
        }
        h(i + 1, i) = w.norm();
        const bool happy = h(i + 1, i) < 1e-300;
        if (!happy) basis.push_back(w / h(i + 1, i));
        for (int k = 0; k < i; ++k) {
            const double t1 = cs[k] * h(k, i) + sn[k] * h(k + 1, i);
            const double t2 = -sn[k] * h(k, i) + cs[k] * h(k + 1, i);
            h(k, i) = t1;
            h(k + 1, i) = t2;
        }
        const double r = std::hypot(h(i, i), h(i + 1, i));
        cs.push_back(r == 0.0 ? 1.0 : h(i, i) / r);
        sn.push_back(r == 0.0 ? 0.0 : h(i + 1, i) / r);
        h(i, i) = r;
        h(i + 1, i) = 0.0;
        const double gi = g(i);
        g(i) = cs[i] * gi;
        g(i + 1) = -sn[i] * gi;
        trace.ls_residual.push_back(std::abs(g(i + 1)));

        // materialize the iterate for this subspace size
        const int n = i + 1;
        Vector y(n);
        for (int rr = n - 1; rr >= 0; --rr) {
            double s = g(rr);
            for (int cc = rr + 1; cc < n; ++cc) s -= h(rr, cc) * y(cc);
            y(rr) = h(rr, rr) != 0.0 ? s / h(rr, rr) : 0.0;
        }
        Vector xi = x0;
        for (int j = 0; j < n; ++j) xi += y(j) * basis[j];
        trace.iterates.push_back(xi);
        if (happy) break;
    }
    return trace;
}

// Chebyshev semi-iteration on the preconditioned system; iterates indexed by
// the number of applied updates (index 0 entry = after the half step).
inline std::vector<Vector> chebyshev_trace(const PreconditionedSystem& sys, const Vector& b,
                                           const Vector& x0, double d, double c, int loop_iters) {
    std::vector<Vector> iterates;
    Vector x = x0;
    Vector r = sys.precond(b - sys.a_big * x);
    Vector phi = r / d;
    x += phi;
    iterates.push_back(x);
    double t_prev = 1.0, t_cur = d / c;
    for (int i = 1; i <= loop_iters; ++i) {
        const double t_next = 2.0 * (d / c) * t_cur - t_prev;
        const double alpha = 2.0 * t_cur / (c * t_next);
        const double beta = t_prev / t_next;
        t_prev = t_cur;
        t_cur = t_next;
        r = sys.precond(b - sys.a_big * x);
        phi = alpha * r + beta * phi;
        x += phi;
        iterates.push_back(x);
    }
    return iterates;
}

// van der Vorst preconditioned Bi-CGstab; `direct_residual` recomputes
// r = b - A x instead of the s - omega t recurrence (both are equal in exact
// arithmetic).
struct BicgstabTrace {
    std::vector<Vector> iterates;
    bool breakdown = false;
};

inline BicgstabTrace bicgstab_trace(const PreconditionedSystem& sys, const Vector& b,
                                    const Vector& x0, int iterations, bool direct_residual) {
    BicgstabTrace trace;
    Vector x = x0;
    Vector r = b - sys.a_big * x;
    const Vector rtilde = r;
    Vector p, v;
    double rho_prev = 0.0, alpha = 0.0, omega = 0.0;
    for (int i = 1; i <= iterations; ++i) {
        const double rho = rtilde.dot(r);
        if (std::abs(rho) <= 1e-14 * rtilde.norm() * r.norm()) {
            trace.breakdown = true;
            break;
        }
        if (i == 1) {
            p = r;
        } else {
            const double beta = (rho / rho_prev) * (alpha / omega);
            p = r + beta * (p - omega * v);
        }
        const Vector phat = sys.precond(p);
        v = sys.a_big * phat;
        const double rtv = rtilde.dot(v);
        if (std::abs(rtv) <= 1e-14 * rtilde.norm() * v.norm()) {
            trace.breakdown = true;
            break;
        }
        alpha = rho / rtv;
        const Vector s = r - alpha * v;
        const Vector shat = sys.precond(s);
        const Vector t = sys.a_big * shat;
        const double tt = t.dot(t);
        if (tt == 0.0 || std::abs(t.dot(s)) <= 1e-14 * std::sqrt(tt) * s.norm()) {
            trace.breakdown = true;
            break;
        }
        omega = t.dot(s) / tt;
        x += alpha * phat + omega * shat;
        r = direct_residual ? Vector(b - sys.a_big * x) : Vector(s - omega * t);
        trace.iterates.push_back(x);
        rho_prev = rho;
    }
    return trace;
}

// Dense per-block theta-scheme trajectory with direct per-step solves.
inline std::vector<Matrix> theta_trajectory_dense(const MatrixEquationProblem& base,
                                                  const Matrix& at_f, const Matrix& at_s,
                                                  double rho_ref, double theta, double dt,
                                                  const std::vector<Vector>& series,
                                                  const Matrix& x0) {
    const Index M = base.rows(), m = base.cols();
    const int steps = static_cast<int>(series.size()) - 1;
    std::vector<Matrix> xs;
    Matrix x = x0;
    for (int i = 1; i <= steps; ++i) {
        Matrix xn(M, m);
        for (Index j = 0; j < m; ++j) {
            Matrix a_block = Matrix(base.A[0]);
            for (std::size_t k = 1; k < base.A.size(); ++k)
                a_block += (base.scale[k - 1] * base.D[k - 1](j)) * Matrix(base.A[k]);
            const double rho_j = rho_ref + base.D.back()(j);
            const Matrix lhs = (rho_j / dt) * at_f + (1.0 / dt) * at_s + theta * a_block;
            const Vector rhs = (rho_j / dt) * (at_f * x.col(j)) + (1.0 / dt) * (at_s * x.col(j)) -
                               (1.0 - theta) * (a_block * x.col(j)) + theta * series[i] +
                               (1.0 - theta) * series[i - 1];
            xn.col(j) = Eigen::PartialPivLU<Matrix>(lhs).solve(rhs);
        }
        x = xn;
        xs.push_back(x);
    }
    return xs;
}

}  // namespace oracle

#endif  // LRMEQ_TESTS_ORACLES_HPP
