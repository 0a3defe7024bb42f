#ifndef LRMEQ_LOW_RANK_MATRIX_HPP
#define LRMEQ_LOW_RANK_MATRIX_HPP
//
// Project     : lrmeq
// Module      : low_rank_matrix
// Description : rank-factored M x m matrices and their Frobenius-space algebra
//

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace lrmeq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index  = Eigen::Index;

namespace detail {

inline std::string shape_string(Index rows, Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

struct FactorQr {
    Matrix q;  // thin orthonormal factor
    Matrix r;  // k x rank upper trapezoid
};

inline FactorQr thin_qr(const Matrix& a) {
    const Index k = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<Matrix> qr(a);
    FactorQr out;
    out.q = qr.householderQ() * Matrix::Identity(a.rows(), k);
    out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    return out;
}

}  // namespace detail

//
// An M x m matrix stored as X = U * V^T with U in R^{M x r}, V in R^{m x r}.
// r counts stored factor columns; r = 0 encodes the zero matrix. Instances
// are immutable values and safe to share between threads.
//
class LowRankMatrix {
public:
    LowRankMatrix() = default;

    LowRankMatrix(Matrix u, Matrix v)
        : u_(std::move(u)), v_(std::move(v)) {
        if (u_.cols() != v_.cols())
            throw std::invalid_argument(
                "LowRankMatrix: factor rank mismatch (U " +
                detail::shape_string(u_.rows(), u_.cols()) + " vs V " +
                detail::shape_string(v_.rows(), v_.cols()) + ")");
    }

    static LowRankMatrix zero(Index rows, Index cols) {
        return LowRankMatrix(Matrix(rows, 0), Matrix(cols, 0));
    }

    static LowRankMatrix rank_one(const Vector& u, const Vector& v) {
        return LowRankMatrix(u, v);
    }

    /// all-ones matrix, stored rank one
    static LowRankMatrix ones(Index rows, Index cols) {
        return rank_one(Vector::Ones(rows), Vector::Ones(cols));
    }

    // Wraps a dense matrix without approximation; picks the factor split of
    // smaller rank (identity on the shorter side).
    static LowRankMatrix from_dense(const Matrix& dense) {
        if (dense.rows() <= dense.cols())
            return LowRankMatrix(Matrix::Identity(dense.rows(), dense.rows()),
                                 dense.transpose());
        return LowRankMatrix(dense, Matrix::Identity(dense.cols(), dense.cols()));
    }

    Index rows() const { return u_.rows(); }
    Index cols() const { return v_.rows(); }
    Index rank() const { return u_.cols(); }
    bool  is_zero() const { return rank() == 0; }

    const Matrix& factor_u() const { return u_; }
    const Matrix& factor_v() const { return v_; }

    Matrix dense() const {
        if (rank() == 0) return Matrix::Zero(rows(), cols());
        return u_ * v_.transpose();
    }

    /// column j of the represented matrix
    Vector column(Index j) const {
        if (rank() == 0) return Vector::Zero(rows());
        return u_ * v_.row(j).transpose();
    }

    // Frobenius norm from the factors, never densified.
    double norm() const;

private:
    Matrix u_;
    Matrix v_;
};

inline void check_same_shape(const LowRankMatrix& a, const LowRankMatrix& b,
                             const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(
            std::string(op) + ": dimension mismatch (" +
            detail::shape_string(a.rows(), a.cols()) + " vs " +
            detail::shape_string(b.rows(), b.cols()) + ")");
}

// Exact sum by factor concatenation; rank r_a + r_b, no truncation.
inline LowRankMatrix lr_add(const LowRankMatrix& a, const LowRankMatrix& b) {
    check_same_shape(a, b, "lr_add");
    if (a.rank() == 0) return b;
    if (b.rank() == 0) return a;
    Matrix u(a.rows(), a.rank() + b.rank());
    Matrix v(a.cols(), a.rank() + b.rank());
    u << a.factor_u(), b.factor_u();
    v << a.factor_v(), b.factor_v();
    return LowRankMatrix(std::move(u), std::move(v));
}

// Scalar multiple; the scalar is absorbed into U, rank unchanged.
inline LowRankMatrix lr_scale(const LowRankMatrix& a, double s) {
    if (a.rank() == 0) return a;
    return LowRankMatrix(s * a.factor_u(), a.factor_v());
}

/// a - b, exact (factor concatenation)
inline LowRankMatrix lr_sub(const LowRankMatrix& a, const LowRankMatrix& b) {
    check_same_shape(a, b, "lr_sub");
    return lr_add(a, lr_scale(b, -1.0));
}

// Frobenius inner product trace(A^T B) computed factor-wise in
// O((M+m) r_a r_b).
inline double lr_inner(const LowRankMatrix& a, const LowRankMatrix& b) {
    check_same_shape(a, b, "lr_inner");
    if (a.rank() == 0 || b.rank() == 0) return 0.0;
    const Matrix cu = a.factor_u().transpose() * b.factor_u();
    const Matrix cv = a.factor_v().transpose() * b.factor_v();
    return cu.cwiseProduct(cv).sum();
}

inline double LowRankMatrix::norm() const {
    if (rank() == 0) return 0.0;
    // Gram form, O((M+m) r^2). Its round-off scales with the sum of |term|s;
    // when the terms cancel (a factored difference of nearby matrices) the
    // result is meaningless, so fall back to orthogonalized factors where the
    // error scales with ||U|| ||V|| instead of its square.
    const Matrix gu = u_.transpose() * u_;
    const Matrix gv = v_.transpose() * v_;
    const Matrix prod = gu.cwiseProduct(gv);
    const double sum = prod.sum();
    const double mass = prod.cwiseAbs().sum();
    if (sum > 1e-3 * mass) return std::sqrt(sum);
    const auto qu = detail::thin_qr(u_);
    const auto qv = detail::thin_qr(v_);
    return (qu.r * qv.r.transpose()).norm();
}

}  // namespace lrmeq

#endif  // LRMEQ_LOW_RANK_MATRIX_HPP
