#ifndef LRMEQ_PRECONDITIONER_HPP
#define LRMEQ_PRECONDITIONER_HPP
//
// Project     : lrmeq
// Module      : preconditioner
// Description : factorized block preconditioners P applied as I_m (x) P
//

#include <Eigen/SparseLU>

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

#include "lrmeq/matrix_equation.hpp"

namespace lrmeq {

enum class PreconditionerKind {
    BaseOperator,     ///< P = A0
    MeanShifted,      ///< P = A0 + sum_k scale_k mean_k A_k (offset-range midpoints)
    MeanShiftedTime,  ///< theta-scheme variant with the 1/dt time terms
    Custom
};

inline const char* to_string(PreconditionerKind k) {
    switch (k) {
        case PreconditionerKind::BaseOperator: return "A0";
        case PreconditionerKind::MeanShifted: return "mean-T";
        case PreconditionerKind::MeanShiftedTime: return "mean-T-time";
        case PreconditionerKind::Custom: return "custom";
    }
    return "?";
}

/// midpoint (min offset + max offset)/2 of the k-th diagonal sample vector
inline double mean_offset(const MatrixEquationProblem& prob, Index k) {
    return 0.5 * (prob.D.at(k).minCoeff() + prob.D.at(k).maxCoeff());
}

/// A0 + sum_k scale_k mean_k A_k as a sparse matrix
inline SparseMatrix mean_shifted_matrix(const MatrixEquationProblem& prob) {
    SparseMatrix p = prob.A[0];
    for (std::size_t k = 1; k < prob.A.size(); ++k)
        p = p + (prob.scale[k - 1] * mean_offset(prob, static_cast<Index>(k - 1))) * prob.A[k];
    p.makeCompressed();
    return p;
}

//
// A single factorized M x M matrix applied block-wise, i.e. the Kronecker
// preconditioner I_m (x) P acting on low-rank iterates through their left
// factor. Immutable after construction; solves are reentrant.
//
class Preconditioner {
public:
    Preconditioner(SparseMatrix p, PreconditionerKind kind)
        : kind_(kind), p_(std::move(p)), lu_(std::make_shared<Eigen::SparseLU<SparseMatrix>>()) {
        if (p_.rows() != p_.cols())
            throw std::invalid_argument("Preconditioner: matrix must be square");
        p_.makeCompressed();
        lu_->compute(p_);
        if (lu_->info() != Eigen::Success)
            throw std::runtime_error(std::string("Preconditioner(") + to_string(kind_) +
                                     "): sparse LU factorization failed (singular?)");
    }

    static Preconditioner base_operator(const MatrixEquationProblem& prob) {
        return Preconditioner(prob.A.at(0), PreconditionerKind::BaseOperator);
    }

    static Preconditioner mean_shifted(const MatrixEquationProblem& prob) {
        return Preconditioner(mean_shifted_matrix(prob), PreconditionerKind::MeanShifted);
    }

    PreconditionerKind kind() const { return kind_; }
    Index rows() const { return p_.rows(); }
    const SparseMatrix& matrix() const { return p_; }

    /// P^{-1} X by solving against the left factor only; rank unchanged
    LowRankMatrix apply(const LowRankMatrix& x) const {
        if (x.rows() != rows())
            throw std::invalid_argument("Preconditioner: iterate has " +
                                        std::to_string(x.rows()) + " rows, expected " +
                                        std::to_string(rows()));
        if (x.rank() == 0) return x;
        return LowRankMatrix(lu_->solve(x.factor_u()), x.factor_v());
    }

    Matrix solve_dense(const Matrix& rhs) const { return lu_->solve(rhs); }
    Vector solve(const Vector& rhs) const { return lu_->solve(rhs); }

    Matrix solve_transpose_dense(const Matrix& rhs) const {
        return lu_->adjoint().solve(rhs);
    }

    // ||P^{-1}||_2 by power iteration on P^{-T} P^{-1}.
    double inv_norm_estimate(int iterations = 20, std::uint64_t seed = 7) const {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vector v(rows());
        for (Index i = 0; i < v.size(); ++i) v(i) = gauss(rng);
        v.normalize();
        double lambda = 0.0;
        for (int it = 0; it < iterations; ++it) {
            Vector y = lu_->solve(v);
            Vector z = lu_->adjoint().solve(y);
            lambda = v.dot(z);
            const double zn = z.norm();
            if (zn == 0.0) return 0.0;
            v = z / zn;
        }
        return std::sqrt(std::max(0.0, lambda));
    }

private:
    PreconditionerKind kind_;
    SparseMatrix p_;
    // shared_ptr keeps the class copyable; SparseLU itself is not.
    std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
};

// ||P^{-1} A||_2 by power iteration on the normal operator, run in the dense
// matrix format at coarse scale.
inline double estimate_sigma_p(const MatrixEquationProblem& prob, const Preconditioner& precond,
                               int iterations = 30, std::uint64_t seed = 11) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix x(prob.rows(), prob.cols());
    for (Index j = 0; j < x.cols(); ++j)
        for (Index i = 0; i < x.rows(); ++i) x(i, j) = gauss(rng);
    x /= x.norm();
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Matrix y = precond.solve_dense(prob.apply_dense(x));
        Matrix z = prob.apply_transpose_dense(precond.solve_transpose_dense(y));
        lambda = (x.array() * z.array()).sum();
        const double zn = z.norm();
        if (zn == 0.0) return 0.0;
        x = z / zn;
    }
    return std::sqrt(std::max(0.0, lambda));
}

}  // namespace lrmeq

#endif  // LRMEQ_PRECONDITIONER_HPP
