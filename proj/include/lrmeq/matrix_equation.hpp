#ifndef LRMEQ_MATRIX_EQUATION_HPP
#define LRMEQ_MATRIX_EQUATION_HPP
//
// Project     : lrmeq
// Module      : matrix_equation
// Description : the generalized matrix equation A0 X + sum_k s_k A_k X D_k = B,
//               its consecutively-truncated evaluation and residuals
//

#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lrmeq/matrix_market.hpp"
#include "lrmeq/truncation.hpp"

namespace lrmeq {

//
// Per-parameter sample lists plus the fixed reference values subtracted into
// the diagonal offsets. Reference defaults to the first sample of each list,
// which zeroes one diagonal entry per parameter and keeps the base operator
// nonsingular.
//
struct ParameterGrid {
    std::vector<double> mu_samples;
    std::vector<double> lambda_samples;
    std::vector<double> rho_samples;
    int mu_ref_index = 0;
    int lambda_ref_index = 0;
    int rho_ref_index = 0;
    double nu_f = 1.0;

    Index m1() const { return static_cast<Index>(mu_samples.size()); }
    Index m2() const { return static_cast<Index>(lambda_samples.size()); }
    Index m3() const { return static_cast<Index>(rho_samples.size()); }
    Index sample_count() const { return m1() * m2() * m3(); }

    double mu_ref() const { return mu_samples.at(mu_ref_index); }
    double lambda_ref() const { return lambda_samples.at(lambda_ref_index); }
    double rho_ref() const { return rho_samples.at(rho_ref_index); }

    void validate() const {
        auto check = [](const std::vector<double>& s, int ref, const char* name) {
            if (s.empty())
                throw std::invalid_argument(std::string("ParameterGrid: empty ") + name + " sample list");
            if (ref < 0 || ref >= static_cast<int>(s.size()))
                throw std::invalid_argument(std::string("ParameterGrid: ") + name + " reference index out of range");
            for (double v : s)
                if (!(v > 0.0))
                    throw std::invalid_argument(std::string("ParameterGrid: ") + name + " samples must be positive");
        };
        check(mu_samples, mu_ref_index, "mu");
        check(lambda_samples, lambda_ref_index, "lambda");
        check(rho_samples, rho_ref_index, "rho");
    }
};

// Diagonal sample matrices as length-m vectors, flattened with i1 fastest:
//   D1 = I_{m2 m3} (x) diag(mu^{i1} - mu_ref)
//   D2 = I_{m3} (x) diag(lambda^{i2} - lambda_ref) (x) I_{m1}
//   D3 = diag(rho^{i3} - rho_ref) (x) I_{m1 m2}
// so every parameter combination occurs exactly once.
inline std::array<Vector, 3> build_sample_diagonals(const ParameterGrid& grid) {
    grid.validate();
    const Index m1 = grid.m1(), m2 = grid.m2(), m3 = grid.m3();
    const Index m = m1 * m2 * m3;
    std::array<Vector, 3> d{Vector(m), Vector(m), Vector(m)};
    Index idx = 0;
    for (Index i3 = 0; i3 < m3; ++i3)
        for (Index i2 = 0; i2 < m2; ++i2)
            for (Index i1 = 0; i1 < m1; ++i1, ++idx) {
                d[0](idx) = grid.mu_samples[i1] - grid.mu_ref();
                d[1](idx) = grid.lambda_samples[i2] - grid.lambda_ref();
                d[2](idx) = grid.rho_samples[i3] - grid.rho_ref();
            }
    return d;
}

//
// F(X) = A[0] X + sum_k scale[k-1] A[k] X diag(D[k-1]) = B. The A_k share the
// row dimension M, the diagonals the sample dimension m. Immutable once
// assembled; shareable across threads.
//
struct MatrixEquationProblem {
    std::vector<SparseMatrix> A;   // K+1 sparse M x M operators, A[0] = base
    std::vector<Vector>       D;   // K diagonal sample vectors, length m
    std::vector<double>       scale;  // K term scalings (e.g. nu_f)
    LowRankMatrix             B;   // right-hand side, typically rank one

    Index rows() const { return A.empty() ? 0 : A[0].rows(); }
    Index cols() const { return D.empty() ? 0 : D[0].size(); }
    Index num_parameter_terms() const { return static_cast<Index>(D.size()); }

    void validate() const {
        if (A.empty() || D.empty())
            throw std::invalid_argument("MatrixEquationProblem: needs A0 and at least one parameter term");
        if (A.size() != D.size() + 1)
            throw std::invalid_argument("MatrixEquationProblem: expected K+1 operators for K diagonals");
        if (scale.size() != D.size())
            throw std::invalid_argument("MatrixEquationProblem: scale list length must match diagonal count");
        for (const auto& a : A)
            if (a.rows() != rows() || a.cols() != rows())
                throw std::invalid_argument("MatrixEquationProblem: operator dimensions disagree");
        for (const auto& d : D)
            if (d.size() != cols())
                throw std::invalid_argument("MatrixEquationProblem: diagonal lengths disagree");
        if (B.rows() != rows() || B.cols() != cols())
            throw std::invalid_argument("MatrixEquationProblem: right-hand side is " +
                                        detail::shape_string(B.rows(), B.cols()) + ", expected " +
                                        detail::shape_string(rows(), cols()));
    }

    /// the k-th summand A_k X D_k (k = 0 means A0 X), computed factor-wise
    LowRankMatrix term(Index k, const LowRankMatrix& x) const {
        if (x.rank() == 0) return LowRankMatrix::zero(rows(), cols());
        if (k == 0) return LowRankMatrix(A[0] * x.factor_u(), x.factor_v());
        Matrix u = scale[k - 1] * (A[k] * x.factor_u());
        Matrix v = D[k - 1].asDiagonal() * x.factor_v();
        return LowRankMatrix(std::move(u), std::move(v));
    }

    /// dense evaluation of F (oracle-free helper for norm estimates)
    Matrix apply_dense(const Matrix& x) const {
        Matrix y = A[0] * x;
        for (std::size_t k = 1; k < A.size(); ++k)
            y += scale[k - 1] * ((A[k] * x) * D[k - 1].asDiagonal());
        return y;
    }

    /// dense evaluation of the transposed operator
    Matrix apply_transpose_dense(const Matrix& x) const {
        Matrix y = A[0].transpose() * x;
        for (std::size_t k = 1; k < A.size(); ++k)
            y += scale[k - 1] * ((A[k].transpose() * x) * D[k - 1].asDiagonal());
        return y;
    }

    /// dense per-block system matrix A0 + sum_k scale_k D_k(i) A_k
    Matrix block_dense(Index i) const {
        Matrix bl = Matrix(A[0]);
        for (std::size_t k = 1; k < A.size(); ++k)
            bl += (scale[k - 1] * D[k - 1](i)) * Matrix(A[k]);
        return bl;
    }
};

// Evaluates T(F(X)) with the consecutive scheme: each A_k X D_k term is formed
// factor-wise without rank growth, then the K+1 summands are accumulated
// pairwise left to right with one truncation per addition (K truncations in
// total). Returns the truncation count for bound bookkeeping.
inline std::pair<LowRankMatrix, int> apply_F(const MatrixEquationProblem& prob,
                                             const LowRankMatrix& x, Truncator& trunc) {
    if (x.rows() != prob.rows() || x.cols() != prob.cols())
        throw std::invalid_argument("apply_F: iterate is " +
                                    detail::shape_string(x.rows(), x.cols()) + ", problem expects " +
                                    detail::shape_string(prob.rows(), prob.cols()));
    LowRankMatrix acc = prob.term(0, x);
    int count = 0;
    for (Index k = 1; k < static_cast<Index>(prob.A.size()); ++k) {
        acc = trunc(lr_add(acc, prob.term(k, x)));
        ++count;
    }
    return {std::move(acc), count};
}

struct Residual {
    LowRankMatrix value;  // T(B - F(X))
    double        norm = 0.0;
};

// T(B - F(X)) and its Frobenius norm; one truncation on top of the K inside
// the F evaluation.
inline Residual residual(const MatrixEquationProblem& prob, const LowRankMatrix& x,
                         Truncator& trunc) {
    auto [fx, n] = apply_F(prob, x, trunc);
    (void)n;
    Residual r;
    r.value = trunc(lr_sub(prob.B, fx));
    r.norm = r.value.norm();
    return r;
}

inline double relative_residual(const MatrixEquationProblem& prob, const LowRankMatrix& x,
                                Truncator& trunc) {
    const double bnorm = prob.B.norm();
    return residual(prob, x, trunc).norm / (bnorm > 0.0 ? bnorm : 1.0);
}

// Per-block relative residuals ||b_i - A(p_i) x_i||_2 / ||b_i||_2 of the
// densified columns, computed from the factors without forming X.
inline Vector per_block_residuals(const MatrixEquationProblem& prob, const LowRankMatrix& x) {
    const Index m = prob.cols();
    Vector out(m);
    std::vector<Matrix> au;
    au.reserve(prob.A.size());
    for (const auto& a : prob.A)
        au.push_back(x.rank() == 0 ? Matrix::Zero(prob.rows(), 0) : Matrix(a * x.factor_u()));
    for (Index i = 0; i < m; ++i) {
        const Vector bi = prob.B.column(i);
        Vector ri = bi;
        if (x.rank() > 0) {
            const Vector vi = x.factor_v().row(i).transpose();
            ri -= au[0] * vi;
            for (std::size_t k = 1; k < prob.A.size(); ++k)
                ri -= (prob.scale[k - 1] * prob.D[k - 1](i)) * (au[k] * vi);
        }
        const double bn = bi.norm();
        out(i) = ri.norm() / (bn > 0.0 ? bn : 1.0);
    }
    return out;
}

}  // namespace lrmeq

#endif  // LRMEQ_MATRIX_EQUATION_HPP
