#ifndef LRMEQ_TIMESTEPPING_HPP
#define LRMEQ_TIMESTEPPING_HPP
//
// Project     : lrmeq
// Module      : timestepping
// Description : one-step theta-scheme driver over the quasi-stationary
//               matrix equation F^i(X^i) = B^i(X^{i-1})
//

#include <stdexcept>
#include <vector>

#include "lrmeq/solvers.hpp"

namespace lrmeq {

//
// Non-stationary problem data. `base` carries the stationary F (its B is only
// a shape/fallback); the Dirichlet series b^0..b^s drives the per-step right
// hand sides B^i = b^i (x) (1,...,1).
//
struct TimeProblem {
    MatrixEquationProblem base;
    SparseMatrix at_fluid;   // time-derivative operator, fluid part
    SparseMatrix at_solid;   // time-derivative operator, solid part
    double rho_f_ref = 1.0;  // fixed rho_f in rho_f I_m + D3
    double theta = 1.0;
    double dt = 1.0;
    int steps = 1;
    std::vector<Vector> dirichlet_series;  // s+1 vectors
    LowRankMatrix x0;

    void validate() const {
        base.validate();
        if (!(theta >= 0.0 && theta <= 1.0))
            throw std::invalid_argument("TimeProblem: theta must lie in [0,1]");
        if (!(dt > 0.0)) throw std::invalid_argument("TimeProblem: dt must be positive");
        if (steps < 1) throw std::invalid_argument("TimeProblem: steps must be >= 1");
        if (static_cast<int>(dirichlet_series.size()) != steps + 1)
            throw std::invalid_argument("TimeProblem: Dirichlet series must have steps+1 entries, got " +
                                        std::to_string(dirichlet_series.size()));
        for (const auto& b : dirichlet_series)
            if (b.size() != base.rows())
                throw std::invalid_argument("TimeProblem: Dirichlet vector length mismatch");
        if (at_fluid.rows() != base.rows() || at_fluid.cols() != base.rows() ||
            at_solid.rows() != base.rows() || at_solid.cols() != base.rows())
            throw std::invalid_argument("TimeProblem: time-derivative operator dimensions disagree");
        if (x0.rows() != base.rows() || x0.cols() != base.cols())
            throw std::invalid_argument("TimeProblem: initial value shape mismatch");
    }

    /// B^i = b^i (x) (1,...,1)
    LowRankMatrix rhs_at(int i) const {
        return LowRankMatrix::rank_one(dirichlet_series.at(i), Vector::Ones(base.cols()));
    }

    /// rho_f I + D3 as a diagonal vector (D3 = last parameter diagonal)
    Vector rho_diagonal() const {
        return Vector::Constant(base.cols(), rho_f_ref) + base.D.back();
    }
};

// The step operator F^i expressed in the same operator/diagonal list form:
//   F^i(X) = (1/dt) At_f X (rho_f I + D3) + (1/dt) At_s X + theta F(X).
// Two terms more than F itself; time independent, built once. The returned
// problem's B is a placeholder that run_theta_scheme swaps per step.
inline MatrixEquationProblem build_step_operator(const TimeProblem& tp) {
    tp.validate();
    const MatrixEquationProblem& base = tp.base;
    MatrixEquationProblem op;
    op.A.reserve(base.A.size() + 2);
    op.A.push_back(SparseMatrix(tp.theta * base.A[0]));
    for (std::size_t k = 1; k < base.A.size(); ++k) op.A.push_back(base.A[k]);
    op.A.push_back(tp.at_fluid);
    op.A.push_back(tp.at_solid);

    op.D = base.D;
    op.D.push_back(tp.rho_diagonal());
    op.D.push_back(Vector::Ones(base.cols()));

    for (std::size_t k = 0; k < base.scale.size(); ++k)
        op.scale.push_back(tp.theta * base.scale[k]);
    op.scale.push_back(1.0 / tp.dt);
    op.scale.push_back(1.0 / tp.dt);

    op.B = LowRankMatrix::zero(base.rows(), base.cols());
    return op;
}

// B^i(X^{i-1}) = (1/dt) At_f X^{i-1} (rho_f I + D3) + (1/dt) At_s X^{i-1}
//                - (1-theta) F(X^{i-1}) + theta B^i + (1-theta) B^{i-1},
// accumulated pairwise left to right with one truncation per addition.
// Terms with an exactly zero coefficient are skipped.
inline LowRankMatrix step_rhs(const TimeProblem& tp, const LowRankMatrix& x_prev, int i,
                              Truncator& trunc) {
    if (i < 1 || i > tp.steps)
        throw std::out_of_range("step_rhs: step index " + std::to_string(i) + " outside 1.." +
                                std::to_string(tp.steps));
    const MatrixEquationProblem& base = tp.base;
    std::vector<LowRankMatrix> terms;
    if (x_prev.rank() > 0) {
        terms.emplace_back((1.0 / tp.dt) * (tp.at_fluid * x_prev.factor_u()),
                           tp.rho_diagonal().asDiagonal() * x_prev.factor_v());
        terms.emplace_back((1.0 / tp.dt) * (tp.at_solid * x_prev.factor_u()), x_prev.factor_v());
        if (tp.theta < 1.0)
            for (Index k = 0; k < static_cast<Index>(base.A.size()); ++k)
                terms.push_back(lr_scale(base.term(k, x_prev), -(1.0 - tp.theta)));
    }
    if (tp.theta > 0.0) terms.push_back(lr_scale(tp.rhs_at(i), tp.theta));
    if (tp.theta < 1.0) terms.push_back(lr_scale(tp.rhs_at(i - 1), 1.0 - tp.theta));

    if (terms.empty()) return LowRankMatrix::zero(base.rows(), base.cols());
    LowRankMatrix acc = terms.front();
    for (std::size_t t = 1; t < terms.size(); ++t) acc = trunc(lr_add(acc, terms[t]));
    return acc;
}

// P_T^t = (1/dt)(rho_f + rho_bar) At_f + (1/dt) At_s
//         + theta (A0 + mu_bar A1 + lambda_bar A2 + nu_f rho_bar A3),
// factorized once; the step system matrix does not change over time.
inline Preconditioner build_time_preconditioner(const TimeProblem& tp) {
    const double rho_bar = mean_offset(tp.base, tp.base.num_parameter_terms() - 1);
    SparseMatrix p = ((tp.rho_f_ref + rho_bar) / tp.dt) * tp.at_fluid;
    p = p + (1.0 / tp.dt) * tp.at_solid;
    if (tp.theta > 0.0) p = p + tp.theta * mean_shifted_matrix(tp.base);
    return Preconditioner(std::move(p), PreconditionerKind::MeanShiftedTime);
}

struct ThetaSchemeResult {
    LowRankMatrix x;
    std::vector<ConvergenceRecord> per_step;
    std::vector<double> step_rel_residual;  // of the step system, per step
};

// Runs i = 1..s solving F^i(X^i) = B^i(X^{i-1}) with the configured truncated
// solver, warm-starting every step from the previous iterate. The step
// operator and its preconditioner are built once. Strictly sequential.
inline ThetaSchemeResult run_theta_scheme(const TimeProblem& tp, const SolverConfig& solver_cfg) {
    tp.validate();
    solver_cfg.validate();
    MatrixEquationProblem op = build_step_operator(tp);
    const Preconditioner precond = build_time_preconditioner(tp);

    TruncationConfig rhs_trunc = solver_cfg.truncation;
    Truncator trunc(rhs_trunc);

    ThetaSchemeResult out;
    out.x = tp.x0;
    for (int i = 1; i <= tp.steps; ++i) {
        op.B = step_rhs(tp, out.x, i, trunc);
        SolverConfig step_cfg = solver_cfg;
        step_cfg.truncation.rng_seed = solver_cfg.truncation.rng_seed + static_cast<std::uint64_t>(i);
        SolveResult r = solve(op, precond, step_cfg, out.x);
        if (r.record.breakdown && !r.record.converged)
            throw std::runtime_error("run_theta_scheme: solver broke down at step " + std::to_string(i) +
                                     " (" + r.record.breakdown_reason + ")");
        out.x = std::move(r.x);
        out.step_rel_residual.push_back(r.record.final_rel_residual);
        out.per_step.push_back(std::move(r.record));
    }
    return out;
}

}  // namespace lrmeq

#endif  // LRMEQ_TIMESTEPPING_HPP
