#ifndef LRMEQ_SOLVERS_HPP
#define LRMEQ_SOLVERS_HPP
//
// Project     : lrmeq
// Module      : solvers
// Description : truncated Krylov/Chebyshev solvers on low-rank iterates
//               (GMREST, GMRESTR, ChebyshevT, truncated Bi-CGstab) plus the
//               per-block reference baseline
//

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lrmeq/spectral.hpp"

namespace lrmeq {

enum class SolverMethod { Gmrest, Gmrestr, Chebyshevt, Bicgstabt };

inline const char* to_string(SolverMethod m) {
    switch (m) {
        case SolverMethod::Gmrest: return "gmrest";
        case SolverMethod::Gmrestr: return "gmrestr";
        case SolverMethod::Chebyshevt: return "chebyshevt";
        case SolverMethod::Bicgstabt: return "bicgstabt";
    }
    return "?";
}

struct SolverConfig {
    SolverMethod     method = SolverMethod::Gmrest;
    int              iterations = 10;      // l, total across restart cycles
    int              restart_length = 0;   // d; 0 = single cycle
    TruncationConfig truncation;
    std::optional<EllipseParams> ellipse;  // required for chebyshevt
    bool             record_history = true;
    double           residual_tol = 0.0;   // early exit when > 0; off by default
                                           // so histories match fixed-length runs
    bool             truncate_bicgstab_s = false;  // reinstate the s-update truncation

    void validate() const {
        truncation.validate();
        if (iterations < 1)
            throw std::invalid_argument("SolverConfig: iterations must be >= 1");
        if (method == SolverMethod::Gmrestr &&
            (restart_length < 1 || restart_length > iterations))
            throw std::invalid_argument("SolverConfig: gmrestr needs 1 <= restart divisor <= iterations");
        if (restart_length > iterations)
            throw std::invalid_argument("SolverConfig: restart length exceeds iteration budget");
        if (method == SolverMethod::Chebyshevt) {
            if (!ellipse)
                throw std::invalid_argument("SolverConfig: chebyshevt requires ellipse parameters (d, c)");
            ellipse->validate();
            if (!(ellipse->c > 0.0))
                throw std::invalid_argument("SolverConfig: chebyshevt needs c > 0 (degenerate ellipse rejected)");
        }
    }
};

struct IterationStat {
    int    iter = 0;
    double rel_residual = std::numeric_limits<double>::quiet_NaN();
    Index  rank_before = 0;  // largest rank reached before truncation
    Index  rank_after = 0;   // rank of the stored result
    double seconds = 0.0;
};

struct ConvergenceRecord {
    std::vector<IterationStat> history;
    double    final_rel_residual = std::numeric_limits<double>::quiet_NaN();
    int       iterations_run = 0;
    int       restarts_run = 0;
    bool      converged = false;
    bool      breakdown = false;
    std::string breakdown_reason;
    long long truncation_count = 0;
};

struct SolveResult {
    LowRankMatrix     x;
    ConvergenceRecord record;
};

// Three-term recursion t_{i+1} = 2 (d/c) t_i - t_{i-1} with t_0 = 1,
// t_1 = d/c, and the update weights alpha_i = 2 t_i / (c t_{i+1}),
// beta_i = t_{i-1} / t_{i+1}.
struct ChebyshevCoefficients {
    std::vector<double> t;      // t_0 .. t_{l+1}
    std::vector<double> alpha;  // alpha_1 .. alpha_l at [i-1]
    std::vector<double> beta;   // beta_1 .. beta_l at [i-1]
};

inline ChebyshevCoefficients chebyshev_coefficients(double d, double c, int l) {
    if (!(d > 0.0) || !(c > 0.0) || !(c < std::abs(d)))
        throw std::invalid_argument("chebyshev_coefficients: need d > c > 0");
    ChebyshevCoefficients co;
    co.t.resize(l + 2);
    co.alpha.resize(l);
    co.beta.resize(l);
    co.t[0] = 1.0;
    co.t[1] = d / c;
    for (int i = 1; i <= l; ++i) {
        co.t[i + 1] = 2.0 * (d / c) * co.t[i] - co.t[i - 1];
        co.alpha[i - 1] = 2.0 * co.t[i] / (c * co.t[i + 1]);
        co.beta[i - 1] = co.t[i - 1] / co.t[i + 1];
    }
    return co;
}

namespace solver_detail {

constexpr double kHappyBreakdownFactor = 1e-14;  // vs max |H| seen so far
constexpr double kBreakdownFactor = 1e-14;       // rho/omega vs residual scale
constexpr double kExactStartFactor = 1e-14;      // ||r0|| vs ||B||

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Incrementally Givens-rotated least-squares problem min ||beta e_1 - H y||
// for the (l+1) x l Hessenberg matrix built by the Arnoldi loop.
class HessenbergLs {
public:
    HessenbergLs(int l, double beta) : h_(Matrix::Zero(l + 1, l)), g_(Vector::Zero(l + 1)) {
        g_(0) = beta;
    }

    double max_abs() const { return h_max_; }

    // install column i (rows 0..i+1), rotate, return the new LS residual |g_{i+2}|
    double add_column(int i, const Vector& col) {
        for (int r = 0; r <= i + 1; ++r) {
            h_(r, i) = col(r);
            h_max_ = std::max(h_max_, std::abs(col(r)));
        }
        for (int k = 0; k < i; ++k) {
            const double t1 = cs_[k] * h_(k, i) + sn_[k] * h_(k + 1, i);
            const double t2 = -sn_[k] * h_(k, i) + cs_[k] * h_(k + 1, i);
            h_(k, i) = t1;
            h_(k + 1, i) = t2;
        }
        const double a = h_(i, i), b = h_(i + 1, i);
        const double r = std::hypot(a, b);
        cs_.push_back(r == 0.0 ? 1.0 : a / r);
        sn_.push_back(r == 0.0 ? 0.0 : b / r);
        h_(i, i) = r;
        h_(i + 1, i) = 0.0;
        const double gi = g_(i);
        g_(i) = cs_[i] * gi;
        g_(i + 1) = -sn_[i] * gi;
        return std::abs(g_(i + 1));
    }

    // y solving the leading i x i triangular system
    Vector solve(int i) const {
        Vector y(i);
        for (int r = i - 1; r >= 0; --r) {
            double s = g_(r);
            for (int c = r + 1; c < i; ++c) s -= h_(r, c) * y(c);
            y(r) = h_(r, r) != 0.0 ? s / h_(r, r) : 0.0;
        }
        return y;
    }

private:
    Matrix h_;
    Vector g_;
    std::vector<double> cs_, sn_;
    double h_max_ = 0.0;
};

// X = T(... T(T(X + y_1 V_1) + y_2 V_2) ...), the consecutive final update.
inline LowRankMatrix accumulate_update(const LowRankMatrix& x0,
                                       const std::vector<LowRankMatrix>& basis,
                                       const Vector& y, Truncator& trunc,
                                       Index* max_rank_seen = nullptr) {
    LowRankMatrix acc = x0;
    for (Index j = 0; j < y.size(); ++j) {
        LowRankMatrix sum = lr_add(acc, lr_scale(basis[static_cast<std::size_t>(j)], y(j)));
        if (max_rank_seen) *max_rank_seen = std::max(*max_rank_seen, sum.rank());
        acc = trunc(sum);
    }
    return acc;
}

inline double guarded_bnorm(const MatrixEquationProblem& prob) {
    const double bn = prob.B.norm();
    return bn > 0.0 ? bn : 1.0;
}

// One GMREST cycle (Arnoldi + Givens + consecutive final update).
inline SolveResult gmrest_cycle(const MatrixEquationProblem& prob, const Preconditioner& precond,
                                const SolverConfig& cfg, int l, LowRankMatrix x,
                                Truncator& trunc, int iter_offset) {
    SolveResult out;
    ConvergenceRecord& rec = out.record;
    const double bnorm = guarded_bnorm(prob);

    Residual r0 = residual(prob, x, trunc);
    LowRankMatrix rhat = precond.apply(r0.value);
    const double beta = rhat.norm();
    if (beta == 0.0 || r0.norm <= kExactStartFactor * bnorm ||
        (cfg.residual_tol > 0.0 && r0.norm / bnorm <= cfg.residual_tol)) {
        rec.converged = true;
        rec.final_rel_residual = r0.norm / bnorm;
        out.x = std::move(x);
        return out;
    }

    std::vector<LowRankMatrix> basis;
    basis.reserve(l + 1);
    basis.push_back(lr_scale(rhat, 1.0 / beta));
    HessenbergLs ls(l, beta);

    int iters = 0;
    bool happy = false;
    for (int i = 0; i < l; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        IterationStat stat;
        stat.iter = iter_offset + i + 1;

        LowRankMatrix w = precond.apply(apply_F(prob, basis[i], trunc).first);
        stat.rank_before = w.rank();
        Vector col(i + 2);
        for (int k = 0; k <= i; ++k) {
            col(k) = lr_inner(basis[k], w);
            LowRankMatrix sum = lr_add(w, lr_scale(basis[k], -col(k)));
            stat.rank_before = std::max(stat.rank_before, sum.rank());
            w = trunc(sum);
        }
        const double h_next = w.norm();
        col(i + 1) = h_next;
        ls.add_column(i, col);
        happy = h_next <= kHappyBreakdownFactor * ls.max_abs();
        if (!happy) basis.push_back(lr_scale(w, 1.0 / h_next));
        stat.rank_after = w.rank();
        iters = i + 1;

        bool early_exit = false;
        if (cfg.record_history || cfg.residual_tol > 0.0) {
            const Vector y = ls.solve(iters);
            Truncator probe = trunc;  // keep the solver stream untouched
            LowRankMatrix xi = accumulate_update(x, basis, y, probe);
            stat.rel_residual = relative_residual(prob, xi, probe);
            if (cfg.residual_tol > 0.0 && stat.rel_residual <= cfg.residual_tol) {
                x = std::move(xi);
                rec.converged = true;
                early_exit = true;
            }
        }
        stat.seconds = seconds_since(t0);
        if (cfg.record_history) rec.history.push_back(stat);
        if (happy) {
            rec.breakdown = true;
            rec.breakdown_reason = "happy breakdown (H_{i+1,i} ~ 0)";
            break;
        }
        if (early_exit) break;
    }

    rec.iterations_run = iters;
    if (!rec.converged) {
        const Vector y = ls.solve(iters);
        x = accumulate_update(x, basis, y, trunc);
    }
    rec.final_rel_residual = relative_residual(prob, x, trunc);
    if (cfg.residual_tol > 0.0 && rec.final_rel_residual <= cfg.residual_tol)
        rec.converged = true;
    out.x = std::move(x);
    return out;
}

inline void append_cycle(ConvergenceRecord& acc, const ConvergenceRecord& cycle) {
    acc.history.insert(acc.history.end(), cycle.history.begin(), cycle.history.end());
    acc.iterations_run += cycle.iterations_run;
    acc.final_rel_residual = cycle.final_rel_residual;
    acc.converged = cycle.converged;
    if (cycle.breakdown) {
        acc.breakdown = true;
        acc.breakdown_reason = cycle.breakdown_reason;
    }
}

// One ChebyshevT cycle. The pre-loop half step counts as update 0 and is
// recorded; the iterate after update j is the (j+1)-th iterate in the error
// analysis' numbering.
inline SolveResult chebyshevt_cycle(const MatrixEquationProblem& prob, const Preconditioner& precond,
                                    const SolverConfig& cfg, int l, LowRankMatrix x,
                                    Truncator& trunc, int iter_offset) {
    const EllipseParams& ell = *cfg.ellipse;
    SolveResult out;
    ConvergenceRecord& rec = out.record;
    const double bnorm = guarded_bnorm(prob);
    const double d = ell.d, c = ell.c;

    auto t0 = std::chrono::steady_clock::now();
    Residual r0 = residual(prob, x, trunc);
    if (r0.norm <= kExactStartFactor * bnorm) {
        rec.converged = true;
        rec.final_rel_residual = r0.norm / bnorm;
        out.x = std::move(x);
        return out;
    }
    LowRankMatrix phi = lr_scale(precond.apply(r0.value), 1.0 / d);
    {
        IterationStat stat;
        stat.iter = iter_offset;
        LowRankMatrix sum = lr_add(x, phi);
        stat.rank_before = sum.rank();
        x = trunc(sum);
        stat.rank_after = x.rank();
        stat.seconds = seconds_since(t0);
        rec.history.push_back(stat);  // rel filled by the next residual
    }

    double t_prev = 1.0, t_cur = d / c;
    int updates = 0;
    for (int i = 1; i <= l; ++i) {
        t0 = std::chrono::steady_clock::now();
        Residual ri = residual(prob, x, trunc);
        rec.history.back().rel_residual = ri.norm / bnorm;  // iterate after update i-1
        if (cfg.residual_tol > 0.0 && ri.norm / bnorm <= cfg.residual_tol) {
            rec.converged = true;
            rec.final_rel_residual = ri.norm / bnorm;
            break;
        }
        const double t_next = 2.0 * (d / c) * t_cur - t_prev;
        const double alpha = 2.0 * t_cur / (c * t_next);
        const double beta = t_prev / t_next;
        t_prev = t_cur;
        t_cur = t_next;

        LowRankMatrix rhat = precond.apply(ri.value);
        phi = trunc(lr_add(lr_scale(rhat, alpha), lr_scale(phi, beta)));
        IterationStat stat;
        stat.iter = iter_offset + i;
        LowRankMatrix sum = lr_add(x, phi);
        stat.rank_before = sum.rank();
        x = trunc(sum);
        stat.rank_after = x.rank();
        stat.seconds = seconds_since(t0);
        rec.history.push_back(stat);
        updates = i;
    }
    rec.iterations_run = updates;
    if (std::isnan(rec.final_rel_residual)) {
        rec.final_rel_residual = relative_residual(prob, x, trunc);
        rec.history.back().rel_residual = rec.final_rel_residual;
    }
    if (cfg.residual_tol > 0.0 && rec.final_rel_residual <= cfg.residual_tol)
        rec.converged = true;
    if (!cfg.record_history) rec.history.clear();
    out.x = std::move(x);
    return out;
}

// One truncated Bi-CGstab cycle, van der Vorst recurrences with the residual
// recomputed directly from B - F(X) each loop to avoid drift. Truncation after
// every addition, pairwise, except the s-update (spec'd ablation toggle).
inline SolveResult bicgstabt_cycle(const MatrixEquationProblem& prob, const Preconditioner& precond,
                                   const SolverConfig& cfg, int l, LowRankMatrix x,
                                   Truncator& trunc, int iter_offset) {
    SolveResult out;
    ConvergenceRecord& rec = out.record;
    const double bnorm = guarded_bnorm(prob);

    Residual rr = residual(prob, x, trunc);
    LowRankMatrix r = rr.value;
    if (rr.norm <= kExactStartFactor * bnorm ||
        (cfg.residual_tol > 0.0 && rr.norm / bnorm <= cfg.residual_tol)) {
        rec.converged = true;
        rec.final_rel_residual = rr.norm / bnorm;
        out.x = std::move(x);
        return out;
    }
    const LowRankMatrix rtilde = r;  // fixed shadow residual
    const double rtilde_norm = rtilde.norm();

    LowRankMatrix p, v;
    double rho_prev = 0.0, alpha = 0.0, omega = 0.0;
    for (int i = 1; i <= l; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        IterationStat stat;
        stat.iter = iter_offset + i;

        const double rho = lr_inner(rtilde, r);
        if (std::abs(rho) <= kBreakdownFactor * rtilde_norm * r.norm()) {
            rec.breakdown = true;
            rec.breakdown_reason = "rho ~ 0";
            break;
        }
        if (i == 1) {
            p = r;
        } else {
            const double beta = (rho / rho_prev) * (alpha / omega);
            p = trunc(lr_add(r, lr_scale(p, beta)));
            p = trunc(lr_add(p, lr_scale(v, -beta * omega)));
        }
        const LowRankMatrix phat = precond.apply(p);
        v = apply_F(prob, phat, trunc).first;
        const double rtv = lr_inner(rtilde, v);
        if (std::abs(rtv) <= kBreakdownFactor * rtilde_norm * v.norm()) {
            rec.breakdown = true;
            rec.breakdown_reason = "rtilde'v ~ 0";
            break;
        }
        alpha = rho / rtv;

        LowRankMatrix s = lr_sub(r, lr_scale(v, alpha));
        if (cfg.truncate_bicgstab_s) s = trunc(s);
        if (s.norm() <= kExactStartFactor * bnorm) {
            x = trunc(lr_add(x, lr_scale(phat, alpha)));
            rr = residual(prob, x, trunc);
            r = rr.value;
            rec.converged = true;
            rec.iterations_run = i;
            stat.rel_residual = rr.norm / bnorm;
            stat.rank_after = x.rank();
            stat.seconds = seconds_since(t0);
            if (cfg.record_history) rec.history.push_back(stat);
            break;
        }
        const LowRankMatrix shat = precond.apply(s);
        const LowRankMatrix t = apply_F(prob, shat, trunc).first;
        const double tt = lr_inner(t, t);
        const double ts = lr_inner(t, s);
        if (tt == 0.0 || std::abs(ts) <= kBreakdownFactor * std::sqrt(tt) * s.norm()) {
            rec.breakdown = true;
            rec.breakdown_reason = "omega ~ 0";
            break;
        }
        omega = ts / tt;

        LowRankMatrix sum = lr_add(x, lr_scale(phat, alpha));
        stat.rank_before = sum.rank();
        x = trunc(sum);
        sum = lr_add(x, lr_scale(shat, omega));
        stat.rank_before = std::max(stat.rank_before, sum.rank());
        x = trunc(sum);
        stat.rank_after = x.rank();

        rr = residual(prob, x, trunc);  // direct, avoids the s - omega t drift
        r = rr.value;
        stat.rel_residual = rr.norm / bnorm;
        stat.seconds = seconds_since(t0);
        if (cfg.record_history) rec.history.push_back(stat);
        rec.iterations_run = i;
        rho_prev = rho;
        if (cfg.residual_tol > 0.0 && stat.rel_residual <= cfg.residual_tol) {
            rec.converged = true;
            break;
        }
    }
    rec.final_rel_residual = rr.norm / bnorm;
    out.x = std::move(x);
    return out;
}

template <typename Cycle>
SolveResult run_restarted(const MatrixEquationProblem& prob, const Preconditioner& precond,
                          const SolverConfig& cfg, const LowRankMatrix& x0, Cycle cycle) {
    prob.validate();
    Truncator trunc(cfg.truncation);
    const int per_cycle = cfg.restart_length > 0 ? cfg.restart_length : cfg.iterations;
    const int cycles = std::max(1, cfg.iterations / per_cycle);

    SolveResult out;
    out.x = x0;
    int offset = 0;
    for (int cyc = 0; cyc < cycles; ++cyc) {
        SolveResult r = cycle(prob, precond, cfg, per_cycle, std::move(out.x), trunc, offset);
        out.x = std::move(r.x);
        append_cycle(out.record, r.record);
        out.record.restarts_run = cyc + 1;
        // continue the iteration numbering where the cycle's rows stopped;
        // chebyshev cycles open with their own half-step row at the offset
        if (out.record.history.empty())
            offset += per_cycle;
        else
            offset = out.record.history.back().iter +
                     (cfg.method == SolverMethod::Chebyshevt ? 1 : 0);
        if (out.record.converged || out.record.breakdown) break;
    }
    out.record.truncation_count = trunc.count();
    return out;
}

}  // namespace solver_detail

// Algorithm: preconditioned truncated GMRES over the truncated Krylov
// subspace. The initial residual solves P R = T(B - F(X)) with the truncation
// applied before the solve; the Arnoldi loop orthogonalizes with truncated
// modified Gram-Schmidt; the final update is truncated consecutively.
inline SolveResult gmrest(const MatrixEquationProblem& prob, const Preconditioner& precond,
                          const SolverConfig& cfg, const LowRankMatrix& x0) {
    cfg.validate();
    SolverConfig single = cfg;
    single.restart_length = 0;
    return solver_detail::run_restarted(prob, precond, single, x0, solver_detail::gmrest_cycle);
}

// floor(l/d) chained GMREST(d) cycles, each warm-started from the last.
inline SolveResult gmrestr(const MatrixEquationProblem& prob, const Preconditioner& precond,
                           const SolverConfig& cfg, const LowRankMatrix& x0) {
    cfg.validate();
    return solver_detail::run_restarted(prob, precond, cfg, x0, solver_detail::gmrest_cycle);
}

inline SolveResult chebyshevt(const MatrixEquationProblem& prob, const Preconditioner& precond,
                              const SolverConfig& cfg, const LowRankMatrix& x0) {
    cfg.validate();
    return solver_detail::run_restarted(prob, precond, cfg, x0, solver_detail::chebyshevt_cycle);
}

inline SolveResult bicgstabt(const MatrixEquationProblem& prob, const Preconditioner& precond,
                             const SolverConfig& cfg, const LowRankMatrix& x0) {
    cfg.validate();
    return solver_detail::run_restarted(prob, precond, cfg, x0, solver_detail::bicgstabt_cycle);
}

inline SolveResult solve(const MatrixEquationProblem& prob, const Preconditioner& precond,
                         const SolverConfig& cfg, const LowRankMatrix& x0) {
    switch (cfg.method) {
        case SolverMethod::Gmrest: return gmrest(prob, precond, cfg, x0);
        case SolverMethod::Gmrestr: return gmrestr(prob, precond, cfg, x0);
        case SolverMethod::Chebyshevt: return chebyshevt(prob, precond, cfg, x0);
        case SolverMethod::Bicgstabt: return bicgstabt(prob, precond, cfg, x0);
    }
    throw std::logic_error("solve: unknown method");
}

//
// Per-block classical baseline: solves the m parameter systems independently
// (the comparison route for every equivalence check). Blocks are independent
// and may run on a worker pool.
//

enum class BlockMethod { DirectLu, Gmres, Chebyshev };

struct BlockwiseOptions {
    BlockMethod method = BlockMethod::DirectLu;
    int         iterations = 16;   // per equation, iterative methods
    int         restart = 8;       // gmres restart length
    double      tol = 1e-10;
    std::optional<EllipseParams> ellipse;      // chebyshev
    const Preconditioner*        precond = nullptr;
    int         jobs = 1;
    long long   dense_cap = 10'000'000;  // refuse X beyond this many entries
    bool        throw_on_nonconvergence = false;
};

struct BlockwiseResult {
    Matrix x;  // M x m, columns are the per-parameter solutions
    Vector block_residuals;
    std::vector<Index> non_converged;
};

namespace solver_detail {

inline SparseMatrix block_sparse(const MatrixEquationProblem& prob, Index i) {
    SparseMatrix bl = prob.A[0];
    for (std::size_t k = 1; k < prob.A.size(); ++k)
        bl = bl + (prob.scale[k - 1] * prob.D[k - 1](i)) * prob.A[k];
    bl.makeCompressed();
    return bl;
}

// plain restarted GMRES on one sparse system, optional left preconditioning;
// the restart loop enforces the tolerance on the true residual, the inner
// Givens residual only estimates it in the preconditioned norm
inline Vector dense_gmres(const SparseMatrix& a, const Vector& b, const Preconditioner* pc,
                          int iterations, int restart, double tol) {
    auto prec = [&](const Vector& v) { return pc ? pc->solve(v) : v; };
    Vector x = Vector::Zero(b.size());
    const double target = tol * prec(b).norm();
    const double target_true = tol * b.norm();
    int done = 0;
    while (done < iterations) {
        const int l = std::min(restart, iterations - done);
        const Vector r_true = b - a * x;
        if (r_true.norm() <= target_true) break;
        Vector r = prec(r_true);
        const double beta = r.norm();
        if (beta == 0.0) break;
        std::vector<Vector> basis{r / beta};
        HessenbergLs ls(l, beta);
        int i = 0;
        for (; i < l; ++i) {
            Vector w = prec(a * basis[i]);
            Vector col(i + 2);
            for (int k = 0; k <= i; ++k) {
                col(k) = basis[k].dot(w);
                w -= col(k) * basis[k];
            }
            col(i + 1) = w.norm();
            const double res = ls.add_column(i, col);
            if (col(i + 1) <= kHappyBreakdownFactor * ls.max_abs()) {
                ++i;
                break;
            }
            basis.push_back(w / col(i + 1));
            if (res <= target) {
                ++i;
                break;
            }
        }
        const Vector y = ls.solve(i);
        for (int j = 0; j < i; ++j) x += y(j) * basis[j];
        done += i;
        if (i == 0) break;
    }
    return x;
}

inline Vector dense_chebyshev(const SparseMatrix& a, const Vector& b, const Preconditioner* pc,
                              const EllipseParams& ell, int iterations) {
    auto prec = [&](const Vector& v) { return pc ? pc->solve(v) : v; };
    Vector x = Vector::Zero(b.size());
    Vector r = prec(b - a * x);
    Vector phi = r / ell.d;
    x += phi;
    double t_prev = 1.0, t_cur = ell.d / ell.c;
    for (int i = 1; i <= iterations; ++i) {
        const double t_next = 2.0 * (ell.d / ell.c) * t_cur - t_prev;
        const double alpha = 2.0 * t_cur / (ell.c * t_next);
        const double beta = t_prev / t_next;
        t_prev = t_cur;
        t_cur = t_next;
        r = prec(b - a * x);
        phi = alpha * r + beta * phi;
        x += phi;
    }
    return x;
}

}  // namespace solver_detail

inline BlockwiseResult reference_blockwise_solve(const MatrixEquationProblem& prob,
                                                 const BlockwiseOptions& opts = {}) {
    prob.validate();
    if (opts.method == BlockMethod::Chebyshev) {
        if (!opts.ellipse) throw std::invalid_argument("reference_blockwise_solve: chebyshev needs an ellipse");
        opts.ellipse->validate();
    }
    const Index big_m = prob.rows(), m = prob.cols();
    if (static_cast<long long>(big_m) * m > opts.dense_cap)
        throw std::invalid_argument("reference_blockwise_solve: " + std::to_string(big_m) + "x" +
                                    std::to_string(m) + " exceeds the dense cap of " +
                                    std::to_string(opts.dense_cap) + " entries");

    BlockwiseResult out;
    out.x.resize(big_m, m);
    out.block_residuals.resize(m);

    auto solve_block = [&](Index i) {
        const SparseMatrix a = solver_detail::block_sparse(prob, i);
        const Vector b = prob.B.column(i);
        Vector x;
        switch (opts.method) {
            case BlockMethod::DirectLu: {
                Eigen::SparseLU<SparseMatrix> lu(a);
                if (lu.info() != Eigen::Success)
                    throw std::runtime_error("reference_blockwise_solve: block " + std::to_string(i) +
                                             " is singular");
                x = lu.solve(b);
                break;
            }
            case BlockMethod::Gmres:
                x = solver_detail::dense_gmres(a, b, opts.precond, opts.iterations, opts.restart, opts.tol);
                break;
            case BlockMethod::Chebyshev:
                x = solver_detail::dense_chebyshev(a, b, opts.precond, *opts.ellipse, opts.iterations);
                break;
        }
        out.x.col(i) = x;
        const double bn = b.norm();
        out.block_residuals(i) = (b - a * x).norm() / (bn > 0.0 ? bn : 1.0);
    };

    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        for (Index i = 0; i < m; ++i) solve_block(i);
    } else {
        std::atomic<Index> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mutex;
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&]() {
                try {
                    for (Index i = next.fetch_add(1); i < m; i = next.fetch_add(1)) solve_block(i);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    for (Index i = 0; i < m; ++i)
        if (!(out.block_residuals(i) <= opts.tol)) out.non_converged.push_back(i);
    if (opts.throw_on_nonconvergence && !out.non_converged.empty())
        throw std::runtime_error("reference_blockwise_solve: " + std::to_string(out.non_converged.size()) +
                                 " blocks above tolerance, first index " +
                                 std::to_string(out.non_converged.front()));
    return out;
}

}  // namespace lrmeq

#endif  // LRMEQ_SOLVERS_HPP
