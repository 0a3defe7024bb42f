#ifndef LRMEQ_BOUNDS_HPP
#define LRMEQ_BOUNDS_HPP
//
// Project     : lrmeq
// Module      : bounds
// Description : truncation-error propagation bounds for the truncated GMRES
//               and Chebyshev methods, and the simulator harness comparing
//               them against measured errors
//

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "lrmeq/solvers.hpp"

namespace lrmeq {

// The two analytical regimes for the residual-solve truncation: `Practical`
// truncates the right-hand side before the preconditioner solve (error up to
// eps ||P^{-1}||), `ExactSolve` truncates the solved residual (error up to eps).
enum class BoundVariant { Practical, ExactSolve };

namespace bound_detail {

/// sum_{j=1}^{count} sigma^{j-1}, empty sum = 0
inline double geometric_sum(double sigma, int count) {
    double s = 0.0, p = 1.0;
    for (int j = 0; j < count; ++j) {
        s += p;
        p *= sigma;
    }
    return s;
}

}  // namespace bound_detail

struct GmrestBoundInputs {
    double epsilon = 0.0;
    double sigma_p = 1.0;     // ||P^{-1} A||_2 estimate
    double p_inv_norm = 1.0;  // ||P^{-1}||_2 estimate
    BoundVariant variant = BoundVariant::Practical;
    std::vector<double> c_coeffs;  // untruncated run's least-squares solution
    std::vector<double> d_coeffs;  // truncated run's least-squares solution
};

// Error bound for the k-th truncated Krylov basis element:
//   practical:   eps (sum_{j=1}^{k} sigma^{j-1} + ||P^{-1}|| sigma^k + k)
//   exact-solve: eps (sum_{j=1}^{k+1} sigma^{j-1} + k)
inline double gmrest_basis_bound(int k, const GmrestBoundInputs& in) {
    if (k < 0) throw std::invalid_argument("gmrest_basis_bound: k must be >= 0");
    if (in.variant == BoundVariant::Practical)
        return in.epsilon * (bound_detail::geometric_sum(in.sigma_p, k) +
                             in.p_inv_norm * std::pow(in.sigma_p, k) + k);
    return in.epsilon * (bound_detail::geometric_sum(in.sigma_p, k + 1) + k);
}

// ||x_l - x'_l|| bound from the per-basis-element bounds plus the coefficient
// differences and the eps*l cost of the consecutive final update.
inline double gmrest_iterate_bound(const GmrestBoundInputs& in) {
    if (in.c_coeffs.size() != in.d_coeffs.size())
        throw std::invalid_argument("gmrest_iterate_bound: coefficient lists differ in length");
    const int l = static_cast<int>(in.d_coeffs.size());
    double weighted = 0.0, diff = 0.0;
    for (int j = 1; j <= l; ++j) {
        const double bracket =
            in.variant == BoundVariant::Practical
                ? bound_detail::geometric_sum(in.sigma_p, j - 1) +
                      in.p_inv_norm * std::pow(in.sigma_p, j - 1) + (j - 1)
                : bound_detail::geometric_sum(in.sigma_p, j) + (j - 1);
        weighted += std::abs(in.d_coeffs[j - 1]) * bracket;
        diff += std::abs(in.c_coeffs[j - 1] - in.d_coeffs[j - 1]);
    }
    return in.epsilon * weighted + diff + in.epsilon * l;
}

struct ChebyshevBoundInputs {
    double epsilon = 0.0;
    double sigma_p = 1.0;
    double p_inv_norm = 1.0;
    BoundVariant variant = BoundVariant::Practical;
    double d = 1.0;                   // ellipse center
    std::vector<double> alpha;        // alpha_1.. at [i-1]
    std::vector<double> beta;         // beta_1..  at [i-1]
    std::optional<double> epsilon_r;  // explicitly measured residual-step error
};

// Recursive iterate bounds e_1..e_l; epsilon_r defaults to the variant rule
// (eps ||P^{-1}|| practical, eps exact-solve) unless overridden by a measured
// value. Products over empty index ranges are 1.
inline std::vector<double> chebyshevt_iterate_bounds(int l, const ChebyshevBoundInputs& in) {
    if (l < 1) throw std::invalid_argument("chebyshevt_iterate_bounds: l must be >= 1");
    if (static_cast<int>(in.alpha.size()) < l - 1 || static_cast<int>(in.beta.size()) < l - 1)
        throw std::invalid_argument("chebyshevt_iterate_bounds: missing alpha/beta coefficients for l = " +
                                    std::to_string(l));
    const double eps = in.epsilon;
    const double eps_r = in.epsilon_r ? *in.epsilon_r
                                      : (in.variant == BoundVariant::Practical ? eps * in.p_inv_norm : eps);
    const double ad = std::abs(in.d);
    auto a = [&](int i) { return std::abs(in.alpha[i - 1]); };
    auto b = [&](int i) { return std::abs(in.beta[i - 1]); };

    std::vector<double> e(l + 1, 0.0);
    e[1] = eps + eps_r / ad;
    if (l >= 2)
        e[2] = eps * (3.0 + a(1) * in.sigma_p) + eps_r * (a(1) + (1.0 + b(1) + a(1) * in.sigma_p) / ad);
    for (int j = 3; j <= l; ++j) {
        // tail products prod_{i=1}^{j-k-1} |beta_{i+k}| = |beta_{k+1} ... beta_{j-1}|
        auto beta_tail = [&](int k) {
            double p = 1.0;
            for (int i = k + 1; i <= j - 1; ++i) p *= b(i);
            return p;
        };
        double carry = (1.0 + a(j - 1) * in.sigma_p) * e[j - 1];
        double history = 0.0, phi_terms = 0.0, res_terms = 0.0;
        for (int k = 1; k <= j - 2; ++k) {
            const double tail = beta_tail(k);
            history += a(k) * e[k] * in.sigma_p * tail;
            phi_terms += tail;
        }
        for (int k = 1; k <= j - 1; ++k) res_terms += a(k) * beta_tail(k);
        double beta_full = 1.0;
        for (int k = 1; k <= j - 1; ++k) beta_full *= b(k);
        e[j] = carry + history + eps * (2.0 + phi_terms) + eps_r * (res_terms + beta_full / ad);
    }
    return std::vector<double>(e.begin() + 1, e.end());
}

inline double chebyshevt_iterate_bound(int l, const ChebyshevBoundInputs& in) {
    return chebyshevt_iterate_bounds(l, in).back();
}

//
// Simulator harness. Both trajectories run in the dense format with one
// simulator perturbation per algorithmic truncation point; the untruncated
// reference is the identical code path with eps = 0.
//

enum class SigmaSource { PowerIteration, EllipseDPlusC, Explicit };

struct BoundHarnessOptions {
    int iterations = 10;
    double epsilon = 1e-12;
    std::uint64_t seed = 0;
    BoundVariant variant = BoundVariant::Practical;
    SigmaSource sigma_source = SigmaSource::PowerIteration;
    double sigma_explicit = 0.0;
    double p_inv_norm_explicit = 0.0;    // 0 = estimate by power iteration
    bool use_measured_epsilon_r = true;  // chebyshev bound uses the measured eps_R
    bool strict_feval_epsilon = false;   // per-point eps divided by (#summands - 1)
    int warm_start_iterations = 0;       // restart scenario: x_hat_w becomes the start
    std::optional<LowRankMatrix> start;  // default: all-ones matrix
};

struct BoundHarnessRow {
    int iter = 0;
    double measured_error = 0.0;
    double bound = 0.0;
    double rel_res_full = 0.0;
    double rel_res_trunc = 0.0;
    double basis_error = std::numeric_limits<double>::quiet_NaN();  // gmrest, k = iter-1
    double basis_bound = std::numeric_limits<double>::quiet_NaN();
    bool violation = false;
};

struct BoundHarnessResult {
    std::vector<BoundHarnessRow> rows;
    double sigma_p = 0.0;
    double p_inv_norm = 0.0;
    double epsilon = 0.0;    // per-truncation-point simulator accuracy used
    double epsilon_r = 0.0;  // measured residual-step error (chebyshev)
    int violations = 0;
};

namespace bound_detail {

// Dense truncation simulator: X + (eps/||Z||_F) Z with uniform(0,1) entries,
// fresh Z per call. eps = 0 degrades to the identity, which is exactly the
// untruncated code path.
class DenseSimulator {
public:
    DenseSimulator(double eps, std::uint64_t seed) : eps_(eps), rng_(seed) {}

    Matrix perturbation(Index rows, Index cols) {
        Matrix z(rows, cols);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) z(i, j) = uni(rng_);
        return (eps_ / z.norm()) * z;
    }

    Matrix operator()(const Matrix& x) {
        if (eps_ == 0.0) return x;
        return x + perturbation(x.rows(), x.cols());
    }

    double eps() const { return eps_; }

private:
    double eps_;
    std::mt19937_64 rng_;
};

struct DenseGmrestRun {
    std::vector<Matrix> iterates;         // x_l, l = 1..iters
    std::vector<std::vector<double>> ys;  // least-squares solution per l
    std::vector<double> rel_res;
    int iters = 0;
};

// Dense-format Alg.-1 trajectory instrumented with the simulator; materializes
// the iterate (and its consecutive final update) for every l up to l_max.
inline DenseGmrestRun run_dense_gmrest(const MatrixEquationProblem& prob,
                                       const Preconditioner& precond, const Matrix& x0,
                                       int l_max, DenseSimulator& sim, BoundVariant variant) {
    const Matrix b = prob.B.dense();
    const double bnorm = std::max(b.norm(), 1e-300);

    Matrix r0;
    if (variant == BoundVariant::Practical)
        r0 = precond.solve_dense(sim(b - prob.apply_dense(x0)));
    else
        r0 = sim(precond.solve_dense(b - prob.apply_dense(x0)));
    const double beta = r0.norm();

    DenseGmrestRun run;
    if (beta == 0.0) return run;
    std::vector<Matrix> basis{r0 / beta};
    solver_detail::HessenbergLs ls(l_max, beta);

    for (int i = 0; i < l_max; ++i) {
        Matrix w = sim(precond.solve_dense(prob.apply_dense(basis[i])));
        Vector col(i + 2);
        for (int k = 0; k <= i; ++k) {
            col(k) = (basis[k].array() * w.array()).sum();
            w = sim(w - col(k) * basis[k]);
        }
        col(i + 1) = w.norm();
        ls.add_column(i, col);
        if (col(i + 1) <= solver_detail::kHappyBreakdownFactor * ls.max_abs()) {
            run.iters = i + 1;
            break;
        }
        basis.push_back(w / col(i + 1));
        run.iters = i + 1;
    }

    for (int l = 1; l <= run.iters; ++l) {
        const Vector y = ls.solve(l);
        Matrix xl = x0;
        for (int j = 0; j < l; ++j) xl = sim(xl + y(j) * basis[j]);
        run.iterates.push_back(xl);
        run.ys.emplace_back(y.data(), y.data() + y.size());
        run.rel_res.push_back((b - prob.apply_dense(xl)).norm() / bnorm);
    }
    return run;
}

struct DenseChebyshevRun {
    std::vector<Matrix> iterates;  // x_j, j = 1..l (j counts applied updates)
    std::vector<double> rel_res;
    double epsilon_r = 0.0;  // max measured residual-step error
};

inline DenseChebyshevRun run_dense_chebyshevt(const MatrixEquationProblem& prob,
                                              const Preconditioner& precond, const Matrix& x0,
                                              int l_max, DenseSimulator& sim,
                                              BoundVariant variant, const EllipseParams& ell) {
    const Matrix b = prob.B.dense();
    const double bnorm = std::max(b.norm(), 1e-300);
    DenseChebyshevRun run;

    auto residual_step = [&](const Matrix& x) {
        const Matrix s = b - prob.apply_dense(x);
        Matrix r;
        if (sim.eps() == 0.0) {
            r = precond.solve_dense(s);
        } else if (variant == BoundVariant::Practical) {
            const Matrix delta = sim.perturbation(s.rows(), s.cols());
            r = precond.solve_dense(s + delta);
            run.epsilon_r = std::max(run.epsilon_r, precond.solve_dense(delta).norm());
        } else {
            r = sim(precond.solve_dense(s));
            run.epsilon_r = std::max(run.epsilon_r, sim.eps());
        }
        return r;
    };

    Matrix x = x0;
    Matrix phi = residual_step(x) / ell.d;
    x = sim(x + phi);
    run.iterates.push_back(x);
    run.rel_res.push_back((b - prob.apply_dense(x)).norm() / bnorm);

    double t_prev = 1.0, t_cur = ell.d / ell.c;
    for (int i = 1; i < l_max; ++i) {
        const Matrix r = residual_step(x);
        const double t_next = 2.0 * (ell.d / ell.c) * t_cur - t_prev;
        const double alpha = 2.0 * t_cur / (ell.c * t_next);
        const double beta = t_prev / t_next;
        t_prev = t_cur;
        t_cur = t_next;
        phi = sim(alpha * r + beta * phi);
        x = sim(x + phi);
        run.iterates.push_back(x);
        run.rel_res.push_back((b - prob.apply_dense(x)).norm() / bnorm);
    }
    return run;
}

inline double resolve_sigma(const BoundHarnessOptions& opts, const MatrixEquationProblem& prob,
                            const Preconditioner& precond, const EllipseParams* ell) {
    switch (opts.sigma_source) {
        case SigmaSource::Explicit: return opts.sigma_explicit;
        case SigmaSource::EllipseDPlusC:
            if (!ell) throw std::invalid_argument("bound harness: sigma = d + c needs ellipse parameters");
            return ell->d + ell->c;
        case SigmaSource::PowerIteration: return estimate_sigma_p(prob, precond, 40, opts.seed + 101);
    }
    return 0.0;
}

inline double per_point_epsilon(const BoundHarnessOptions& opts, const MatrixEquationProblem& prob) {
    if (!opts.strict_feval_epsilon) return opts.epsilon;
    const double summands = static_cast<double>(prob.A.size());
    return opts.epsilon / std::max(1.0, summands - 1.0);
}

inline Matrix harness_start(const BoundHarnessOptions& opts, const MatrixEquationProblem& prob) {
    if (opts.start) return opts.start->dense();
    return Matrix::Ones(prob.rows(), prob.cols());
}

}  // namespace bound_detail

// GMREST bound harness: truncated (simulator) and untruncated trajectories run
// side by side from the same start; records measured iterate errors against
// the iterate bound, and the truncated power-basis errors against the basis
// bound.
inline BoundHarnessResult run_gmrest_bound_harness(const MatrixEquationProblem& prob,
                                                   const Preconditioner& precond,
                                                   const BoundHarnessOptions& opts) {
    prob.validate();
    BoundHarnessResult out;
    out.epsilon = bound_detail::per_point_epsilon(opts, prob);
    out.sigma_p = bound_detail::resolve_sigma(opts, prob, precond, nullptr);
    out.p_inv_norm = opts.p_inv_norm_explicit > 0.0 ? opts.p_inv_norm_explicit
                                                    : precond.inv_norm_estimate(30, opts.seed + 7);

    Matrix x0 = bound_detail::harness_start(opts, prob);
    if (opts.warm_start_iterations > 0) {
        bound_detail::DenseSimulator warm(out.epsilon, opts.seed + 1);
        auto w = bound_detail::run_dense_gmrest(prob, precond, x0, opts.warm_start_iterations,
                                                warm, opts.variant);
        if (!w.iterates.empty()) x0 = w.iterates.back();
    }

    bound_detail::DenseSimulator sim_off(0.0, opts.seed + 2);
    bound_detail::DenseSimulator sim_on(out.epsilon, opts.seed + 3);
    const auto full = bound_detail::run_dense_gmrest(prob, precond, x0, opts.iterations,
                                                     sim_off, opts.variant);
    const auto trunc = bound_detail::run_dense_gmrest(prob, precond, x0, opts.iterations,
                                                      sim_on, opts.variant);

    // truncated power-basis elements against the exact Krylov chain
    const int l_run = std::min(full.iters, trunc.iters);
    std::vector<double> basis_err;
    {
        bound_detail::DenseSimulator sim_basis(out.epsilon, opts.seed + 4);
        const Matrix b = prob.B.dense();
        Matrix exact = precond.solve_dense(b - prob.apply_dense(x0));
        Matrix hat;
        if (opts.variant == BoundVariant::Practical)
            hat = precond.solve_dense(sim_basis(b - prob.apply_dense(x0)));
        else
            hat = sim_basis(precond.solve_dense(b - prob.apply_dense(x0)));
        basis_err.push_back((hat - exact).norm());
        for (int k = 1; k < l_run; ++k) {
            exact = precond.solve_dense(prob.apply_dense(exact));
            hat = sim_basis(precond.solve_dense(prob.apply_dense(hat)));
            basis_err.push_back((hat - exact).norm());
        }
    }

    GmrestBoundInputs in;
    in.epsilon = out.epsilon;
    in.sigma_p = out.sigma_p;
    in.p_inv_norm = out.p_inv_norm;
    in.variant = opts.variant;
    for (int l = 1; l <= l_run; ++l) {
        BoundHarnessRow row;
        row.iter = l;
        row.measured_error = (trunc.iterates[l - 1] - full.iterates[l - 1]).norm();
        in.c_coeffs = full.ys[l - 1];
        in.d_coeffs = trunc.ys[l - 1];
        row.bound = gmrest_iterate_bound(in);
        row.rel_res_full = full.rel_res[l - 1];
        row.rel_res_trunc = trunc.rel_res[l - 1];
        row.basis_error = basis_err[l - 1];
        row.basis_bound = gmrest_basis_bound(l - 1, in);
        row.violation = row.measured_error > row.bound || row.basis_error > row.basis_bound;
        if (row.violation) ++out.violations;
        out.rows.push_back(row);
    }
    return out;
}

// ChebyshevT bound harness; the iterate index counts applied updates, matching
// the recursion's numbering (index 1 is the pre-loop half step).
inline BoundHarnessResult run_chebyshevt_bound_harness(const MatrixEquationProblem& prob,
                                                       const Preconditioner& precond,
                                                       const EllipseParams& ellipse,
                                                       const BoundHarnessOptions& opts) {
    prob.validate();
    ellipse.validate();
    if (!(ellipse.c > 0.0))
        throw std::invalid_argument("bound harness: chebyshevt needs c > 0");

    BoundHarnessResult out;
    out.epsilon = bound_detail::per_point_epsilon(opts, prob);
    out.sigma_p = bound_detail::resolve_sigma(opts, prob, precond, &ellipse);
    out.p_inv_norm = opts.p_inv_norm_explicit > 0.0 ? opts.p_inv_norm_explicit
                                                    : precond.inv_norm_estimate(30, opts.seed + 7);

    Matrix x0 = bound_detail::harness_start(opts, prob);
    if (opts.warm_start_iterations > 0) {
        bound_detail::DenseSimulator warm(out.epsilon, opts.seed + 1);
        auto w = bound_detail::run_dense_chebyshevt(prob, precond, x0, opts.warm_start_iterations,
                                                    warm, opts.variant, ellipse);
        if (!w.iterates.empty()) x0 = w.iterates.back();
    }
    bound_detail::DenseSimulator sim_off(0.0, opts.seed + 2);
    bound_detail::DenseSimulator sim_on(out.epsilon, opts.seed + 3);
    const auto full = bound_detail::run_dense_chebyshevt(prob, precond, x0, opts.iterations,
                                                         sim_off, opts.variant, ellipse);
    const auto trunc = bound_detail::run_dense_chebyshevt(prob, precond, x0, opts.iterations,
                                                          sim_on, opts.variant, ellipse);
    out.epsilon_r = trunc.epsilon_r;

    const auto coeffs = chebyshev_coefficients(ellipse.d, ellipse.c, opts.iterations);
    ChebyshevBoundInputs in;
    in.epsilon = out.epsilon;
    in.sigma_p = out.sigma_p;
    in.p_inv_norm = out.p_inv_norm;
    in.variant = opts.variant;
    in.d = ellipse.d;
    in.alpha = coeffs.alpha;
    in.beta = coeffs.beta;
    if (opts.use_measured_epsilon_r) in.epsilon_r = trunc.epsilon_r;
    const auto bounds = chebyshevt_iterate_bounds(opts.iterations, in);

    for (int j = 1; j <= static_cast<int>(trunc.iterates.size()); ++j) {
        BoundHarnessRow row;
        row.iter = j;
        row.measured_error = (trunc.iterates[j - 1] - full.iterates[j - 1]).norm();
        row.bound = bounds[j - 1];
        row.rel_res_full = full.rel_res[j - 1];
        row.rel_res_trunc = trunc.rel_res[j - 1];
        row.violation = row.measured_error > row.bound;
        if (row.violation) ++out.violations;
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace lrmeq

#endif  // LRMEQ_BOUNDS_HPP
