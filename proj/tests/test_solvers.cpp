#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lrmeq/probgen.hpp"
#include "lrmeq/solvers.hpp"

#include "oracles.hpp"

using namespace lrmeq;

namespace {

GeneratedProblem small_problem(Index m_rows, Index m1, Index m2, Index m3, std::uint64_t seed,
                               double pert = 0.3) {
    auto spec = GeneratorSpec::defaults(m_rows, m1, m2, m3, seed);
    spec.perturbation = pert;
    return generate(spec);
}

SolverConfig exact_cfg(SolverMethod method, int iters, Index rank, int restart = 0) {
    SolverConfig cfg;
    cfg.method = method;
    cfg.iterations = iters;
    cfg.restart_length = restart;
    cfg.truncation.mode = TruncationMode::ExactRank;
    cfg.truncation.rank = rank;
    return cfg;
}

// Jacobi preconditioner: with a single sample the mean-shifted P would equal
// the block itself and every method would converge in one step, which makes
// the m = 1 reduction comparisons vacuous.
Preconditioner jacobi(const MatrixEquationProblem& prob) {
    SparseMatrix d(prob.rows(), prob.rows());
    std::vector<Eigen::Triplet<double>> t;
    for (Index i = 0; i < prob.rows(); ++i) t.emplace_back(i, i, prob.A[0].coeff(i, i));
    d.setFromTriplets(t.begin(), t.end());
    return Preconditioner(d, PreconditionerKind::Custom);
}

}  // namespace

TEST_CASE("chebyshev coefficient recursion at d=1, c=0.6") {
    const auto co = chebyshev_coefficients(1.0, 0.6, 3);
    CHECK(co.t[1] == Catch::Approx(5.0 / 3.0).epsilon(1e-14));
    CHECK(co.t[2] == Catch::Approx(41.0 / 9.0).epsilon(1e-14));
    CHECK(co.alpha[0] == Catch::Approx(50.0 / 41.0).epsilon(1e-14));
    CHECK(co.beta[0] == Catch::Approx(9.0 / 41.0).epsilon(1e-14));
    // the reported decimals
    CHECK(co.t[1] == Catch::Approx(1.6667).margin(5e-5));
    CHECK(co.t[2] == Catch::Approx(4.5556).margin(5e-5));
    CHECK(co.alpha[0] == Catch::Approx(1.2195).margin(5e-5));
    CHECK(co.beta[0] == Catch::Approx(0.2195).margin(5e-5));
    CHECK_THROWS_AS(chebyshev_coefficients(1.0, 0.0, 2), std::invalid_argument);
}

TEST_CASE("gmrest reductions and oracle equivalence") {
    SECTION("m = 1 reduces to classical preconditioned GMRES") {
        auto gen = small_problem(30, 1, 1, 1, 11);
        auto& prob = gen.problem;
        Preconditioner pc = jacobi(prob);
        auto cfg = exact_cfg(SolverMethod::Gmrest, 8, 1);
        auto res = gmrest(prob, pc, cfg, LowRankMatrix::zero(30, 1));

        oracle::PreconditionedSystem sys(prob, Matrix(pc.matrix()));
        auto trace = oracle::gmres_trace(sys, oracle::stacked_rhs(prob), Vector::Zero(30), 8);
        REQUIRE(trace.iterates.size() == res.record.history.size());
        const Vector got = oracle::vec(res.x.dense());
        const Vector want = trace.iterates.back();
        CHECK((got - want).norm() < 1e-10 * want.norm());
        const Vector b = oracle::stacked_rhs(prob);
        for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
            const double oracle_rel = (b - sys.a_big * trace.iterates[i]).norm() / b.norm();
            CHECK(res.record.history[i].rel_residual ==
                  Catch::Approx(oracle_rel).epsilon(1e-8).margin(1e-13));
        }
    }

    SECTION("an exact start converges immediately") {
        auto gen = small_problem(20, 2, 2, 1, 12);
        auto& prob = gen.problem;
        Preconditioner pc = Preconditioner::mean_shifted(prob);
        auto ref = reference_blockwise_solve(prob, {});
        auto xstar = LowRankMatrix::from_dense(ref.x);
        auto cfg = exact_cfg(SolverMethod::Gmrest, 5, 20);
        auto res = gmrest(prob, pc, cfg, xstar);
        CHECK(res.record.converged);
        CHECK(res.record.final_rel_residual < 1e-10);
        CHECK(res.record.iterations_run == 0);
    }

    SECTION("full-rank iterates match the dense global GMRES per iteration") {
        std::mt19937_64 seeds(13);
        for (int trial = 0; trial < 3; ++trial) {
            auto gen = small_problem(24 + 4 * trial, 3, 2, 2, seeds());
            auto& prob = gen.problem;
            const Index rank = std::min(prob.rows(), prob.cols());
            Preconditioner pc = Preconditioner::mean_shifted(prob);
            auto cfg = exact_cfg(SolverMethod::Gmrest, 7, rank);
            auto res = gmrest(prob, pc, cfg, LowRankMatrix::zero(prob.rows(), prob.cols()));

            oracle::PreconditionedSystem sys(prob, Matrix(pc.matrix()));
            auto trace = oracle::gmres_trace(sys, oracle::stacked_rhs(prob),
                                             Vector::Zero(prob.rows() * prob.cols()), 7);
            REQUIRE(res.record.history.size() == trace.iterates.size());
            // final iterate and the recorded per-iteration residuals line up
            const Vector got = oracle::vec(res.x.dense());
            const Vector want = trace.iterates.back();
            CHECK((got - want).norm() < 1e-9 * (1.0 + want.norm()));
            const Matrix big = sys.a_big;
            const Vector b = oracle::stacked_rhs(prob);
            for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
                const double oracle_rel = (b - big * trace.iterates[i]).norm() / b.norm();
                CHECK(res.record.history[i].rel_residual ==
                      Catch::Approx(oracle_rel).epsilon(1e-6).margin(1e-11));
            }
        }
    }

    SECTION("residual norms within one cycle are non-increasing (untruncated limit)") {
        auto gen = small_problem(24, 2, 2, 2, 14);
        auto& prob = gen.problem;
        Preconditioner pc = Preconditioner::mean_shifted(prob);
        auto cfg = exact_cfg(SolverMethod::Gmrest, 8, std::min(prob.rows(), prob.cols()));
        auto res = gmrest(prob, pc, cfg, LowRankMatrix::zero(prob.rows(), prob.cols()));
        for (std::size_t i = 1; i < res.record.history.size(); ++i)
            CHECK(res.record.history[i].rel_residual <=
                  res.record.history[i - 1].rel_residual * (1.0 + 1e-9));
    }

    SECTION("solver-reported residual matches an independent recomputation") {
        auto gen = small_problem(26, 2, 2, 2, 15);
        auto& prob = gen.problem;
        Preconditioner pc = Preconditioner::mean_shifted(prob);
        auto cfg = exact_cfg(SolverMethod::Gmrest, 6, 8);
        auto res = gmrest(prob, pc, cfg, LowRankMatrix::zero(prob.rows(), prob.cols()));
        Truncator trunc(cfg.truncation);
        CHECK(res.record.final_rel_residual ==
              Catch::Approx(relative_residual(prob, res.x, trunc)).epsilon(1e-10));
    }

    SECTION("rank cap 2R between truncations, R after") {
        auto gen = small_problem(24, 2, 2, 2, 16);
        auto& prob = gen.problem;
        Preconditioner pc = Preconditioner::mean_shifted(prob);
        auto cfg = exact_cfg(SolverMethod::Gmrest, 6, 5);
        auto res = gmrest(prob, pc, cfg, LowRankMatrix::zero(prob.rows(), prob.cols()));
        for (const auto& stat : res.record.history) {
            CHECK(stat.rank_before <= 2 * 5 + 1);  // +1 for the rank-1 right-hand side
            CHECK(stat.rank_after <= 5);
        }
    }
}

TEST_CASE("gmrestr restart chaining") {
    auto gen = small_problem(30, 3, 2, 2, 21);
    auto& prob = gen.problem;
    Preconditioner pc = Preconditioner::mean_shifted(prob);
    const auto x0 = LowRankMatrix::zero(prob.rows(), prob.cols());

    SECTION("divisor equal to the budget is one plain cycle") {
        auto a = gmrestr(prob, pc, exact_cfg(SolverMethod::Gmrestr, 6, 6, 6), x0);
        auto b = gmrest(prob, pc, exact_cfg(SolverMethod::Gmrest, 6, 6), x0);
        CHECK((a.x.dense() - b.x.dense()).norm() < 1e-13 * (1.0 + b.x.dense().norm()));
        CHECK(a.record.restarts_run == 1);
    }

    SECTION("two chained cycles do not lose to a single half-length run") {
        auto two = gmrestr(prob, pc, exact_cfg(SolverMethod::Gmrestr, 12, 6, 6), x0);
        auto one = gmrest(prob, pc, exact_cfg(SolverMethod::Gmrest, 6, 6), x0);
        CHECK(two.record.restarts_run == 2);
        CHECK(two.record.final_rel_residual <= one.record.final_rel_residual * (1.0 + 1e-12));
    }

    SECTION("the reference restart schedule reaches 1e-8 at desk scale") {
        auto desk = small_problem(120, 3, 3, 3, 22, /*pert=*/0.1);
        Preconditioner pdesk = Preconditioner::mean_shifted(desk.problem);
        auto cfg = exact_cfg(SolverMethod::Gmrestr, 18, 25, 6);
        auto res = gmrestr(desk.problem, pdesk, cfg, LowRankMatrix::zero(120, 27));
        CHECK(res.record.final_rel_residual < 1e-8);
    }

    SECTION("config validation") {
        CHECK_THROWS_AS(gmrestr(prob, pc, exact_cfg(SolverMethod::Gmrestr, 6, 4, 0), x0),
                        std::invalid_argument);
        CHECK_THROWS_AS(gmrestr(prob, pc, exact_cfg(SolverMethod::Gmrestr, 6, 4, 7), x0),
                        std::invalid_argument);
    }
}

TEST_CASE("chebyshevt") {
    auto gen = small_problem(28, 2, 2, 2, 31);
    auto& prob = gen.problem;
    Preconditioner pc = Preconditioner::mean_shifted(prob);
    auto ell = estimate_ellipse(prob, pc, gen.grid, {});
    const auto x0 = LowRankMatrix::zero(prob.rows(), prob.cols());

    SECTION("missing or degenerate ellipse is a config error") {
        auto cfg = exact_cfg(SolverMethod::Chebyshevt, 5, 8);
        CHECK_THROWS_AS(chebyshevt(prob, pc, cfg, x0), std::invalid_argument);
        cfg.ellipse = EllipseParams{1.0, 0.0, 1.0, 1.0, EllipseParams::Source::UserSupplied};
        CHECK_THROWS_AS(chebyshevt(prob, pc, cfg, x0), std::invalid_argument);
    }

    SECTION("full-rank run matches the dense Chebyshev semi-iteration") {
        auto cfg = exact_cfg(SolverMethod::Chebyshevt, 8, std::min(prob.rows(), prob.cols()));
        cfg.ellipse = ell;
        auto res = chebyshevt(prob, pc, cfg, x0);

        oracle::PreconditionedSystem sys(prob, Matrix(pc.matrix()));
        auto trace = oracle::chebyshev_trace(sys, oracle::stacked_rhs(prob),
                                             Vector::Zero(prob.rows() * prob.cols()), ell.d, ell.c, 8);
        const Vector got = oracle::vec(res.x.dense());
        const Vector want = trace.back();
        CHECK((got - want).norm() < 1e-9 * (1.0 + want.norm()));
        REQUIRE(res.record.history.size() == trace.size());
    }

    SECTION("monotone residual decrease for a symmetric positive definite block") {
        // m = 1, spectrum inside [d-c, d+c], identity preconditioner
        MatrixEquationProblem spd;
        const Index n = 25;
        Matrix dense = Matrix::Zero(n, n);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> uni(0.5, 1.5);  // eigenvalues
        for (Index i = 0; i < n; ++i) dense(i, i) = uni(rng);
        spd.A.push_back(SparseMatrix(dense.sparseView()));
        SparseMatrix zero(n, n);
        spd.A.push_back(zero);
        spd.D.push_back(Vector::Zero(1));
        spd.scale = {1.0};
        spd.B = LowRankMatrix::rank_one(Vector::Ones(n), Vector::Ones(1));
        SparseMatrix eye(n, n);
        eye.setIdentity();
        Preconditioner ident(eye, PreconditionerKind::Custom);

        auto cfg = exact_cfg(SolverMethod::Chebyshevt, 10, 1);
        cfg.ellipse = EllipseParams{1.0, 0.5, 0.5, 1.5, EllipseParams::Source::UserSupplied};
        auto res = chebyshevt(spd, ident, cfg, LowRankMatrix::zero(n, 1));
        for (std::size_t i = 1; i < res.record.history.size(); ++i)
            CHECK(res.record.history[i].rel_residual < res.record.history[i - 1].rel_residual);
        CHECK(res.record.final_rel_residual < 1e-4);
    }

    SECTION("an exact start stays at the solution") {
        auto ref = reference_blockwise_solve(prob, {});
        auto cfg = exact_cfg(SolverMethod::Chebyshevt, 4, std::min(prob.rows(), prob.cols()));
        cfg.ellipse = ell;
        auto res = chebyshevt(prob, pc, cfg, LowRankMatrix::from_dense(ref.x));
        CHECK(res.record.final_rel_residual < 1e-9);
    }
}

TEST_CASE("bicgstabt") {
    auto gen = small_problem(26, 2, 2, 2, 41);
    auto& prob = gen.problem;
    Preconditioner pc = Preconditioner::mean_shifted(prob);
    const auto x0 = LowRankMatrix::zero(prob.rows(), prob.cols());

    SECTION("m = 1 full rank matches the dense reference run") {
        auto gen1 = small_problem(30, 1, 1, 1, 42);
        auto& p1 = gen1.problem;
        Preconditioner pc1 = jacobi(p1);
        auto cfg = exact_cfg(SolverMethod::Bicgstabt, 6, 1);
        auto res = bicgstabt(p1, pc1, cfg, LowRankMatrix::zero(30, 1));

        oracle::PreconditionedSystem sys(p1, Matrix(pc1.matrix()));
        auto trace = oracle::bicgstab_trace(sys, oracle::stacked_rhs(p1), Vector::Zero(30), 6,
                                            /*direct_residual=*/true);
        REQUIRE(trace.iterates.size() == res.record.history.size());
        for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
            const double rel = (oracle::stacked_rhs(p1) - sys.a_big * trace.iterates[i]).norm() /
                               oracle::stacked_rhs(p1).norm();
            CHECK(res.record.history[i].rel_residual == Catch::Approx(rel).epsilon(1e-6).margin(1e-12));
        }
        // and against the fully classical recurrence variant
        auto classic = oracle::bicgstab_trace(sys, oracle::stacked_rhs(p1), Vector::Zero(30), 6,
                                              /*direct_residual=*/false);
        const Vector got = oracle::vec(res.x.dense());
        CHECK((got - classic.iterates.back()).norm() < 1e-8 * (1.0 + classic.iterates.back().norm()));
    }

    SECTION("global full-rank run matches the dense global trace") {
        const Index rank = std::min(prob.rows(), prob.cols());
        auto cfg = exact_cfg(SolverMethod::Bicgstabt, 5, rank);
        auto res = bicgstabt(prob, pc, cfg, x0);
        oracle::PreconditionedSystem sys(prob, Matrix(pc.matrix()));
        auto trace = oracle::bicgstab_trace(sys, oracle::stacked_rhs(prob),
                                            Vector::Zero(prob.rows() * prob.cols()), 5, true);
        REQUIRE(!trace.iterates.empty());
        const Vector got = oracle::vec(res.x.dense());
        CHECK((got - trace.iterates.back()).norm() < 1e-8 * (1.0 + trace.iterates.back().norm()));
    }

    SECTION("an exact start flags convergence at iteration zero") {
        auto ref = reference_blockwise_solve(prob, {});
        auto cfg = exact_cfg(SolverMethod::Bicgstabt, 5, std::min(prob.rows(), prob.cols()));
        auto res = bicgstabt(prob, pc, cfg, LowRankMatrix::from_dense(ref.x));
        CHECK(res.record.converged);
        CHECK(res.record.iterations_run == 0);
    }

    SECTION("restarted 6+6 does not lose to a straight 12 on the desk problem") {
        auto desk = small_problem(120, 3, 3, 3, 43, /*pert=*/0.1);
        Preconditioner pdesk = Preconditioner::mean_shifted(desk.problem);
        auto restarted = bicgstabt(desk.problem, pdesk,
                                   exact_cfg(SolverMethod::Bicgstabt, 12, 20, 6),
                                   LowRankMatrix::zero(120, 27));
        auto straight = bicgstabt(desk.problem, pdesk,
                                  exact_cfg(SolverMethod::Bicgstabt, 12, 20, 0),
                                  LowRankMatrix::zero(120, 27));
        CHECK(restarted.record.final_rel_residual <=
              straight.record.final_rel_residual * (1.0 + 1e-9));
    }

    SECTION("the s-update truncation toggle is honored in the truncation count") {
        auto cfg = exact_cfg(SolverMethod::Bicgstabt, 4, 6);
        auto without = bicgstabt(prob, pc, cfg, x0);
        cfg.truncate_bicgstab_s = true;
        auto with = bicgstabt(prob, pc, cfg, x0);
        CHECK(with.record.truncation_count ==
              without.record.truncation_count + with.record.iterations_run);
    }
}

TEST_CASE("reference blockwise baseline") {
    std::mt19937_64 rng(51);

    SECTION("single block is a single classical solve") {
        auto gen = small_problem(20, 1, 1, 1, 52);
        auto ref = reference_blockwise_solve(gen.problem, {});
        CHECK(ref.x.cols() == 1);
        CHECK(ref.block_residuals(0) < 1e-12);
    }

    SECTION("zero diagonals give identical columns and a rank-1 solution") {
        auto gen = small_problem(18, 2, 2, 1, 53);
        for (auto& d : gen.problem.D) d.setZero();
        auto ref = reference_blockwise_solve(gen.problem, {});
        for (Index j = 1; j < ref.x.cols(); ++j)
            CHECK((ref.x.col(j) - ref.x.col(0)).norm() < 1e-12 * ref.x.col(0).norm());
        Eigen::JacobiSVD<Matrix> svd(ref.x);
        CHECK(svd.singularValues()(1) < 1e-12 * svd.singularValues()(0));
    }

    SECTION("direct LU residuals are self-certifying") {
        auto gen = small_problem(30, 2, 2, 2, 54);
        auto ref = reference_blockwise_solve(gen.problem, {});
        CHECK(ref.block_residuals.maxCoeff() < 1e-12);
        CHECK(ref.non_converged.empty());
    }

    SECTION("per-block gmres and chebyshev reach the tolerance") {
        auto gen = small_problem(30, 2, 2, 2, 55, /*pert=*/0.15);
        Preconditioner pc = Preconditioner::mean_shifted(gen.problem);
        auto ell = estimate_ellipse(gen.problem, pc, gen.grid, {});

        BlockwiseOptions g;
        g.method = BlockMethod::Gmres;
        g.iterations = 24;
        g.restart = 8;
        g.tol = 1e-9;
        g.precond = &pc;
        g.jobs = 2;
        auto rg = reference_blockwise_solve(gen.problem, g);
        CHECK(rg.block_residuals.maxCoeff() < 1e-9);

        BlockwiseOptions c;
        c.method = BlockMethod::Chebyshev;
        c.iterations = 40;
        c.tol = 1e-8;
        c.ellipse = ell;
        c.precond = &pc;
        auto rc = reference_blockwise_solve(gen.problem, c);
        CHECK(rc.block_residuals.maxCoeff() < 1e-8);
    }

    SECTION("the dense cap is enforced") {
        auto gen = small_problem(20, 2, 2, 2, 56);
        BlockwiseOptions opts;
        opts.dense_cap = 10;
        CHECK_THROWS_WITH(reference_blockwise_solve(gen.problem, opts),
                          Catch::Matchers::ContainsSubstring("cap"));
    }
    (void)rng;
}
