//
// lrmeq command line: generate / solve / estimate / bounds / timestep.
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.
//

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lrmeq/lrmeq.hpp"

using namespace lrmeq;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double secs(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(std::numeric_limits<double>::max_digits10);
    return out;
}

// --generate "M=200,m1=5,m2=5,m3=5,seed=1,pert=0.1,density=0.02,nonsym=0.3,recipe=laplacian"
GeneratorSpec parse_generator_spec(const std::string& text) {
    Index m_rows = 200, m1 = 3, m2 = 3, m3 = 3;
    std::uint64_t seed = 1;
    std::optional<double> pert, density, nonsym;
    GeneratorRecipe recipe = GeneratorRecipe::LaplacianConvection;

    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("generator spec: expected key=value in '" + item + "'");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        try {
            if (key == "M") m_rows = std::stol(value);
            else if (key == "m1") m1 = std::stol(value);
            else if (key == "m2") m2 = std::stol(value);
            else if (key == "m3") m3 = std::stol(value);
            else if (key == "seed") seed = std::stoull(value);
            else if (key == "pert") pert = std::stod(value);
            else if (key == "density") density = std::stod(value);
            else if (key == "nonsym") nonsym = std::stod(value);
            else if (key == "recipe") {
                if (value == "laplacian") recipe = GeneratorRecipe::LaplacianConvection;
                else if (value == "random") recipe = GeneratorRecipe::RandomSparseDominant;
                else throw ConfigError("generator spec: unknown recipe '" + value + "'");
            } else {
                throw ConfigError("generator spec: unknown key '" + key + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("generator spec: bad value for '" + key + "'");
        }
    }
    auto spec = GeneratorSpec::defaults(m_rows, m1, m2, m3, seed);
    spec.recipe = recipe;
    if (pert) spec.perturbation = *pert;
    if (density) spec.density = *density;
    if (nonsym) spec.nonsymmetry_strength = *nonsym;
    return spec;
}

struct ProblemArgs {
    std::string manifest;
    std::string generate_spec;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--manifest", manifest, "problem manifest file (key = value, Matrix Market parts)");
        cmd.add_option("--generate", generate_spec,
                       "inline generator spec, e.g. M=400,m1=5,m2=5,m3=5,seed=1");
    }

    LoadedProblem load(std::optional<GeneratorSpec>* spec_out = nullptr) const {
        if (manifest.empty() == generate_spec.empty())
            throw ConfigError("exactly one of --manifest and --generate is required");
        if (!manifest.empty()) return load_problem(manifest);
        const auto spec = parse_generator_spec(generate_spec);
        if (spec_out) *spec_out = spec;
        auto gen = generate(spec);
        return LoadedProblem{std::move(gen.problem), std::move(gen.grid), std::nullopt};
    }
};

struct SolverArgs {
    std::string method = "gmrestr";
    Index rank = 30;
    int iters = 0;        // 0 = derive from restarts * per-restart
    int restarts = 0;     // 0 = default schedule (3 cycles)
    int per_restart = 0;  // 0 = default cycle length (6), or straight run with --iters
    std::string trunc_mode = "exact";
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    double tol = 0.0;
    bool truncate_s = false;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--method", method,
                       "gmrest|gmrestr|chebyshevt|bicgstabt|reference (default gmrestr)");
        cmd.add_option("--rank,-R", rank, "truncation rank R");
        cmd.add_option("--iters", iters, "total iteration budget (default restarts*per-restart)");
        cmd.add_option("--restarts", restarts, "number of restart cycles");
        cmd.add_option("--per-restart", per_restart, "iterations per restart cycle");
        cmd.add_option("--trunc-mode", trunc_mode, "exact|simulator");
        cmd.add_option("--epsilon", epsilon, "simulator accuracy (simulator mode)");
        cmd.add_option("--seed", seed, "simulator stream seed");
        cmd.add_option("--tol", tol, "optional residual tolerance for early exit (0 = fixed length)");
        cmd.add_flag("--truncate-s", truncate_s, "truncate the bicgstab s-update as well");
    }

    SolverConfig build(std::optional<EllipseParams> ellipse) const {
        SolverConfig cfg;
        if (method == "gmrest") cfg.method = SolverMethod::Gmrest;
        else if (method == "gmrestr") cfg.method = SolverMethod::Gmrestr;
        else if (method == "chebyshevt") cfg.method = SolverMethod::Chebyshevt;
        else if (method == "bicgstabt") cfg.method = SolverMethod::Bicgstabt;
        else throw ConfigError("unknown --method '" + method + "'");
        // --restarts K --per-restart d gives K cycles of d; --iters l alone is
        // a straight run; --iters with --per-restart chops l into cycles of d
        int l = iters, d = per_restart;
        if (l <= 0) {
            if (d <= 0) d = 6;
            l = (restarts > 0 ? restarts : 3) * d;
        }
        cfg.iterations = l;
        cfg.restart_length = d > 0 ? d : 0;
        if (cfg.method == SolverMethod::Gmrest) cfg.restart_length = 0;
        // gmrestr with no divisor degenerates to a single cycle (divisor = l)
        if (cfg.method == SolverMethod::Gmrestr && cfg.restart_length == 0)
            cfg.restart_length = l;
        if (trunc_mode == "exact") cfg.truncation.mode = TruncationMode::ExactRank;
        else if (trunc_mode == "simulator") cfg.truncation.mode = TruncationMode::Simulator;
        else throw ConfigError("unknown --trunc-mode '" + trunc_mode + "' (exact|simulator)");
        cfg.truncation.rank = rank;
        cfg.truncation.simulator_epsilon = epsilon;
        cfg.truncation.rng_seed = seed;
        cfg.residual_tol = tol;
        cfg.truncate_bicgstab_s = truncate_s;
        cfg.ellipse = ellipse;
        try {
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        return cfg;
    }
};

struct EllipseArgs {
    std::string ellipse_text;  // "d,c"
    bool estimate = false;
    bool full_enumeration = false;
    Index coarse = 0;
    Index cap = 2000;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    double safety = 1.0;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--ellipse", ellipse_text, "explicit ellipse center and focal distance: d,c");
        cmd.add_flag("--estimate", estimate, "estimate the ellipse from preconditioned block spectra");
        auto* corner = cmd.add_flag("--corner-only", "restrict to the corner parameter combinations (default)");
        cmd.add_flag("--full-enumeration", full_enumeration,
                     "use every block instead of the corner combinations")
            ->excludes(corner);
        cmd.add_option("--coarse", coarse,
                       "estimate on a coarse regeneration of this size (generated problems only)");
        cmd.add_option("--cap", cap, "dense eigendecomposition size cap");
        cmd.add_option("--safety", safety, "inflation factor applied to c");
    }

    std::optional<EllipseParams> resolve(const LoadedProblem& loaded,
                                         const std::optional<GeneratorSpec>& spec,
                                         double* est_seconds) const {
        if (!ellipse_text.empty()) {
            EllipseParams ell;
            if (std::sscanf(ellipse_text.c_str(), "%lf,%lf", &ell.d, &ell.c) != 2)
                throw ConfigError("--ellipse expects 'd,c'");
            ell.lambda_min = ell.d - ell.c;
            ell.lambda_max = ell.d + ell.c;
            ell.source = EllipseParams::Source::UserSupplied;
            try {
                ell.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            return ell;
        }
        if (!estimate) return std::nullopt;

        const auto t0 = std::chrono::steady_clock::now();
        EllipseEstimateOptions opts;
        opts.corner_only = !full_enumeration;
        opts.jobs = std::max(1, jobs);
        opts.dense_cap = cap;
        opts.safety = safety;

        std::optional<EllipseParams> out;
        if (coarse > 0) {
            if (!spec) throw ConfigError("--coarse needs a --generate problem to regenerate");
            GeneratorSpec cs = *spec;
            cs.size = coarse;
            auto cgen = generate(cs);
            Preconditioner cpc = Preconditioner::mean_shifted(cgen.problem);
            out = estimate_ellipse(cgen.problem, cpc, cgen.grid, opts);
        } else {
            Preconditioner pc = Preconditioner::mean_shifted(loaded.problem);
            try {
                out = estimate_ellipse(loaded.problem, pc, loaded.grid, opts);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string(e.what()) +
                                  " (hint: --coarse M' regenerates a coarser problem to estimate on)");
            }
        }
        if (est_seconds) *est_seconds = secs(t0);
        return out;
    }
};

void write_history_csv(const std::filesystem::path& path, const ConvergenceRecord& rec) {
    auto out = open_csv(path);
    out << "iter,rel_residual,rank_before,rank_after\n";
    for (const auto& s : rec.history)
        out << s.iter << "," << s.rel_residual << "," << s.rank_before << "," << s.rank_after << "\n";
}

void write_blocks_csv(const std::filesystem::path& path, const Vector& blocks) {
    auto out = open_csv(path);
    out << "block,rel_residual\n";
    for (Index i = 0; i < blocks.size(); ++i) out << i << "," << blocks(i) << "\n";
}

void write_timings_csv(const std::filesystem::path& path, const RunSummary& sum) {
    auto out = open_csv(path);
    out << "stage,seconds\n";
    out << "estimate," << sum.time_estimate << "\n";
    out << "precondition," << sum.time_precondition << "\n";
    out << "compute," << sum.time_compute << "\n";
    out << "total," << sum.time_total << "\n";
}

void print_summary(const RunSummary& sum) {
    std::printf("%-12s %6s %6s %9s %9s %10s %9s %9s\n", "method", "R", "iters", "restarts",
                "est(s)", "precon(s)", "comp(s)", "total(s)");
    std::printf("%-12s %6lld %6d %9d %9.3f %10.3f %9.3f %9.3f\n", sum.method.c_str(),
                static_cast<long long>(sum.rank), sum.iterations, sum.restarts, sum.time_estimate,
                sum.time_precondition, sum.time_compute, sum.time_total);
    std::printf("storage: low-rank %lld entries (%.2f MB) vs dense %lld entries (%.2f MB)\n",
                sum.storage_lowrank, sum.storage_lowrank * 8.0 / 1e6, sum.storage_dense,
                sum.storage_dense * 8.0 / 1e6);
    std::printf("block residuals: min %.3e median %.3e max %.3e p99 %.3e\n",
                sum.block_residuals.min, sum.block_residuals.median, sum.block_residuals.max,
                sum.block_residuals.p99);
}

int cmd_generate(const std::string& out_dir, const GeneratorSpec& spec, bool with_time,
                 double theta, double dt, int steps) {
    auto gen = generate(spec);
    if (!with_time) {
        const auto path = save_problem(out_dir, gen.problem, gen.grid);
        std::printf("wrote %s (M=%lld, m=%lld)\n", path.c_str(),
                    static_cast<long long>(gen.problem.rows()),
                    static_cast<long long>(gen.problem.cols()));
        return 0;
    }
    TimeExtension time;
    const Index n = gen.problem.rows();
    std::vector<Eigen::Triplet<double>> t;
    for (Index i = 0; i < n; ++i) {
        t.emplace_back(i, i, 4.0 / 6.0);
        if (i + 1 < n) {
            t.emplace_back(i, i + 1, 1.0 / 6.0);
            t.emplace_back(i + 1, i, 1.0 / 6.0);
        }
    }
    time.at_fluid.resize(n, n);
    time.at_fluid.setFromTriplets(t.begin(), t.end());
    time.at_solid = 0.3 * time.at_fluid;
    time.theta = theta;
    time.dt = dt;
    time.dirichlet_series.assign(steps + 1, gen.problem.B.column(0));
    const auto path = save_problem(out_dir, gen.problem, gen.grid, &time);
    std::printf("wrote %s with time extension (%d steps)\n", path.c_str(), steps);
    return 0;
}

int cmd_solve(const ProblemArgs& parg, const SolverArgs& sarg, const EllipseArgs& earg,
              const std::string& out_dir, const std::string& per_block, int jobs) {
    std::optional<GeneratorSpec> spec;
    auto loaded = parg.load(&spec);
    auto& prob = loaded.problem;
    RunSummary sum;
    sum.rank = sarg.rank;
    sum.trunc_mode = sarg.trunc_mode;
    sum.storage_dense = storage_dense_entries(prob.rows(), prob.cols());

    const auto t_total = std::chrono::steady_clock::now();
    Vector blocks;
    ConvergenceRecord record;

    if (sarg.method == "reference") {
        sum.method = "reference-" + per_block;
        const auto t_pre = std::chrono::steady_clock::now();
        Preconditioner pc = Preconditioner::mean_shifted(prob);
        sum.time_precondition = secs(t_pre);
        std::optional<EllipseParams> ell = earg.resolve(loaded, spec, &sum.time_estimate);

        BlockwiseOptions opts;
        if (per_block == "lu") opts.method = BlockMethod::DirectLu;
        else if (per_block == "gmres") opts.method = BlockMethod::Gmres;
        else if (per_block == "chebyshev") opts.method = BlockMethod::Chebyshev;
        else throw ConfigError("unknown --per-block '" + per_block + "' (lu|gmres|chebyshev)");
        opts.iterations = sarg.iters > 0 ? sarg.iters : sarg.restarts * sarg.per_restart;
        opts.restart = sarg.per_restart;
        opts.tol = sarg.tol > 0 ? sarg.tol : 1e-10;
        opts.precond = &pc;
        opts.jobs = std::max(1, jobs);
        if (opts.method == BlockMethod::Chebyshev) {
            if (!ell) throw ConfigError("per-block chebyshev needs --ellipse d,c or --estimate");
            opts.ellipse = ell;
        }
        const auto t_comp = std::chrono::steady_clock::now();
        auto ref = reference_blockwise_solve(prob, opts);
        sum.time_compute = secs(t_comp);
        blocks = ref.block_residuals;
        sum.iterations = opts.iterations;
        sum.storage_lowrank = sum.storage_dense;  // the baseline stores the full matrix
        if (!ref.non_converged.empty())
            std::fprintf(stderr, "warning: %zu block(s) above tolerance, first index %lld\n",
                         ref.non_converged.size(), static_cast<long long>(ref.non_converged.front()));
    } else {
        sum.method = sarg.method;
        std::optional<EllipseParams> ell = earg.resolve(loaded, spec, &sum.time_estimate);
        SolverConfig cfg = sarg.build(ell);
        const auto t_pre = std::chrono::steady_clock::now();
        Preconditioner pc = Preconditioner::mean_shifted(prob);
        sum.time_precondition = secs(t_pre);

        const auto t_comp = std::chrono::steady_clock::now();
        auto res = solve(prob, pc, cfg, LowRankMatrix::zero(prob.rows(), prob.cols()));
        sum.time_compute = secs(t_comp);
        record = res.record;
        blocks = per_block_residuals(prob, res.x);
        sum.iterations = record.iterations_run;
        sum.restarts = record.restarts_run;
        sum.storage_lowrank = storage_lowrank_entries(prob.rows(), prob.cols(), sarg.rank);
        std::printf("final relative residual %.6e (%s)\n", record.final_rel_residual,
                    record.breakdown ? record.breakdown_reason.c_str()
                                     : (record.converged ? "converged" : "iteration budget"));
    }

    sum.time_total = sum.time_estimate + sum.time_precondition + sum.time_compute;
    (void)t_total;
    sum.block_residuals = residual_stats(blocks);
    print_summary(sum);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path base(out_dir);
        if (!record.history.empty()) write_history_csv(base / "history.csv", record);
        write_blocks_csv(base / "blocks.csv", blocks);
        write_timings_csv(base / "timings.csv", sum);
        std::printf("wrote %s\n", (base / "blocks.csv").c_str());
    }

    const bool hard_breakdown =
        record.breakdown && !record.converged &&
        record.breakdown_reason.find("happy") == std::string::npos;
    return hard_breakdown ? 2 : 0;
}

int cmd_estimate(const ProblemArgs& parg, const EllipseArgs& earg, const std::string& out_file) {
    std::optional<GeneratorSpec> spec;
    auto loaded = parg.load(&spec);
    EllipseArgs forced = earg;
    forced.estimate = true;
    double est_seconds = 0.0;
    auto ell = forced.resolve(loaded, spec, &est_seconds);
    std::printf("d = %.12g\nc = %.12g\nlambda_min = %.12g\nlambda_max = %.12g\nest_seconds = %.3f\n",
                ell->d, ell->c, ell->lambda_min, ell->lambda_max, est_seconds);
    if (!out_file.empty()) {
        auto out = open_csv(out_file);
        out << "d,c,lambda_min,lambda_max\n"
            << ell->d << "," << ell->c << "," << ell->lambda_min << "," << ell->lambda_max << "\n";
    }
    return 0;
}

int cmd_bounds(const ProblemArgs& parg, const EllipseArgs& earg, const std::string& method,
               std::vector<double> epsilons, int iters, const std::string& variant_name,
               int warm_start, bool strict, const std::string& sigma_text, std::uint64_t seed,
               const std::string& out_dir) {
    if (epsilons.empty()) throw ConfigError("bounds: at least one --epsilon is required");
    std::optional<GeneratorSpec> spec;
    auto loaded = parg.load(&spec);
    auto& prob = loaded.problem;
    Preconditioner pc = Preconditioner::mean_shifted(prob);

    BoundHarnessOptions opts;
    opts.iterations = iters;
    opts.seed = seed;
    opts.warm_start_iterations = warm_start;
    opts.strict_feval_epsilon = strict;
    if (variant_name == "practical") opts.variant = BoundVariant::Practical;
    else if (variant_name == "exact-solve") opts.variant = BoundVariant::ExactSolve;
    else throw ConfigError("bounds: unknown --variant '" + variant_name + "'");

    std::optional<EllipseParams> ell;
    if (method == "chebyshevt" || sigma_text == "ellipse") {
        EllipseArgs forced = earg;
        forced.estimate = forced.estimate || forced.ellipse_text.empty();
        ell = forced.resolve(loaded, spec, nullptr);
    }
    if (sigma_text == "power") opts.sigma_source = SigmaSource::PowerIteration;
    else if (sigma_text == "ellipse") opts.sigma_source = SigmaSource::EllipseDPlusC;
    else {
        try {
            opts.sigma_explicit = std::stod(sigma_text);
            opts.sigma_source = SigmaSource::Explicit;
        } catch (const std::exception&) {
            throw ConfigError("bounds: --sigma expects power|ellipse|<number>");
        }
    }

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    for (double eps : epsilons) {
        opts.epsilon = eps;
        BoundHarnessResult res;
        if (method == "gmrest") {
            res = run_gmrest_bound_harness(prob, pc, opts);
        } else if (method == "chebyshevt") {
            res = run_chebyshevt_bound_harness(prob, pc, *ell, opts);
        } else {
            throw ConfigError("bounds: unknown --method '" + method + "' (gmrest|chebyshevt)");
        }

        std::ostringstream name;
        name << "bounds_" << method << "_eps" << eps << ".csv";
        std::string eps_r_note;
        if (method == "chebyshevt") {
            std::ostringstream n;
            n << ", eps_R=" << res.epsilon_r;
            eps_r_note = n.str();
        }
        std::printf("eps %.3e: %d violation(s) in %zu iterations (sigma=%.6g, ||P^-1||=%.6g%s)\n",
                    eps, res.violations, res.rows.size(), res.sigma_p, res.p_inv_norm,
                    eps_r_note.c_str());
        if (!out_dir.empty()) {
            auto out = open_csv(std::filesystem::path(out_dir) / name.str());
            out << "iter,measured_error,bound,rel_res_full,rel_res_trunc,basis_err,basis_bound,"
                   "violation_flag\n";
            for (const auto& row : res.rows)
                out << row.iter << "," << row.measured_error << "," << row.bound << ","
                    << row.rel_res_full << "," << row.rel_res_trunc << "," << row.basis_error << ","
                    << row.basis_bound << "," << (row.violation ? 1 : 0) << "\n";
        }
    }
    return 0;
}

int cmd_timestep(const ProblemArgs& parg, const SolverArgs& sarg, double theta, double dt,
                 int steps, const std::string& out_dir) {
    std::optional<GeneratorSpec> spec;
    auto loaded = parg.load(&spec);
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("timestep: --theta must lie in [0,1]");
    if (!(dt > 0.0)) throw ConfigError("timestep: --dt must be positive");
    if (steps < 1) throw ConfigError("timestep: --steps must be >= 1");

    TimeProblem tp;
    tp.base = loaded.problem;
    if (loaded.time) {
        tp.at_fluid = loaded.time->at_fluid;
        tp.at_solid = loaded.time->at_solid;
        if (!loaded.time->dirichlet_series.empty()) tp.dirichlet_series = loaded.time->dirichlet_series;
    } else if (!parg.generate_spec.empty()) {
        // synthesized mass-like time operators for generated problems
        const Index n = tp.base.rows();
        std::vector<Eigen::Triplet<double>> t;
        for (Index i = 0; i < n; ++i) {
            t.emplace_back(i, i, 4.0 / 6.0);
            if (i + 1 < n) {
                t.emplace_back(i, i + 1, 1.0 / 6.0);
                t.emplace_back(i + 1, i, 1.0 / 6.0);
            }
        }
        tp.at_fluid.resize(n, n);
        tp.at_fluid.setFromTriplets(t.begin(), t.end());
        tp.at_solid = 0.3 * tp.at_fluid;
    } else {
        throw ConfigError("timestep: the manifest has no time extension (At_f, At_s)");
    }
    tp.rho_f_ref = loaded.grid.rho_ref();
    tp.theta = theta;
    tp.dt = dt;
    tp.steps = steps;
    if (tp.dirichlet_series.empty())
        tp.dirichlet_series.assign(steps + 1, tp.base.B.column(0));
    if (static_cast<int>(tp.dirichlet_series.size()) != steps + 1)
        throw ConfigError("timestep: Dirichlet series length " +
                          std::to_string(tp.dirichlet_series.size()) + " does not match steps+1");
    tp.x0 = LowRankMatrix::zero(tp.base.rows(), tp.base.cols());

    SolverConfig cfg = sarg.build(std::nullopt);
    auto res = run_theta_scheme(tp, cfg);
    for (int i = 0; i < steps; ++i)
        std::printf("step %d: inner iterations %d, relative residual %.6e\n", i + 1,
                    res.per_step[i].iterations_run, res.step_rel_residual[i]);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path base(out_dir);
        {
            auto out = open_csv(base / "steps.csv");
            out << "step,inner_iterations,rel_residual\n";
            for (int i = 0; i < steps; ++i)
                out << i + 1 << "," << res.per_step[i].iterations_run << ","
                    << res.step_rel_residual[i] << "\n";
        }
        {
            auto out = open_csv(base / "step_timings.csv");
            out << "step,seconds\n";
            for (int i = 0; i < steps; ++i) {
                double s = 0.0;
                for (const auto& st : res.per_step[i].history) s += st.seconds;
                out << i + 1 << "," << s << "\n";
            }
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"low-rank truncated solvers for parameter-dependent matrix equations"};
    app.require_subcommand(1);

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "generate a synthetic problem and write a manifest");
    std::string gen_out;
    Index gen_size = 200, gen_m1 = 3, gen_m2 = 3, gen_m3 = 3;
    std::uint64_t gen_seed = 1;
    double gen_pert = 0.10, gen_density = 0.02, gen_nonsym = 0.3;
    std::string gen_recipe = "laplacian";
    bool gen_time = false;
    double gen_theta = 1.0, gen_dt = 0.1;
    int gen_steps = 5;
    gen_cmd->add_option("--out", gen_out, "output directory")->required();
    gen_cmd->add_option("--size", gen_size, "problem size M");
    gen_cmd->add_option("--m1", gen_m1, "shear-modulus-like sample count");
    gen_cmd->add_option("--m2", gen_m2, "Lame-like sample count");
    gen_cmd->add_option("--m3", gen_m3, "density-like sample count");
    gen_cmd->add_option("--seed", gen_seed, "generator seed");
    gen_cmd->add_option("--perturbation", gen_pert, "total relative perturbation budget");
    gen_cmd->add_option("--density", gen_density, "sparsity density of the parameter operators");
    gen_cmd->add_option("--nonsym", gen_nonsym, "convection skew strength");
    gen_cmd->add_option("--recipe", gen_recipe, "laplacian|random");
    gen_cmd->add_flag("--time", gen_time, "also write mass-like time operators and a Dirichlet series");
    gen_cmd->add_option("--theta", gen_theta, "theta recorded in the manifest (with --time)");
    gen_cmd->add_option("--dt", gen_dt, "time step recorded in the manifest (with --time)");
    gen_cmd->add_option("--steps", gen_steps, "series length minus one (with --time)");

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "run a truncated solver (or the per-block baseline)");
    ProblemArgs solve_prob;
    SolverArgs solve_solver;
    EllipseArgs solve_ellipse;
    std::string solve_out, solve_per_block = "lu";
    int solve_jobs = std::max(1u, std::thread::hardware_concurrency());
    solve_prob.add_to(*solve_cmd);
    solve_solver.add_to(*solve_cmd);
    solve_ellipse.add_to(*solve_cmd);
    solve_cmd->add_option("--out", solve_out, "directory for history.csv, blocks.csv, timings.csv");
    solve_cmd->add_option("--per-block", solve_per_block, "reference baseline method: lu|gmres|chebyshev");
    solve_cmd->add_option("--jobs", solve_jobs,
                          "worker threads (baseline blocks, ellipse estimation)");

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "estimate the Chebyshev ellipse");
    ProblemArgs est_prob;
    EllipseArgs est_ellipse;
    std::string est_out;
    est_prob.add_to(*est_cmd);
    est_ellipse.add_to(*est_cmd);
    est_cmd->add_option("--jobs", est_ellipse.jobs, "parallel block eigendecompositions");
    est_cmd->add_option("--out", est_out, "also write the estimate as CSV");

    // bounds
    auto* bounds_cmd = app.add_subcommand("bounds", "run the truncation-simulator bound harness");
    ProblemArgs bounds_prob;
    EllipseArgs bounds_ellipse;
    std::string bounds_method = "gmrest", bounds_variant = "practical", bounds_sigma = "power";
    std::vector<double> bounds_eps;
    int bounds_iters = 10, bounds_warm = 0;
    bool bounds_strict = false;
    std::uint64_t bounds_seed = 0;
    std::string bounds_out;
    bounds_prob.add_to(*bounds_cmd);
    bounds_ellipse.add_to(*bounds_cmd);
    bounds_cmd->add_option("--method", bounds_method, "gmrest|chebyshevt");
    bounds_cmd->add_option("--epsilon", bounds_eps, "simulator accuracies (repeatable)");
    bounds_cmd->add_option("--iters", bounds_iters, "harness iterations");
    bounds_cmd->add_option("--variant", bounds_variant, "practical|exact-solve");
    bounds_cmd->add_option("--warm-start-after", bounds_warm,
                           "restart both runs from the truncated iterate after this many iterations");
    bounds_cmd->add_flag("--strict-feval", bounds_strict,
                         "divide the per-point accuracy by (summands-1)");
    bounds_cmd->add_option("--sigma", bounds_sigma, "power|ellipse|<number>");
    bounds_cmd->add_option("--seed", bounds_seed, "harness seed");
    bounds_cmd->add_option("--jobs", bounds_ellipse.jobs, "parallel block eigendecompositions");
    bounds_cmd->add_option("--out", bounds_out, "directory for one CSV per epsilon");

    // timestep
    auto* ts_cmd = app.add_subcommand("timestep", "run the one-step theta scheme");
    ProblemArgs ts_prob;
    SolverArgs ts_solver;
    double ts_theta = 1.0, ts_dt = 0.1;
    int ts_steps = 5;
    std::string ts_out;
    ts_prob.add_to(*ts_cmd);
    ts_solver.add_to(*ts_cmd);
    ts_cmd->add_option("--theta", ts_theta, "theta in [0,1]");
    ts_cmd->add_option("--dt", ts_dt, "time step");
    ts_cmd->add_option("--steps", ts_steps, "number of steps");
    ts_cmd->add_option("--out", ts_out, "directory for steps.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen_cmd->parsed()) {
            auto spec = GeneratorSpec::defaults(gen_size, gen_m1, gen_m2, gen_m3, gen_seed);
            spec.perturbation = gen_pert;
            spec.density = gen_density;
            spec.nonsymmetry_strength = gen_nonsym;
            if (gen_recipe == "laplacian") spec.recipe = GeneratorRecipe::LaplacianConvection;
            else if (gen_recipe == "random") spec.recipe = GeneratorRecipe::RandomSparseDominant;
            else throw ConfigError("unknown --recipe '" + gen_recipe + "'");
            return cmd_generate(gen_out, spec, gen_time, gen_theta, gen_dt, gen_steps);
        }
        if (solve_cmd->parsed()) {
            solve_ellipse.jobs = solve_jobs;
            return cmd_solve(solve_prob, solve_solver, solve_ellipse, solve_out, solve_per_block,
                             solve_jobs);
        }
        if (est_cmd->parsed()) return cmd_estimate(est_prob, est_ellipse, est_out);
        if (bounds_cmd->parsed())
            return cmd_bounds(bounds_prob, bounds_ellipse, bounds_method, bounds_eps, bounds_iters,
                              bounds_variant, bounds_warm, bounds_strict, bounds_sigma, bounds_seed,
                              bounds_out);
        if (ts_cmd->parsed())
            return cmd_timestep(ts_prob, ts_solver, ts_theta, ts_dt, ts_steps, ts_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    }
    return 1;
}
