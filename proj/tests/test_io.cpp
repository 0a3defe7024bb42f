#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "lrmeq/manifest.hpp"
#include "lrmeq/probgen.hpp"
#include "lrmeq/solvers.hpp"

using namespace lrmeq;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("lrmeq_test_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("problem generator") {
    SECTION("single-sample grids reduce to one linear system") {
        auto gen = generate(GeneratorSpec::defaults(20, 1, 1, 1, 3));
        CHECK(gen.problem.cols() == 1);
        for (const auto& d : gen.problem.D) CHECK(d.cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("the same seed reproduces the problem exactly") {
        auto a = generate(GeneratorSpec::defaults(40, 2, 2, 2, 9));
        auto b = generate(GeneratorSpec::defaults(40, 2, 2, 2, 9));
        for (std::size_t k = 0; k < a.problem.A.size(); ++k)
            CHECK((Matrix(a.problem.A[k]) - Matrix(b.problem.A[k])).norm() == 0.0);
        CHECK((a.problem.B.dense() - b.problem.B.dense()).norm() == 0.0);
        auto c = generate(GeneratorSpec::defaults(40, 2, 2, 2, 10));
        CHECK((Matrix(a.problem.A[1]) - Matrix(c.problem.A[1])).norm() != 0.0);
    }

    SECTION("all generated blocks solve to direct-solver accuracy") {
        auto gen = generate(GeneratorSpec::defaults(100, 3, 3, 3, 11));
        auto ref = reference_blockwise_solve(gen.problem, {});
        CHECK(ref.block_residuals.maxCoeff() < 1e-12);
    }

    SECTION("corner systems are invertible with a sane condition estimate") {
        auto gen = generate(GeneratorSpec::defaults(60, 2, 2, 2, 12));
        for (Index i : {Index(0), gen.problem.cols() - 1}) {
            Matrix block = gen.problem.block_dense(i);
            Eigen::JacobiSVD<Matrix> svd(block);
            const double rcond = svd.singularValues().tail(1)(0) / svd.singularValues()(0);
            CHECK(rcond > 1e-14);
        }
    }

    SECTION("bad specs are rejected") {
        auto spec = GeneratorSpec::defaults(10, 1, 1, 1, 1);
        spec.density = 0.0;
        CHECK_THROWS_AS(generate(spec), std::invalid_argument);
        spec = GeneratorSpec::defaults(1, 1, 1, 1, 1);
        CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    }
}

TEST_CASE("matrix market round trips") {
    TempDir dir("mm");
    std::mt19937_64 rng(21);

    SECTION("sparse coordinate files reload bit for bit") {
        auto gen = generate(GeneratorSpec::defaults(30, 2, 1, 1, 5));
        const auto path = (dir.path / "a.mtx").string();
        write_matrix_market_sparse(path, gen.problem.A[1]);
        const SparseMatrix back = read_matrix_market_sparse(path);
        CHECK((Matrix(back) - Matrix(gen.problem.A[1])).norm() == 0.0);
    }

    SECTION("vectors in array format reload bit for bit") {
        Vector v(5);
        v << 1.0, -2.5, 3.7e-17, 4.0, 1.0 / 3.0;
        const auto path = (dir.path / "v.mtx").string();
        write_matrix_market_vector(path, v);
        const Vector back = read_matrix_market_vector(path);
        CHECK((back - v).norm() == 0.0);
    }

    SECTION("symmetric storage is expanded") {
        const auto path = (dir.path / "s.mtx").string();
        std::ofstream out(path);
        out << "%%MatrixMarket matrix coordinate real symmetric\n"
               "2 2 2\n"
               "1 1 4.0\n"
               "2 1 -1.0\n";
        out.close();
        const Matrix m = Matrix(read_matrix_market_sparse(path));
        CHECK(m(0, 1) == m(1, 0));
        CHECK(m(1, 0) == -1.0);
    }

    SECTION("parse errors carry the file and line") {
        const auto path = (dir.path / "bad.mtx").string();
        std::ofstream out(path);
        out << "%%MatrixMarket matrix coordinate real general\n"
               "2 2 1\n"
               "3 1 5.0\n";  // row index out of range
        out.close();
        CHECK_THROWS_WITH(read_matrix_market_sparse(path),
                          Catch::Matchers::ContainsSubstring("bad.mtx:3"));
    }

    SECTION("non-finite entries are rejected") {
        const auto path = (dir.path / "nan.mtx").string();
        std::ofstream out(path);
        out << "%%MatrixMarket matrix array real general\n"
               "2 1\n"
               "1.0\n"
               "nan\n";
        out.close();
        CHECK_THROWS_WITH(read_matrix_market_vector(path),
                          Catch::Matchers::ContainsSubstring("non-finite"));
    }
    (void)rng;
}

TEST_CASE("problem manifests") {
    TempDir dir("manifest");

    SECTION("generate, save, load round trip compares densified operators equal") {
        auto gen = generate(GeneratorSpec::defaults(24, 2, 2, 2, 31));
        const auto manifest = save_problem((dir.path / "p").string(), gen.problem, gen.grid);
        auto loaded = load_problem(manifest);
        REQUIRE(loaded.problem.A.size() == gen.problem.A.size());
        for (std::size_t k = 0; k < gen.problem.A.size(); ++k)
            CHECK((Matrix(loaded.problem.A[k]) - Matrix(gen.problem.A[k])).norm() == 0.0);
        for (std::size_t k = 0; k < gen.problem.D.size(); ++k)
            CHECK((loaded.problem.D[k] - gen.problem.D[k]).norm() == 0.0);
        CHECK((loaded.problem.B.dense() - gen.problem.B.dense()).norm() == 0.0);
        CHECK(loaded.grid.nu_f == gen.grid.nu_f);
        CHECK_FALSE(loaded.time.has_value());
    }

    SECTION("time extension round trips") {
        auto gen = generate(GeneratorSpec::defaults(16, 2, 1, 1, 32));
        TimeExtension time;
        SparseMatrix eye(16, 16);
        eye.setIdentity();
        time.at_fluid = eye;
        time.at_solid = 0.5 * eye;
        time.theta = 0.5;
        time.dt = 0.125;
        time.dirichlet_series = {gen.problem.B.column(0), 2.0 * gen.problem.B.column(0)};
        const auto manifest = save_problem((dir.path / "t").string(), gen.problem, gen.grid, &time);
        auto loaded = load_problem(manifest);
        REQUIRE(loaded.time.has_value());
        CHECK(loaded.time->theta == 0.5);
        CHECK(loaded.time->dt == 0.125);
        REQUIRE(loaded.time->dirichlet_series.size() == 2);
        CHECK((loaded.time->dirichlet_series[1] - 2.0 * gen.problem.B.column(0)).norm() == 0.0);
    }

    SECTION("a missing operator key is named") {
        auto gen = generate(GeneratorSpec::defaults(12, 1, 1, 1, 33));
        const auto manifest = save_problem((dir.path / "m").string(), gen.problem, gen.grid);
        // rewrite without the A2 line
        std::ifstream in(manifest);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        const auto pos = text.find("A2");
        text.erase(pos, text.find('\n', pos) - pos + 1);
        std::ofstream out(manifest);
        out << text;
        out.close();
        CHECK_THROWS_WITH(load_problem(manifest), Catch::Matchers::ContainsSubstring("'A2'"));
    }

    SECTION("a hand-written 2x2 manifest with a known solution solves to 1e-12") {
        // A0 = [[2,0],[0,2]], A1 = A2 = A3 = I, only mu varies: offsets {0, 1}
        const auto base = dir.path / "hand";
        std::filesystem::create_directories(base);
        auto write_matrix = [&](const std::string& name, double diag) {
            std::ofstream out(base / name);
            out << "%%MatrixMarket matrix coordinate real general\n2 2 2\n";
            out << "1 1 " << diag << "\n2 2 " << diag << "\n";
        };
        write_matrix("A0.mtx", 2.0);
        write_matrix("A1.mtx", 1.0);
        write_matrix("A2.mtx", 1.0);
        write_matrix("A3.mtx", 1.0);
        {
            std::ofstream out(base / "b.mtx");
            out << "%%MatrixMarket matrix array real general\n2 1\n4.0\n6.0\n";
        }
        {
            std::ofstream out(base / "manifest.txt");
            out << "A0 = A0.mtx\nA1 = A1.mtx\nA2 = A2.mtx\nA3 = A3.mtx\nb = b.mtx\n"
                   "nu_f = 1.0\nmu_samples = 1.0 2.0\nlambda_samples = 1.0\nrho_samples = 1.0\n";
        }
        auto loaded = load_problem((base / "manifest.txt").string());
        // block 0: 2 I x = b -> x = (2, 3); block 1: 3 I x = b -> x = (4/3, 2)
        auto ref = reference_blockwise_solve(loaded.problem, {});
        CHECK(ref.x(0, 0) == Catch::Approx(2.0).epsilon(1e-12));
        CHECK(ref.x(1, 0) == Catch::Approx(3.0).epsilon(1e-12));
        CHECK(ref.x(0, 1) == Catch::Approx(4.0 / 3.0).epsilon(1e-12));
        CHECK(ref.x(1, 1) == Catch::Approx(2.0).epsilon(1e-12));

        Preconditioner pc = Preconditioner::mean_shifted(loaded.problem);
        SolverConfig cfg;
        cfg.method = SolverMethod::Gmrest;
        cfg.iterations = 4;
        cfg.truncation.rank = 2;
        auto res = gmrest(loaded.problem, pc, cfg, LowRankMatrix::zero(2, 2));
        CHECK((res.x.dense() - ref.x).norm() < 1e-12 * ref.x.norm());
    }

    SECTION("dimension mismatches between b and A0 are reported") {
        auto gen = generate(GeneratorSpec::defaults(12, 1, 1, 1, 34));
        const auto manifest = save_problem((dir.path / "dim").string(), gen.problem, gen.grid);
        write_matrix_market_vector((dir.path / "dim" / "b.mtx").string(), Vector::Ones(5));
        CHECK_THROWS_WITH(load_problem(manifest), Catch::Matchers::ContainsSubstring("length 5"));
    }
}
