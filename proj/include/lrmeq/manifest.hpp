#ifndef LRMEQ_MANIFEST_HPP
#define LRMEQ_MANIFEST_HPP
//
// Project     : lrmeq
// Module      : manifest
// Description : flat key-value problem manifest tying Matrix Market files,
//               parameter samples, and optional time-stepping data together
//

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "lrmeq/probgen.hpp"
#include "lrmeq/timestepping.hpp"

namespace lrmeq {

struct TimeExtension {
    SparseMatrix at_fluid;
    SparseMatrix at_solid;
    double theta = 1.0;
    double dt = 0.1;
    std::vector<Vector> dirichlet_series;  // empty = constant-in-time b
};

struct LoadedProblem {
    MatrixEquationProblem problem;
    ParameterGrid grid;
    std::optional<TimeExtension> time;
};

namespace manifest_detail {

inline std::string format_samples(const std::vector<double>& v) {
    std::ostringstream ss;
    ss.precision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? " " : "") << v[i];
    return ss.str();
}

inline std::vector<double> parse_samples(const std::string& s, const std::string& key) {
    std::istringstream ss(s);
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (v.empty()) throw std::runtime_error("manifest: key '" + key + "' holds no values");
    return v;
}

struct KeyValues {
    std::map<std::string, std::string> kv;
    std::filesystem::path dir;
    std::string path;

    bool has(const std::string& key) const { return kv.count(key) != 0; }

    const std::string& get(const std::string& key) const {
        auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error("manifest: " + path + ": missing required key '" + key + "'");
        return it->second;
    }

    std::string file(const std::string& key) const { return (dir / get(key)).string(); }

    double number(const std::string& key) const {
        const std::string& s = get(key);
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error("manifest: key '" + key + "' is not a number: '" + s + "'");
        }
    }
};

inline KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);
    KeyValues out;
    out.path = path;
    out.dir = std::filesystem::path(path).parent_path();
    std::string line;
    Index lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("manifest: " + path + ":" + std::to_string(lineno) +
                                     ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        out.kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

}  // namespace manifest_detail

// Writes the problem as manifest.txt plus Matrix Market files into `dir`.
// Matrices go out in coordinate format, vectors in array format, both at full
// double precision so a reload reproduces the operators bit for bit.
inline std::string save_problem(const std::string& dir, const MatrixEquationProblem& prob,
                                const ParameterGrid& grid,
                                const TimeExtension* time = nullptr) {
    prob.validate();
    grid.validate();
    if (prob.A.size() != 4)
        throw std::invalid_argument("save_problem: manifest format covers exactly A0..A3");
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);

    for (int k = 0; k < 4; ++k)
        write_matrix_market_sparse((base / ("A" + std::to_string(k) + ".mtx")).string(), prob.A[k]);
    write_matrix_market_vector((base / "b.mtx").string(), prob.B.column(0));

    std::ofstream out(base / "manifest.txt");
    if (!out) throw std::runtime_error("save_problem: cannot write manifest in " + dir);
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "# lrmeq problem manifest\n";
    for (int k = 0; k < 4; ++k) out << "A" << k << " = A" << k << ".mtx\n";
    out << "b = b.mtx\n";
    out << "nu_f = " << grid.nu_f << "\n";
    out << "mu_samples = " << manifest_detail::format_samples(grid.mu_samples) << "\n";
    out << "lambda_samples = " << manifest_detail::format_samples(grid.lambda_samples) << "\n";
    out << "rho_samples = " << manifest_detail::format_samples(grid.rho_samples) << "\n";
    out << "mu_ref_index = " << grid.mu_ref_index << "\n";
    out << "lambda_ref_index = " << grid.lambda_ref_index << "\n";
    out << "rho_ref_index = " << grid.rho_ref_index << "\n";

    if (time) {
        write_matrix_market_sparse((base / "At_f.mtx").string(), time->at_fluid);
        write_matrix_market_sparse((base / "At_s.mtx").string(), time->at_solid);
        out << "At_f = At_f.mtx\n";
        out << "At_s = At_s.mtx\n";
        out << "theta = " << time->theta << "\n";
        out << "dt = " << time->dt << "\n";
        if (!time->dirichlet_series.empty()) {
            out << "dirichlet_series =";
            for (std::size_t i = 0; i < time->dirichlet_series.size(); ++i) {
                const std::string name = "b_t" + std::to_string(i) + ".mtx";
                write_matrix_market_vector((base / name).string(), time->dirichlet_series[i]);
                out << " " << name;
            }
            out << "\n";
        }
    }
    return (base / "manifest.txt").string();
}

inline LoadedProblem load_problem(const std::string& manifest_path) {
    const auto kv = manifest_detail::read_key_values(manifest_path);

    LoadedProblem out;
    ParameterGrid& grid = out.grid;
    grid.mu_samples = manifest_detail::parse_samples(kv.get("mu_samples"), "mu_samples");
    grid.lambda_samples = manifest_detail::parse_samples(kv.get("lambda_samples"), "lambda_samples");
    grid.rho_samples = manifest_detail::parse_samples(kv.get("rho_samples"), "rho_samples");
    grid.nu_f = kv.number("nu_f");
    if (kv.has("mu_ref_index")) grid.mu_ref_index = static_cast<int>(kv.number("mu_ref_index"));
    if (kv.has("lambda_ref_index")) grid.lambda_ref_index = static_cast<int>(kv.number("lambda_ref_index"));
    if (kv.has("rho_ref_index")) grid.rho_ref_index = static_cast<int>(kv.number("rho_ref_index"));
    grid.validate();

    MatrixEquationProblem& prob = out.problem;
    for (int k = 0; k < 4; ++k)
        prob.A.push_back(read_matrix_market_sparse(kv.file("A" + std::to_string(k))));
    const auto diags = build_sample_diagonals(grid);
    prob.D.assign(diags.begin(), diags.end());
    prob.scale = {1.0, 1.0, grid.nu_f};
    const Vector b = read_matrix_market_vector(kv.file("b"));
    if (b.size() != prob.A[0].rows())
        throw std::runtime_error("manifest: b has length " + std::to_string(b.size()) +
                                 " but A0 is " + std::to_string(prob.A[0].rows()) + " x " +
                                 std::to_string(prob.A[0].cols()));
    prob.B = LowRankMatrix::rank_one(b, Vector::Ones(grid.sample_count()));
    prob.validate();

    if (kv.has("At_f") || kv.has("At_s")) {
        TimeExtension time;
        time.at_fluid = read_matrix_market_sparse(kv.file("At_f"));
        time.at_solid = read_matrix_market_sparse(kv.file("At_s"));
        if (kv.has("theta")) time.theta = kv.number("theta");
        if (kv.has("dt")) time.dt = kv.number("dt");
        if (kv.has("dirichlet_series")) {
            std::istringstream ss(kv.get("dirichlet_series"));
            std::string name;
            while (ss >> name)
                time.dirichlet_series.push_back(read_matrix_market_vector((kv.dir / name).string()));
        }
        out.time = std::move(time);
    }
    return out;
}

}  // namespace lrmeq

#endif  // LRMEQ_MANIFEST_HPP
