#ifndef LRMEQ_SPECTRAL_HPP
#define LRMEQ_SPECTRAL_HPP
//
// Project     : lrmeq
// Module      : spectral
// Description : Chebyshev ellipse estimation from preconditioned block spectra
//

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "lrmeq/preconditioner.hpp"

namespace lrmeq {

//
// Ellipse with center d and foci d +- c enclosing the moduli of the
// preconditioned block eigenvalues. Valid when d > 0 and 0 <= c < d, i.e. the
// ellipse stays away from the imaginary axis.
//
struct EllipseParams {
    double d = 1.0;
    double c = 0.0;
    double lambda_min = 1.0;
    double lambda_max = 1.0;
    enum class Source { CornerBlocks, FullEnumeration, UserSupplied } source = Source::UserSupplied;

    void validate() const {
        if (!(d > 0.0))
            throw std::invalid_argument("EllipseParams: center d must be positive");
        if (!(c >= 0.0) || !(c < d))
            throw std::invalid_argument("EllipseParams: need 0 <= c < d (ellipse must not touch the imaginary axis)");
    }
};

struct EllipseEstimateOptions {
    bool   corner_only = true;   // only the extreme parameter combinations
    int    jobs = 1;             // block eigendecompositions run independently
    Index  dense_cap = 2000;     // refuse dense eigendecomposition above this M
    double safety = 1.0;         // optional inflation of c; 1.0 = paper behavior
};

namespace spectral_detail {

inline std::vector<Index> corner_indices(const ParameterGrid& grid) {
    auto extremes = [](Index mk) {
        return mk > 1 ? std::vector<Index>{0, mk - 1} : std::vector<Index>{0};
    };
    const auto e1 = extremes(grid.m1());
    const auto e2 = extremes(grid.m2());
    const auto e3 = extremes(grid.m3());
    std::vector<Index> idx;
    for (Index i3 : e3)
        for (Index i2 : e2)
            for (Index i1 : e1)
                idx.push_back(i1 + grid.m1() * (i2 + grid.m2() * i3));
    return idx;
}

struct ModulusRange {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    void absorb(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void absorb(const ModulusRange& o) {
        lo = std::min(lo, o.lo);
        hi = std::max(hi, o.hi);
    }
};

inline ModulusRange block_modulus_range(const MatrixEquationProblem& prob,
                                        const Preconditioner& precond, Index block) {
    const Matrix bl = precond.solve_dense(prob.block_dense(block));
    Eigen::EigenSolver<Matrix> es(bl, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("estimate_ellipse: eigensolver failed on block " + std::to_string(block));
    ModulusRange r;
    for (Index i = 0; i < bl.rows(); ++i) r.absorb(std::abs(es.eigenvalues()(i)));
    return r;
}

}  // namespace spectral_detail

// Eigenvalue moduli of P^{-1} Bl(i) over the selected blocks (all of them, or
// only the corner parameter combinations), turned into the ellipse
// d = (L_min + L_max)/2, c = L_max - d.
inline EllipseParams estimate_ellipse(const MatrixEquationProblem& prob,
                                      const Preconditioner& precond,
                                      const ParameterGrid& grid,
                                      const EllipseEstimateOptions& opts = {}) {
    prob.validate();
    if (prob.rows() > opts.dense_cap)
        throw std::invalid_argument("estimate_ellipse: M = " + std::to_string(prob.rows()) +
                                    " exceeds the dense eigendecomposition cap " +
                                    std::to_string(opts.dense_cap) +
                                    "; estimate on a coarser problem");

    std::vector<Index> blocks;
    if (opts.corner_only) {
        blocks = spectral_detail::corner_indices(grid);
    } else {
        blocks.resize(prob.cols());
        for (Index i = 0; i < prob.cols(); ++i) blocks[i] = i;
    }

    spectral_detail::ModulusRange range;
    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1 || blocks.size() <= 1) {
        for (Index b : blocks) range.absorb(spectral_detail::block_modulus_range(prob, precond, b));
    } else {
        std::vector<spectral_detail::ModulusRange> parts(blocks.size());
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&]() {
                try {
                    for (std::size_t i = next.fetch_add(1); i < blocks.size(); i = next.fetch_add(1))
                        parts[i] = spectral_detail::block_modulus_range(prob, precond, blocks[i]);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
        for (const auto& p : parts) range.absorb(p);
    }

    if (!(range.lo > 0.0))
        throw std::runtime_error("estimate_ellipse: a preconditioned block is singular (Lambda_min = 0)");

    EllipseParams ell;
    ell.lambda_min = range.lo;
    ell.lambda_max = range.hi;
    ell.d = 0.5 * (range.lo + range.hi);
    ell.c = (range.hi - ell.d) * opts.safety;
    ell.source = opts.corner_only ? EllipseParams::Source::CornerBlocks
                                  : EllipseParams::Source::FullEnumeration;
    if (ell.c >= ell.d)  // inflated past the axis
        throw std::runtime_error("estimate_ellipse: inflated ellipse touches the imaginary axis (c >= d)");
    ell.validate();
    return ell;
}

}  // namespace lrmeq

#endif  // LRMEQ_SPECTRAL_HPP
