#ifndef LRMEQ_TRUNCATION_HPP
#define LRMEQ_TRUNCATION_HPP
//
// Project     : lrmeq
// Module      : truncation
// Description : SVD-based rank truncation and the norm-exact truncation simulator
//

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

#include "lrmeq/low_rank_matrix.hpp"

namespace lrmeq {

enum class TruncationMode {
    ExactRank,  ///< best Frobenius rank-R approximation via QR + small SVD
    Simulator,  ///< additive random perturbation of Frobenius norm exactly eps
    None        ///< lossless recompression only (numerical-rank cutoff)
};

struct TruncationConfig {
    TruncationMode mode = TruncationMode::ExactRank;
    Index          rank = 1;                 // target R (exact-rank mode)
    double         simulator_epsilon = 0.0;  // eps (simulator mode)
    std::uint64_t  rng_seed = 0;             // simulator stream seed

    void validate() const {
        if (mode == TruncationMode::ExactRank && rank < 1)
            throw std::invalid_argument("TruncationConfig: rank must be positive");
        if (simulator_epsilon < 0.0)
            throw std::invalid_argument("TruncationConfig: simulator_epsilon must be non-negative");
    }
};

/// Frobenius norm of the part discarded (or, simulator mode, added) by the
/// last truncation; zero when nothing was cut.
struct TruncationError {
    double epsilon_estimate = 0.0;
};

// Best Frobenius-norm rank-R approximation: QR both factors, SVD the small
// core, keep the leading R singular triplets (ties resolved by the SVD's
// descending order; the minimizer is not unique at a tied cutoff).
// O((M+m) r^2 + r^3). A drop_tol >= 0 additionally removes singular values
// sigma_i <= drop_tol * sigma_1, which is what TruncationMode::None uses.
inline LowRankMatrix truncate_to_rank(const LowRankMatrix& a, Index target_rank,
                                      TruncationError* err = nullptr,
                                      double drop_tol = -1.0) {
    if (err) err->epsilon_estimate = 0.0;
    if (a.rank() == 0) return a;
    if (drop_tol < 0.0 && a.rank() <= target_rank) return a;

    const auto qu = detail::thin_qr(a.factor_u());
    const auto qv = detail::thin_qr(a.factor_v());
    const Matrix core = qu.r * qv.r.transpose();

    Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();

    Index keep = std::min<Index>(target_rank, sv.size());
    if (drop_tol >= 0.0) {
        const double cut = sv.size() > 0 ? drop_tol * sv(0) : 0.0;
        while (keep > 0 && sv(keep - 1) <= cut) --keep;
    }

    if (err) {
        double tail = 0.0;
        for (Index i = keep; i < sv.size(); ++i) tail += sv(i) * sv(i);
        err->epsilon_estimate = std::sqrt(tail);
    }
    if (keep == 0) return LowRankMatrix::zero(a.rows(), a.cols());

    Matrix u = qu.q * (svd.matrixU().leftCols(keep) * sv.head(keep).asDiagonal());
    Matrix v = qv.q * svd.matrixV().leftCols(keep);
    return LowRankMatrix(std::move(u), std::move(v));
}

/// lossless recompression: drops numerically-zero singular directions only
inline LowRankMatrix recompress(const LowRankMatrix& a, TruncationError* err = nullptr,
                                double rel_tol = 1e-14) {
    return truncate_to_rank(a, std::min(a.rows(), a.cols()), err, rel_tol);
}

//
// The truncation operator. Exact-rank and none modes are pure; simulator mode
// draws a fresh perturbation direction per call from the seeded stream, so a
// Truncator running in simulator mode must not be shared between threads.
//
class Truncator {
public:
    explicit Truncator(TruncationConfig cfg)
        : cfg_(cfg), rng_(cfg.rng_seed) {
        cfg_.validate();
    }

    const TruncationConfig& config() const { return cfg_; }
    long long count() const { return count_; }
    void reset_count() { count_ = 0; }

    LowRankMatrix operator()(const LowRankMatrix& a, TruncationError* err = nullptr) {
        ++count_;
        switch (cfg_.mode) {
            case TruncationMode::ExactRank:
                return truncate_to_rank(a, cfg_.rank, err);
            case TruncationMode::None:
                return recompress(a, err);
            case TruncationMode::Simulator:
                return simulate(a, err);
        }
        throw std::logic_error("Truncator: unknown mode");
    }

    // T_s(x) = x + (eps / ||z||_F) z with z drawn uniform(0,1) entrywise.
    // The result carries the full-format perturbation; the rank is not reduced.
    LowRankMatrix simulate(const LowRankMatrix& a, TruncationError* err = nullptr) {
        if (err) err->epsilon_estimate = cfg_.simulator_epsilon;
        if (cfg_.simulator_epsilon == 0.0) {
            if (err) err->epsilon_estimate = 0.0;
            return a;
        }
        Matrix dense = a.dense() + perturbation(a.rows(), a.cols());
        return LowRankMatrix::from_dense(dense);
    }

    /// the scaled perturbation matrix itself (used by the bound harness)
    Matrix perturbation(Index rows, Index cols) {
        Matrix z(rows, cols);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) z(i, j) = uni(rng_);
        return (cfg_.simulator_epsilon / z.norm()) * z;
    }

private:
    TruncationConfig cfg_;
    std::mt19937_64  rng_;
    long long        count_ = 0;
};

}  // namespace lrmeq

#endif  // LRMEQ_TRUNCATION_HPP
