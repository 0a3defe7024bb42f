#ifndef LRMEQ_RUN_SUMMARY_HPP
#define LRMEQ_RUN_SUMMARY_HPP
//
// Project     : lrmeq
// Module      : run_summary
// Description : storage accounting and per-block residual statistics for the
//               summary tables
//

#include <algorithm>
#include <vector>

#include "lrmeq/low_rank_matrix.hpp"

namespace lrmeq {

/// rank-R factored storage (both factors plus the R x R core), in entries
inline long long storage_lowrank_entries(Index rows, Index cols, Index rank) {
    return static_cast<long long>(rows + cols + rank) * rank;
}

/// dense storage of the full M x m matrix, in entries
inline long long storage_dense_entries(Index rows, Index cols) {
    return static_cast<long long>(rows) * cols;
}

struct ResidualStats {
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
    double p99 = 0.0;
};

inline ResidualStats residual_stats(const Vector& residuals) {
    ResidualStats st;
    if (residuals.size() == 0) return st;
    std::vector<double> s(residuals.data(), residuals.data() + residuals.size());
    std::sort(s.begin(), s.end());
    const auto at = [&](double q) {
        const auto idx = static_cast<std::size_t>(q * (s.size() - 1) + 0.5);
        return s[std::min(idx, s.size() - 1)];
    };
    st.min = s.front();
    st.max = s.back();
    st.median = at(0.5);
    st.p99 = at(0.99);
    return st;
}

struct RunSummary {
    std::string method;
    Index rank = 0;
    std::string trunc_mode;
    int iterations = 0;
    int restarts = 0;
    double time_estimate = 0.0;  // ellipse estimation
    double time_precondition = 0.0;
    double time_compute = 0.0;
    double time_total = 0.0;
    ResidualStats block_residuals;
    long long storage_lowrank = 0;
    long long storage_dense = 0;
};

}  // namespace lrmeq

#endif  // LRMEQ_RUN_SUMMARY_HPP
