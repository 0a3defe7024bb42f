#ifndef LRMEQ_LRMEQ_HPP
#define LRMEQ_LRMEQ_HPP
//
// Project     : lrmeq
// Module      : lrmeq
// Description : umbrella header
//

#include "lrmeq/bounds.hpp"
#include "lrmeq/low_rank_matrix.hpp"
#include "lrmeq/manifest.hpp"
#include "lrmeq/matrix_equation.hpp"
#include "lrmeq/matrix_market.hpp"
#include "lrmeq/preconditioner.hpp"
#include "lrmeq/probgen.hpp"
#include "lrmeq/run_summary.hpp"
#include "lrmeq/solvers.hpp"
#include "lrmeq/spectral.hpp"
#include "lrmeq/timestepping.hpp"
#include "lrmeq/truncation.hpp"

#endif  // LRMEQ_LRMEQ_HPP
