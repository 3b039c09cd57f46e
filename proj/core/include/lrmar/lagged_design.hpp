#ifndef LRMAR_LAGGED_DESIGN_HPP
#define LRMAR_LAGGED_DESIGN_HPP

#include <Eigen/Dense>

#include "lrmar/time_series.hpp"

namespace lrmar
{

// Lag-embedded view of a series. Row m of y_minus stacks the P frames
// preceding time t = P + m, most recent first:
//
//   y_minus.row(m) = [ y_{t-1}  y_{t-2}  ...  y_{t-P} ]
//   y_plus.row(m)  = [ y_t  y_{t+1}  ...  y_{t+L-1} ]
//
// so y_minus is M x N*P, y_plus is M x N*L, and M = T - P - L + 1. Column
// (i-1)*N + n of y_minus is channel n at lag i. Immutable after
// construction; safe to share across threads read-only.
struct LaggedDesign
{
  Eigen::MatrixXd y_plus;
  Eigen::MatrixXd y_minus;
  Eigen::Index M = 0;
  Eigen::Index P = 0;
  Eigen::Index L = 0;
  Eigen::Index N = 0;
};

LaggedDesign embed_lags(const TimeSeries& series, int P, int L = 1);

} // namespace lrmar

#endif
