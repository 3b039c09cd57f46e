#include "lrmar/lagged_design.hpp"

#include <string>

#include "lrmar/errors.hpp"

namespace lrmar
{

LaggedDesign embed_lags(const TimeSeries& series, int P, int L)
{
  validate(series);
  if (P < 1)
    throw ValidationError("P must be at least 1, got " + std::to_string(P));
  if (L < 1)
    throw ValidationError("L must be at least 1, got " + std::to_string(L));

  const Eigen::Index t_len = series.length();
  const Eigen::Index n = series.channels();
  const Eigen::Index m = t_len - P - L + 1;
  if (m < 2)
    throw DimensionError("series of length " + std::to_string(t_len)
                         + " is too short for P = " + std::to_string(P) + ", L = "
                         + std::to_string(L) + "; need at least "
                         + std::to_string(P + L + 1) + " rows");

  LaggedDesign d;
  d.M = m;
  d.P = P;
  d.L = L;
  d.N = n;
  d.y_minus.resize(m, n * P);
  d.y_plus.resize(m, n * L);
  const Eigen::MatrixXd& y = series.data;
  for (Eigen::Index row = 0; row < m; ++row)
  {
    const Eigen::Index t = P + row;
    for (Eigen::Index lag = 1; lag <= P; ++lag)
      d.y_minus.block(row, (lag - 1) * n, 1, n) = y.row(t - lag);
    for (Eigen::Index ahead = 0; ahead < L; ++ahead)
      d.y_plus.block(row, ahead * n, 1, n) = y.row(t + ahead);
  }
  return d;
}

} // namespace lrmar
