#ifndef LRMAR_METRICS_HPP
#define LRMAR_METRICS_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrmar/posteriors.hpp"
#include "lrmar/time_series.hpp"

namespace lrmar
{
namespace bench
{

// Principal components of a centered data matrix: `components` holds the
// top-Q right singular vectors as orthonormal rows (largest-magnitude
// entry of each made positive), `scores` the projections, so
// scores * components is the rank-Q least-squares reconstruction.
struct PcaResult
{
  Eigen::MatrixXd components;  // Q x N
  Eigen::MatrixXd scores;      // T x Q
};

PcaResult pca_fit(const Eigen::MatrixXd& y, int q);

// 1 - |Y - Y_hat|^2_F / |Y|^2_F for a centered target. 1 means perfect,
// 0 matches predicting zero, negative is worse than that. Throws
// ValidationError when the target is identically zero.
double explained_variance(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat);

// Per-column sample lag-1 autocorrelation; NaN for zero-variance columns.
// Needs at least 3 rows.
Eigen::VectorXd component_smoothness(const Eigen::MatrixXd& z);

// Proportion of the target's lagged output window explained by encoding
// `input` through the model and decoding it back. The target is aligned
// with the model's windows and centered by its own channel means, so the
// clean signal underneath a noisy input can serve as the target.
double model_explained_variance(const FittedModel& model, const TimeSeries& input,
                                const TimeSeries& target);

struct BenchRow
{
  std::string method;   // "lrmar" or "pca"
  int q = 0;
  int p = 0;            // 0 for methods without a lag window
  std::string target;   // "noisy" or "clean"
  double explained = 0.0;
  std::uint64_t seed = 0;
};

// Long-format results table: method,Q,P,target,explained_variance,seed.
void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

} // namespace bench
} // namespace lrmar

#endif
