#include "lrmar/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lrmar/errors.hpp"
#include "lrmar/csv.hpp"
#include "lrmar/lagged_design.hpp"
#include "lrmar/vb_engine.hpp"
#include "linalg.hpp"

namespace lrmar
{
namespace bench
{

PcaResult pca_fit(const Eigen::MatrixXd& y, int q)
{
  if (y.rows() < 2 || y.cols() < 1)
    throw ValidationError("need at least 2 rows and 1 column, got "
                          + std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  if (q < 1)
    throw ValidationError("Q must be at least 1, got " + std::to_string(q));
  if (q > y.cols())
    throw ValidationError("Q = " + std::to_string(q) + " exceeds the column count "
                          + std::to_string(y.cols()));
  if (!y.allFinite())
    throw ValidationError("data contains a non-finite value");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinV);
  Eigen::MatrixXd vq = svd.matrixV().leftCols(q);
  detail::fix_signs(vq);

  PcaResult out;
  out.scores.noalias() = y * vq;
  out.components = vq.transpose();
  return out;
}

double explained_variance(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat)
{
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols())
    throw DimensionError("shape mismatch: " + std::to_string(y.rows()) + "x"
                         + std::to_string(y.cols()) + " vs " + std::to_string(y_hat.rows())
                         + "x" + std::to_string(y_hat.cols()));
  const double total = y.squaredNorm();
  if (total == 0.0)
    throw ValidationError("explained variance is undefined for an all-zero target");
  return 1.0 - (y - y_hat).squaredNorm() / total;
}

Eigen::VectorXd component_smoothness(const Eigen::MatrixXd& z)
{
  const Eigen::Index m = z.rows();
  if (m < 3)
    throw ValidationError("need at least 3 rows, got " + std::to_string(m));

  Eigen::VectorXd r(z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
  {
    const double mean = z.col(j).mean();
    const Eigen::VectorXd d = z.col(j).array() - mean;
    const double den = d.squaredNorm();
    if (den == 0.0)
    {
      r(j) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    r(j) = d.head(m - 1).dot(d.tail(m - 1)) / den;
  }
  return r;
}

double model_explained_variance(const FittedModel& model, const TimeSeries& input,
                                const TimeSeries& target)
{
  if (target.length() != input.length() || target.channels() != input.channels())
    throw DimensionError("target is " + std::to_string(target.length()) + "x"
                         + std::to_string(target.channels()) + ", input is "
                         + std::to_string(input.length()) + "x"
                         + std::to_string(input.channels()));
  const LaggedDesign aligned = embed_lags(center(target), model.spec.P, model.spec.L);
  const Eigen::MatrixXd z = vb::transform(model, input);
  return explained_variance(aligned.y_plus, vb::reconstruct(model, z));
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows)
{
  std::string text = "method,Q,P,target,explained_variance,seed\n";
  for (const BenchRow& row : rows)
  {
    text += row.method;
    text += ',';
    text += std::to_string(row.q);
    text += ',';
    text += std::to_string(row.p);
    text += ',';
    text += row.target;
    text += ',';
    text += format_full(row.explained);
    text += ',';
    text += std::to_string(row.seed);
    text += '\n';
  }
  atomic_write_text(path, text);
}

} // namespace bench
} // namespace lrmar
