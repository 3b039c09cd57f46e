#include "lrmar/time_series.hpp"

#include <cmath>

#include "lrmar/errors.hpp"

namespace lrmar
{

TimeSeries TimeSeries::make(Eigen::MatrixXd data, std::vector<std::string> names)
{
  TimeSeries s;
  s.data = std::move(data);
  const Eigen::Index n = s.data.cols();
  if (names.empty())
  {
    names.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j)
      names.push_back("ch" + std::to_string(j + 1));
  }
  s.channel_names = std::move(names);
  s.means = Eigen::VectorXd::Zero(n);
  s.centered = false;
  validate(s);
  return s;
}

void validate(const TimeSeries& series)
{
  const Eigen::Index t = series.data.rows();
  const Eigen::Index n = series.data.cols();
  if (t < 2)
    throw ValidationError("time series needs at least 2 rows, got "
                          + std::to_string(t));
  if (n < 1)
    throw ValidationError("time series needs at least 1 channel");
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < t; ++i)
      if (!std::isfinite(series.data(i, j)))
        throw ValidationError("non-finite value at row " + std::to_string(i + 1)
                              + ", column " + std::to_string(j + 1));
  if (series.channel_names.size() != static_cast<std::size_t>(n))
    throw DimensionError("expected " + std::to_string(n) + " channel names, got "
                         + std::to_string(series.channel_names.size()));
  if (series.means.size() != n)
    throw DimensionError("means vector has length " + std::to_string(series.means.size())
                         + ", expected " + std::to_string(n));
  if (series.centered)
  {
    const Eigen::VectorXd colmean = series.data.colwise().mean();
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(colmean(j)) > 1e-10)
        throw ValidationError("series flagged as centered but column "
                              + std::to_string(j + 1) + " has mean "
                              + std::to_string(colmean(j)));
  }
}

TimeSeries center(const TimeSeries& series)
{
  validate(series);
  if (series.centered)
    return series;
  TimeSeries out = series;
  out.means = series.data.colwise().mean();
  out.data.rowwise() -= out.means.transpose();
  // One compensation pass so the residual column means stay near machine
  // precision even for long, large-amplitude recordings.
  const Eigen::VectorXd residual = out.data.colwise().mean();
  out.data.rowwise() -= residual.transpose();
  out.means += residual;
  out.centered = true;
  return out;
}

} // namespace lrmar
