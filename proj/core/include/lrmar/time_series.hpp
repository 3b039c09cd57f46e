#ifndef LRMAR_TIME_SERIES_HPP
#define LRMAR_TIME_SERIES_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lrmar
{

// A multichannel recording, rows are time steps and columns are channels.
// `means` holds the per-channel offsets that were subtracted when
// `centered` is true, and zeros otherwise, so a fitted model can map new
// data into the same frame and reconstructions can be shifted back.
struct TimeSeries
{
  Eigen::MatrixXd data;
  std::vector<std::string> channel_names;
  Eigen::VectorXd means;
  bool centered = false;

  Eigen::Index length() const { return data.rows(); }
  Eigen::Index channels() const { return data.cols(); }

  // Validating constructor for external data. Names default to ch1..chN.
  static TimeSeries make(Eigen::MatrixXd data, std::vector<std::string> names = {});
};

// Throws ValidationError/DimensionError if the invariants do not hold
// (finite entries, at least two rows, one name per channel, and column
// means within 1e-10 of zero whenever `centered` is set).
void validate(const TimeSeries& series);

// Returns a copy with per-channel means removed and recorded. Centering an
// already centered series is a no-op that keeps the original means.
TimeSeries center(const TimeSeries& series);

} // namespace lrmar

#endif
