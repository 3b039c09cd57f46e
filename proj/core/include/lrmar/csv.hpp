#ifndef LRMAR_CSV_HPP
#define LRMAR_CSV_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrmar/time_series.hpp"

namespace lrmar
{

// Numeric CSV helpers used by the command line tool. Values are written
// with 17 significant digits so a write/read round trip is lossless, and
// files are written atomically (temp file in the same directory, then
// rename).

// Reads a rectangular numeric CSV. If the first line fails to parse as
// numbers it is taken as a header naming the channels. Missing fields,
// ragged rows, and unparseable or non-finite entries raise ValidationError
// with the offending row and column.
TimeSeries read_time_series_csv(const std::string& path);

void write_time_series_csv(const std::string& path, const TimeSeries& series);

// Writes `m` with an optional header row; header must be empty or have one
// name per column.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {});

// Decimal form of x with 17 significant digits ("%.17g").
std::string format_full(double x);

// Writes `content` to `path` via a temporary file and rename.
void atomic_write_text(const std::string& path, const std::string& content);

} // namespace lrmar

#endif
