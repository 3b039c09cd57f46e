#include "lrmar/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lrmar/errors.hpp"

namespace lrmar
{

namespace
{

std::string trim(const std::string& s)
{
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos)
    return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line)
{
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true)
  {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos)
    {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_double(const std::string& field, double& out)
{
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

} // namespace

TimeSeries read_time_series_csv(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open '" + path + "' for reading");

  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t ncols = 0;
  bool saw_blank = false;
  while (std::getline(in, line))
  {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (trim(line).empty())
    {
      saw_blank = true; // only legal at the end of the file
      continue;
    }
    if (saw_blank)
      throw ValidationError(path + ": blank line " + std::to_string(lineno - 1)
                            + " in the middle of the data");

    const std::vector<std::string> fields = split_fields(line);
    if (ncols == 0)
      ncols = fields.size();
    else if (fields.size() != ncols)
      throw ValidationError(path + ": row " + std::to_string(lineno) + " has "
                            + std::to_string(fields.size()) + " fields, expected "
                            + std::to_string(ncols));

    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j)
    {
      if (fields[j].empty())
        throw ValidationError(path + ": missing value at row " + std::to_string(lineno)
                              + ", column " + std::to_string(j + 1));
      if (!parse_double(fields[j], row[j]))
      {
        numeric = false;
        break;
      }
    }
    if (!numeric)
    {
      if (rows.empty() && names.empty())
      {
        names = fields; // header line
        continue;
      }
      for (std::size_t j = 0; j < fields.size(); ++j)
      {
        double tmp;
        if (!parse_double(fields[j], tmp))
          throw ValidationError(path + ": cannot parse '" + fields[j] + "' at row "
                                + std::to_string(lineno) + ", column "
                                + std::to_string(j + 1));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw ValidationError(path + ": no data rows");

  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(ncols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < ncols; ++j)
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];

  try
  {
    return TimeSeries::make(std::move(data), std::move(names));
  }
  catch (const ValidationError& e)
  {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string format_full(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace
{

std::string render_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header)
{
  std::ostringstream out;
  if (!header.empty())
  {
    for (std::size_t j = 0; j < header.size(); ++j)
    {
      if (j > 0)
        out << ',';
      out << header[j];
    }
    out << '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i)
  {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
    {
      if (j > 0)
        out << ',';
      out << format_full(m(i, j));
    }
    out << '\n';
  }
  return out.str();
}

} // namespace

void atomic_write_text(const std::string& path, const std::string& content)
{
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ValidationError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out)
      throw ValidationError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec)
  {
    fs::remove(tmp);
    throw ValidationError("cannot move '" + tmp.string() + "' to '" + target.string()
                          + "': " + ec.message());
  }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header)
{
  if (!header.empty() && header.size() != static_cast<std::size_t>(m.cols()))
    throw DimensionError("header has " + std::to_string(header.size())
                         + " names for " + std::to_string(m.cols()) + " columns");
  atomic_write_text(path, render_csv(m, header));
}

void write_time_series_csv(const std::string& path, const TimeSeries& series)
{
  write_matrix_csv(path, series.data, series.channel_names);
}

} // namespace lrmar
