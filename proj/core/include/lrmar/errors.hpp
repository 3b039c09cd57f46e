#ifndef LRMAR_ERRORS_HPP
#define LRMAR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lrmar
{

// Bad user input: malformed data, impossible dimensions, out-of-range
// hyperparameters. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error
{
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Shape mismatch between two objects that are individually well formed.
class DimensionError : public ValidationError
{
public:
  explicit DimensionError(const std::string& what) : ValidationError(what) {}
};

// Breakdown during iterative inference (non-finite values, indefinite
// matrices, objective moving the wrong way). The CLI maps this to exit
// code 2.
class NumericalError : public std::runtime_error
{
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace lrmar

#endif
