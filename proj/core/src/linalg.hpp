#ifndef LRMAR_SRC_LINALG_HPP
#define LRMAR_SRC_LINALG_HPP

// Internal helpers shared by the inference translation units. Not installed.

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include "lrmar/errors.hpp"

namespace lrmar
{
namespace detail
{

constexpr double kLog2Pi = 1.8378770664093454836;

// KL( Gamma(post_shape, post_rate) || Gamma(prior_shape, prior_rate) ),
// rate parameterization. Exactly zero when the distributions coincide.
inline double gamma_kl(double post_shape, double post_rate, double prior_shape,
                       double prior_rate)
{
  return (post_shape - prior_shape) * boost::math::digamma(post_shape)
         - std::lgamma(post_shape) + std::lgamma(prior_shape)
         + prior_shape * (std::log(post_rate) - std::log(prior_rate))
         + post_shape * (prior_rate - post_rate) / post_rate;
}

// Symmetrize then invert via Cholesky. Throws NumericalError naming the
// matrix if it is not positive definite.
inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const char* label)
{
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success)
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    throw NumericalError(std::string(label) + ": matrix not positive definite"
                         + " (eigenvalue range [" + std::to_string(lo) + ", "
                         + std::to_string(hi) + "])");
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

inline double logdet_spd(const Eigen::MatrixXd& a, const char* label)
{
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(label) + ": matrix not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Flips each column of `cols` so its largest-magnitude entry is positive;
// applies the same flips to the matching column of `paired` when given.
inline void fix_signs(Eigen::MatrixXd& cols, Eigen::MatrixXd* paired = nullptr)
{
  for (Eigen::Index j = 0; j < cols.cols(); ++j)
  {
    Eigen::Index at = 0;
    cols.col(j).cwiseAbs().maxCoeff(&at);
    if (cols(at, j) < 0.0)
    {
      cols.col(j) = -cols.col(j);
      if (paired)
        paired->col(j) = -paired->col(j);
    }
  }
}

} // namespace detail
} // namespace lrmar

#endif
