#include "lrmar/posteriors.hpp"

#include <boost/math/special_functions/digamma.hpp>

namespace lrmar
{

Eigen::VectorXd GammaFamily::means() const
{
  return shape / rates.array();
}

Eigen::VectorXd GammaFamily::log_means() const
{
  const double psi = boost::math::digamma(shape);
  return psi - rates.array().log();
}

Eigen::MatrixXd expected_ztz(const LatentPosterior& latent)
{
  const double m = static_cast<double>(latent.z_bar.rows());
  return latent.z_bar.transpose() * latent.z_bar + m * latent.s_z;
}

Eigen::MatrixXd expected_vtv(const VPosterior& v)
{
  const Eigen::Index d = v.v_bar.cols();
  Eigen::MatrixXd out = v.v_bar.transpose() * v.v_bar;
  for (Eigen::Index n = 0; n < d; ++n)
    out(n, n) += v.s_v[static_cast<std::size_t>(n)].trace();
  return out;
}

} // namespace lrmar
