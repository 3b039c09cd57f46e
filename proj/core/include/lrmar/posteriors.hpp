#ifndef LRMAR_POSTERIORS_HPP
#define LRMAR_POSTERIORS_HPP

#include <vector>

#include <Eigen/Dense>

#include "lrmar/model_spec.hpp"

namespace lrmar
{

// Gaussian posterior over the latent trajectory. Every time step shares
// the same covariance s_z (Q x Q); z_bar is M x Q.
struct LatentPosterior
{
  Eigen::MatrixXd z_bar;
  Eigen::MatrixXd s_z;
};

// Gaussian posterior over the input weights, one column per latent
// component. The columns share the covariance s_w (N*P x N*P); w_bar is
// N*P x Q.
struct WPosterior
{
  Eigen::MatrixXd w_bar;
  Eigen::MatrixXd s_w;
};

// Gaussian posterior over the output loadings. v_bar is Q x N*L and column
// n of the output has its own covariance s_v[n] (Q x Q).
struct VPosterior
{
  Eigen::MatrixXd v_bar;
  std::vector<Eigen::MatrixXd> s_v;
};

// Independent Gamma posteriors that share one shape, e.g. the per-channel
// noise precisions or the per-row scale variables.
struct GammaFamily
{
  double shape = 0.0;
  Eigen::VectorXd rates;

  Eigen::VectorXd means() const;      // shape / rate
  Eigen::VectorXd log_means() const;  // digamma(shape) - log(rate)
};

// Variational objective after one full update sweep, split into its
// additive pieces. total is their sum and is non-increasing across sweeps.
struct FreeEnergyReport
{
  double neg_entropy_z = 0.0;
  double kl_phi = 0.0;
  double neg_avg_loglik_y = 0.0;
  double neg_avg_loglik_z = 0.0;
  double total = 0.0;
};

struct FittedModel
{
  ModelSpec spec;               // resolved hyperparameters as used
  Eigen::VectorXd means;        // channel offsets removed before fitting
  LatentPosterior latent;
  WPosterior w;
  VPosterior v;
  GammaFamily alpha;            // input weight scales, N*P rates
  GammaFamily omega;            // noise precisions, N*L rates
  GammaFamily gamma;            // component scales, Q rates
  std::vector<FreeEnergyReport> free_energy_trace;
  bool converged = false;
  int iterations = 0;
};

// E[Z'Z] = z_bar' z_bar + M * s_z
Eigen::MatrixXd expected_ztz(const LatentPosterior& latent);

// E[V' V] over output channels: entry (n, m) is v_n' v_m plus tr(s_v[n])
// on the diagonal.
Eigen::MatrixXd expected_vtv(const VPosterior& v);

} // namespace lrmar

#endif
