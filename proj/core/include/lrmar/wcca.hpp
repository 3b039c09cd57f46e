#ifndef LRMAR_WCCA_HPP
#define LRMAR_WCCA_HPP

#include <vector>

#include <Eigen/Dense>

#include "lrmar/model_spec.hpp"
#include "lrmar/posteriors.hpp"
#include "lrmar/time_series.hpp"

namespace lrmar
{
namespace wcca
{

/*
 * Windowed two-view factor model. A shared latent trajectory explains two
 * observation matrices at once:
 *
 *   z_t         ~  N( 0 , I_Q )
 *   x1_t | z_t  ~  N( F' z_t , diag(1/omega1) )
 *   x2_t | z_t  ~  N( G' z_t , diag(1/omega2) )
 *
 * When the views are the P-frame past window and the L-frame future window
 * of one series this acts as a probabilistic CCA between past and future,
 * and the latent trajectory picks up the dynamics both windows agree on.
 * Rows of F and G carry Gamma relevance scales (ard_f, ard_g), so surplus
 * components switch themselves off.
 *
 * Inference mirrors the autoregressive engine: mean-field coordinate
 * updates in a fixed sweep order (z, F, G, omega1, omega2, ard_f, ard_g)
 * with the exact free energy evaluated once per sweep. The sweep treats
 * the two views symmetrically, so swapping them swaps F and G and nothing
 * else.
 */

// The loadings reuse VPosterior: v_bar is Q x D with one covariance per
// view column.
struct WccaPosterior
{
  LatentPosterior latent;
  VPosterior f;          // view 1 loadings
  VPosterior g;          // view 2 loadings
  GammaFamily noise1;    // view 1 noise precisions
  GammaFamily noise2;    // view 2 noise precisions
  GammaFamily ard_f;     // component relevance for view 1, Q rates
  GammaFamily ard_g;     // component relevance for view 2, Q rates
};

struct WccaModel
{
  int Q = 0;
  int P = 0;                  // embedding windows when fit from a series,
  int L = 0;                  // zero when raw views were given
  double iota = ModelSpec::kDefaultShape;
  double nu = ModelSpec::kDefaultShape;
  Eigen::VectorXd means;      // channel means of the source series (empty for raw views)
  Eigen::VectorXd means1;     // column offsets removed from each view
  Eigen::VectorXd means2;
  WccaPosterior post;
  std::vector<FreeEnergyReport> free_energy_trace;  // both view likelihoods land in neg_avg_loglik_y
  bool converged = false;
  int iterations = 0;
};

// Fits the two-view model to raw sample-aligned views (rows are joint
// observations). Column means are removed and recorded. Uses Q, iota, nu,
// c, max_iter, tol, and seed from the model spec; noise prior rates default to
// ModelSpec::kDefaultRate per column. After fitting, components are
// ordered by decreasing total relevance and the dominant loading entry of
// each component is made positive.
WccaModel fit_wcca_views(const Eigen::MatrixXd& view1, const Eigen::MatrixXd& view2,
                         const ModelSpec& spec);

// Centers the series, embeds it with the spec's P past frames and L future
// frames, and couples the two windows through the shared trajectory. The
// windows must be the same width (P == L) so the views stay interchangeable.
WccaModel fit_wcca(const TimeSeries& series, const ModelSpec& spec);

} // namespace wcca
} // namespace lrmar

#endif
