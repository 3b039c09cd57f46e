#ifndef LRMAR_VB_ENGINE_HPP
#define LRMAR_VB_ENGINE_HPP

#include <Eigen/Dense>

#include "lrmar/lagged_design.hpp"
#include "lrmar/model_spec.hpp"
#include "lrmar/posteriors.hpp"
#include "lrmar/time_series.hpp"

namespace lrmar
{
namespace vb
{

/*
 * Variational inference for the low-rank autoregressive factor model
 *
 *   z_t | y^-_t      ~  N( W' y^-_t , I_Q )
 *   y^+_t | z_t      ~  N( V' z_t , diag(1/omega) )
 *
 * where y^-_t stacks the previous P frames, y^+_t the next L frames, W is
 * N*P x Q and V' is N*L x Q. Rows of W carry Gamma-distributed precision
 * scales alpha (one per input column), rows of V carry scales gamma (one
 * per component), and each output channel has a Gamma noise precision.
 *
 * The posterior is factored as q(Z) q(W) q(alpha) q(V) q(omega) q(gamma)
 * and each update below is the exact coordinate maximizer of the evidence
 * bound given the others, so the free energy (the negative bound) cannot
 * increase across a sweep. fit() sweeps in the fixed order
 * z, W, alpha, V, omega, gamma and evaluates the free energy once per
 * sweep.
 */

// Everything fit() iterates over.
struct Posteriors
{
  LatentPosterior latent;
  WPosterior w;
  VPosterior v;
  GammaFamily alpha;
  GammaFamily omega;
  GammaFamily gamma;
};

struct InitState
{
  Posteriors post;
  bool used_random_fallback = false;
};

// Data-driven start: loadings from the leading singular vectors of y_plus
// (largest-magnitude entry of each component made positive), scores from
// projecting y_plus onto them, weights from a lightly ridged regression of
// the scores on y_minus. Gamma families start at their priors. Falls back
// to a seeded random start, with a warning on stderr, when y_plus has
// numerical rank below Q.
InitState init_posterior(const LaggedDesign& design, const ModelSpec& spec);

LatentPosterior update_latent(const LaggedDesign& design, const WPosterior& w,
                              const VPosterior& v, const GammaFamily& omega);

WPosterior update_w(const LaggedDesign& design, const LatentPosterior& latent,
                    const GammaFamily& alpha);

GammaFamily update_alpha(const WPosterior& w, const ModelSpec& spec);

VPosterior update_v(const LaggedDesign& design, const LatentPosterior& latent,
                    const GammaFamily& omega, const GammaFamily& gamma);

GammaFamily update_omega(const LaggedDesign& design, const LatentPosterior& latent,
                         const VPosterior& v, const ModelSpec& spec);

GammaFamily update_gamma(const VPosterior& v, const ModelSpec& spec);

// Exact negative evidence bound for the current posterior state, split
// into its reported pieces. Throws NumericalError naming the first
// non-finite term.
FreeEnergyReport free_energy(const LaggedDesign& design, const Posteriors& post,
                             const ModelSpec& spec);

// Full pipeline: validate, center (unless the series already is), embed,
// initialize, sweep until |dF| / |F| < tol or max_iter sweeps, then
// refresh the latent posterior so transform() on the training series
// reproduces latent.z_bar exactly. Throws NumericalError if the free
// energy increases beyond rounding slack.
FittedModel fit(const TimeSeries& series, const ModelSpec& spec);

// Same model with L > 1: the next L frames are predicted jointly from the
// same P-frame history. With L = 1 this is identical to fit().
FittedModel fit_multilag(const TimeSeries& series, const ModelSpec& spec);

// Latent means for new data in the model's frame: subtracts the stored
// channel means (a series already flagged centered is used as-is), embeds
// with the fitted P and L, and runs one latent update.
Eigen::MatrixXd transform(const FittedModel& model, const TimeSeries& series);

// Posterior-mean reconstruction z * v_bar of the embedded output window.
// With original_units the stored channel means are added back to each
// frame of the window.
Eigen::MatrixXd reconstruct(const FittedModel& model, const Eigen::MatrixXd& z,
                            bool original_units = false);

struct Prediction
{
  Eigen::VectorXd mean;  // N*L, the next L frames stacked
  Eigen::MatrixXd cov;   // N*L x N*L
};

// Plug-in one-step-ahead predictive density. history holds the P most
// recent frames in the model's centered frame, most recent first (row 0 is
// y_{t-1}, row 1 is y_{t-2}, ...). The mean is v_bar' w_bar' h and stays in
// the centered frame; the covariance adds the expected loading Gram matrix
// to the posterior mean noise variances a_n / (shape - 1), so the noise
// shape must exceed 1 (it does after any fit, since the shape grows with
// the window count).
Prediction predict_one_step(const FittedModel& model, const Eigen::MatrixXd& history);

} // namespace vb
} // namespace lrmar

#endif
