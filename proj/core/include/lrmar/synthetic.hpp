#ifndef LRMAR_SYNTHETIC_HPP
#define LRMAR_SYNTHETIC_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lrmar/time_series.hpp"

namespace lrmar
{
namespace bench
{

// Superimposed-sinusoid generator. Each sinusoid is one shared source
// with a uniform random phase; each channel includes each source
// independently with probability include_prob, weighted by a
// Gamma(weight_shape, weight_rate) draw:
//
//   clean(t, n) = sum_k w_nk * sin(2*pi*f_k*t + phi_k)
//   noisy(t, n) = clean(t, n) + noise_std * e_tn,   e_tn ~ N(0, 1)
//
// Because the phase is shared across channels, the clean signal spans
// exactly one direction per included sinusoid (rank <= n_sinusoids),
// which makes the recoverable latent dimension easy to control.
struct SinusoidConfig
{
  int T = 4000;
  int N = 12;
  int n_sinusoids = 6;
  std::vector<double> freqs = {0.01, 0.02, 0.035, 0.05, 0.08, 0.12};  // cycles per sample
  double include_prob = 0.4;
  double weight_shape = 1.0;
  double weight_rate = 1.0;
  double noise_std = 0.5;
  std::uint64_t seed = 0;
};

struct SinusoidData
{
  TimeSeries clean;
  TimeSeries noisy;
  Eigen::MatrixXd weights;  // N x K effective weights (zero when excluded)
  Eigen::MatrixXd phases;   // N x K, the shared phase repeated on included entries
};

// Deterministic for a given config: the generator draws the per-sinusoid
// phases, then per channel and frequency in order the inclusion flag and
// the weight, then the noise row by row.
SinusoidData simulate_sinusoids(const SinusoidConfig& config);

} // namespace bench
} // namespace lrmar

#endif
