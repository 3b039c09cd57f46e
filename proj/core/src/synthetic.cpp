#include "lrmar/synthetic.hpp"

#include <cmath>
#include <random>
#include <set>
#include <string>

#include "lrmar/errors.hpp"

namespace lrmar
{
namespace bench
{

namespace
{

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_config(const SinusoidConfig& c)
{
  if (c.T < 2)
    throw ValidationError("T must be at least 2, got " + std::to_string(c.T));
  if (c.N < 1)
    throw ValidationError("N must be at least 1, got " + std::to_string(c.N));
  if (c.n_sinusoids < 1)
    throw ValidationError("n_sinusoids must be at least 1, got "
                          + std::to_string(c.n_sinusoids));
  if (c.freqs.size() != static_cast<std::size_t>(c.n_sinusoids))
    throw DimensionError("expected " + std::to_string(c.n_sinusoids)
                         + " frequencies, got " + std::to_string(c.freqs.size()));
  std::set<double> seen;
  for (double f : c.freqs)
  {
    if (!std::isfinite(f) || f <= 0.0 || f >= 0.5)
      throw ValidationError("frequencies must lie strictly between 0 and 0.5 "
                            "cycles per sample, got " + std::to_string(f));
    if (!seen.insert(f).second)
      throw ValidationError("duplicate frequency " + std::to_string(f));
  }
  if (!std::isfinite(c.include_prob) || c.include_prob < 0.0 || c.include_prob > 1.0)
    throw ValidationError("include_prob must lie in [0, 1]");
  if (!std::isfinite(c.weight_shape) || c.weight_shape <= 0.0)
    throw ValidationError("weight_shape must be positive");
  if (!std::isfinite(c.weight_rate) || c.weight_rate <= 0.0)
    throw ValidationError("weight_rate must be positive");
  if (!std::isfinite(c.noise_std) || c.noise_std < 0.0)
    throw ValidationError("noise_std must be non-negative");
}

} // namespace

SinusoidData simulate_sinusoids(const SinusoidConfig& config)
{
  check_config(config);
  const int t_len = config.T;
  const int n_ch = config.N;
  const int k = config.n_sinusoids;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> phase_dist(0.0, kTwoPi);
  // std::gamma_distribution takes shape and scale, not shape and rate.
  std::gamma_distribution<double> weight_dist(config.weight_shape,
                                              1.0 / config.weight_rate);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // One phase per sinusoid, shared by every channel that includes it, so
  // the clean data spans exactly one direction per sinusoid. Independent
  // phases would split each sinusoid into two quadrature directions and
  // double the latent rank of the data.
  Eigen::VectorXd shared_phase(k);
  for (int j = 0; j < k; ++j)
    shared_phase(j) = phase_dist(rng);

  SinusoidData out;
  out.weights = Eigen::MatrixXd::Zero(n_ch, k);
  out.phases = Eigen::MatrixXd::Zero(n_ch, k);
  for (int n = 0; n < n_ch; ++n)
    for (int j = 0; j < k; ++j)
      if (unit(rng) < config.include_prob)
      {
        out.weights(n, j) = weight_dist(rng);
        out.phases(n, j) = shared_phase(j);
      }

  Eigen::MatrixXd clean(t_len, n_ch);
  for (int n = 0; n < n_ch; ++n)
    for (int t = 0; t < t_len; ++t)
    {
      double v = 0.0;
      for (int j = 0; j < k; ++j)
        if (out.weights(n, j) != 0.0)
          v += out.weights(n, j)
               * std::sin(kTwoPi * config.freqs[static_cast<std::size_t>(j)] * t
                          + out.phases(n, j));
      clean(t, n) = v;
    }

  Eigen::MatrixXd noisy = clean;
  for (int t = 0; t < t_len; ++t)
    for (int n = 0; n < n_ch; ++n)
      noisy(t, n) += config.noise_std * gauss(rng);

  out.clean = TimeSeries::make(std::move(clean));
  out.noisy = TimeSeries::make(std::move(noisy));
  return out;
}

} // namespace bench
} // namespace lrmar
