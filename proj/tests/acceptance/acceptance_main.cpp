// Acceptance gate for the whole package. Each check prints one line:
//
//   [PASS|FAIL] <what is being promised>: <measured detail> (<seconds>)
//
// and the process exits nonzero if any check fails. Budgets and
// tolerances are fixed here, not configurable, so a green run means the
// same thing on every machine (within hardware speed).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <lrmar/errors.hpp>
#include <lrmar/lagged_design.hpp>
#include <lrmar/metrics.hpp>
#include <lrmar/model_spec.hpp>
#include <lrmar/posteriors.hpp>
#include <lrmar/selection.hpp>
#include <lrmar/synthetic.hpp>
#include <lrmar/time_series.hpp>
#include <lrmar/vb_engine.hpp>
#include <lrmar/wcca.hpp>

#include "support/oracles.hpp"

using namespace lrmar;

namespace
{

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double value)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, value);
  return buf;
}

// ---- 1: the bound never rises across update sweeps ----

Outcome check_monotone_sweeps()
{
  std::mt19937_64 rng(20260819);
  int violations = 0;
  int failed_fits = 0;
  double worst_rise = 0.0;
  for (int run = 0; run < 50; ++run)
  {
    const int n = 2 + run % 7;
    const int p = 1 + static_cast<int>(rng() % 4);
    const int q = 1 + static_cast<int>(rng() % n);
    const Eigen::Index t_len = 200 + static_cast<Eigen::Index>(rng() % 801);

    TimeSeries series;
    if (run % 2 == 0)
    {
      series = oracle::white_noise_series(t_len, n, rng());
    }
    else
    {
      const Eigen::MatrixXd b = oracle::stable_coeffs(n, 1 + rng() % n, rng());
      series = oracle::mar1_series(b, t_len, rng(), 0.5);
    }

    ModelSpec spec = ModelSpec::make(p, q);
    spec.seed = rng();
    try
    {
      const FittedModel model = vb::fit(series, spec);
      for (std::size_t i = 1; i < model.free_energy_trace.size(); ++i)
      {
        const double prev = model.free_energy_trace[i - 1].total;
        const double next = model.free_energy_trace[i].total;
        const double rise = (next - prev) / std::abs(prev);
        worst_rise = std::max(worst_rise, rise);
        if (rise > 1e-9)
          ++violations;
      }
    }
    catch (const NumericalError&)
    {
      ++failed_fits;
    }
  }
  Outcome out;
  out.pass = violations == 0 && failed_fits == 0;
  out.detail = "50 randomized fits, " + std::to_string(violations)
               + " rises above 1e-9 relative, " + std::to_string(failed_fits)
               + " aborted fits, largest rise " + fmt("%.2e", worst_rise);
  return out;
}

// ---- 2: each update step matches its scripted closed form ----

Outcome check_scripted_updates()
{
  const TimeSeries series = center(oracle::white_noise_series(20, 3, 77));
  const ModelSpec spec = ModelSpec::make(2, 2).resolved(3);
  const LaggedDesign design = embed_lags(series, spec.P, spec.L);
  vb::Posteriors post = vb::init_posterior(design, spec).post;

  double worst = 0.0;
  auto track = [&worst](double diff) { worst = std::max(worst, std::abs(diff)); };
  auto track_mat = [&track](const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
    track((got - want).cwiseAbs().maxCoeff());
  };

  const LatentPosterior latent_ref =
      oracle::update_latent(design, post.w, post.v, post.omega);
  post.latent = vb::update_latent(design, post.w, post.v, post.omega);
  track_mat(post.latent.z_bar, latent_ref.z_bar);
  track_mat(post.latent.s_z, latent_ref.s_z);

  const WPosterior w_ref = oracle::update_w(design, post.latent, post.alpha);
  post.w = vb::update_w(design, post.latent, post.alpha);
  track_mat(post.w.w_bar, w_ref.w_bar);
  track_mat(post.w.s_w, w_ref.s_w);

  const GammaFamily alpha_ref = oracle::update_alpha(post.w, spec);
  post.alpha = vb::update_alpha(post.w, spec);
  track(post.alpha.shape - alpha_ref.shape);
  track_mat(post.alpha.rates, alpha_ref.rates);

  const VPosterior v_ref = oracle::update_v(design, post.latent, post.omega, post.gamma);
  post.v = vb::update_v(design, post.latent, post.omega, post.gamma);
  track_mat(post.v.v_bar, v_ref.v_bar);
  for (std::size_t n = 0; n < post.v.s_v.size(); ++n)
    track_mat(post.v.s_v[n], v_ref.s_v[n]);

  const GammaFamily omega_ref = oracle::update_omega(design, post.latent, post.v, spec);
  post.omega = vb::update_omega(design, post.latent, post.v, spec);
  track(post.omega.shape - omega_ref.shape);
  track_mat(post.omega.rates, omega_ref.rates);

  const GammaFamily gamma_ref = oracle::update_gamma(post.v, spec);
  post.gamma = vb::update_gamma(post.v, spec);
  track(post.gamma.shape - gamma_ref.shape);
  track_mat(post.gamma.rates, gamma_ref.rates);

  Outcome out;
  out.pass = worst < 1e-12;
  out.detail = "six update steps on a 3-channel, 20-sample toy, largest gap "
               + fmt("%.2e", worst) + " (bound 1e-12)";
  return out;
}

// ---- 3: flat priors reproduce direct least squares ----

Outcome check_least_squares_match()
{
  // The posterior product carries a small draw-dependent offset from the
  // latent unit-variance noise passing through the loadings, so the match
  // is checked on a typical draw rather than a worst case.
  const Eigen::MatrixXd b_true = oracle::stable_coeffs(4, 4, 1, 0.6);
  const TimeSeries series = oracle::mar1_series(b_true, 5000, 11, 0.5);

  ModelSpec spec = ModelSpec::make(1, 4);
  spec.iota = spec.kappa = spec.nu = 1e-12;
  spec.a = Eigen::VectorXd::Constant(4, 1e-12);
  spec.b = Eigen::MatrixXd::Constant(1, 4, 1e-12);
  spec.c = Eigen::VectorXd::Constant(4, 1e-12);
  spec.max_iter = 1500;
  spec.tol = 1e-11;
  spec.seed = 1;

  const FittedModel model = vb::fit(series, spec);
  const Eigen::MatrixXd b_est = model.w.w_bar * model.v.v_bar;

  const LaggedDesign design = embed_lags(center(series), 1);
  const Eigen::MatrixXd b_ols = oracle::ols(design.y_minus, design.y_plus);
  const double rel = (b_est - b_ols).norm() / b_ols.norm();

  Outcome out;
  out.pass = rel < 1e-2;
  out.detail = "full-rank posterior product vs direct least squares, relative gap "
               + fmt("%.2e", rel) + " (bound 1e-2)";
  return out;
}

// ---- 4: grid selection finds the planted rank ----

bench::SinusoidConfig grid_config(int seed)
{
  bench::SinusoidConfig config;
  config.T = 2000;
  config.seed = 100 + static_cast<std::uint64_t>(seed);
  return config;
}

Outcome check_grid_selection()
{
  const std::vector<int> p_values = {4, 5, 6, 7, 8};
  const std::vector<int> q_values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  int hits = 0;
  Eigen::VectorXd mean_ev = Eigen::VectorXd::Zero(11);  // index by Q
  for (int seed = 0; seed < 20; ++seed)
  {
    const bench::SinusoidData data = bench::simulate_sinusoids(grid_config(seed));

    ModelSpec tmpl = ModelSpec::make(1, 1);
    tmpl.seed = 900 + static_cast<std::uint64_t>(seed);
    const selection::SelectionGrid grid =
        selection::grid_select(data.noisy, tmpl, p_values, q_values, 1);
    if (grid.best_q >= 5 && grid.best_q <= 7)
      ++hits;

    for (int q = 1; q <= 10; ++q)
    {
      ModelSpec spec = ModelSpec::make(6, q);
      spec.seed = tmpl.seed;
      const FittedModel model = vb::fit(data.noisy, spec);
      mean_ev(q) += bench::model_explained_variance(model, data.noisy, data.clean) / 20.0;
    }
  }

  double excess = 0.0;
  for (int q = 7; q <= 10; ++q)
    excess = std::max(excess, mean_ev(q) - mean_ev(6));

  Outcome out;
  out.pass = hits >= 14 && excess < 0.02;
  out.detail = "picked rank in {5,6,7} on " + std::to_string(hits)
               + "/20 seeds (need 14); explained variance beyond rank 6 gains "
               + fmt("%.4f", excess) + " (bound 0.02)";
  return out;
}

// ---- 5: PCA control is exact at full rank and monotone ----

Outcome check_pca_control()
{
  double worst_full_rank = 0.0;
  double worst_dip = 0.0;
  for (int seed = 0; seed < 20; ++seed)
  {
    const bench::SinusoidData data = bench::simulate_sinusoids(grid_config(seed));
    const Eigen::MatrixXd y = center(data.noisy).data;
    double prev = -1.0;
    for (int q = 1; q <= 12; ++q)
    {
      const bench::PcaResult pca = bench::pca_fit(y, q);
      const double ev = bench::explained_variance(y, pca.scores * pca.components);
      worst_dip = std::max(worst_dip, prev - ev);
      prev = ev;
      if (q == 12)
        worst_full_rank = std::max(worst_full_rank, std::abs(ev - 1.0));
    }
  }
  Outcome out;
  out.pass = worst_full_rank <= 1e-10 && worst_dip <= 1e-12;
  out.detail = "20 datasets: full-rank gap from 1 at most " + fmt("%.2e", worst_full_rank)
               + " (bound 1e-10), largest monotonicity dip " + fmt("%.2e", worst_dip);
  return out;
}

// ---- 6: useless input channels get shrunk away ----

Outcome check_input_shrinkage()
{
  int hits = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (int seed = 0; seed < 20; ++seed)
  {
    bench::SinusoidConfig config;
    config.T = 1500;
    config.N = 10;
    config.noise_std = 0.4;
    config.seed = 500 + static_cast<std::uint64_t>(seed);
    const TimeSeries structured = bench::simulate_sinusoids(config).noisy;

    Eigen::MatrixXd joined(1500, 12);
    joined.leftCols(10) = structured.data;
    joined.rightCols(2) =
        oracle::gaussian_matrix(1500, 2, 7000 + static_cast<std::uint64_t>(seed));
    const TimeSeries series = TimeSeries::make(joined);

    ModelSpec spec = ModelSpec::make(3, 6);
    spec.max_iter = 300;
    spec.seed = config.seed;
    const FittedModel model = vb::fit(series, spec);

    // A channel counts as retained through its least-shrunk lag row; later
    // lags are pruned even for informative channels, so a mean would mix
    // the channel question with the lag question.
    Eigen::VectorXd channel_score =
        Eigen::VectorXd::Constant(12, std::numeric_limits<double>::infinity());
    for (int lag = 0; lag < 3; ++lag)
      for (int n = 0; n < 12; ++n)
        channel_score(n) = std::min(
            channel_score(n), model.alpha.shape / model.alpha.rates(lag * 12 + n));

    std::vector<double> structured_scores(channel_score.data(),
                                          channel_score.data() + 10);
    std::nth_element(structured_scores.begin(), structured_scores.begin() + 5,
                     structured_scores.end());
    const double median = structured_scores[5];
    const double ratio =
        std::min(channel_score(10), channel_score(11)) / median;
    worst_ratio = std::min(worst_ratio, ratio);
    if (channel_score(10) > 10.0 * median && channel_score(11) > 10.0 * median)
      ++hits;
  }
  Outcome out;
  out.pass = hits >= 18;
  out.detail = "appended noise channels out-shrunk the structured median 10x on "
               + std::to_string(hits) + "/20 seeds (need 18), weakest margin "
               + fmt("%.1f", worst_ratio) + "x";
  return out;
}

// ---- 7: windowed two-view components come out smoother ----

Outcome check_smoothing()
{
  int hits = 0;
  for (int seed = 0; seed < 20; ++seed)
  {
    bench::SinusoidConfig config;
    config.T = 600;
    config.N = 4;
    config.n_sinusoids = 3;
    config.freqs = {0.004, 0.008, 0.015};
    config.include_prob = 0.8;
    config.noise_std = 0.6;
    config.seed = 300 + static_cast<std::uint64_t>(seed);
    const TimeSeries noisy = bench::simulate_sinusoids(config).noisy;

    ModelSpec two_view = ModelSpec::make(10, 3, 10);
    two_view.max_iter = 200;
    two_view.seed = config.seed;
    const wcca::WccaModel smooth = wcca::fit_wcca(noisy, two_view);
    const double sm_two = bench::component_smoothness(smooth.post.latent.z_bar).mean();

    ModelSpec one_step = ModelSpec::make(10, 3, 1);
    one_step.max_iter = 200;
    one_step.seed = config.seed;
    const FittedModel plain = vb::fit(noisy, one_step);
    const double sm_one = bench::component_smoothness(plain.latent.z_bar).mean();

    if (sm_two > sm_one)
      ++hits;
  }
  Outcome out;
  out.pass = hits >= 16;
  out.detail = "two-view components were smoother on " + std::to_string(hits)
               + "/20 seeds (need 16)";
  return out;
}

struct Criterion
{
  const char* name;
  Outcome (*run)();
  double budget_seconds;  // 0 means no time bound
};

} // namespace

int main()
{
  const Criterion criteria[] = {
      {"free energy never rises across update sweeps", check_monotone_sweeps, 120.0},
      {"update steps match their scripted closed forms", check_scripted_updates, 1.0},
      {"flat priors reproduce direct least squares", check_least_squares_match, 30.0},
      {"grid selection recovers the planted rank", check_grid_selection, 900.0},
      {"PCA control is exact at full rank and monotone", check_pca_control, 0.0},
      {"irrelevant input channels are shrunk away", check_input_shrinkage, 180.0},
      {"windowed two-view components come out smoother", check_smoothing, 300.0},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria)
  {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try
    {
      outcome = criterion.run();
    }
    catch (const std::exception& e)
    {
      outcome.pass = false;
      outcome.detail = std::string("threw: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criterion.budget_seconds > 0.0 && seconds > criterion.budget_seconds)
    {
      outcome.pass = false;
      outcome.detail += "; exceeded the " + fmt("%.0f", criterion.budget_seconds)
                        + "s budget";
    }
    std::printf("[%s] %s: %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL",
                criterion.name, outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!outcome.pass)
      ++failures;
  }

  std::printf("[SKIP] comparisons on held-out recordings and external baselines: "
              "the required datasets and reference implementations are not bundled\n");

  if (failures > 0)
    std::printf("%d of 7 checks failed\n", failures);
  else
    std::printf("all 7 checks passed, 1 skipped\n");
  return failures == 0 ? 0 : 1;
}
