// Microbenchmarks for the hot paths: lag embedding, the six-step update
// sweep, free-energy evaluation, and an end-to-end fit. Run with
// --benchmark_filter=... to narrow.

#include <benchmark/benchmark.h>

#include <lrmar/lagged_design.hpp>
#include <lrmar/model_spec.hpp>
#include <lrmar/synthetic.hpp>
#include <lrmar/time_series.hpp>
#include <lrmar/vb_engine.hpp>

namespace
{

lrmar::TimeSeries test_signal(int t_len, int channels)
{
  lrmar::bench::SinusoidConfig config;
  config.T = t_len;
  config.N = channels;
  config.seed = 41;
  return lrmar::center(
      lrmar::TimeSeries::make(lrmar::bench::simulate_sinusoids(config).noisy.data));
}

void bm_embed_lags(benchmark::State& state)
{
  const lrmar::TimeSeries series = test_signal(4000, 12);
  const int p = static_cast<int>(state.range(0));
  for (auto _ : state)
  {
    lrmar::LaggedDesign design = lrmar::embed_lags(series, p);
    benchmark::DoNotOptimize(design.y_minus.data());
  }
  state.SetItemsProcessed(state.iterations() * series.length());
}
BENCHMARK(bm_embed_lags)->Arg(1)->Arg(4)->Arg(8);

void bm_update_sweep(benchmark::State& state)
{
  const lrmar::TimeSeries series = test_signal(2000, 12);
  const int q = static_cast<int>(state.range(0));
  const lrmar::ModelSpec spec =
      lrmar::ModelSpec::make(6, q).resolved(series.channels());
  const lrmar::LaggedDesign design = lrmar::embed_lags(series, spec.P, spec.L);
  lrmar::vb::Posteriors post = lrmar::vb::init_posterior(design, spec).post;
  for (auto _ : state)
  {
    post.latent = lrmar::vb::update_latent(design, post.w, post.v, post.omega);
    post.w = lrmar::vb::update_w(design, post.latent, post.alpha);
    post.alpha = lrmar::vb::update_alpha(post.w, spec);
    post.v = lrmar::vb::update_v(design, post.latent, post.omega, post.gamma);
    post.omega = lrmar::vb::update_omega(design, post.latent, post.v, spec);
    post.gamma = lrmar::vb::update_gamma(post.v, spec);
    benchmark::DoNotOptimize(post.latent.z_bar.data());
  }
}
BENCHMARK(bm_update_sweep)->Arg(1)->Arg(4)->Arg(8)->Arg(12);

void bm_free_energy(benchmark::State& state)
{
  const lrmar::TimeSeries series = test_signal(2000, 12);
  const lrmar::ModelSpec spec =
      lrmar::ModelSpec::make(6, 6).resolved(series.channels());
  const lrmar::LaggedDesign design = lrmar::embed_lags(series, spec.P, spec.L);
  const lrmar::vb::Posteriors post = lrmar::vb::init_posterior(design, spec).post;
  for (auto _ : state)
  {
    const lrmar::FreeEnergyReport report = lrmar::vb::free_energy(design, post, spec);
    benchmark::DoNotOptimize(report.total);
  }
}
BENCHMARK(bm_free_energy);

void bm_fit(benchmark::State& state)
{
  const lrmar::TimeSeries series = test_signal(1000, 12);
  lrmar::ModelSpec spec = lrmar::ModelSpec::make(6, 6);
  spec.max_iter = 20;
  spec.tol = 1e-300;
  spec.seed = 41;
  for (auto _ : state)
  {
    const lrmar::FittedModel model = lrmar::vb::fit(series, spec);
    benchmark::DoNotOptimize(model.latent.z_bar.data());
  }
  state.SetItemsProcessed(state.iterations() * spec.max_iter);
}
BENCHMARK(bm_fit)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
