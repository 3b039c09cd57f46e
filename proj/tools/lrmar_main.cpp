// Command line front end. Every subcommand reads plain numeric CSV, writes
// outputs atomically, and keeps all randomness behind an explicit seed, so
// identical invocations produce identical files (wall-clock columns aside).
//
// Exit codes: 0 success, 1 bad input (flags, files, dimensions), 2 numerical
// failure during inference.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <lrmar/csv.hpp>
#include <lrmar/errors.hpp>
#include <lrmar/metrics.hpp>
#include <lrmar/model_io.hpp>
#include <lrmar/model_spec.hpp>
#include <lrmar/selection.hpp>
#include <lrmar/synthetic.hpp>
#include <lrmar/time_series.hpp>
#include <lrmar/vb_engine.hpp>
#include <lrmar/wcca.hpp>

namespace
{

using namespace lrmar;

constexpr const char* kListHelp = "one value, a comma list, or an inclusive range a..b";

int parse_int(const std::string& text, const std::string& flag)
{
  int value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw ValidationError(flag + " expects an integer, got '" + text + "'");
  return value;
}

// Grid axis syntax: "6", "4,6,8", or "2..8" (inclusive).
std::vector<int> parse_int_list(const std::string& text, const std::string& flag)
{
  const std::size_t dots = text.find("..");
  if (dots != std::string::npos)
  {
    const int lo = parse_int(text.substr(0, dots), flag);
    const int hi = parse_int(text.substr(dots + 2), flag);
    if (lo > hi)
      throw ValidationError(flag + " range '" + text + "' runs backwards");
    std::vector<int> values;
    for (int v = lo; v <= hi; ++v)
      values.push_back(v);
    return values;
  }
  std::vector<int> values;
  std::size_t start = 0;
  while (start <= text.size())
  {
    const std::size_t comma = text.find(',', start);
    const std::size_t stop = comma == std::string::npos ? text.size() : comma;
    values.push_back(parse_int(text.substr(start, stop - start), flag));
    if (comma == std::string::npos)
      break;
    start = comma + 1;
  }
  if (values.empty())
    throw ValidationError(flag + " is empty");
  return values;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag)
{
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size())
  {
    const std::size_t comma = text.find(',', start);
    const std::size_t stop = comma == std::string::npos ? text.size() : comma;
    const std::string field = text.substr(start, stop - start);
    try
    {
      std::size_t used = 0;
      values.push_back(std::stod(field, &used));
      if (used != field.size())
        throw std::invalid_argument(field);
    }
    catch (const std::exception&)
    {
      throw ValidationError(flag + " expects numbers, got '" + field + "'");
    }
    if (comma == std::string::npos)
      break;
    start = comma + 1;
  }
  return values;
}

void require_readable(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open '" + path + "' for reading");
}

void require_writable(const std::string& path)
{
  if (path.empty())
    throw ValidationError("output path is empty");
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw ValidationError("cannot write '" + path + "': directory does not exist");
}

// Output window column names: plain channel names for one frame, frame-
// suffixed (ch+1, ch+2, ...) when L > 1, matching the lag-major layout.
std::vector<std::string> window_names(const std::vector<std::string>& channels, int l_frames)
{
  if (l_frames == 1)
    return channels;
  std::vector<std::string> names;
  names.reserve(channels.size() * static_cast<std::size_t>(l_frames));
  for (int l = 1; l <= l_frames; ++l)
    for (const std::string& ch : channels)
      names.push_back(ch + "+" + std::to_string(l));
  return names;
}

std::vector<std::string> component_names(Eigen::Index q)
{
  std::vector<std::string> names;
  for (Eigen::Index j = 1; j <= q; ++j)
    names.push_back("z" + std::to_string(j));
  return names;
}

// Shared inference settings exposed on fit-like subcommands. Rate flags are
// scalars broadcast once the data dimensions are known; negative means the
// flag was not given and the library default applies.
struct SpecFlags
{
  int P = 1;
  int Q = 1;
  int L = 1;
  double tol = 1e-8;
  int max_iter = 500;
  std::uint64_t seed = 0;
  double iota = ModelSpec::kDefaultShape;
  double kappa = ModelSpec::kDefaultShape;
  double nu = ModelSpec::kDefaultShape;
  double rate_a = -1.0;
  double rate_b = -1.0;
  double rate_c = -1.0;

  void add_common(CLI::App& cmd, bool with_model_order = true, bool with_rates = true)
  {
    if (with_model_order)
    {
      cmd.add_option("--P", P, "past window length (lags)");
      cmd.add_option("--Q", Q, "latent dimension");
      cmd.add_option("--L", L, "future window length");
    }
    cmd.add_option("--tol", tol, "relative free-energy change that counts as converged");
    cmd.add_option("--max-iter", max_iter, "sweep cap");
    cmd.add_option("--seed", seed, "restart seed");
    cmd.add_option("--iota", iota, "noise precision prior shape");
    cmd.add_option("--kappa", kappa, "input weight scale prior shape");
    cmd.add_option("--nu", nu, "component scale prior shape");
    if (with_rates)
    {
      cmd.add_option("--rate-a", rate_a, "noise precision prior rate (broadcast)");
      cmd.add_option("--rate-b", rate_b, "input weight scale prior rate (broadcast)");
      cmd.add_option("--rate-c", rate_c, "component scale prior rate (broadcast)");
    }
  }

  ModelSpec to_spec(Eigen::Index n) const
  {
    ModelSpec spec = ModelSpec::make(P, Q, L);
    spec.tol = tol;
    spec.max_iter = max_iter;
    spec.seed = seed;
    spec.iota = iota;
    spec.kappa = kappa;
    spec.nu = nu;
    if (rate_a >= 0.0)
      spec.a = Eigen::VectorXd::Constant(n * L, rate_a);
    if (rate_b >= 0.0)
      spec.b = Eigen::MatrixXd::Constant(P, n, rate_b);
    if (rate_c >= 0.0)
      spec.c = Eigen::VectorXd::Constant(Q, rate_c);
    return spec;
  }
};

struct SimulateArgs
{
  bench::SinusoidConfig cfg;
  int n_sinusoids = 0;
  std::string freqs;
  std::string out;
  std::string clean_out;
};

void run_simulate(const SimulateArgs& args, bool verbose)
{
  bench::SinusoidConfig cfg = args.cfg;
  if (!args.freqs.empty())
  {
    cfg.freqs = parse_double_list(args.freqs, "--freqs");
    cfg.n_sinusoids = static_cast<int>(cfg.freqs.size());
  }
  if (args.n_sinusoids > 0)
  {
    cfg.n_sinusoids = args.n_sinusoids;
    if (args.freqs.empty() && cfg.n_sinusoids != static_cast<int>(cfg.freqs.size()))
    {
      // No explicit frequencies: spread the requested count over the
      // default band.
      cfg.freqs.resize(static_cast<std::size_t>(cfg.n_sinusoids));
      for (int k = 0; k < cfg.n_sinusoids; ++k)
        cfg.freqs[static_cast<std::size_t>(k)] =
            cfg.n_sinusoids == 1
                ? 0.05
                : 0.01 + 0.11 * k / static_cast<double>(cfg.n_sinusoids - 1);
    }
  }

  require_writable(args.out);
  if (!args.clean_out.empty())
    require_writable(args.clean_out);

  const bench::SinusoidData data = bench::simulate_sinusoids(cfg);
  write_time_series_csv(args.out, data.noisy);
  if (!args.clean_out.empty())
    write_time_series_csv(args.clean_out, data.clean);
  if (verbose)
    std::cerr << "simulate: " << cfg.T << " rows, " << cfg.N << " channels, "
              << (data.weights.array() != 0.0).count() << " active sinusoid terms\n";
}

struct FitArgs
{
  SpecFlags flags;
  std::string in;
  std::string out;
};

void run_fit(const FitArgs& args, bool verbose)
{
  require_readable(args.in);
  require_writable(args.out);

  const TimeSeries series = read_time_series_csv(args.in);
  const ModelSpec spec = args.flags.to_spec(series.channels());
  const FittedModel model = vb::fit_multilag(series, spec);
  save_model(args.out, model);
  if (verbose)
    std::cerr << "fit: free energy " << model.free_energy_trace.back().total
              << " after " << model.iterations << " sweeps"
              << (model.converged ? "" : " (stopped at the sweep cap)") << '\n';
}

struct SelectArgs
{
  SpecFlags flags;
  std::string in;
  std::string p_list = "1..4";
  std::string q_list;
  int repeats = 3;
  int workers = 0;
  std::string out;
  std::string model_out;
};

void run_select(const SelectArgs& args, bool verbose)
{
  require_readable(args.in);
  require_writable(args.out);
  if (!args.model_out.empty())
    require_writable(args.model_out);

  const std::vector<int> ps = parse_int_list(args.p_list, "--P");
  const std::vector<int> qs = parse_int_list(args.q_list, "--Q");

  const TimeSeries series = read_time_series_csv(args.in);
  ModelSpec tmpl = args.flags.to_spec(series.channels());
  tmpl.a.resize(0);
  tmpl.b.resize(0, 0);
  tmpl.c.resize(0);

  const selection::SelectionGrid grid =
      selection::grid_select(series, tmpl, ps, qs, args.repeats, args.workers);
  selection::write_grid_csv(args.out, grid);
  if (!args.model_out.empty())
    save_model(args.model_out, grid.best_model);
  if (verbose)
    std::cerr << "select: best P=" << grid.best_p << " Q=" << grid.best_q
              << " free_energy=" << grid.best_free_energy << '\n';
}

struct TransformArgs
{
  std::string model;
  std::string in;
  std::string out;
};

void run_transform(const TransformArgs& args, bool)
{
  require_readable(args.model);
  require_readable(args.in);
  require_writable(args.out);

  const FittedModel model = load_model(args.model);
  const TimeSeries series = read_time_series_csv(args.in);
  const Eigen::MatrixXd z = vb::transform(model, series);
  write_matrix_csv(args.out, z, component_names(z.cols()));
}

struct ReconstructArgs
{
  std::string model;
  std::string in;
  std::string out;
  bool original_units = false;
};

void run_reconstruct(const ReconstructArgs& args, bool)
{
  require_readable(args.model);
  require_readable(args.in);
  require_writable(args.out);

  const FittedModel model = load_model(args.model);
  const TimeSeries series = read_time_series_csv(args.in);
  const Eigen::MatrixXd z = vb::transform(model, series);
  const Eigen::MatrixXd recon = vb::reconstruct(model, z, args.original_units);
  write_matrix_csv(args.out, recon, window_names(series.channel_names, model.spec.L));
}

struct PredictArgs
{
  std::string model;
  std::string in;
  std::string out;
  std::string cov_out;
};

void run_predict(const PredictArgs& args, bool verbose)
{
  require_readable(args.model);
  require_readable(args.in);
  require_writable(args.out);
  if (!args.cov_out.empty())
    require_writable(args.cov_out);

  const FittedModel model = load_model(args.model);
  const TimeSeries series = read_time_series_csv(args.in);
  const int p = model.spec.P;
  if (series.length() < p)
    throw ValidationError("history has " + std::to_string(series.length())
                          + " rows, the model needs the last " + std::to_string(p));
  if (series.channels() != model.means.size())
    throw DimensionError("history has " + std::to_string(series.channels())
                         + " channels, model expects "
                         + std::to_string(model.means.size()));

  // The engine wants the window most-recent-first in the centered frame.
  const Eigen::Index t_len = series.length();
  Eigen::MatrixXd history(p, series.channels());
  for (int i = 0; i < p; ++i)
    history.row(i) = series.data.row(t_len - 1 - i) - model.means.transpose();

  const vb::Prediction pred = vb::predict_one_step(model, history);

  // One row per future frame, back in original units.
  const Eigen::Index n = model.means.size();
  Eigen::MatrixXd mean(model.spec.L, n);
  for (int l = 0; l < model.spec.L; ++l)
    mean.row(l) = pred.mean.segment(l * n, n).transpose() + model.means.transpose();
  write_matrix_csv(args.out, mean, series.channel_names);
  if (!args.cov_out.empty())
    write_matrix_csv(args.cov_out, pred.cov,
                     window_names(series.channel_names, model.spec.L));
  if (verbose)
    std::cerr << "predict: " << model.spec.L << " frame(s) ahead from " << p
              << " history rows\n";
}

struct WccaArgs
{
  SpecFlags flags;
  std::string in;
  std::string out;
  std::string z_out;
};

void run_wcca(const WccaArgs& args, bool verbose)
{
  require_readable(args.in);
  require_writable(args.out);
  if (!args.z_out.empty())
    require_writable(args.z_out);

  const TimeSeries series = read_time_series_csv(args.in);
  const ModelSpec spec = args.flags.to_spec(series.channels());
  const wcca::WccaModel model = wcca::fit_wcca(series, spec);
  save_wcca_model(args.out, model);
  if (!args.z_out.empty())
    write_matrix_csv(args.z_out, model.post.latent.z_bar,
                     component_names(model.post.latent.z_bar.cols()));
  if (verbose)
    std::cerr << "wcca: free energy " << model.free_energy_trace.back().total
              << " after " << model.iterations << " sweeps"
              << (model.converged ? "" : " (stopped at the sweep cap)") << '\n';
}

struct BenchArgs
{
  bench::SinusoidConfig cfg;
  int seeds = 10;
  int P = 6;
  std::string q_list = "1..12";
  int max_iter = 500;
  double tol = 1e-8;
  std::string out;
};

void run_bench(const BenchArgs& args, bool verbose)
{
  require_writable(args.out);
  const std::vector<int> qs = parse_int_list(args.q_list, "--Q");
  if (args.seeds < 1)
    throw ValidationError("--seeds must be at least 1");

  std::vector<bench::BenchRow> rows;
  for (int s = 0; s < args.seeds; ++s)
  {
    bench::SinusoidConfig cfg = args.cfg;
    cfg.seed = args.cfg.seed + static_cast<std::uint64_t>(s);
    const bench::SinusoidData data = bench::simulate_sinusoids(cfg);

    Eigen::MatrixXd noisy_centered = data.noisy.data;
    noisy_centered.rowwise() -= noisy_centered.colwise().mean().eval();
    Eigen::MatrixXd clean_centered = data.clean.data;
    clean_centered.rowwise() -= clean_centered.colwise().mean().eval();

    for (int q : qs)
    {
      ModelSpec spec = ModelSpec::make(args.P, q);
      spec.max_iter = args.max_iter;
      spec.tol = args.tol;
      spec.seed = cfg.seed;
      const FittedModel model = vb::fit(data.noisy, spec);
      rows.push_back({"lrmar", q, args.P, "noisy",
                      bench::model_explained_variance(model, data.noisy, data.noisy),
                      cfg.seed});
      rows.push_back({"lrmar", q, args.P, "clean",
                      bench::model_explained_variance(model, data.noisy, data.clean),
                      cfg.seed});

      const bench::PcaResult pca = bench::pca_fit(noisy_centered, q);
      const Eigen::MatrixXd recon = pca.scores * pca.components;
      rows.push_back({"pca", q, 0, "noisy",
                      bench::explained_variance(noisy_centered, recon), cfg.seed});
      rows.push_back({"pca", q, 0, "clean",
                      bench::explained_variance(clean_centered, recon), cfg.seed});
    }
    if (verbose)
      std::cerr << "bench: seed " << cfg.seed << " done\n";
  }
  bench::write_bench_csv(args.out, rows);
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Low-rank autoregressive factor models: simulation, fitting,\n"
               "free-energy model selection, and two-view smoothing.\n"
               "Grid axes accept " + std::string(kListHelp) + "."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lrmar 0.1.0");
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "progress notes on the diagnostic stream");

  std::string stage = "startup";

  auto sim = std::make_shared<SimulateArgs>();
  {
    CLI::App* cmd = app.add_subcommand("simulate", "Generate superimposed-sinusoid data");
    cmd->add_option("--T", sim->cfg.T, "rows");
    cmd->add_option("--N", sim->cfg.N, "channels");
    cmd->add_option("--sinusoids", sim->n_sinusoids, "how many base frequencies");
    cmd->add_option("--freqs", sim->freqs, "comma list of frequencies in cycles/sample");
    cmd->add_option("--include-prob", sim->cfg.include_prob,
                    "chance each channel carries each sinusoid");
    cmd->add_option("--weight-shape", sim->cfg.weight_shape, "weight Gamma shape");
    cmd->add_option("--weight-rate", sim->cfg.weight_rate, "weight Gamma rate");
    cmd->add_option("--noise-std", sim->cfg.noise_std, "additive noise level");
    cmd->add_option("--seed", sim->cfg.seed, "generator seed");
    cmd->add_option("--out", sim->out, "noisy series CSV")->required();
    cmd->add_option("--clean-out", sim->clean_out, "noise-free series CSV");
    cmd->callback([&stage, &verbose, sim] { stage = "simulate"; run_simulate(*sim, verbose); });
  }

  auto fit = std::make_shared<FitArgs>();
  {
    CLI::App* cmd = app.add_subcommand("fit", "Fit the factor model to a series");
    cmd->add_option("--in", fit->in, "input series CSV")->required();
    cmd->add_option("--out", fit->out, "model JSON")->required();
    fit->flags.add_common(*cmd);
    cmd->callback([&stage, &verbose, fit] { stage = "fit"; run_fit(*fit, verbose); });
  }

  auto sel = std::make_shared<SelectArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "select", "Pick (P, Q) by free energy over a grid of restarts");
    cmd->add_option("--in", sel->in, "input series CSV")->required();
    cmd->add_option("--P", sel->p_list, std::string("lags to try: ") + kListHelp);
    cmd->add_option("--Q", sel->q_list, std::string("dimensions to try: ") + kListHelp)
        ->required();
    cmd->add_option("--repeats", sel->repeats, "restarts per cell");
    cmd->add_option("--workers", sel->workers,
                    "thread pool size (0: LRMAR_WORKERS env, then logical cores)");
    cmd->add_option("--out", sel->out, "per-restart grid CSV")->required();
    cmd->add_option("--model-out", sel->model_out, "winning model JSON");
    sel->flags.add_common(*cmd, false, false);
    cmd->add_option("--L", sel->flags.L, "future window length");
    cmd->callback([&stage, &verbose, sel] { stage = "select"; run_select(*sel, verbose); });
  }

  auto tr = std::make_shared<TransformArgs>();
  {
    CLI::App* cmd = app.add_subcommand("transform", "Project a series onto the latent components");
    cmd->add_option("--model", tr->model, "model JSON")->required();
    cmd->add_option("--in", tr->in, "input series CSV")->required();
    cmd->add_option("--out", tr->out, "latent trajectory CSV")->required();
    cmd->callback([&stage, &verbose, tr] { stage = "transform"; run_transform(*tr, verbose); });
  }

  auto rec = std::make_shared<ReconstructArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "reconstruct", "Denoise: project a series and map it back");
    cmd->add_option("--model", rec->model, "model JSON")->required();
    cmd->add_option("--in", rec->in, "input series CSV")->required();
    cmd->add_option("--out", rec->out, "reconstructed window CSV")->required();
    cmd->add_flag("--original-units", rec->original_units,
                  "add the stored channel means back");
    cmd->callback([&stage, &verbose, rec]
                  { stage = "reconstruct"; run_reconstruct(*rec, verbose); });
  }

  auto pre = std::make_shared<PredictArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "predict", "One-step-ahead predictive mean from the end of a series");
    cmd->add_option("--model", pre->model, "model JSON")->required();
    cmd->add_option("--in", pre->in, "history CSV (last P rows are used)")->required();
    cmd->add_option("--out", pre->out, "predicted frames CSV")->required();
    cmd->add_option("--cov-out", pre->cov_out, "predictive covariance CSV");
    cmd->callback([&stage, &verbose, pre] { stage = "predict"; run_predict(*pre, verbose); });
  }

  auto wc = std::make_shared<WccaArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "wcca", "Two-view windowed smoothing (past and future windows, P = L)");
    cmd->add_option("--in", wc->in, "input series CSV")->required();
    cmd->add_option("--out", wc->out, "model JSON")->required();
    cmd->add_option("--z-out", wc->z_out, "latent trajectory CSV");
    wc->flags.add_common(*cmd, false, false);
    cmd->add_option("--P", wc->flags.P, "window length (both views)");
    cmd->add_option("--Q", wc->flags.Q, "latent dimension");
    cmd->add_option("--rate-c", wc->flags.rate_c, "component scale prior rate (broadcast)");
    cmd->callback([&stage, &verbose, wc]
                  {
                    stage = "wcca";
                    wc->flags.L = wc->flags.P;
                    run_wcca(*wc, verbose);
                  });
  }

  auto be = std::make_shared<BenchArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "bench", "Explained-variance sweep of the factor model against PCA");
    cmd->add_option("--T", be->cfg.T, "rows per dataset");
    cmd->add_option("--N", be->cfg.N, "channels");
    cmd->add_option("--noise-std", be->cfg.noise_std, "additive noise level");
    cmd->add_option("--seeds", be->seeds, "datasets to average over");
    cmd->add_option("--seed", be->cfg.seed, "first dataset seed");
    cmd->add_option("--P", be->P, "lags for the factor model");
    cmd->add_option("--Q", be->q_list, std::string("dimensions to sweep: ") + kListHelp);
    cmd->add_option("--max-iter", be->max_iter, "sweep cap per fit");
    cmd->add_option("--tol", be->tol, "convergence tolerance per fit");
    cmd->add_option("--out", be->out, "long-format results CSV")->required();
    cmd->callback([&stage, &verbose, be] { stage = "bench"; run_bench(*be, verbose); });
  }

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  catch (const ValidationError& e)
  {
    std::cerr << stage << ": " << e.what() << '\n';
    return 1;
  }
  catch (const NumericalError& e)
  {
    std::cerr << stage << ": " << e.what() << '\n';
    return 2;
  }
  catch (const std::exception& e)
  {
    std::cerr << stage << ": unexpected error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
