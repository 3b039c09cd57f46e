#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <lrmar/errors.hpp>
#include <lrmar/model_io.hpp>
#include <lrmar/vb_engine.hpp>
#include <lrmar/wcca.hpp>

#include "support/oracles.hpp"

using namespace lrmar;

namespace
{

struct TempFile
{
  std::filesystem::path path;

  explicit TempFile(const std::string& stem)
  {
    static std::mt19937_64 rng(std::random_device{}());
    path = std::filesystem::temp_directory_path()
           / (stem + "-" + std::to_string(rng()) + ".json");
  }
  ~TempFile()
  {
    std::error_code ec;
    std::filesystem::remove(path, ec);
    std::filesystem::remove(path.string() + ".tmp", ec);
  }
  std::string str() const { return path.string(); }
};

bool same_bits(double a, double b)
{
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

void check_bits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      CHECK(same_bits(a(i, j), b(i, j)));
}

void check_gamma(const GammaFamily& a, const GammaFamily& b)
{
  CHECK(same_bits(a.shape, b.shape));
  check_bits(a.rates, b.rates);
}

void check_trace(const std::vector<FreeEnergyReport>& a,
                 const std::vector<FreeEnergyReport>& b)
{
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k)
  {
    CHECK(same_bits(a[k].neg_entropy_z, b[k].neg_entropy_z));
    CHECK(same_bits(a[k].kl_phi, b[k].kl_phi));
    CHECK(same_bits(a[k].neg_avg_loglik_y, b[k].neg_avg_loglik_y));
    CHECK(same_bits(a[k].neg_avg_loglik_z, b[k].neg_avg_loglik_z));
    CHECK(same_bits(a[k].total, b[k].total));
  }
}

std::string slurp(const std::string& path)
{
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text)
{
  std::ofstream out(path);
  out << text;
}

FittedModel small_model(std::uint64_t seed = 3)
{
  const TimeSeries series =
      oracle::mar1_series(oracle::stable_coeffs(2, 1, 11), 300, 11, 0.3);
  ModelSpec spec = ModelSpec::make(2, 2);
  spec.max_iter = 40;
  spec.seed = seed;
  return vb::fit(series, spec);
}

} // namespace

TEST_CASE("a fitted model survives save and load with every number intact")
{
  const FittedModel model = small_model();
  TempFile file("model-roundtrip");
  save_model(file.str(), model);
  const FittedModel back = load_model(file.str());

  CHECK(back.spec.P == model.spec.P);
  CHECK(back.spec.Q == model.spec.Q);
  CHECK(back.spec.L == model.spec.L);
  CHECK(back.spec.max_iter == model.spec.max_iter);
  CHECK(back.spec.seed == model.spec.seed);
  CHECK(same_bits(back.spec.iota, model.spec.iota));
  CHECK(same_bits(back.spec.kappa, model.spec.kappa));
  CHECK(same_bits(back.spec.nu, model.spec.nu));
  CHECK(same_bits(back.spec.tol, model.spec.tol));
  check_bits(back.spec.a, model.spec.a);
  check_bits(back.spec.b, model.spec.b);
  check_bits(back.spec.c, model.spec.c);

  check_bits(back.means, model.means);
  check_bits(back.w.w_bar, model.w.w_bar);
  check_bits(back.w.s_w, model.w.s_w);
  check_bits(back.v.v_bar, model.v.v_bar);
  REQUIRE(back.v.s_v.size() == model.v.s_v.size());
  for (std::size_t n = 0; n < model.v.s_v.size(); ++n)
    check_bits(back.v.s_v[n], model.v.s_v[n]);
  check_gamma(back.alpha, model.alpha);
  check_gamma(back.omega, model.omega);
  check_gamma(back.gamma, model.gamma);
  check_trace(back.free_energy_trace, model.free_energy_trace);
  CHECK(back.converged == model.converged);
  CHECK(back.iterations == model.iterations);

  // The latent trajectory is recomputed on demand, not stored.
  CHECK(back.latent.z_bar.size() == 0);
}

TEST_CASE("transform and predict through a reloaded model match the original")
{
  const TimeSeries series =
      oracle::mar1_series(oracle::stable_coeffs(3, 2, 13), 250, 13, 0.4);
  ModelSpec spec = ModelSpec::make(2, 2);
  spec.max_iter = 30;
  const FittedModel model = vb::fit(series, spec);

  TempFile file("model-transform");
  save_model(file.str(), model);
  const FittedModel back = load_model(file.str());

  check_bits(vb::transform(back, series), vb::transform(model, series));

  const Eigen::MatrixXd history = series.data.bottomRows(2);
  const vb::Prediction p0 = vb::predict_one_step(model, history);
  const vb::Prediction p1 = vb::predict_one_step(back, history);
  check_bits(p0.mean, p1.mean);
  check_bits(p0.cov, p1.cov);
}

TEST_CASE("extreme values round trip exactly")
{
  FittedModel m;
  m.spec = ModelSpec::make(1, 2).resolved(2);
  m.spec.seed = 0xFFFFFFFFFFFFFFFFull;
  m.means = Eigen::VectorXd(2);
  m.means << 6755399441055744.0, -0.0;

  Eigen::MatrixXd w(2, 2);
  w << M_PI, 1.0 / 3.0, 1e300, 5e-324;
  m.w.w_bar = w;
  m.w.s_w = Eigen::MatrixXd::Identity(2, 2) * 1e-300;
  m.w.s_w(0, 1) = -0.0;

  Eigen::MatrixXd v(2, 2);
  v << -1e-300, 0.1 + 0.2, std::nextafter(1.0, 2.0), -5e-324;
  m.v.v_bar = v;
  m.v.s_v = {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2)};

  m.alpha.shape = 1.51;
  m.alpha.rates = Eigen::VectorXd(2);
  m.alpha.rates << 5e-324, 1e308;
  m.omega.shape = 50.001;
  m.omega.rates = Eigen::VectorXd::Constant(2, 1e-3);
  m.gamma.shape = 2.01;
  m.gamma.rates = Eigen::VectorXd::Constant(2, 2.6);

  FreeEnergyReport fe;
  fe.neg_entropy_z = -0.0;
  fe.kl_phi = 5e-324;
  fe.neg_avg_loglik_y = 1e300;
  fe.neg_avg_loglik_z = -1e-300;
  fe.total = M_PI;
  m.free_energy_trace = {fe};
  m.converged = true;
  m.iterations = 3;

  TempFile file("model-extremes");
  save_model(file.str(), m);
  const FittedModel back = load_model(file.str());

  CHECK(back.spec.seed == m.spec.seed);
  check_bits(back.means, m.means);
  CHECK(std::signbit(back.means(1)));
  check_bits(back.w.w_bar, m.w.w_bar);
  check_bits(back.w.s_w, m.w.s_w);
  CHECK(std::signbit(back.w.s_w(0, 1)));
  check_bits(back.v.v_bar, m.v.v_bar);
  check_gamma(back.alpha, m.alpha);
  check_trace(back.free_energy_trace, m.free_energy_trace);
}

TEST_CASE("rewriting an unchanged model is byte identical")
{
  const FittedModel model = small_model();
  TempFile first("model-bytes-a");
  TempFile second("model-bytes-b");
  save_model(first.str(), model);
  save_model(second.str(), load_model(first.str()));
  CHECK(slurp(first.str()) == slurp(second.str()));
}

TEST_CASE("files from a newer format version are refused")
{
  TempFile file("model-newer");
  spit(file.str(), "{\"format\":\"lrmar-model-v2\"}\n");
  CHECK_THROWS_WITH_AS(load_model(file.str()),
                       doctest::Contains("newer than this build supports"),
                       ValidationError);
  spit(file.str(), "{\"format\":\"lrmar-wcca-v9\"}\n");
  CHECK_THROWS_WITH_AS(load_wcca_model(file.str()),
                       doctest::Contains("newer than this build supports"),
                       ValidationError);
}

TEST_CASE("foreign or missing format tags are rejected")
{
  TempFile file("model-foreign");
  spit(file.str(), "{\"format\":\"something-else\"}\n");
  CHECK_THROWS_WITH_AS(load_model(file.str()),
                       doctest::Contains("unsupported model format"),
                       ValidationError);
  spit(file.str(), "{\"rows\":3}\n");
  CHECK_THROWS_WITH_AS(load_model(file.str()),
                       doctest::Contains("unsupported model format"),
                       ValidationError);
}

TEST_CASE("the two formats do not load through each other's entry point")
{
  const FittedModel model = small_model();
  TempFile model_file("model-cross");
  save_model(model_file.str(), model);
  CHECK_THROWS_WITH_AS(load_wcca_model(model_file.str()),
                       doctest::Contains("unsupported model format 'lrmar-model-v1'"),
                       ValidationError);

  const TimeSeries series =
      oracle::mar1_series(oracle::stable_coeffs(2, 1, 17), 150, 17, 0.3);
  ModelSpec spec = ModelSpec::make(3, 2, 3);
  spec.max_iter = 25;
  const wcca::WccaModel two_view = wcca::fit_wcca(series, spec);
  TempFile wcca_file("wcca-cross");
  save_wcca_model(wcca_file.str(), two_view);
  CHECK_THROWS_WITH_AS(load_model(wcca_file.str()),
                       doctest::Contains("unsupported model format 'lrmar-wcca-v1'"),
                       ValidationError);
}

TEST_CASE("a two-view model survives save and load")
{
  const TimeSeries series =
      oracle::mar1_series(oracle::stable_coeffs(2, 1, 19), 200, 19, 0.4);
  ModelSpec spec = ModelSpec::make(3, 2, 3);
  spec.max_iter = 25;
  spec.seed = 5;
  const wcca::WccaModel model = wcca::fit_wcca(series, spec);

  TempFile file("wcca-roundtrip");
  save_wcca_model(file.str(), model);
  const wcca::WccaModel back = load_wcca_model(file.str());

  CHECK(back.Q == model.Q);
  CHECK(back.P == model.P);
  CHECK(back.L == model.L);
  CHECK(same_bits(back.iota, model.iota));
  CHECK(same_bits(back.nu, model.nu));
  check_bits(back.means, model.means);
  check_bits(back.means1, model.means1);
  check_bits(back.means2, model.means2);
  check_bits(back.post.latent.z_bar, model.post.latent.z_bar);
  check_bits(back.post.latent.s_z, model.post.latent.s_z);
  check_bits(back.post.f.v_bar, model.post.f.v_bar);
  REQUIRE(back.post.f.s_v.size() == model.post.f.s_v.size());
  for (std::size_t n = 0; n < model.post.f.s_v.size(); ++n)
    check_bits(back.post.f.s_v[n], model.post.f.s_v[n]);
  check_bits(back.post.g.v_bar, model.post.g.v_bar);
  REQUIRE(back.post.g.s_v.size() == model.post.g.s_v.size());
  for (std::size_t n = 0; n < model.post.g.s_v.size(); ++n)
    check_bits(back.post.g.s_v[n], model.post.g.s_v[n]);
  check_gamma(back.post.noise1, model.post.noise1);
  check_gamma(back.post.noise2, model.post.noise2);
  check_gamma(back.post.ard_f, model.post.ard_f);
  check_gamma(back.post.ard_g, model.post.ard_g);
  check_trace(back.free_energy_trace, model.free_energy_trace);
  CHECK(back.converged == model.converged);
  CHECK(back.iterations == model.iterations);

  TempFile second("wcca-bytes");
  save_wcca_model(second.str(), back);
  CHECK(slurp(file.str()) == slurp(second.str()));
}

TEST_CASE("broken files are reported with a reason")
{
  TempFile file("model-broken");
  spit(file.str(), "{\"format\":\"lrmar-model-v1\"}\n");
  CHECK_THROWS_WITH_AS(load_model(file.str()),
                       doctest::Contains("malformed model file"),
                       ValidationError);
  spit(file.str(), "not json at all");
  CHECK_THROWS_WITH_AS(load_model(file.str()),
                       doctest::Contains("invalid JSON"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(load_model("/nonexistent/nowhere.json"),
                       doctest::Contains("cannot open"),
                       ValidationError);
}

TEST_CASE("the format tag can be peeked without a full load")
{
  const FittedModel model = small_model();
  TempFile file("model-peek");
  save_model(file.str(), model);
  CHECK(model_format(file.str()) == "lrmar-model-v1");
  spit(file.str(), "{\"other\":1}\n");
  CHECK(model_format(file.str()) == "");
  spit(file.str(), "[1,2,3]\n");
  CHECK(model_format(file.str()) == "");
}
