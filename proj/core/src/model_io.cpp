#include "lrmar/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lrmar/csv.hpp"
#include "lrmar/errors.hpp"

namespace lrmar
{

namespace
{

using nlohmann::json;

constexpr const char* kModelFormat = "lrmar-model-v1";
constexpr const char* kWccaFormat = "lrmar-wcca-v1";

json matrix_to_json(const Eigen::MatrixXd& m)
{
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
  {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v)
{
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out.push_back(v(i));
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* name)
{
  if (!j.is_array())
    throw ValidationError(std::string(name) + " must be an array of arrays");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Eigen::MatrixXd m;
  for (Eigen::Index i = 0; i < rows; ++i)
  {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array())
      throw ValidationError(std::string(name) + " row " + std::to_string(i + 1)
                            + " is not an array");
    if (cols < 0)
    {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    }
    else if (static_cast<Eigen::Index>(row.size()) != cols)
    {
      throw ValidationError(std::string(name) + " rows have inconsistent lengths");
    }
    for (Eigen::Index c = 0; c < cols; ++c)
      m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  if (rows == 0)
    m.resize(0, 0);
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const char* name)
{
  if (!j.is_array())
    throw ValidationError(std::string(name) + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json gamma_to_json(const GammaFamily& g)
{
  return json{{"shape", g.shape}, {"rates", vector_to_json(g.rates)}};
}

GammaFamily gamma_from_json(const json& j, const char* name)
{
  GammaFamily g;
  g.shape = j.at("shape").get<double>();
  g.rates = vector_from_json(j.at("rates"), name);
  return g;
}

json spec_to_json(const ModelSpec& s)
{
  return json{
      {"P", s.P},
      {"Q", s.Q},
      {"L", s.L},
      {"iota", s.iota},
      {"a", vector_to_json(s.a)},
      {"kappa", s.kappa},
      {"b", matrix_to_json(s.b)},
      {"nu", s.nu},
      {"c", vector_to_json(s.c)},
      {"max_iter", s.max_iter},
      {"tol", s.tol},
      {"seed", s.seed},
  };
}

ModelSpec spec_from_json(const json& j)
{
  ModelSpec s;
  s.P = j.at("P").get<int>();
  s.Q = j.at("Q").get<int>();
  s.L = j.at("L").get<int>();
  s.iota = j.at("iota").get<double>();
  s.a = vector_from_json(j.at("a"), "a");
  s.kappa = j.at("kappa").get<double>();
  s.b = matrix_from_json(j.at("b"), "b");
  s.nu = j.at("nu").get<double>();
  s.c = vector_from_json(j.at("c"), "c");
  s.max_iter = j.at("max_iter").get<int>();
  s.tol = j.at("tol").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

json vpost_to_json(const VPosterior& v)
{
  json covs = json::array();
  for (const auto& sv : v.s_v)
    covs.push_back(matrix_to_json(sv));
  return json{{"v_bar", matrix_to_json(v.v_bar)}, {"s_v", std::move(covs)}};
}

VPosterior vpost_from_json(const json& j, const char* name)
{
  VPosterior v;
  v.v_bar = matrix_from_json(j.at("v_bar"), name);
  const json& covs = j.at("s_v");
  if (!covs.is_array())
    throw ValidationError(std::string(name) + ".s_v must be an array");
  for (const auto& entry : covs)
    v.s_v.push_back(matrix_from_json(entry, name));
  if (v.s_v.size() != static_cast<std::size_t>(v.v_bar.cols()))
    throw ValidationError(std::string(name) + ": expected one covariance per column");
  for (const auto& sv : v.s_v)
    if (sv.rows() != v.v_bar.rows() || sv.cols() != v.v_bar.rows())
      throw ValidationError(std::string(name) + ": covariance shape mismatch");
  return v;
}

json trace_to_json(const std::vector<FreeEnergyReport>& trace)
{
  json out = json::array();
  for (const FreeEnergyReport& fe : trace)
    out.push_back(json{{"neg_entropy_z", fe.neg_entropy_z},
                       {"kl_phi", fe.kl_phi},
                       {"neg_avg_loglik_y", fe.neg_avg_loglik_y},
                       {"neg_avg_loglik_z", fe.neg_avg_loglik_z},
                       {"total", fe.total}});
  return out;
}

std::vector<FreeEnergyReport> trace_from_json(const json& j)
{
  if (!j.is_array())
    throw ValidationError("free_energy_trace must be an array");
  std::vector<FreeEnergyReport> trace;
  trace.reserve(j.size());
  for (const json& entry : j)
  {
    FreeEnergyReport fe;
    fe.neg_entropy_z = entry.at("neg_entropy_z").get<double>();
    fe.kl_phi = entry.at("kl_phi").get<double>();
    fe.neg_avg_loglik_y = entry.at("neg_avg_loglik_y").get<double>();
    fe.neg_avg_loglik_z = entry.at("neg_avg_loglik_z").get<double>();
    fe.total = entry.at("total").get<double>();
    trace.push_back(fe);
  }
  return trace;
}

json load_json(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open '" + path + "' for reading");
  json j;
  try
  {
    in >> j;
  }
  catch (const json::exception& e)
  {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  return j;
}

void require_format(const json& j, const std::string& path, const char* want)
{
  const std::string got = j.is_object() && j.contains("format") && j["format"].is_string()
      ? j["format"].get<std::string>()
      : "";
  if (got == want)
    return;
  // A later major version of our own family fails with a clearer message
  // than a foreign file does.
  const std::string family = std::string(want).substr(0, std::string(want).rfind('v') + 1);
  if (got.rfind(family, 0) == 0)
    throw ValidationError(path + ": model format '" + got
                          + "' is newer than this build supports ('" + want + "')");
  throw ValidationError(path + ": unsupported model format '" + got + "', expected '"
                        + want + "'");
}

} // namespace

void save_model(const std::string& path, const FittedModel& model)
{
  json j{
      {"format", kModelFormat},
      {"spec", spec_to_json(model.spec)},
      {"means", vector_to_json(model.means)},
      {"w_bar", matrix_to_json(model.w.w_bar)},
      {"s_w", matrix_to_json(model.w.s_w)},
      {"v", vpost_to_json(model.v)},
      {"alpha", gamma_to_json(model.alpha)},
      {"omega", gamma_to_json(model.omega)},
      {"gamma", gamma_to_json(model.gamma)},
      {"free_energy_trace", trace_to_json(model.free_energy_trace)},
      {"converged", model.converged},
      {"iterations", model.iterations},
  };
  atomic_write_text(path, j.dump() + "\n");
}

FittedModel load_model(const std::string& path)
{
  const json j = load_json(path);
  require_format(j, path, kModelFormat);
  try
  {
    FittedModel m;
    m.spec = spec_from_json(j.at("spec"));
    m.means = vector_from_json(j.at("means"), "means");
    m.w.w_bar = matrix_from_json(j.at("w_bar"), "w_bar");
    m.w.s_w = matrix_from_json(j.at("s_w"), "s_w");
    m.v = vpost_from_json(j.at("v"), "v");
    m.alpha = gamma_from_json(j.at("alpha"), "alpha");
    m.omega = gamma_from_json(j.at("omega"), "omega");
    m.gamma = gamma_from_json(j.at("gamma"), "gamma");
    m.free_energy_trace = trace_from_json(j.at("free_energy_trace"));
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<int>();
    return m;
  }
  catch (const json::exception& e)
  {
    throw ValidationError(path + ": malformed model file: " + e.what());
  }
}

void save_wcca_model(const std::string& path, const wcca::WccaModel& model)
{
  json j{
      {"format", kWccaFormat},
      {"Q", model.Q},
      {"P", model.P},
      {"L", model.L},
      {"iota", model.iota},
      {"nu", model.nu},
      {"means", vector_to_json(model.means)},
      {"means1", vector_to_json(model.means1)},
      {"means2", vector_to_json(model.means2)},
      {"z_bar", matrix_to_json(model.post.latent.z_bar)},
      {"s_z", matrix_to_json(model.post.latent.s_z)},
      {"f", vpost_to_json(model.post.f)},
      {"g", vpost_to_json(model.post.g)},
      {"noise1", gamma_to_json(model.post.noise1)},
      {"noise2", gamma_to_json(model.post.noise2)},
      {"ard_f", gamma_to_json(model.post.ard_f)},
      {"ard_g", gamma_to_json(model.post.ard_g)},
      {"free_energy_trace", trace_to_json(model.free_energy_trace)},
      {"converged", model.converged},
      {"iterations", model.iterations},
  };
  atomic_write_text(path, j.dump() + "\n");
}

wcca::WccaModel load_wcca_model(const std::string& path)
{
  const json j = load_json(path);
  require_format(j, path, kWccaFormat);
  try
  {
    wcca::WccaModel m;
    m.Q = j.at("Q").get<int>();
    m.P = j.at("P").get<int>();
    m.L = j.at("L").get<int>();
    m.iota = j.at("iota").get<double>();
    m.nu = j.at("nu").get<double>();
    m.means = vector_from_json(j.at("means"), "means");
    m.means1 = vector_from_json(j.at("means1"), "means1");
    m.means2 = vector_from_json(j.at("means2"), "means2");
    m.post.latent.z_bar = matrix_from_json(j.at("z_bar"), "z_bar");
    m.post.latent.s_z = matrix_from_json(j.at("s_z"), "s_z");
    m.post.f = vpost_from_json(j.at("f"), "f");
    m.post.g = vpost_from_json(j.at("g"), "g");
    m.post.noise1 = gamma_from_json(j.at("noise1"), "noise1");
    m.post.noise2 = gamma_from_json(j.at("noise2"), "noise2");
    m.post.ard_f = gamma_from_json(j.at("ard_f"), "ard_f");
    m.post.ard_g = gamma_from_json(j.at("ard_g"), "ard_g");
    m.free_energy_trace = trace_from_json(j.at("free_energy_trace"));
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<int>();
    return m;
  }
  catch (const json::exception& e)
  {
    throw ValidationError(path + ": malformed model file: " + e.what());
  }
}

std::string model_format(const std::string& path)
{
  const json j = load_json(path);
  if (j.is_object() && j.contains("format") && j["format"].is_string())
    return j["format"].get<std::string>();
  return "";
}

} // namespace lrmar
