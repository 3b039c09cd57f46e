#include "lrmar/wcca.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lrmar/errors.hpp"
#include "lrmar/lagged_design.hpp"
#include "linalg.hpp"

namespace lrmar
{
namespace wcca
{

namespace
{

using detail::gamma_kl;
using detail::kLog2Pi;

void check_view(const Eigen::MatrixXd& x, const char* name)
{
  if (x.rows() < 2)
    throw ValidationError(std::string(name) + " needs at least 2 rows");
  if (x.cols() < 1)
    throw ValidationError(std::string(name) + " needs at least 1 column");
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (!std::isfinite(x(i, j)))
        throw ValidationError(std::string(name) + ": non-finite value at row "
                              + std::to_string(i + 1) + ", column "
                              + std::to_string(j + 1));
}

LatentPosterior update_z(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                         const VPosterior& f, const VPosterior& g,
                         const GammaFamily& om1, const GammaFamily& om2)
{
  const Eigen::Index q = f.v_bar.rows();
  const Eigen::VectorXd o1 = om1.means();
  const Eigen::VectorXd o2 = om2.means();

  Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(q, q);
  prec.noalias() += f.v_bar * o1.asDiagonal() * f.v_bar.transpose();
  for (Eigen::Index n = 0; n < x1.cols(); ++n)
    prec.noalias() += o1(n) * f.s_v[static_cast<std::size_t>(n)];
  prec.noalias() += g.v_bar * o2.asDiagonal() * g.v_bar.transpose();
  for (Eigen::Index n = 0; n < x2.cols(); ++n)
    prec.noalias() += o2(n) * g.s_v[static_cast<std::size_t>(n)];

  LatentPosterior out;
  out.s_z = detail::spd_inverse(prec, "latent covariance");
  Eigen::MatrixXd proj = x1 * (o1.asDiagonal() * f.v_bar.transpose());
  proj.noalias() += x2 * (o2.asDiagonal() * g.v_bar.transpose());
  out.z_bar.noalias() = proj * out.s_z;
  return out;
}

// One view's loading columns given the shared trajectory; same conjugate
// form for both views.
VPosterior update_loadings(const Eigen::MatrixXd& x, const LatentPosterior& latent,
                           const GammaFamily& noise, const GammaFamily& ard,
                           const Eigen::MatrixXd& ezz)
{
  const Eigen::Index q = ezz.rows();
  const Eigen::Index d = x.cols();
  const Eigen::VectorXd oi = noise.means();
  const Eigen::VectorXd rel = ard.means();
  const Eigen::MatrixXd ztx = latent.z_bar.transpose() * x;

  VPosterior out;
  out.v_bar.resize(q, d);
  out.s_v.resize(static_cast<std::size_t>(d));
  for (Eigen::Index n = 0; n < d; ++n)
  {
    Eigen::MatrixXd prec = oi(n) * ezz;
    prec.diagonal() += rel;
    Eigen::MatrixXd& sv = out.s_v[static_cast<std::size_t>(n)];
    sv = detail::spd_inverse(prec, "loading covariance");
    out.v_bar.col(n).noalias() = oi(n) * (sv * ztx.col(n));
  }
  return out;
}

GammaFamily update_view_noise(const Eigen::MatrixXd& x, const Eigen::VectorXd& x_sq,
                              const LatentPosterior& latent, const VPosterior& load,
                              double iota, const Eigen::VectorXd& a,
                              const Eigen::MatrixXd& ezz)
{
  const Eigen::Index d = x.cols();
  const double m = static_cast<double>(x.rows());
  const Eigen::MatrixXd ztx = latent.z_bar.transpose() * x;

  GammaFamily out;
  out.shape = iota + 0.5 * m;
  out.rates.resize(d);
  for (Eigen::Index n = 0; n < d; ++n)
  {
    const auto vn = load.v_bar.col(n);
    const Eigen::MatrixXd& sv = load.s_v[static_cast<std::size_t>(n)];
    const double resid = x_sq(n) - 2.0 * ztx.col(n).dot(vn) + vn.dot(ezz * vn)
                         + sv.cwiseProduct(ezz).sum();
    out.rates(n) = a(n) + 0.5 * resid;
  }
  return out;
}

GammaFamily update_ard(const VPosterior& load, double nu, const Eigen::VectorXd& c)
{
  const Eigen::Index q = load.v_bar.rows();
  const double d = static_cast<double>(load.v_bar.cols());

  GammaFamily out;
  out.shape = nu + 0.5 * d;
  out.rates.resize(q);
  for (Eigen::Index j = 0; j < q; ++j)
  {
    double v2 = load.v_bar.row(j).squaredNorm();
    for (Eigen::Index n = 0; n < load.v_bar.cols(); ++n)
      v2 += load.s_v[static_cast<std::size_t>(n)](j, j);
    out.rates(j) = c(j) + 0.5 * v2;
  }
  return out;
}

void check_term(double value, const char* name)
{
  if (!std::isfinite(value))
    throw NumericalError(std::string("free energy term ") + name + " is not finite");
}

// Expected data misfit plus entropy-against-prior pieces for one view.
double view_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& x_sq,
                   const LatentPosterior& latent, const VPosterior& load,
                   const GammaFamily& noise, const Eigen::MatrixXd& ezz)
{
  const Eigen::Index d = x.cols();
  const double m = static_cast<double>(x.rows());
  const Eigen::VectorXd om_mean = noise.means();
  const Eigen::VectorXd om_log = noise.log_means();
  const Eigen::MatrixXd resid = x - latent.z_bar * load.v_bar;

  double quad = 0.0;
  for (Eigen::Index n = 0; n < d; ++n)
  {
    const auto vn = load.v_bar.col(n);
    const Eigen::MatrixXd& sv = load.s_v[static_cast<std::size_t>(n)];
    quad += om_mean(n) * (resid.col(n).squaredNorm()
                          + m * vn.dot(latent.s_z * vn)
                          + sv.cwiseProduct(ezz).sum());
  }
  return 0.5 * m * static_cast<double>(d) * kLog2Pi - 0.5 * m * om_log.sum()
         + 0.5 * quad;
}

double view_loading_kl(const VPosterior& load, const GammaFamily& ard)
{
  const Eigen::Index q = load.v_bar.rows();
  const Eigen::Index d = load.v_bar.cols();
  const double qd = static_cast<double>(q);
  const Eigen::VectorXd rel_mean = ard.means();
  const Eigen::VectorXd rel_log = ard.log_means();

  double kl = -0.5 * static_cast<double>(d) * qd
              - 0.5 * static_cast<double>(d) * rel_log.sum();
  for (Eigen::Index n = 0; n < d; ++n)
    kl += -0.5 * detail::logdet_spd(load.s_v[static_cast<std::size_t>(n)],
                                    "loading covariance");
  for (Eigen::Index j = 0; j < q; ++j)
  {
    double v2 = load.v_bar.row(j).squaredNorm();
    for (Eigen::Index n = 0; n < d; ++n)
      v2 += load.s_v[static_cast<std::size_t>(n)](j, j);
    kl += 0.5 * rel_mean(j) * v2;
  }
  return kl;
}

struct Priors
{
  double iota;
  double nu;
  Eigen::VectorXd a1;  // noise rates, one per view column
  Eigen::VectorXd a2;
  Eigen::VectorXd c;   // relevance rates, Q entries
};

FreeEnergyReport free_energy_views(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                                   const Eigen::VectorXd& x1_sq,
                                   const Eigen::VectorXd& x2_sq,
                                   const WccaPosterior& post, const Priors& pri,
                                   const Eigen::MatrixXd& ezz)
{
  const double m = static_cast<double>(x1.rows());
  const Eigen::Index q = post.latent.s_z.rows();
  const double qd = static_cast<double>(q);

  FreeEnergyReport fe;
  const double ld_sz = detail::logdet_spd(post.latent.s_z, "latent covariance");
  fe.neg_entropy_z = -0.5 * m * (qd * kLog2Pi + qd + ld_sz);
  check_term(fe.neg_entropy_z, "neg_entropy_z");

  fe.neg_avg_loglik_z = 0.5 * m * qd * kLog2Pi
                        + 0.5 * (post.latent.z_bar.squaredNorm()
                                 + m * post.latent.s_z.trace());
  check_term(fe.neg_avg_loglik_z, "neg_avg_loglik_z");

  fe.neg_avg_loglik_y = view_loglik(x1, x1_sq, post.latent, post.f, post.noise1, ezz)
                        + view_loglik(x2, x2_sq, post.latent, post.g, post.noise2, ezz);
  check_term(fe.neg_avg_loglik_y, "neg_avg_loglik_y");

  double kl = view_loading_kl(post.f, post.ard_f) + view_loading_kl(post.g, post.ard_g);
  for (Eigen::Index n = 0; n < x1.cols(); ++n)
    kl += gamma_kl(post.noise1.shape, post.noise1.rates(n), pri.iota, pri.a1(n));
  for (Eigen::Index n = 0; n < x2.cols(); ++n)
    kl += gamma_kl(post.noise2.shape, post.noise2.rates(n), pri.iota, pri.a2(n));
  for (Eigen::Index j = 0; j < q; ++j)
  {
    kl += gamma_kl(post.ard_f.shape, post.ard_f.rates(j), pri.nu, pri.c(j));
    kl += gamma_kl(post.ard_g.shape, post.ard_g.rates(j), pri.nu, pri.c(j));
  }
  fe.kl_phi = kl;
  check_term(fe.kl_phi, "kl_phi");

  fe.total = fe.neg_entropy_z + fe.kl_phi + fe.neg_avg_loglik_y + fe.neg_avg_loglik_z;
  return fe;
}

WccaPosterior init_views(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                         const ModelSpec& spec, const Priors& pri)
{
  const Eigen::Index m = x1.rows();
  const Eigen::Index d1 = x1.cols();
  const Eigen::Index d2 = x2.cols();
  const Eigen::Index q = spec.Q;

  Eigen::MatrixXd concat(m, d1 + d2);
  concat << x1, x2;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(concat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sing = svd.singularValues();
  const double rank_tol = sing.size() > 0
      ? sing(0) * static_cast<double>(std::max(m, d1 + d2))
            * std::numeric_limits<double>::epsilon()
      : 0.0;
  const bool full_rank = sing.size() >= q && sing(q - 1) > rank_tol;

  WccaPosterior post;
  post.f.v_bar.resize(q, d1);
  post.g.v_bar.resize(q, d2);
  if (full_rank)
  {
    Eigen::MatrixXd vq = svd.matrixV().leftCols(q);
    detail::fix_signs(vq);
    const double root_m = std::sqrt(static_cast<double>(m));
    for (Eigen::Index j = 0; j < q; ++j)
    {
      const Eigen::VectorXd scaled = (sing(j) / root_m) * vq.col(j);
      post.f.v_bar.row(j) = scaled.head(d1).transpose();
      post.g.v_bar.row(j) = scaled.tail(d2).transpose();
    }
    post.latent.z_bar.noalias() = x1 * post.f.v_bar.transpose();
    post.latent.z_bar.noalias() += x2 * post.g.v_bar.transpose();
  }
  else
  {
    std::cerr << "warning: stacked views have numerical rank below Q = " << q
              << "; falling back to a seeded random start" << std::endl;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    post.latent.z_bar.resize(m, q);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < q; ++j)
        post.latent.z_bar(i, j) = gauss(rng);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q));
    for (Eigen::Index j = 0; j < q; ++j)
    {
      for (Eigen::Index n = 0; n < d1; ++n)
        post.f.v_bar(j, n) = scale * gauss(rng);
      for (Eigen::Index n = 0; n < d2; ++n)
        post.g.v_bar(j, n) = scale * gauss(rng);
    }
  }

  post.latent.s_z = 1e-2 * Eigen::MatrixXd::Identity(q, q);
  post.f.s_v.assign(static_cast<std::size_t>(d1), 1e-2 * Eigen::MatrixXd::Identity(q, q));
  post.g.s_v.assign(static_cast<std::size_t>(d2), 1e-2 * Eigen::MatrixXd::Identity(q, q));
  post.noise1.shape = pri.iota;
  post.noise1.rates = pri.a1;
  post.noise2.shape = pri.iota;
  post.noise2.rates = pri.a2;
  post.ard_f.shape = pri.nu;
  post.ard_f.rates = pri.c;
  post.ard_g.shape = pri.nu;
  post.ard_g.rates = pri.c;
  return post;
}

// Orders components by decreasing total relevance (sum of the two
// posterior mean variances of the loading rows) and flips signs so the
// dominant loading entry of each component is positive.
void identify_components(WccaPosterior& post)
{
  const Eigen::Index q = post.f.v_bar.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(q));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::VectorXd relevance = post.ard_f.rates / post.ard_f.shape
                              + post.ard_g.rates / post.ard_g.shape;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index lhs, Eigen::Index rhs)
                   { return relevance(lhs) > relevance(rhs); });

  Eigen::VectorXd flip(q);
  Eigen::MatrixXd joint(q, post.f.v_bar.cols() + post.g.v_bar.cols());
  joint << post.f.v_bar, post.g.v_bar;
  for (Eigen::Index j = 0; j < q; ++j)
  {
    Eigen::Index at = 0;
    joint.row(order[static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff(&at);
    flip(j) = joint(order[static_cast<std::size_t>(j)], at) < 0.0 ? -1.0 : 1.0;
  }

  // Combined permutation + sign change as a linear map on the component
  // axis: row j of the new loadings is flip(j) times old row order[j].
  auto remap_rows = [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd
  {
    Eigen::MatrixXd out(v.rows(), v.cols());
    for (Eigen::Index j = 0; j < q; ++j)
      out.row(j) = flip(j) * v.row(order[static_cast<std::size_t>(j)]);
    return out;
  };
  auto remap_sym = [&](const Eigen::MatrixXd& s) -> Eigen::MatrixXd
  {
    Eigen::MatrixXd out(q, q);
    for (Eigen::Index j = 0; j < q; ++j)
      for (Eigen::Index k = 0; k < q; ++k)
        out(j, k) = flip(j) * flip(k)
                    * s(order[static_cast<std::size_t>(j)],
                        order[static_cast<std::size_t>(k)]);
    return out;
  };
  auto remap_rates = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd
  {
    Eigen::VectorXd out(q);
    for (Eigen::Index j = 0; j < q; ++j)
      out(j) = r(order[static_cast<std::size_t>(j)]);
    return out;
  };

  post.f.v_bar = remap_rows(post.f.v_bar);
  post.g.v_bar = remap_rows(post.g.v_bar);
  for (auto& sv : post.f.s_v)
    sv = remap_sym(sv);
  for (auto& sv : post.g.s_v)
    sv = remap_sym(sv);
  post.latent.z_bar = (remap_rows(post.latent.z_bar.transpose())).transpose();
  post.latent.s_z = remap_sym(post.latent.s_z);
  post.ard_f.rates = remap_rates(post.ard_f.rates);
  post.ard_g.rates = remap_rates(post.ard_g.rates);
}

} // namespace

WccaModel fit_wcca_views(const Eigen::MatrixXd& view1, const Eigen::MatrixXd& view2,
                         const ModelSpec& spec)
{
  check_view(view1, "view 1");
  check_view(view2, "view 2");
  if (view1.rows() != view2.rows())
    throw DimensionError("views disagree on row count: " + std::to_string(view1.rows())
                         + " vs " + std::to_string(view2.rows()));
  const Eigen::Index d1 = view1.cols();
  const Eigen::Index d2 = view2.cols();
  if (spec.Q < 1)
    throw ValidationError("Q must be at least 1, got " + std::to_string(spec.Q));
  if (spec.Q > std::min(d1, d2))
    throw ValidationError("Q = " + std::to_string(spec.Q)
                          + " exceeds the smaller view width "
                          + std::to_string(std::min(d1, d2)));
  if (spec.max_iter < 1)
    throw ValidationError("max_iter must be at least 1");
  if (!std::isfinite(spec.tol) || spec.tol <= 0.0)
    throw ValidationError("tol must be positive and finite");
  if (!std::isfinite(spec.iota) || spec.iota <= 0.0)
    throw ValidationError("iota must be positive and finite");
  if (!std::isfinite(spec.nu) || spec.nu <= 0.0)
    throw ValidationError("nu must be positive and finite");

  Priors pri;
  pri.iota = spec.iota;
  pri.nu = spec.nu;
  pri.a1 = Eigen::VectorXd::Constant(d1, ModelSpec::kDefaultRate);
  pri.a2 = Eigen::VectorXd::Constant(d2, ModelSpec::kDefaultRate);
  if (spec.c.size() == 0)
    pri.c = Eigen::VectorXd::Constant(spec.Q, ModelSpec::kDefaultRate);
  else if (spec.c.size() == spec.Q)
    pri.c = spec.c;
  else
    throw DimensionError("component rate vector c has length "
                         + std::to_string(spec.c.size()) + ", expected Q = "
                         + std::to_string(spec.Q));

  WccaModel model;
  model.Q = spec.Q;
  model.iota = spec.iota;
  model.nu = spec.nu;
  model.means1 = view1.colwise().mean();
  model.means2 = view2.colwise().mean();
  const Eigen::MatrixXd x1 = view1.rowwise() - model.means1.transpose();
  const Eigen::MatrixXd x2 = view2.rowwise() - model.means2.transpose();
  const Eigen::VectorXd x1_sq = x1.colwise().squaredNorm();
  const Eigen::VectorXd x2_sq = x2.colwise().squaredNorm();

  WccaPosterior post = init_views(x1, x2, spec, pri);

  Eigen::MatrixXd ezz;
  double prev = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iter = 0;
  while (iter < spec.max_iter)
  {
    ++iter;
    post.latent = update_z(x1, x2, post.f, post.g, post.noise1, post.noise2);
    ezz = expected_ztz(post.latent);
    post.f = update_loadings(x1, post.latent, post.noise1, post.ard_f, ezz);
    post.g = update_loadings(x2, post.latent, post.noise2, post.ard_g, ezz);
    post.noise1 = update_view_noise(x1, x1_sq, post.latent, post.f, pri.iota, pri.a1, ezz);
    post.noise2 = update_view_noise(x2, x2_sq, post.latent, post.g, pri.iota, pri.a2, ezz);
    post.ard_f = update_ard(post.f, pri.nu, pri.c);
    post.ard_g = update_ard(post.g, pri.nu, pri.c);

    FreeEnergyReport fe;
    try
    {
      fe = free_energy_views(x1, x2, x1_sq, x2_sq, post, pri, ezz);
    }
    catch (const NumericalError& e)
    {
      throw NumericalError(std::string(e.what()) + " at sweep " + std::to_string(iter));
    }
    model.free_energy_trace.push_back(fe);
    if (!std::isnan(prev))
    {
      if (fe.total > prev + 1e-9 * std::abs(prev))
        throw NumericalError("free energy rose from " + std::to_string(prev) + " to "
                             + std::to_string(fe.total) + " at sweep "
                             + std::to_string(iter));
      if (std::abs(prev - fe.total) < spec.tol * std::abs(fe.total))
        converged = true;
    }
    prev = fe.total;
    if (converged)
      break;
  }

  post.latent = update_z(x1, x2, post.f, post.g, post.noise1, post.noise2);
  identify_components(post);

  model.post = std::move(post);
  model.converged = converged;
  model.iterations = iter;
  return model;
}

WccaModel fit_wcca(const TimeSeries& series, const ModelSpec& spec)
{
  validate(series);
  spec.validate(series.channels(), series.length());
  if (spec.P != spec.L)
    throw ValidationError("window widths must match: P = " + std::to_string(spec.P)
                          + " vs L = " + std::to_string(spec.L));
  if (static_cast<Eigen::Index>(spec.Q) > series.channels() * spec.P)
    throw ValidationError("Q = " + std::to_string(spec.Q)
                          + " exceeds the past window width N*P = "
                          + std::to_string(series.channels() * spec.P));

  const TimeSeries centered = center(series);
  const LaggedDesign design = embed_lags(centered, spec.P, spec.L);
  WccaModel model = fit_wcca_views(design.y_minus, design.y_plus, spec);
  model.P = spec.P;
  model.L = spec.L;
  model.means = centered.means;
  return model;
}

} // namespace wcca
} // namespace lrmar
