#include "lrmar/vb_engine.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lrmar/errors.hpp"
#include "linalg.hpp"

namespace lrmar
{
namespace vb
{

namespace
{

using detail::gamma_kl;
using detail::kLog2Pi;

// Products of the design that every sweep reuses.
struct DesignStats
{
  Eigen::MatrixXd gram;   // y_minus' y_minus
  Eigen::VectorXd yp_sq;  // squared column norms of y_plus
};

DesignStats make_stats(const LaggedDesign& d)
{
  DesignStats s;
  s.gram.noalias() = d.y_minus.transpose() * d.y_minus;
  s.yp_sq = d.y_plus.colwise().squaredNorm();
  return s;
}

Eigen::VectorXd rates_or_default(const Eigen::VectorXd& r, Eigen::Index size,
                                 const char* name)
{
  if (r.size() == 0)
    return Eigen::VectorXd::Constant(size, ModelSpec::kDefaultRate);
  if (r.size() != size)
    throw DimensionError(std::string(name) + " rate vector has length "
                         + std::to_string(r.size()) + ", expected "
                         + std::to_string(size));
  return r;
}

// Prior rates for the input weight scales, flattened to match the columns
// of y_minus (lag-major, channel minor).
Eigen::VectorXd flatten_b(const ModelSpec& spec, Eigen::Index d_minus)
{
  if (spec.b.size() == 0)
    return Eigen::VectorXd::Constant(d_minus, ModelSpec::kDefaultRate);
  const Eigen::Index n = spec.b.cols();
  if (spec.b.rows() * n != d_minus)
    throw DimensionError("weight rate matrix b is " + std::to_string(spec.b.rows())
                         + "x" + std::to_string(n) + " but the design has "
                         + std::to_string(d_minus) + " input columns");
  Eigen::VectorXd out(d_minus);
  for (Eigen::Index lag = 0; lag < spec.b.rows(); ++lag)
    for (Eigen::Index ch = 0; ch < n; ++ch)
      out(lag * n + ch) = spec.b(lag, ch);
  return out;
}

LatentPosterior update_latent_impl(const LaggedDesign& d, const VPosterior& v,
                                   const GammaFamily& omega,
                                   const Eigen::MatrixXd& ym_w)
{
  const Eigen::Index q = v.v_bar.rows();
  const Eigen::Index dp = v.v_bar.cols();
  const Eigen::VectorXd oi = omega.means();

  Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(q, q);
  prec.noalias() += v.v_bar * oi.asDiagonal() * v.v_bar.transpose();
  for (Eigen::Index n = 0; n < dp; ++n)
    prec.noalias() += oi(n) * v.s_v[static_cast<std::size_t>(n)];

  LatentPosterior out;
  out.s_z = detail::spd_inverse(prec, "latent covariance");
  Eigen::MatrixXd proj = ym_w;
  proj.noalias() += d.y_plus * (oi.asDiagonal() * v.v_bar.transpose());
  out.z_bar.noalias() = proj * out.s_z;
  return out;
}

WPosterior update_w_impl(const LaggedDesign& d, const DesignStats& stats,
                         const LatentPosterior& latent, const GammaFamily& alpha)
{
  Eigen::MatrixXd prec = stats.gram;
  prec.diagonal() += alpha.means();

  WPosterior out;
  out.s_w = detail::spd_inverse(prec, "weight covariance");
  out.w_bar.noalias() = out.s_w * (d.y_minus.transpose() * latent.z_bar);
  return out;
}

VPosterior update_v_impl(const LatentPosterior& latent, const GammaFamily& omega,
                         const GammaFamily& gamma, const Eigen::MatrixXd& ezz,
                         const Eigen::MatrixXd& zty)
{
  const Eigen::Index q = ezz.rows();
  const Eigen::Index dp = zty.cols();
  const Eigen::VectorXd oi = omega.means();
  const Eigen::VectorXd gm = gamma.means();

  VPosterior out;
  out.v_bar.resize(q, dp);
  out.s_v.resize(static_cast<std::size_t>(dp));
  for (Eigen::Index n = 0; n < dp; ++n)
  {
    Eigen::MatrixXd prec = oi(n) * ezz;
    prec.diagonal() += gm;
    Eigen::MatrixXd& sv = out.s_v[static_cast<std::size_t>(n)];
    sv = detail::spd_inverse(prec, "loading covariance");
    out.v_bar.col(n).noalias() = oi(n) * (sv * zty.col(n));
  }
  return out;
}

GammaFamily update_omega_impl(const DesignStats& stats, const LatentPosterior& latent,
                              const VPosterior& v, const ModelSpec& spec,
                              const Eigen::MatrixXd& ezz, const Eigen::MatrixXd& zty)
{
  const Eigen::Index dp = v.v_bar.cols();
  const double m = static_cast<double>(latent.z_bar.rows());
  const Eigen::VectorXd a = rates_or_default(spec.a, dp, "noise");

  GammaFamily out;
  out.shape = spec.iota + 0.5 * m;
  out.rates.resize(dp);
  for (Eigen::Index n = 0; n < dp; ++n)
  {
    const auto vn = v.v_bar.col(n);
    const Eigen::MatrixXd& sv = v.s_v[static_cast<std::size_t>(n)];
    const double resid = stats.yp_sq(n) - 2.0 * zty.col(n).dot(vn)
                         + vn.dot(ezz * vn) + sv.cwiseProduct(ezz).sum();
    out.rates(n) = a(n) + 0.5 * resid;
  }
  return out;
}

void check_term(double value, const char* name)
{
  if (!std::isfinite(value))
    throw NumericalError(std::string("free energy term ") + name + " is not finite");
}

FreeEnergyReport free_energy_impl(const LaggedDesign& d, const DesignStats& stats,
                                  const Posteriors& post, const ModelSpec& spec,
                                  const Eigen::MatrixXd& ezz,
                                  const Eigen::MatrixXd& ym_w)
{
  const double m = static_cast<double>(d.M);
  const Eigen::Index q = post.latent.s_z.rows();
  const Eigen::Index dm = post.w.w_bar.rows();
  const Eigen::Index dp = post.v.v_bar.cols();
  const double qd = static_cast<double>(q);

  const Eigen::VectorXd om_mean = post.omega.means();
  const Eigen::VectorXd om_log = post.omega.log_means();
  const Eigen::VectorXd al_mean = post.alpha.means();
  const Eigen::VectorXd al_log = post.alpha.log_means();
  const Eigen::VectorXd ga_mean = post.gamma.means();
  const Eigen::VectorXd ga_log = post.gamma.log_means();

  FreeEnergyReport fe;

  const double ld_sz = detail::logdet_spd(post.latent.s_z, "latent covariance");
  fe.neg_entropy_z = -0.5 * m * (qd * kLog2Pi + qd + ld_sz);
  check_term(fe.neg_entropy_z, "neg_entropy_z");

  const double ld_sw = detail::logdet_spd(post.w.s_w, "weight covariance");
  fe.neg_avg_loglik_z = 0.5 * m * qd * kLog2Pi
                        + 0.5 * (post.latent.z_bar - ym_w).squaredNorm()
                        + 0.5 * m * post.latent.s_z.trace()
                        + 0.5 * qd * post.w.s_w.cwiseProduct(stats.gram).sum();
  check_term(fe.neg_avg_loglik_z, "neg_avg_loglik_z");

  // Output likelihood: per-channel expected squared residual under the
  // full posterior, weighted by the posterior mean precisions.
  const Eigen::MatrixXd resid = d.y_plus - post.latent.z_bar * post.v.v_bar;
  double y_quad = 0.0;
  std::vector<double> ld_sv(static_cast<std::size_t>(dp));
  for (Eigen::Index n = 0; n < dp; ++n)
  {
    const auto vn = post.v.v_bar.col(n);
    const Eigen::MatrixXd& sv = post.v.s_v[static_cast<std::size_t>(n)];
    ld_sv[static_cast<std::size_t>(n)] = detail::logdet_spd(sv, "loading covariance");
    const double expected_sq = resid.col(n).squaredNorm()
                               + m * vn.dot(post.latent.s_z * vn)
                               + sv.cwiseProduct(ezz).sum();
    y_quad += om_mean(n) * expected_sq;
  }
  fe.neg_avg_loglik_y = 0.5 * m * static_cast<double>(dp) * kLog2Pi
                        - 0.5 * m * om_log.sum() + 0.5 * y_quad;
  check_term(fe.neg_avg_loglik_y, "neg_avg_loglik_y");

  // KL of the parameter blocks against their priors. The Gaussian blocks
  // are taken jointly with their Gamma scales, so the digamma means of the
  // scales appear here rather than a plug-in log determinant.
  double kl = -0.5 * qd * (static_cast<double>(dm) + ld_sw) - 0.5 * qd * al_log.sum();
  for (Eigen::Index r = 0; r < dm; ++r)
    kl += 0.5 * al_mean(r)
          * (post.w.w_bar.row(r).squaredNorm() + qd * post.w.s_w(r, r));

  kl += -0.5 * static_cast<double>(dp) * qd - 0.5 * static_cast<double>(dp) * ga_log.sum();
  for (Eigen::Index n = 0; n < dp; ++n)
    kl += -0.5 * ld_sv[static_cast<std::size_t>(n)];
  for (Eigen::Index j = 0; j < q; ++j)
  {
    double v2 = post.v.v_bar.row(j).squaredNorm();
    for (Eigen::Index n = 0; n < dp; ++n)
      v2 += post.v.s_v[static_cast<std::size_t>(n)](j, j);
    kl += 0.5 * ga_mean(j) * v2;
  }

  const Eigen::VectorXd b_flat = flatten_b(spec, dm);
  for (Eigen::Index r = 0; r < dm; ++r)
    kl += gamma_kl(post.alpha.shape, post.alpha.rates(r), spec.kappa, b_flat(r));
  const Eigen::VectorXd a = rates_or_default(spec.a, dp, "noise");
  for (Eigen::Index n = 0; n < dp; ++n)
    kl += gamma_kl(post.omega.shape, post.omega.rates(n), spec.iota, a(n));
  const Eigen::VectorXd c = rates_or_default(spec.c, q, "component");
  for (Eigen::Index j = 0; j < q; ++j)
    kl += gamma_kl(post.gamma.shape, post.gamma.rates(j), spec.nu, c(j));
  fe.kl_phi = kl;
  check_term(fe.kl_phi, "kl_phi");

  fe.total = fe.neg_entropy_z + fe.kl_phi + fe.neg_avg_loglik_y + fe.neg_avg_loglik_z;
  return fe;
}

} // namespace

InitState init_posterior(const LaggedDesign& d, const ModelSpec& spec)
{
  const ModelSpec s = spec.resolved(d.N);
  const Eigen::Index q = s.Q;
  const Eigen::Index dp = d.N * d.L;
  const Eigen::Index dm = d.N * d.P;
  const double m = static_cast<double>(d.M);

  InitState st;
  Eigen::MatrixXd v_bar(q, dp);
  Eigen::MatrixXd z_bar;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(d.y_plus, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sing = svd.singularValues();
  const double rank_tol = sing.size() > 0
      ? sing(0) * static_cast<double>(std::max(d.M, dp))
            * std::numeric_limits<double>::epsilon()
      : 0.0;
  const bool full_rank = sing.size() >= q && sing(q - 1) > rank_tol;

  if (full_rank)
  {
    Eigen::MatrixXd vq = svd.matrixV().leftCols(q);
    detail::fix_signs(vq);
    for (Eigen::Index j = 0; j < q; ++j)
      v_bar.row(j) = (sing(j) / std::sqrt(m)) * vq.col(j).transpose();
    z_bar.noalias() = d.y_plus * v_bar.transpose();
  }
  else
  {
    std::cerr << "warning: output window has numerical rank below Q = " << q
              << "; falling back to a seeded random start" << std::endl;
    st.used_random_fallback = true;
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    z_bar.resize(d.M, q);
    for (Eigen::Index i = 0; i < d.M; ++i)
      for (Eigen::Index j = 0; j < q; ++j)
        z_bar(i, j) = gauss(rng);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q));
    for (Eigen::Index j = 0; j < q; ++j)
      for (Eigen::Index n = 0; n < dp; ++n)
        v_bar(j, n) = scale * gauss(rng);
  }

  // Weights from a lightly ridged regression of the scores on the input
  // window; the ridge only guards against a rank-deficient design.
  Eigen::MatrixXd prec = d.y_minus.transpose() * d.y_minus;
  prec.diagonal().array() += 1e-3;
  const Eigen::MatrixXd sym = 0.5 * (prec + prec.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success)
    throw NumericalError("initial weight regression: design gram not positive definite");

  Posteriors& post = st.post;
  post.latent.z_bar = std::move(z_bar);
  post.latent.s_z = 1e-2 * Eigen::MatrixXd::Identity(q, q);
  post.w.w_bar = llt.solve(d.y_minus.transpose() * post.latent.z_bar);
  post.w.s_w = 1e-2 * Eigen::MatrixXd::Identity(dm, dm);
  post.v.v_bar = std::move(v_bar);
  post.v.s_v.assign(static_cast<std::size_t>(dp),
                    1e-2 * Eigen::MatrixXd::Identity(q, q));
  post.alpha.shape = s.kappa;
  post.alpha.rates = flatten_b(s, dm);
  post.omega.shape = s.iota;
  post.omega.rates = s.a;
  post.gamma.shape = s.nu;
  post.gamma.rates = s.c;
  return st;
}

LatentPosterior update_latent(const LaggedDesign& d, const WPosterior& w,
                              const VPosterior& v, const GammaFamily& omega)
{
  const Eigen::MatrixXd ym_w = d.y_minus * w.w_bar;
  return update_latent_impl(d, v, omega, ym_w);
}

WPosterior update_w(const LaggedDesign& d, const LatentPosterior& latent,
                    const GammaFamily& alpha)
{
  return update_w_impl(d, make_stats(d), latent, alpha);
}

GammaFamily update_alpha(const WPosterior& w, const ModelSpec& spec)
{
  const Eigen::Index dm = w.w_bar.rows();
  const double q = static_cast<double>(w.w_bar.cols());
  const Eigen::VectorXd b_flat = flatten_b(spec, dm);

  GammaFamily out;
  out.shape = spec.kappa + 0.5 * q;
  out.rates.resize(dm);
  for (Eigen::Index r = 0; r < dm; ++r)
    out.rates(r) = b_flat(r)
                   + 0.5 * (w.w_bar.row(r).squaredNorm() + q * w.s_w(r, r));
  return out;
}

VPosterior update_v(const LaggedDesign& d, const LatentPosterior& latent,
                    const GammaFamily& omega, const GammaFamily& gamma)
{
  const Eigen::MatrixXd ezz = expected_ztz(latent);
  const Eigen::MatrixXd zty = latent.z_bar.transpose() * d.y_plus;
  return update_v_impl(latent, omega, gamma, ezz, zty);
}

GammaFamily update_omega(const LaggedDesign& d, const LatentPosterior& latent,
                         const VPosterior& v, const ModelSpec& spec)
{
  const Eigen::MatrixXd ezz = expected_ztz(latent);
  const Eigen::MatrixXd zty = latent.z_bar.transpose() * d.y_plus;
  return update_omega_impl(make_stats(d), latent, v, spec, ezz, zty);
}

GammaFamily update_gamma(const VPosterior& v, const ModelSpec& spec)
{
  const Eigen::Index q = v.v_bar.rows();
  const double dp = static_cast<double>(v.v_bar.cols());
  const Eigen::VectorXd c = rates_or_default(spec.c, q, "component");

  GammaFamily out;
  out.shape = spec.nu + 0.5 * dp;
  out.rates.resize(q);
  for (Eigen::Index j = 0; j < q; ++j)
  {
    double v2 = v.v_bar.row(j).squaredNorm();
    for (Eigen::Index n = 0; n < v.v_bar.cols(); ++n)
      v2 += v.s_v[static_cast<std::size_t>(n)](j, j);
    out.rates(j) = c(j) + 0.5 * v2;
  }
  return out;
}

FreeEnergyReport free_energy(const LaggedDesign& d, const Posteriors& post,
                             const ModelSpec& spec)
{
  const Eigen::MatrixXd ezz = expected_ztz(post.latent);
  const Eigen::MatrixXd ym_w = d.y_minus * post.w.w_bar;
  return free_energy_impl(d, make_stats(d), post, spec, ezz, ym_w);
}

FittedModel fit(const TimeSeries& series, const ModelSpec& spec_in)
{
  validate(series);
  spec_in.validate(series.channels(), series.length());
  const ModelSpec spec = spec_in.resolved(series.channels());

  // Shift by the training means with the same single subtraction that
  // transform() applies, so transforming the training series afterwards
  // reproduces the stored latent means bit for bit.
  TimeSeries work = series;
  if (!series.centered)
  {
    work.means = center(series).means;
    work.data = series.data.rowwise() - work.means.transpose();
  }
  const LaggedDesign design = embed_lags(work, spec.P, spec.L);
  const DesignStats stats = make_stats(design);

  Posteriors post = init_posterior(design, spec).post;

  FittedModel model;
  model.spec = spec;
  model.means = work.means;

  Eigen::MatrixXd ym_w = design.y_minus * post.w.w_bar;
  Eigen::MatrixXd ezz, zty;
  std::vector<FreeEnergyReport> trace;
  trace.reserve(static_cast<std::size_t>(spec.max_iter));
  double prev = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iter = 0;
  while (iter < spec.max_iter)
  {
    ++iter;
    post.latent = update_latent_impl(design, post.v, post.omega, ym_w);
    post.w = update_w_impl(design, stats, post.latent, post.alpha);
    post.alpha = update_alpha(post.w, spec);
    ezz = expected_ztz(post.latent);
    zty.noalias() = post.latent.z_bar.transpose() * design.y_plus;
    post.v = update_v_impl(post.latent, post.omega, post.gamma, ezz, zty);
    post.omega = update_omega_impl(stats, post.latent, post.v, spec, ezz, zty);
    post.gamma = update_gamma(post.v, spec);

    ym_w.noalias() = design.y_minus * post.w.w_bar;
    FreeEnergyReport fe;
    try
    {
      fe = free_energy_impl(design, stats, post, spec, ezz, ym_w);
    }
    catch (const NumericalError& e)
    {
      throw NumericalError(std::string(e.what()) + " at sweep " + std::to_string(iter));
    }
    trace.push_back(fe);
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

  // Leave the latent block consistent with the final parameters.
  post.latent = update_latent_impl(design, post.v, post.omega, ym_w);

  model.latent = std::move(post.latent);
  model.w = std::move(post.w);
  model.v = std::move(post.v);
  model.alpha = std::move(post.alpha);
  model.omega = std::move(post.omega);
  model.gamma = std::move(post.gamma);
  model.free_energy_trace = std::move(trace);
  model.converged = converged;
  model.iterations = iter;
  return model;
}

FittedModel fit_multilag(const TimeSeries& series, const ModelSpec& spec)
{
  return fit(series, spec);
}

Eigen::MatrixXd transform(const FittedModel& model, const TimeSeries& series)
{
  validate(series);
  if (series.channels() != model.means.size())
    throw DimensionError("series has " + std::to_string(series.channels())
                         + " channels, model expects "
                         + std::to_string(model.means.size()));
  TimeSeries work = series;
  if (!series.centered)
  {
    work.means = model.means;
    work.data = series.data.rowwise() - model.means.transpose();
  }
  const LaggedDesign design = embed_lags(work, model.spec.P, model.spec.L);
  return update_latent(design, model.w, model.v, model.omega).z_bar;
}

Eigen::MatrixXd reconstruct(const FittedModel& model, const Eigen::MatrixXd& z,
                            bool original_units)
{
  const Eigen::Index q = model.v.v_bar.rows();
  if (z.cols() != q)
    throw DimensionError("latent matrix has " + std::to_string(z.cols())
                         + " columns, model expects " + std::to_string(q));
  Eigen::MatrixXd y = z * model.v.v_bar;
  if (original_units)
  {
    const Eigen::Index n = model.means.size();
    for (Eigen::Index block = 0; block * n < y.cols(); ++block)
      y.middleCols(block * n, n).rowwise() += model.means.transpose();
  }
  return y;
}

Prediction predict_one_step(const FittedModel& model, const Eigen::MatrixXd& history)
{
  const Eigen::Index n = model.means.size();
  const Eigen::Index p = model.spec.P;
  if (history.rows() != p || history.cols() != n)
    throw DimensionError("history is " + std::to_string(history.rows()) + "x"
                         + std::to_string(history.cols()) + ", model expects "
                         + std::to_string(p) + "x" + std::to_string(n));
  if (!history.allFinite())
    throw ValidationError("history contains a non-finite value");
  if (model.omega.shape <= 1.0)
    throw NumericalError("noise shape " + std::to_string(model.omega.shape)
                         + " does not exceed 1; posterior mean variance undefined");

  // Row i of history is y_{t-1-i}, which is exactly lag block i + 1 of the
  // design convention.
  Eigen::VectorXd h(n * p);
  for (Eigen::Index lag = 1; lag <= p; ++lag)
    h.segment((lag - 1) * n, n) = history.row(lag - 1);

  Prediction pr;
  const Eigen::VectorXd mz = model.w.w_bar.transpose() * h;
  pr.mean = model.v.v_bar.transpose() * mz;
  pr.cov = expected_vtv(model.v);
  pr.cov.diagonal() += (model.omega.rates / (model.omega.shape - 1.0)).eval();
  return pr;
}

} // namespace vb
} // namespace lrmar
