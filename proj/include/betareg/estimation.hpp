#pragma once

// Maximum likelihood for beta regression with (possibly nonlinear) mean and
// precision submodels, fitted by alternating block Fisher scoring.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "betareg/dataset.hpp"
#include "betareg/error.hpp"
#include "betareg/formula.hpp"
#include "betareg/links.hpp"
#include "betareg/special_math.hpp"

namespace betareg {

struct ModelSpec {
  PredictorSpec mean;
  LinkKind mean_link = LinkKind::logit;
  PredictorSpec precision;
  LinkKind precision_link = LinkKind::log;
  // Optional user starting values, indexed like the parameters.
  std::vector<std::optional<double>> mean_start;
  std::vector<std::optional<double>> precision_start;

  std::size_t k() const noexcept { return mean.param_count; }
  std::size_t q() const noexcept { return precision.param_count; }
};

// Parses both predictors against `schema`. An empty precision formula means
// intercept-only.
inline ModelSpec make_model(std::string_view mean_formula, LinkKind mean_link,
                            std::string_view precision_formula, LinkKind precision_link,
                            const std::vector<std::string>& schema) {
  if (!is_mean_link(mean_link))
    throw UsageError("link '" + std::string(link_name(mean_link)) +
                     "' is not available for the mean submodel");
  if (!is_precision_link(precision_link))
    throw UsageError("link '" + std::string(link_name(precision_link)) +
                     "' is not available for the precision submodel");
  ModelSpec m;
  m.mean = parse_formula(mean_formula, schema, 'b');
  m.mean_link = mean_link;
  m.precision = precision_formula.empty() ? intercept_only('g')
                                          : parse_formula(precision_formula, schema, 'g');
  m.precision_link = precision_link;
  return m;
}

// Intercept-only model sharing the links of `model`.
inline ModelSpec null_model(const ModelSpec& model) {
  ModelSpec m;
  m.mean = intercept_only('b');
  m.mean_link = model.mean_link;
  m.precision = intercept_only('g');
  m.precision_link = model.precision_link;
  return m;
}

struct FitOptions {
  int max_iterations = 500;
  double tol_loglik = 1e-10;
  double tol_score = 1e-8;
  int max_step_halvings = 30;
};

// Per-observation quantities at one (beta, gamma).
struct WorkingState {
  Eigen::VectorXd eta1, eta2;
  Eigen::MatrixXd J1, J2;
  Eigen::VectorXd mu, phi;
  Eigen::VectorXd ystar, mustar;
  Eigen::VectorXd v, w, c, xi, d;
  Eigen::VectorXd t_scale;  // 1/g'(mu_t), diagonal of T
  Eigen::VectorXd h_scale;  // 1/h'(phi_t), diagonal of H
  Eigen::VectorXd a;
  double loglik = 0.0;
  // Magnitude of the terms summed into loglik; sets the rounding floor when
  // comparing two log-likelihoods.
  double loglik_scale = 0.0;
};

struct ScoreVector {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;

  double max_abs() const {
    double m = 0.0;
    if (beta.size()) m = std::max(m, beta.cwiseAbs().maxCoeff());
    if (gamma.size()) m = std::max(m, gamma.cwiseAbs().maxCoeff());
    return m;
  }
};

struct FisherInformation {
  Eigen::MatrixXd beta_beta;
  Eigen::MatrixXd beta_gamma;
  Eigen::MatrixXd gamma_gamma;
};

struct FitResult {
  std::string mean_formula, precision_formula;
  LinkKind mean_link = LinkKind::logit;
  LinkKind precision_link = LinkKind::log;
  std::size_t n = 0, k = 0, q = 0;
  std::size_t k1 = 0, q1 = 0;  // covariate counts of the two submodels

  Eigen::VectorXd beta, gamma;
  Eigen::VectorXd start_beta, start_gamma;
  Eigen::VectorXd y;
  WorkingState state;  // at the final estimates

  double log_lik = 0.0;
  double start_loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;
  std::vector<double> loglik_trace;
  std::vector<std::string> warnings;

  // u1 = J1 beta + W^{-1} T (y* - mu*), the converged IRLS working response.
  Eigen::VectorXd u1;
  // eta1 + W^{-1} T (y* - mu*); equals u1 for predictors linear in beta
  // without offsets, and is the response-scale quantity used for SST.
  Eigen::VectorXd working_response;
  // phi_t * w_t, the IRLS weights.
  Eigen::VectorXd irls_weights;

  const Eigen::VectorXd& mu() const noexcept { return state.mu; }
  const Eigen::VectorXd& phi() const noexcept { return state.phi; }
};

// ---------------------------------------------------------------------------

// A model bound to a dataset: covariates gathered, constant Jacobians cached.
class BoundModel {
 public:
  // Holds a reference to the model, so temporaries are rejected.
  BoundModel(ModelSpec&&, const Dataset&) = delete;
  BoundModel(const ModelSpec& model, const Dataset& data)
      : model_(model),
        mean_cov_(bind_covariates(model.mean, data)),
        prec_cov_(bind_covariates(model.precision, data)),
        y_(data.response) {
    data.validate();
    ystar_ = (y_.array() / (1.0 - y_.array())).log().matrix();
    log1my_ = y_.array().unaryExpr([](double v) { return std::log1p(-v); }).matrix();
    if (model.mean.linear) {
      const std::vector<double> zero(model.k(), 0.0);
      J1_fixed_ = eval_jacobian(model.mean, zero, mean_cov_);
    }
    if (model.precision.linear) {
      const std::vector<double> zero(model.q(), 0.0);
      J2_fixed_ = eval_jacobian(model.precision, zero, prec_cov_);
    }
  }

  const ModelSpec& model() const noexcept { return model_; }
  const Eigen::VectorXd& y() const noexcept { return y_; }
  const Eigen::VectorXd& ystar() const noexcept { return ystar_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(y_.size()); }
  const CovariateBlock& mean_covariates() const noexcept { return mean_cov_; }
  const CovariateBlock& precision_covariates() const noexcept { return prec_cov_; }

  Eigen::VectorXd eta1(const Eigen::VectorXd& beta) const {
    return eval_predictor(model_.mean, span(beta), mean_cov_).matrix();
  }
  Eigen::VectorXd eta2(const Eigen::VectorXd& gamma) const {
    return eval_predictor(model_.precision, span(gamma), prec_cov_).matrix();
  }
  Eigen::MatrixXd J1(const Eigen::VectorXd& beta) const {
    return model_.mean.linear ? J1_fixed_ : eval_jacobian(model_.mean, span(beta), mean_cov_);
  }
  Eigen::MatrixXd J2(const Eigen::VectorXd& gamma) const {
    return model_.precision.linear ? J2_fixed_
                                   : eval_jacobian(model_.precision, span(gamma), prec_cov_);
  }

  // Mean and precision vectors; throws InadmissibleParameter when either
  // leaves its support.
  void inverse_links(const Eigen::VectorXd& eta1, const Eigen::VectorXd& eta2,
                     Eigen::VectorXd& mu, Eigen::VectorXd& phi) const {
    const Eigen::Index n = eta1.size();
    mu.resize(n);
    phi.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      const double m = link_inverse(model_.mean_link, eta1[t]);
      if (!(m > 0.0 && m < 1.0))
        throw InadmissibleParameter("mean outside (0,1)", static_cast<std::size_t>(t));
      mu[t] = m;
      double p;
      try {
        p = link_inverse(model_.precision_link, eta2[t]);
      } catch (const DomainError&) {
        throw InadmissibleParameter("precision predictor outside link range",
                                    static_cast<std::size_t>(t));
      }
      if (!(p > 0.0) || !std::isfinite(p))
        throw InadmissibleParameter("precision not positive", static_cast<std::size_t>(t));
      phi[t] = p;
    }
  }

  double loglik_at(const Eigen::VectorXd& mu, const Eigen::VectorXd& phi) const {
    double s = 0.0;
    for (Eigen::Index t = 0; t < mu.size(); ++t)
      s += beta_log_density(y_[t], BetaParams(mu[t], phi[t]));
    return s;
  }

  // Log-likelihood only; cheaper than a full state.
  double loglik(const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma) const {
    Eigen::VectorXd mu, phi;
    inverse_links(eta1(beta), eta2(gamma), mu, phi);
    return loglik_at(mu, phi);
  }

  WorkingState state(const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma) const {
    WorkingState s;
    s.eta1 = eta1(beta);
    s.eta2 = eta2(gamma);
    inverse_links(s.eta1, s.eta2, s.mu, s.phi);
    s.J1 = J1(beta);
    s.J2 = J2(gamma);
    const Eigen::Index n = s.mu.size();
    s.ystar = ystar_;
    s.mustar.resize(n);
    s.v.resize(n);
    s.w.resize(n);
    s.c.resize(n);
    s.xi.resize(n);
    s.d.resize(n);
    s.t_scale.resize(n);
    s.h_scale.resize(n);
    s.a.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      const double mu = s.mu[t], phi = s.phi[t];
      const double pa = mu * phi, pb = (1.0 - mu) * phi;
      const double dg_a = digamma(pa), dg_b = digamma(pb);
      const double tg_a = trigamma(pa), tg_b = trigamma(pb), tg_phi = trigamma(phi);
      const double T = 1.0 / link_deriv(model_.mean_link, mu);
      const double H = 1.0 / link_deriv(model_.precision_link, phi);
      s.mustar[t] = dg_a - dg_b;
      s.v[t] = tg_a + tg_b;
      s.w[t] = phi * s.v[t] * T * T;
      s.c[t] = phi * (tg_a * mu - tg_b * (1.0 - mu));
      s.xi[t] = tg_a * mu * mu + tg_b * (1.0 - mu) * (1.0 - mu) - tg_phi;
      s.d[t] = s.xi[t] * H * H;
      s.t_scale[t] = T;
      s.h_scale[t] = H;
      s.a[t] = mu * (ystar_[t] - s.mustar[t]) + log1my_[t] - dg_b + digamma(phi);
      if (!(s.v[t] > 0.0) || !(s.w[t] > 0.0) || !std::isfinite(s.w[t]) ||
          !std::isfinite(s.xi[t]) || !std::isfinite(s.a[t]))
        throw InadmissibleParameter("degenerate working weights", static_cast<std::size_t>(t));
    }
    s.loglik = loglik_at(s.mu, s.phi);
    s.loglik_scale = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) s.loglik_scale += 1.0 + std::abs(log_gamma(s.phi[t]));
    return s;
  }

 private:
  static std::span<const double> span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
  }

  const ModelSpec& model_;
  CovariateBlock mean_cov_, prec_cov_;
  Eigen::VectorXd y_, ystar_, log1my_;
  Eigen::MatrixXd J1_fixed_, J2_fixed_;
};

// ---------------------------------------------------------------------------

inline double log_likelihood(const ModelSpec& model, const Dataset& data,
                             const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma) {
  return BoundModel(model, data).loglik(beta, gamma);
}

inline WorkingState working_state(const ModelSpec& model, const Dataset& data,
                                  const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma) {
  return BoundModel(model, data).state(beta, gamma);
}

// U_beta = J1' Phi T (y* - mu*),  U_gamma = J2' H a.
inline ScoreVector score(const WorkingState& s) {
  ScoreVector u;
  u.beta = s.J1.transpose() *
           (s.phi.array() * s.t_scale.array() * (s.ystar - s.mustar).array()).matrix();
  u.gamma = s.J2.transpose() * (s.h_scale.array() * s.a.array()).matrix();
  return u;
}

// K_bb = J1' Phi W J1,  K_bg = J1' C T H J2,  K_gg = J2' D J2.
inline FisherInformation fisher_information(const WorkingState& s) {
  FisherInformation k;
  const Eigen::VectorXd pw = s.phi.cwiseProduct(s.w);
  k.beta_beta = s.J1.transpose() * pw.asDiagonal() * s.J1;
  const Eigen::VectorXd cth =
      (s.c.array() * s.t_scale.array() * s.h_scale.array()).matrix();
  k.beta_gamma = s.J1.transpose() * cth.asDiagonal() * s.J2;
  k.gamma_gamma = s.J2.transpose() * s.d.asDiagonal() * s.J2;
  return k;
}

// Solves K x = u for symmetric positive definite K. One ridge retry
// (1e-10 * trace / dim on the diagonal) before declaring singularity.
inline Eigen::VectorXd spd_solve(const Eigen::MatrixXd& K, const Eigen::VectorXd& u,
                                 const char* block) {
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd x = llt.solve(u);
    if (x.allFinite()) return x;
  }
  Eigen::MatrixXd ridged = K;
  const double bump = 1e-10 * K.trace() / static_cast<double>(K.rows());
  ridged.diagonal().array() += bump;
  llt.compute(ridged);
  if (llt.info() == Eigen::Success && bump > 0.0) {
    Eigen::VectorXd x = llt.solve(u);
    if (x.allFinite()) return x;
  }
  throw SingularInformation(std::string("information block ") + block +
                            " is singular; the Jacobian may be rank deficient");
}

// ---------------------------------------------------------------------------
// Starting values

namespace detail {

// Levenberg-Marquardt least squares of `target` on a predictor.
inline Eigen::VectorXd nonlinear_least_squares(const PredictorSpec& spec,
                                               const CovariateBlock& cov,
                                               const Eigen::VectorXd& target,
                                               Eigen::VectorXd theta) {
  auto span = [](const Eigen::VectorXd& v) {
    return std::span<const double>(v.data(), static_cast<std::size_t>(v.size()));
  };
  auto sse_at = [&](const Eigen::VectorXd& th, Eigen::VectorXd* resid) -> std::optional<double> {
    try {
      Eigen::VectorXd r = target - eval_predictor(spec, span(th), cov).matrix();
      if (!r.allFinite()) return std::nullopt;
      if (resid) *resid = r;
      return r.squaredNorm();
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  Eigen::VectorXd r;
  auto sse = sse_at(theta, &r);
  if (!sse) return theta;
  double lambda = 1e-3;
  for (int it = 0; it < 200; ++it) {
    Eigen::MatrixXd J;
    try {
      J = eval_jacobian(spec, span(theta), cov);
    } catch (const Error&) {
      break;
    }
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd Jtr = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal() += lambda * (JtJ.diagonal().array() + 1e-12).matrix();
      const Eigen::VectorXd step = A.ldlt().solve(Jtr);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      Eigen::VectorXd cand = theta + step;
      Eigen::VectorXd rc;
      auto sc = sse_at(cand, &rc);
      if (sc && *sc <= *sse) {
        const double rel = (*sse - *sc) / std::max(*sse, 1e-300);
        theta = cand;
        r = rc;
        sse = sc;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (rel < 1e-14) return theta;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return theta;
}

inline Eigen::VectorXd fill_anchors(const std::vector<std::optional<double>>& anchors,
                                    std::size_t count, double fill) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(count), fill);
  for (std::size_t j = 0; j < std::min(count, anchors.size()); ++j)
    if (anchors[j]) v[static_cast<Eigen::Index>(j)] = *anchors[j];
  return v;
}

// Least squares of target on a predictor: closed form when linear in the
// parameters, Levenberg-Marquardt from the anchors otherwise. Anchored
// entries of a linear predictor override the least-squares solution.
inline Eigen::VectorXd predictor_start(const PredictorSpec& spec, const CovariateBlock& cov,
                                       const Eigen::VectorXd& target,
                                       const std::vector<std::optional<double>>& anchors,
                                       double fill) {
  const std::size_t p = spec.param_count;
  if (spec.linear) {
    const std::vector<double> zero(p, 0.0);
    const Eigen::MatrixXd J = eval_jacobian(spec, zero, cov);
    const Eigen::VectorXd offset = eval_predictor(spec, zero, cov).matrix();
    Eigen::VectorXd theta = J.colPivHouseholderQr().solve(target - offset);
    for (std::size_t j = 0; j < std::min(p, anchors.size()); ++j)
      if (anchors[j]) theta[static_cast<Eigen::Index>(j)] = *anchors[j];
    return theta;
  }
  return nonlinear_least_squares(spec, cov, target, fill_anchors(anchors, p, fill));
}

}  // namespace detail

struct StartingValues {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  double phi_moment = 0.0;  // moment estimate of a constant precision
};

// Moment estimate of a constant precision from transformed-scale residuals:
// sigma_t^2 = e'e / ((n-k) g'(mu_t)^2), phi = mean(mu_t(1-mu_t)/sigma_t^2) - 1.
inline double moment_precision(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                               LinkKind mean_link, std::size_t k) {
  const Eigen::Index n = y.size();
  double ss = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double e = link_value(mean_link, y[t]) - eta[t];
    ss += e * e;
  }
  const double s2 = ss / static_cast<double>(n - static_cast<Eigen::Index>(k));
  double acc = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double m = link_inverse(mean_link, eta[t]);
    const double gp = link_deriv(mean_link, std::clamp(m, 1e-12, 1.0 - 1e-12));
    acc += m * (1.0 - m) / (s2 / (gp * gp));
  }
  return acc / static_cast<double>(n) - 1.0;
}

// Admissible start. Tries a ladder of fill values for unanchored parameters
// of nonlinear predictors; fails with NoAdmissibleStart when all are
// exhausted.
inline StartingValues starting_values(const ModelSpec& model, const Dataset& data) {
  const BoundModel bound(model, data);
  const Eigen::VectorXd& y = data.response;
  if ((y.array() == y[0]).all()) throw DataError("response is constant");
  const Eigen::VectorXd gy =
      y.unaryExpr([&](double v) { return link_value(model.mean_link, v); });
  static constexpr double kLadder[] = {0.1, 1.0, 0.5, -0.1, 2.0, -1.0};
  std::string last_failure = "no candidate evaluated";
  for (double fill : kLadder) {
    try {
      StartingValues sv;
      sv.beta = detail::predictor_start(model.mean, bound.mean_covariates(), gy, model.mean_start,
                                        fill);
      const Eigen::VectorXd eta = bound.eta1(sv.beta);
      double phi0 = moment_precision(y, eta, model.mean_link, model.k());
      if (!(phi0 > 1.0) || !std::isfinite(phi0)) phi0 = 1.0;
      sv.phi_moment = phi0;
      double target = link_value(model.precision_link, phi0);
      const Eigen::VectorXd ht = Eigen::VectorXd::Constant(y.size(), target);
      sv.gamma = detail::predictor_start(model.precision, bound.precision_covariates(), ht,
                                         model.precision_start, fill);
      (void)bound.state(sv.beta, sv.gamma);
      return sv;
    } catch (const Error& e) {
      last_failure = e.what();
    }
    if (model.mean.linear && model.precision.linear) break;
  }
  throw NoAdmissibleStart("no admissible starting point: " + last_failure);
}

// ---------------------------------------------------------------------------
// Fitting

namespace detail {

inline std::size_t numeric_rank(const Eigen::MatrixXd& J) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
  qr.setThreshold(1e-10);
  return static_cast<std::size_t>(qr.rank());
}

}  // namespace detail

inline FitResult fit(const ModelSpec& model, const Dataset& data, const FitOptions& opts = {}) {
  const std::size_t n = data.n();
  if (model.k() + model.q() >= n)
    throw DataError("need k + q < n (k=" + std::to_string(model.k()) +
                    ", q=" + std::to_string(model.q()) + ", n=" + std::to_string(n) + ")");
  const BoundModel bound(model, data);
  const StartingValues sv = starting_values(model, data);

  FitResult r;
  r.mean_formula = model.mean.to_string();
  r.precision_formula = model.precision.to_string();
  r.mean_link = model.mean_link;
  r.precision_link = model.precision_link;
  r.n = n;
  r.k = model.k();
  r.q = model.q();
  r.k1 = model.mean.covariate_count();
  r.q1 = model.precision.covariate_count();
  r.y = data.response;
  r.start_beta = sv.beta;
  r.start_gamma = sv.gamma;

  Eigen::VectorXd beta = sv.beta, gamma = sv.gamma;
  WorkingState cur = bound.state(beta, gamma);
  r.start_loglik = cur.loglik;
  r.loglik_trace.push_back(cur.loglik);
  if (detail::numeric_rank(cur.J1) < r.k)
    r.warnings.push_back("mean Jacobian is rank deficient at the starting point");
  if (detail::numeric_rank(cur.J2) < r.q)
    r.warnings.push_back("precision Jacobian is rank deficient at the starting point");

  // Rounding floor of a log-likelihood difference at the current point.
  const auto noise_floor = [&] {
    return 16.0 * std::numeric_limits<double>::epsilon() * cur.loglik_scale;
  };
  // A candidate is accepted when it raises the log-likelihood, or when the
  // change is below rounding and the score shrinks. The second case lets the
  // fit finish once true gains are smaller than the rounding of l.
  const auto try_step = [&](const Eigen::VectorXd& step_beta,
                            const Eigen::VectorXd& step_gamma) -> bool {
    const double s0 = score(cur).max_abs();
    double scale = 1.0;
    for (int h = 0; h <= opts.max_step_halvings; ++h, scale *= 0.5) {
      const Eigen::VectorXd nb = beta + scale * step_beta;
      const Eigen::VectorXd ng = gamma + scale * step_gamma;
      try {
        WorkingState cand = bound.state(nb, ng);
        const bool up = cand.loglik > cur.loglik;
        const bool flat = cand.loglik >= cur.loglik - noise_floor() &&
                          score(cand).max_abs() < s0;
        if (up || flat) {
          beta = nb;
          gamma = ng;
          cur = std::move(cand);
          return true;
        }
      } catch (const InadmissibleParameter&) {
      } catch (const EvalDomainError&) {
      } catch (const DomainError&) {
      }
    }
    return false;
  };

  const auto block_step = [&](bool is_beta) -> bool {
    const ScoreVector u = score(cur);
    const FisherInformation K = fisher_information(cur);
    if (is_beta)
      return try_step(spd_solve(K.beta_beta, u.beta, "beta-beta"),
                      Eigen::VectorXd::Zero(gamma.size()));
    return try_step(Eigen::VectorXd::Zero(beta.size()),
                    spd_solve(K.gamma_gamma, u.gamma, "gamma-gamma"));
  };

  // Joint Newton step on the observed information, taken from central
  // differences of the analytic score. Used only when block scoring has
  // stopped improving l but the score is still above tolerance; expected
  // and observed information can differ enough there for block steps to
  // stall.
  const auto newton_step = [&]() -> bool {
    const Eigen::Index k = beta.size(), q = gamma.size(), p = k + q;
    Eigen::MatrixXd H(p, p);
    try {
      for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::VectorXd b1 = beta, b2 = beta, g1 = gamma, g2 = gamma;
        const double x = j < k ? beta[j] : gamma[j - k];
        const double hj = 1e-6 * std::max(1.0, std::abs(x));
        if (j < k) {
          b1[j] += hj;
          b2[j] -= hj;
        } else {
          g1[j - k] += hj;
          g2[j - k] -= hj;
        }
        const ScoreVector up = score(bound.state(b1, g1));
        const ScoreVector dn = score(bound.state(b2, g2));
        Eigen::VectorXd col(p);
        col << (up.beta - dn.beta) / (2 * hj), (up.gamma - dn.gamma) / (2 * hj);
        H.col(j) = col;
      }
    } catch (const Error&) {
      return false;
    }
    const Eigen::MatrixXd info = -0.5 * (H + H.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) return false;
    const ScoreVector u = score(cur);
    Eigen::VectorXd uu(p);
    uu << u.beta, u.gamma;
    const Eigen::VectorXd d = llt.solve(uu);
    if (!d.allFinite()) return false;
    return try_step(d.head(k), d.tail(q));
  };

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double before = cur.loglik;
    const bool moved_beta = block_step(true);
    const bool moved_gamma = block_step(false);
    bool moved = moved_beta || moved_gamma;
    r.iterations = it;
    if (std::abs(cur.loglik - before) < opts.tol_loglik) {
      if (score(cur).max_abs() < opts.tol_score) {
        r.loglik_trace.push_back(cur.loglik);
        r.converged = true;
        break;
      }
      if (newton_step()) {
        moved = true;
        if (score(cur).max_abs() < opts.tol_score) {
          r.loglik_trace.push_back(cur.loglik);
          r.converged = true;
          break;
        }
      }
    }
    r.loglik_trace.push_back(cur.loglik);
    if (!moved) break;  // stalled
  }

  const ScoreVector u = score(cur);
  r.score_norm = u.max_abs();
  if (r.converged && !(r.score_norm <= opts.tol_score)) r.converged = false;
  r.beta = beta;
  r.gamma = gamma;
  r.log_lik = cur.loglik;
  const Eigen::VectorXd correction =
      (cur.t_scale.array() * (cur.ystar - cur.mustar).array() / cur.w.array()).matrix();
  r.u1 = cur.J1 * beta + correction;
  r.working_response = cur.eta1 + correction;
  r.irls_weights = cur.phi.cwiseProduct(cur.w);
  r.state = std::move(cur);
  return r;
}

inline FitResult fit_null(const ModelSpec& model, const Dataset& data,
                          const FitOptions& opts = {}) {
  return fit(null_model(model), data, opts);
}

// Converged weighted least squares form
// beta = (J1' Phi W J1)^{-1} J1' Phi W u1.
namespace detail {

inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> irls_system(const FitResult& fit) {
  const Eigen::MatrixXd& J = fit.state.J1;
  return {J.transpose() * fit.irls_weights.asDiagonal() * J,
          J.transpose() * fit.irls_weights.cwiseProduct(fit.u1)};
}

}  // namespace detail

// || K beta_hat - J1' Phi W u1 ||_inf
inline double irls_identity_residual(const FitResult& fit) {
  const auto [K, rhs] = detail::irls_system(fit);
  return (K * fit.beta - rhs).cwiseAbs().maxCoeff();
}

// || K^{-1} J1' Phi W u1 - beta_hat ||_inf; grows with the condition of K.
inline double irls_identity_gap(const FitResult& fit) {
  const auto [K, rhs] = detail::irls_system(fit);
  return (K.llt().solve(rhs) - fit.beta).cwiseAbs().maxCoeff();
}

}  // namespace betareg
