#pragma once

// Residuals, leverage, PRESS and the prediction / goodness-of-fit coefficients
// computed from a converged fit.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "betareg/error.hpp"
#include "betareg/estimation.hpp"
#include "betareg/special_math.hpp"

namespace betareg {

inline constexpr double kUnitLeverageTol = 1e-12;
// Penalty exponents for the likelihood-ratio coefficient.
inline constexpr double kLrAlpha = 0.4;
inline constexpr double kLrDelta = 1.0;

struct PressResult {
  double total = 0.0;
  Eigen::VectorXd components;
};

struct P2Family {
  double p2 = 0.0, p2_c = 0.0, p2_bg = 0.0, p2_bg_c = 0.0;
};

struct R2Family {
  double fc = 0.0, fc_c = 0.0, lr = 0.0, lr_c = 0.0;
};

struct PressPlotRow {
  std::size_t t = 0;  // 1-based
  double component = 0.0;
  double threshold = 0.0;
  bool flagged = false;
};

struct DiagnosticsReport {
  Eigen::VectorXd r_beta, r_beta_gamma, leverage;
  Eigen::VectorXd press_components, press_components_combined;
  double press = 0.0, press_combined = 0.0;
  double sst_deleted = 0.0;
  double p2 = 0.0, p2_c = 0.0, p2_bg = 0.0, p2_bg_c = 0.0;
  double r2_fc = 0.0, r2_fc_c = 0.0, r2_lr = 0.0, r2_lr_c = 0.0;
  double lambda = 1.0;
  std::size_t n = 0, k1 = 0, q1 = 0, p = 0;
  double null_loglik = 0.0;
  bool null_converged = false;
};

inline Eigen::VectorXd weighted_residuals(const FitResult& fit) {
  const WorkingState& s = fit.state;
  return ((s.ystar - s.mustar).array() / s.v.array().sqrt()).matrix();
}

inline double weighted_residual_1(const FitResult& fit, std::size_t t) {
  const WorkingState& s = fit.state;
  const auto i = static_cast<Eigen::Index>(t);
  return (s.ystar[i] - s.mustar[i]) / std::sqrt(s.v[i]);
}

// zeta_t = (1+mu)^2 psi'(mu phi) + mu^2 psi'((1-mu) phi) - psi'(phi)
inline double combined_zeta(double mu, double phi) {
  return (1.0 + mu) * (1.0 + mu) * trigamma(mu * phi) +
         mu * mu * trigamma((1.0 - mu) * phi) - trigamma(phi);
}

inline double combined_residual(const FitResult& fit, std::size_t t) {
  const WorkingState& s = fit.state;
  const auto i = static_cast<Eigen::Index>(t);
  const double zeta = combined_zeta(s.mu[i], s.phi[i]);
  if (!(zeta > 0.0))
    throw DomainError("nonpositive zeta at observation " + std::to_string(t + 1));
  return ((s.ystar[i] - s.mustar[i]) + s.a[i]) / std::sqrt(zeta);
}

inline Eigen::VectorXd combined_residuals(const FitResult& fit) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(fit.n));
  for (std::size_t t = 0; t < fit.n; ++t) r[static_cast<Eigen::Index>(t)] = combined_residual(fit, t);
  return r;
}

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> kbb_factor(const FitResult& fit) {
  const Eigen::MatrixXd& J = fit.state.J1;
  Eigen::LLT<Eigen::MatrixXd> llt(J.transpose() * fit.irls_weights.asDiagonal() * J);
  if (llt.info() != Eigen::Success)
    throw SingularInformation("mean information block is singular");
  return llt;
}

}  // namespace detail

// Diagonal of S J1 (J1' S^2 J1)^{-1} J1' S with S = (Phi W)^{1/2}.
inline Eigen::VectorXd leverage(const FitResult& fit) {
  const auto llt = detail::kbb_factor(fit);
  const Eigen::MatrixXd SJ = fit.irls_weights.cwiseSqrt().asDiagonal() * fit.state.J1;
  const Eigen::MatrixXd X = llt.solve(SJ.transpose());  // k x n
  Eigen::VectorXd h(SJ.rows());
  for (Eigen::Index t = 0; t < SJ.rows(); ++t) h[t] = SJ.row(t).dot(X.col(t));
  return h;
}

// Full n x n projection, for small problems and checks.
inline Eigen::MatrixXd hat_matrix(const FitResult& fit) {
  const auto llt = detail::kbb_factor(fit);
  const Eigen::MatrixXd SJ = fit.irls_weights.cwiseSqrt().asDiagonal() * fit.state.J1;
  return SJ * llt.solve(SJ.transpose());
}

inline void require_below_unit(double h, std::size_t t) {
  if (1.0 - h <= kUnitLeverageTol) throw UnitLeverage(t);
}

inline Eigen::VectorXd one_step_deleted_beta(const FitResult& fit, std::size_t t) {
  const auto llt = detail::kbb_factor(fit);
  const Eigen::VectorXd h = leverage(fit);
  const auto i = static_cast<Eigen::Index>(t);
  require_below_unit(h[i], t);
  const double r = weighted_residual_1(fit, t);
  const Eigen::VectorXd jt = fit.state.J1.row(i).transpose();
  return fit.beta - llt.solve(jt) * std::sqrt(fit.irls_weights[i]) * r / (1.0 - h[i]);
}

namespace detail {

inline PressResult press_from(const Eigen::VectorXd& r, const Eigen::VectorXd& h) {
  PressResult p;
  p.components.resize(r.size());
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    require_below_unit(h[t], static_cast<std::size_t>(t));
    const double e = r[t] / (1.0 - h[t]);
    p.components[t] = e * e;
  }
  p.total = p.components.sum();
  return p;
}

inline double squared_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = (da * da).sum(), sbb = (db * db).sum();
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  const double sab = (da * db).sum();
  return std::min(1.0, sab * sab / (saa * sbb));
}

}  // namespace detail

inline PressResult press(const FitResult& fit) {
  return detail::press_from(weighted_residuals(fit), leverage(fit));
}

inline PressResult press_combined(const FitResult& fit) {
  return detail::press_from(combined_residuals(fit), leverage(fit));
}

// (n/(n-p))^2 * sum (ycheck - mean)^2 with ycheck = (phi w)^{1/2} z.
inline double sst_deleted(const FitResult& fit) {
  const Eigen::VectorXd yc = fit.irls_weights.cwiseSqrt().cwiseProduct(fit.working_response);
  const double sst = (yc.array() - yc.mean()).square().sum();
  const double n = static_cast<double>(fit.n);
  const double p = static_cast<double>(fit.k + fit.q);
  const double f = n / (n - p);
  return f * f * sst;
}

// 1 - (1 - value) (n-1)/(n - (k1+q1))
inline double covariate_penalized(double value, std::size_t n, std::size_t k1, std::size_t q1) {
  const double nn = static_cast<double>(n);
  return 1.0 - (1.0 - value) * (nn - 1.0) / (nn - static_cast<double>(k1 + q1));
}

inline P2Family p2_family(double press_total, double press_bg_total, double sst,
                          std::size_t n, std::size_t k1, std::size_t q1) {
  if (!(sst > 0.0)) throw DomainError("zero total sum of squares on the working scale");
  P2Family f;
  f.p2 = 1.0 - press_total / sst;
  f.p2_bg = 1.0 - press_bg_total / sst;
  f.p2_c = covariate_penalized(f.p2, n, k1, q1);
  f.p2_bg_c = covariate_penalized(f.p2_bg, n, k1, q1);
  return f;
}

inline P2Family p2_family(const FitResult& fit) {
  return p2_family(press(fit).total, press_combined(fit).total, sst_deleted(fit), fit.n, fit.k1,
                   fit.q1);
}

inline double r2_lr(double null_loglik, double fit_loglik, std::size_t n) {
  return 1.0 - std::exp(2.0 / static_cast<double>(n) * (null_loglik - fit_loglik));
}

inline double r2_lr_penalized(double r2, std::size_t n, std::size_t k1, std::size_t q1,
                              double alpha = kLrAlpha, double delta = kLrDelta) {
  const double nn = static_cast<double>(n);
  const double denom = nn - (1.0 + alpha) * static_cast<double>(k1) -
                       (1.0 - alpha) * static_cast<double>(q1);
  return 1.0 - (1.0 - r2) * std::pow((nn - 1.0) / denom, delta);
}

inline R2Family r2_family(const FitResult& fit, const FitResult& null_fit) {
  R2Family f;
  const Eigen::VectorXd gy =
      fit.y.unaryExpr([&](double v) { return link_value(fit.mean_link, v); });
  f.fc = detail::squared_correlation(gy, fit.state.eta1);
  f.fc_c = covariate_penalized(f.fc, fit.n, fit.k1, fit.q1);
  f.lr = r2_lr(null_fit.log_lik, fit.log_lik, fit.n);
  f.lr_c = r2_lr_penalized(f.lr, fit.n, fit.k1, fit.q1);
  return f;
}

inline double lambda_intensity(const Eigen::VectorXd& phi) {
  return phi.maxCoeff() / phi.minCoeff();
}

inline double lambda_intensity(const FitResult& fit) { return lambda_intensity(fit.phi()); }

inline std::vector<PressPlotRow> press_plot_data(const Eigen::VectorXd& components) {
  const double threshold = 3.0 * components.mean();
  std::vector<PressPlotRow> rows;
  rows.reserve(static_cast<std::size_t>(components.size()));
  for (Eigen::Index t = 0; t < components.size(); ++t)
    rows.push_back({static_cast<std::size_t>(t) + 1, components[t], threshold,
                    components[t] > threshold});
  return rows;
}

inline std::vector<PressPlotRow> press_plot_data(const FitResult& fit) {
  return press_plot_data(press_combined(fit).components);
}

inline DiagnosticsReport diagnose(const FitResult& fit, const FitResult& null_fit) {
  DiagnosticsReport d;
  d.n = fit.n;
  d.k1 = fit.k1;
  d.q1 = fit.q1;
  d.p = fit.k + fit.q;
  d.r_beta = weighted_residuals(fit);
  d.r_beta_gamma = combined_residuals(fit);
  d.leverage = leverage(fit);
  const PressResult pb = detail::press_from(d.r_beta, d.leverage);
  const PressResult pc = detail::press_from(d.r_beta_gamma, d.leverage);
  d.press = pb.total;
  d.press_components = pb.components;
  d.press_combined = pc.total;
  d.press_components_combined = pc.components;
  d.sst_deleted = sst_deleted(fit);
  const P2Family p2 = p2_family(d.press, d.press_combined, d.sst_deleted, d.n, d.k1, d.q1);
  d.p2 = p2.p2;
  d.p2_c = p2.p2_c;
  d.p2_bg = p2.p2_bg;
  d.p2_bg_c = p2.p2_bg_c;
  const R2Family r2 = r2_family(fit, null_fit);
  d.r2_fc = r2.fc;
  d.r2_fc_c = r2.fc_c;
  d.r2_lr = r2.lr;
  d.r2_lr_c = r2.lr_c;
  d.lambda = lambda_intensity(fit);
  d.null_loglik = null_fit.log_lik;
  d.null_converged = null_fit.converged;
  return d;
}

// Fits the intercept-only null model internally.
inline DiagnosticsReport diagnose(const FitResult& fit, const ModelSpec& model,
                                  const Dataset& data, const FitOptions& opts = {}) {
  return diagnose(fit, fit_null(model, data, opts));
}

}  // namespace betareg
