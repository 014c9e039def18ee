// Neighborhood propensity lambda(g; z, x_g): multivariate multiple linear
// regression of the K transformed exposure components on an intercept, the
// neighborhood covariates (which include vertex centrality) and K-1 treatment
// dummies, with a joint multivariate-normal error. Per-response OLS gives the
// coefficient matrix; Sigma = R'R / (N - p). Density evaluation uses the correct
// (2*pi)^(K/2) normalization and a Cholesky factor with escalating diagonal
// jitter (1e-10 to 1e-6) when Sigma is numerically non-positive-definite.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "netdirect/errors.hpp"
#include "netdirect/panel.hpp"

namespace netdirect {

namespace mvlr_detail {

inline Eigen::VectorXd design_row(const Eigen::VectorXd& x_g, int z, int K, int reference) {
  Eigen::VectorXd d(1 + x_g.size() + (K - 1));
  d[0] = 1.0;
  d.segment(1, x_g.size()) = x_g;
  d.tail(K - 1).setZero();
  if (z != reference) {
    const int r = z < reference ? z : z - 1;
    d[1 + x_g.size() + r] = 1.0;
  }
  return d;
}

}  // namespace mvlr_detail

struct MvlrFit {
  Eigen::MatrixXd coef;   // p x K, p = 1 + P_g + (K-1); responses in level order
  Eigen::MatrixXd sigma;  // K x K error covariance, symmetric PSD
  double dof = 0.0;       // N - p
  int K = 0;
  int reference = 0;
  int p_g = 0;  // neighborhood covariate count
  std::vector<std::string> level_names;
  std::vector<std::string> term_names;

  // Cholesky state for density evaluation, prepared at fit time so evaluation is
  // const and thread-safe. `valid` false defers the failure to evaluation.
  Eigen::MatrixXd chol_lower;
  double log_det_sigma = 0.0;
  double jitter_applied = 0.0;
  bool chol_valid = false;

  Eigen::VectorXd mean(int z, const Eigen::VectorXd& x_g) const {
    if (z < 0 || z >= K) throw data_error("mvlr mean: unknown category index");
    if (static_cast<int>(x_g.size()) != p_g)
      throw data_error("mvlr mean: neighborhood covariate length mismatch");
    return coef.transpose() * mvlr_detail::design_row(x_g, z, K, reference);
  }

  double log_density(const Eigen::VectorXd& g, int z, const Eigen::VectorXd& x_g) const {
    if (static_cast<int>(g.size()) != K)
      throw data_error("mvlr density: exposure vector length mismatch");
    if (!g.allFinite() || !x_g.allFinite())
      throw data_error("mvlr density: non-finite input");
    if (!chol_valid)
      throw numeric_error(
          "mvlr density: sigma not positive-definite after jitter escalation to 1e-6");
    const Eigen::VectorXd r =
        chol_lower.triangularView<Eigen::Lower>().solve(g - mean(z, x_g));
    constexpr double kLog2Pi = 1.8378770664093454836;
    return -0.5 * (K * kLog2Pi + log_det_sigma + r.squaredNorm());
  }

  double density(const Eigen::VectorXd& g, int z, const Eigen::VectorXd& x_g) const {
    return std::exp(log_density(g, z, x_g));
  }
};

namespace mvlr_detail {

inline void prepare_cholesky(MvlrFit& fit) {
  const double jitters[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  for (double eps : jitters) {
    Eigen::MatrixXd s = fit.sigma;
    if (eps > 0.0) s.diagonal().array() += eps;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd lower = llt.matrixL();
    const Eigen::VectorXd d = lower.diagonal();
    // LLT can numerically succeed on an exactly singular sigma (the zero pivot
    // rounds to a tiny positive value), so rank collapse is detected from the
    // pivot ratio rather than from info() alone.
    if (!(d.minCoeff() > 0.0) || d.minCoeff() < 1e-6 * d.maxCoeff()) continue;
    const double log_det = 2.0 * d.array().log().sum();
    if (!std::isfinite(log_det)) continue;
    fit.chol_lower = std::move(lower);
    fit.log_det_sigma = log_det;
    fit.jitter_applied = eps;
    fit.chol_valid = true;
    return;
  }
  fit.chol_valid = false;
}

}  // namespace mvlr_detail

inline MvlrFit fit_mvlr(const Eigen::MatrixXd& g_star, const TreatmentAssignment& z,
                        const Eigen::MatrixXd& x_g,
                        const std::vector<std::string>& covariate_names = {}) {
  const int n = static_cast<int>(g_star.rows());
  const int K = z.K;
  if (z.n() != n) throw data_error("fit_mvlr: responses and labels misaligned");
  if (static_cast<int>(x_g.rows()) != n)
    throw data_error("fit_mvlr: responses and covariates misaligned");
  if (static_cast<int>(g_star.cols()) != K)
    throw data_error("fit_mvlr: response matrix must have K columns");
  if (!g_star.allFinite() || !x_g.allFinite())
    throw data_error("fit_mvlr: non-finite input");

  const int p_g = static_cast<int>(x_g.cols());
  const int p = 1 + p_g + (K - 1);
  if (n < p + 2)
    throw data_error("fit_mvlr: need at least " + std::to_string(p + 2) +
                     " observations for " + std::to_string(p) + " design columns");

  Eigen::MatrixXd D(n, p);
  for (int i = 0; i < n; ++i)
    D.row(i) = mvlr_detail::design_row(x_g.row(i).transpose(),
                                       z.labels[static_cast<std::size_t>(i)], K, z.reference)
                   .transpose();

  MvlrFit fit;
  fit.K = K;
  fit.reference = z.reference;
  fit.p_g = p_g;
  fit.level_names = z.level_names;
  fit.term_names.push_back("intercept");
  for (int j = 0; j < p_g; ++j)
    fit.term_names.push_back(static_cast<std::size_t>(j) < covariate_names.size()
                                 ? covariate_names[static_cast<std::size_t>(j)]
                                 : "xg" + std::to_string(j));
  for (int k = 0; k < K; ++k)
    if (k != z.reference) fit.term_names.push_back("z:" + z.name(k));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  if (qr.rank() < p) {
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (int j = static_cast<int>(qr.rank()); j < p; ++j) {
      if (!cols.empty()) cols += ", ";
      cols += fit.term_names[static_cast<std::size_t>(perm[j])];
    }
    throw numeric_error("fit_mvlr: rank-deficient design; collinear columns: " + cols);
  }
  fit.coef = qr.solve(g_star);
  const Eigen::MatrixXd resid = g_star - D * fit.coef;
  fit.dof = static_cast<double>(n - p);
  fit.sigma = (resid.transpose() * resid) / fit.dof;
  fit.sigma = 0.5 * (fit.sigma + fit.sigma.transpose());  // exact symmetry
  mvlr_detail::prepare_cholesky(fit);
  return fit;
}

// lambda(g; z, x_g): multivariate-normal density of exposure vector g under the
// fitted model, at treatment z and neighborhood covariates x_g.
inline double lambda_density(const MvlrFit& fit, const Eigen::VectorXd& g, int z,
                             const Eigen::VectorXd& x_g) {
  return fit.density(g, z, x_g);
}

// Per-unit density at the unit's own (g*, z, x_g).
inline Eigen::VectorXd predict_actual_lambda(const MvlrFit& fit, const Eigen::MatrixXd& g_star,
                                             const TreatmentAssignment& z,
                                             const Eigen::MatrixXd& x_g) {
  const int n = static_cast<int>(g_star.rows());
  if (z.n() != n || static_cast<int>(x_g.rows()) != n)
    throw data_error("predict_actual_lambda: misaligned inputs");
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i)
    out[i] = fit.density(g_star.row(i).transpose(), z.labels[static_cast<std::size_t>(i)],
                         x_g.row(i).transpose());
  return out;
}

}  // namespace netdirect
