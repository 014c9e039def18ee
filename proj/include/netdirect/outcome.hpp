// Outcome imputation model: OLS of the observed outcome on an intercept, K-1
// treatment dummies, the K transformed exposure components, the two estimated
// propensities (phi as a scalar regressor, lambda as a scalar regressor) and
// time fixed effects. Potential outcomes are imputed as model means (no noise
// draw). The exposure block and the lambda regressor are omitted when the run
// has no interference channel (all-zero exposure).
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "netdirect/errors.hpp"
#include "netdirect/panel.hpp"

namespace netdirect {

struct OutcomeFit {
  Eigen::VectorXd coef;
  double residual_variance = 0.0;
  double dof = 0.0;
  int K = 0;
  int reference = 0;
  std::vector<std::string> level_names;
  int n_exposure = 0;        // K when the exposure block is present, else 0
  bool has_lambda = false;
  std::vector<int> time_levels;  // sorted; first level is the FE reference
  std::vector<std::string> term_names;

  // Layout: [intercept][K-1 z dummies][n_exposure g* columns][phi][lambda?][T-1 time dummies]
  int p() const { return static_cast<int>(coef.size()); }

  int time_dummy_offset() const { return 1 + (K - 1) + n_exposure + 1 + (has_lambda ? 1 : 0); }

  Eigen::VectorXd design_row(int z, const Eigen::VectorXd& g, double phi, double lambda,
                             int time) const {
    if (z < 0 || z >= K) throw data_error("outcome design: unknown category index");
    if (static_cast<int>(g.size()) != n_exposure)
      throw data_error("outcome design: exposure vector length mismatch");
    const auto it = std::lower_bound(time_levels.begin(), time_levels.end(), time);
    if (it == time_levels.end() || *it != time)
      throw data_error("outcome design: unknown time level " + std::to_string(time));
    Eigen::VectorXd d = Eigen::VectorXd::Zero(p());
    d[0] = 1.0;
    if (z != reference) d[1 + (z < reference ? z : z - 1)] = 1.0;
    for (int k = 0; k < n_exposure; ++k) d[1 + (K - 1) + k] = g[k];
    d[1 + (K - 1) + n_exposure] = phi;
    if (has_lambda) d[1 + (K - 1) + n_exposure + 1] = lambda;
    const int t = static_cast<int>(it - time_levels.begin());
    if (t > 0) d[time_dummy_offset() + (t - 1)] = 1.0;
    return d;
  }

  // Model-mean imputation of the potential outcome at (z, g) for a unit with the
  // given propensity values and time period.
  double impute(int z, const Eigen::VectorXd& g, double phi, double lambda, int time) const {
    return coef.dot(design_row(z, g, phi, lambda, time));
  }

  // Decomposed evaluation used by the grid loop: impute(...) == impute_base(z,
  // phi, time) + exposure_coefs() . g + lambda_coef() * lambda up to floating
  // reassociation. Unit-tested against impute().
  double impute_base(int z, double phi, int time) const {
    return impute(z, Eigen::VectorXd::Zero(n_exposure), phi, 0.0, time);
  }
  Eigen::VectorXd exposure_coefs() const { return coef.segment(1 + (K - 1), n_exposure); }
  double lambda_coef() const {
    return has_lambda ? coef[1 + (K - 1) + n_exposure + 1] : 0.0;
  }
};

// Fits the imputation model. Pass an n x 0 g_star and empty lambda_hat for the
// no-interference configuration. Requires at least two distinct time values.
inline OutcomeFit fit_outcome(const Eigen::VectorXd& y, const TreatmentAssignment& z,
                              const Eigen::MatrixXd& g_star, const Eigen::VectorXd& phi_hat,
                              const Eigen::VectorXd& lambda_hat, const std::vector<int>& times) {
  const int n = static_cast<int>(y.size());
  if (z.n() != n || static_cast<int>(phi_hat.size()) != n ||
      static_cast<int>(times.size()) != n)
    throw data_error("fit_outcome: misaligned inputs");
  const bool with_exposure = g_star.cols() > 0;
  if (with_exposure && static_cast<int>(g_star.rows()) != n)
    throw data_error("fit_outcome: exposure rows misaligned");
  if (with_exposure && static_cast<int>(g_star.cols()) != z.K)
    throw data_error("fit_outcome: exposure must have K columns");
  const bool with_lambda = lambda_hat.size() > 0;
  if (with_lambda && static_cast<int>(lambda_hat.size()) != n)
    throw data_error("fit_outcome: lambda rows misaligned");
  if (with_exposure != with_lambda)
    throw data_error("fit_outcome: exposure block and lambda must be supplied together");
  if (!y.allFinite() || !phi_hat.allFinite() || (with_exposure && !g_star.allFinite()) ||
      (with_lambda && !lambda_hat.allFinite()))
    throw data_error("fit_outcome: non-finite input");

  OutcomeFit fit;
  fit.K = z.K;
  fit.reference = z.reference;
  fit.level_names = z.level_names;
  fit.n_exposure = with_exposure ? z.K : 0;
  fit.has_lambda = with_lambda;
  {
    std::set<int> t(times.begin(), times.end());
    if (t.size() < 2)
      throw data_error("fit_outcome: need at least two distinct time values for fixed effects");
    fit.time_levels.assign(t.begin(), t.end());
  }

  const int T = static_cast<int>(fit.time_levels.size());
  const int p = 1 + (z.K - 1) + fit.n_exposure + 1 + (with_lambda ? 1 : 0) + (T - 1);
  if (n < p + 1)
    throw data_error("fit_outcome: need more than " + std::to_string(p) +
                     " observations for " + std::to_string(p) + " design columns");

  fit.term_names.push_back("intercept");
  for (int k = 0; k < z.K; ++k)
    if (k != z.reference) fit.term_names.push_back("z:" + z.name(k));
  for (int k = 0; k < fit.n_exposure; ++k) fit.term_names.push_back("gstar:" + z.name(k));
  fit.term_names.push_back("phi_hat");
  if (with_lambda) fit.term_names.push_back("lambda_hat");
  for (int t = 1; t < T; ++t)
    fit.term_names.push_back("year:" + std::to_string(fit.time_levels[static_cast<std::size_t>(t)]));

  fit.coef = Eigen::VectorXd::Zero(p);  // sized so design_row works during assembly
  Eigen::MatrixXd D(n, p);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd g =
        with_exposure ? Eigen::VectorXd(g_star.row(i)) : Eigen::VectorXd(0);
    D.row(i) = fit.design_row(z.labels[static_cast<std::size_t>(i)], g, phi_hat[i],
                              with_lambda ? lambda_hat[i] : 0.0, times[static_cast<std::size_t>(i)])
                   .transpose();
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  if (qr.rank() < p) {
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (int j = static_cast<int>(qr.rank()); j < p; ++j) {
      if (!cols.empty()) cols += ", ";
      cols += fit.term_names[static_cast<std::size_t>(perm[j])];
    }
    throw numeric_error("fit_outcome: rank-deficient design; collinear columns: " + cols);
  }
  fit.coef = qr.solve(y);
  const Eigen::VectorXd resid = y - D * fit.coef;
  fit.dof = static_cast<double>(n - p);
  fit.residual_variance = resid.squaredNorm() / fit.dof;
  return fit;
}

inline double impute_potential_outcome(const OutcomeFit& fit, int z, const Eigen::VectorXd& g,
                                       double phi, double lambda, int time) {
  return fit.impute(z, g, phi, lambda, time);
}

}  // namespace netdirect
