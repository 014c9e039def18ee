// Multinomial logit for the individual treatment propensity phi(z; x).
// Reference-category parameterization (eta_ref = 0), maximum likelihood via
// Newton-Raphson with step halving, optional ridge penalty. Covariates are
// z-scored internally for conditioning; reported coefficients are de-standardized
// back to the raw covariate scale. With ridge > 0 the penalty acts on the
// standardized scale (scale-invariant shrinkage).
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "netdirect/errors.hpp"
#include "netdirect/panel.hpp"

namespace netdirect {

struct MnlFit {
  Eigen::MatrixXd coef;  // (K-1) x (P+1); column 0 intercept, raw-scale
  int K = 0;
  int reference = 0;
  std::vector<std::string> level_names;
  bool converged = false;
  int iterations = 0;
  double loglik = 0.0;                 // unpenalized, at the final iterate
  std::vector<double> loglik_trace;    // penalized objective per iteration

  // Coefficient row r corresponds to this category index.
  int category_of_row(int r) const { return r < reference ? r : r + 1; }
};

struct MnlError : numeric_error {
  MnlError(const std::string& msg, MnlFit last, bool separation)
      : numeric_error(msg), last_iterate(std::move(last)), separation_suspected(separation) {}
  MnlFit last_iterate;
  bool separation_suspected;
};

struct MnlOptions {
  double rel_tol = 1e-8;
  int max_iterations = 100;
};

namespace mnl_detail {

// Row r of coef <-> category (r < ref ? r : r+1); label z -> coef row or -1 for ref.
inline int row_of_category(int z, int reference) {
  if (z == reference) return -1;
  return z < reference ? z : z - 1;
}

// Class probabilities for one design row given (K-1) x D coefficients.
inline Eigen::VectorXd softmax_probs(const Eigen::MatrixXd& coef, int reference,
                                     const Eigen::VectorXd& xtilde) {
  const int K = static_cast<int>(coef.rows()) + 1;
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(K);
  for (int r = 0; r < coef.rows(); ++r) {
    const int k = r < reference ? r : r + 1;
    eta[k] = coef.row(r).dot(xtilde);
  }
  const double m = eta.maxCoeff();
  Eigen::VectorXd e = (eta.array() - m).exp();
  return e / e.sum();
}

}  // namespace mnl_detail

// Unpenalized multinomial log-likelihood at coefficients `coef` ((K-1) x D, row r
// for the r-th non-reference category) on a design matrix with explicit intercept
// column. Exposed so tests can verify the analytic score by finite differences.
inline double mnl_loglik(const Eigen::MatrixXd& coef, int reference,
                         const Eigen::MatrixXd& xtilde, const std::vector<int>& z) {
  const Eigen::Index n = xtilde.rows();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(coef.rows() + 1);
    for (int r = 0; r < coef.rows(); ++r) {
      const int k = r < reference ? r : r + 1;
      eta[k] = coef.row(r).dot(xtilde.row(i));
    }
    const double m = eta.maxCoeff();
    const double lse = m + std::log((eta.array() - m).exp().sum());
    ll += eta[z[static_cast<std::size_t>(i)]] - lse;
  }
  return ll;
}

// Analytic score (gradient of mnl_loglik) stacked row-major over coef rows.
inline Eigen::VectorXd mnl_score(const Eigen::MatrixXd& coef, int reference,
                                 const Eigen::MatrixXd& xtilde, const std::vector<int>& z) {
  const Eigen::Index n = xtilde.rows();
  const int rows = static_cast<int>(coef.rows());
  const int d = static_cast<int>(coef.cols());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(rows, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd p =
        mnl_detail::softmax_probs(coef, reference, xtilde.row(i).transpose());
    for (int r = 0; r < rows; ++r) {
      const int k = r < reference ? r : r + 1;
      const double yk = z[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0;
      g.row(r) += (yk - p[k]) * xtilde.row(i);
    }
  }
  return g.reshaped<Eigen::RowMajor>();
}

inline MnlFit fit_mnl(const Eigen::MatrixXd& x, const TreatmentAssignment& z,
                      double ridge = 0.0, const MnlOptions& opts = {}) {
  const int n = static_cast<int>(x.rows());
  const int P = static_cast<int>(x.cols());
  if (z.n() != n) throw data_error("fit_mnl: covariate rows and labels misaligned");
  if (z.K < 2) throw data_error("fit_mnl: need at least two categories");
  if (ridge < 0.0) throw config_error("fit_mnl: ridge must be non-negative");
  if (!x.allFinite()) throw data_error("fit_mnl: non-finite covariate");
  std::vector<int> counts(static_cast<std::size_t>(z.K), 0);
  for (int lbl : z.labels) {
    if (lbl < 0 || lbl >= z.K) throw data_error("fit_mnl: label out of range");
    ++counts[static_cast<std::size_t>(lbl)];
  }
  for (int k = 0; k < z.K; ++k)
    if (counts[static_cast<std::size_t>(k)] == 0)
      throw data_error("fit_mnl: category '" + z.name(k) + "' has zero observations");

  // Standardize covariates; constant columns keep scale 1 (they duplicate the
  // intercept and will surface as a singular Newton system below).
  Eigen::VectorXd mu = P > 0 ? x.colwise().mean().transpose() : Eigen::VectorXd(0);
  Eigen::VectorXd sd(P);
  for (int j = 0; j < P; ++j) {
    const double v = (x.col(j).array() - mu[j]).square().sum() / std::max(1, n - 1);
    sd[j] = v > 0.0 ? std::sqrt(v) : 1.0;
  }
  Eigen::MatrixXd xt(n, P + 1);
  xt.col(0).setOnes();
  for (int j = 0; j < P; ++j) xt.col(j + 1) = (x.col(j).array() - mu[j]) / sd[j];

  const int rows = z.K - 1;
  const int d = P + 1;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(rows, d);

  auto penalized = [&](const Eigen::MatrixXd& bb) {
    return mnl_loglik(bb, z.reference, xt, z.labels) - 0.5 * ridge * bb.squaredNorm();
  };

  MnlFit fit;
  fit.K = z.K;
  fit.reference = z.reference;
  fit.level_names = z.level_names;

  double obj = penalized(b);
  fit.loglik_trace.push_back(obj);
  bool converged = false;
  int iter = 0;
  auto make_raw_fit = [&](const Eigen::MatrixXd& bs) {
    // De-standardize: slope_j = bs_j / sd_j; intercept = bs_0 - sum_j bs_j mu_j / sd_j.
    Eigen::MatrixXd raw(rows, d);
    for (int r = 0; r < rows; ++r) {
      double b0 = bs(r, 0);
      for (int j = 0; j < P; ++j) {
        raw(r, j + 1) = bs(r, j + 1) / sd[j];
        b0 -= bs(r, j + 1) * mu[j] / sd[j];
      }
      raw(r, 0) = b0;
    }
    return raw;
  };

  for (; iter < opts.max_iterations; ++iter) {
    // Score and negative Hessian of the penalized objective, stacked row-major.
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(rows * d);
    Eigen::MatrixXd neg_hess = Eigen::MatrixXd::Zero(rows * d, rows * d);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = xt.row(i).transpose();
      const Eigen::VectorXd p = mnl_detail::softmax_probs(b, z.reference, xi);
      for (int r = 0; r < rows; ++r) {
        const int k = r < z.reference ? r : r + 1;
        const double yk = z.labels[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0;
        grad.segment(r * d, d) += (yk - p[k]) * xi;
        for (int s = r; s < rows; ++s) {
          const int l = s < z.reference ? s : s + 1;
          const double wkl = p[k] * ((k == l ? 1.0 : 0.0) - p[l]);
          if (wkl != 0.0) {
            neg_hess.block(r * d, s * d, d, d) += wkl * xi * xi.transpose();
          }
        }
      }
    }
    for (int r = 0; r < rows; ++r)
      for (int s = 0; s < r; ++s)
        neg_hess.block(r * d, s * d, d, d) = neg_hess.block(s * d, r * d, d, d).transpose();
    if (ridge > 0.0) {
      grad -= ridge * b.reshaped<Eigen::RowMajor>();
      neg_hess.diagonal().array() += ridge;
    }

    Eigen::LDLT<Eigen::MatrixXd> solver(neg_hess);
    Eigen::VectorXd step = solver.solve(grad);
    // LDLT resolves exactly singular systems with finite output, so rank loss
    // must be detected from the pivots, not from solve() failing.
    const Eigen::VectorXd pivots = solver.vectorD().cwiseAbs();
    const bool singular = solver.info() != Eigen::Success || !step.allFinite() ||
                          !(pivots.maxCoeff() > 0.0) ||
                          pivots.minCoeff() < 1e-12 * pivots.maxCoeff();
    if (singular) {
      fit.coef = make_raw_fit(b);
      fit.iterations = iter;
      fit.loglik = mnl_loglik(b, z.reference, xt, z.labels);
      const bool sep = b.cwiseAbs().maxCoeff() > 15.0;
      throw MnlError(std::string("fit_mnl: singular Newton system (collinear or constant "
                                 "covariates") +
                         (sep ? "; quasi-separation suspected" : "?") + ")",
                     fit, sep);
    }

    // Step halving on the penalized objective.
    double scale = 1.0;
    Eigen::MatrixXd b_new;
    double obj_new = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < 40; ++h) {
      b_new = b + scale * step.reshaped<Eigen::RowMajor>(rows, d);
      obj_new = penalized(b_new);
      if (obj_new >= obj) break;
      scale *= 0.5;
    }
    if (obj_new < obj) {
      // No ascent direction produced an improvement; accept only if the gradient
      // already vanished, otherwise report non-convergence.
      if (grad.lpNorm<Eigen::Infinity>() < 1e-8 * (std::abs(obj) + 1.0)) {
        converged = true;
        break;
      }
      fit.coef = make_raw_fit(b);
      fit.iterations = iter;
      fit.loglik = mnl_loglik(b, z.reference, xt, z.labels);
      const bool sep = b.cwiseAbs().maxCoeff() > 15.0;
      throw MnlError(std::string("fit_mnl: step-halving stalled") +
                         (sep ? " (quasi-separation suspected)" : ""),
                     fit, sep);
    }
    const double delta = obj_new - obj;
    b = b_new;
    obj = obj_new;
    fit.loglik_trace.push_back(obj);
    if (std::abs(delta) <= opts.rel_tol * (std::abs(obj) + 1e-10)) {
      converged = true;
      ++iter;
      break;
    }
  }

  fit.coef = make_raw_fit(b);
  fit.iterations = iter;
  fit.loglik = mnl_loglik(b, z.reference, xt, z.labels);
  fit.converged = converged;
  // On separated data the log-likelihood saturates toward 0 and the objective
  // delta vanishes even though no finite MLE exists; catch the divergent
  // iterate here. Ridge > 0 bounds the optimum, so only unpenalized fits can
  // legitimately trip this.
  if (converged && ridge == 0.0 && b.cwiseAbs().maxCoeff() > 15.0) {
    fit.converged = false;
    throw MnlError(
        "fit_mnl: coefficients diverged on the standardized scale "
        "(quasi-separation suspected; consider ridge > 0)",
        fit, true);
  }
  if (!converged) {
    const bool sep =
        b.cwiseAbs().maxCoeff() > 15.0 ||
        [&] {
          for (int i = 0; i < n; ++i)
            if (mnl_detail::softmax_probs(b, z.reference, xt.row(i).transpose()).maxCoeff() >
                1.0 - 1e-10)
              return true;
          return false;
        }();
    throw MnlError(std::string("fit_mnl: no convergence in ") +
                       std::to_string(opts.max_iterations) + " iterations" +
                       (sep ? " (quasi-separation suspected; consider ridge > 0)" : ""),
                   fit, sep);
  }
  return fit;
}

// All K class probabilities at a raw covariate vector.
inline Eigen::VectorXd predict_probs(const MnlFit& fit, const Eigen::VectorXd& x) {
  if (static_cast<int>(x.size()) + 1 != static_cast<int>(fit.coef.cols()))
    throw data_error("predict_probs: covariate length mismatch");
  if (!x.allFinite()) throw data_error("predict_probs: non-finite covariate");
  Eigen::VectorXd xtilde(x.size() + 1);
  xtilde[0] = 1.0;
  xtilde.tail(x.size()) = x;
  return mnl_detail::softmax_probs(fit.coef, fit.reference, xtilde);
}

// phi(z; x): probability of category z at covariates x; strictly inside (0,1).
inline double predict_phi(const MnlFit& fit, int z, const Eigen::VectorXd& x) {
  if (z < 0 || z >= fit.K) throw data_error("predict_phi: unknown category index");
  return predict_probs(fit, x)[z];
}

}  // namespace netdirect
