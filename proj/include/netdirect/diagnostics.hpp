// Finite-sample checks of the balancing property and of the rank-quantile
// transform's normality.
//
// The joint propensity pair (phi_hat, lambda_hat) is a balancing score: given
// the scores for a category z — both functions of covariates and exposure
// only, evaluated at every row — membership in z carries no further
// information about the covariates. `covariate_balance` operationalizes this
// per category: cut the whole sample into quantile bins of that category's
// scores and compare rows assigned to z against the rest within each bin.
// Binning each row by its own-category score instead would slice through the
// per-category score clusters and select rows by fitted noise, manufacturing
// imbalance even under a randomized assignment.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "netdirect/errors.hpp"
#include "netdirect/stats.hpp"

namespace netdirect {

struct BalanceRow {
  std::string covariate;
  double raw_smd = 0.0;            // all rows treated as one stratum
  double within_smd_median = 0.0;  // median across usable (category, stratum) cells
  int strata_used = 0;             // usable cells: both sides have 2+ rows
};

struct NormalityRow {
  std::string column;
  int n = 0;
  double ks = 0.0;  // Kolmogorov-Smirnov distance to the standard normal
};

namespace diag_detail {

// Bin assignment by type-7 quantile edges; degenerate edges collapse bins.
inline std::vector<int> quantile_bins(const Eigen::VectorXd& v, int bins) {
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  for (int b = 1; b < bins; ++b)
    edges.push_back(quantile(sorted, static_cast<double>(b) / static_cast<double>(bins)));
  std::vector<int> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    int bin = 0;
    while (bin < static_cast<int>(edges.size()) && v[i] > edges[static_cast<std::size_t>(bin)]) ++bin;
    out[static_cast<std::size_t>(i)] = bin;
  }
  return out;
}

// Max pairwise |mean difference| across categories for one covariate within
// one stratum, scaled by the full-sample sd. Categories need >= 2 rows to
// contribute a mean; returns false when fewer than two categories qualify.
inline bool stratum_smd(const Eigen::MatrixXd& x, const std::vector<int>& labels, int K,
                        const std::vector<int>& rows, int col, double full_sd, double& out) {
  std::vector<double> sum(static_cast<std::size_t>(K), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(K), 0);
  for (int r : rows) {
    sum[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])] += x(r, col);
    ++cnt[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])];
  }
  double max_diff = 0.0;
  int used = 0;
  for (int a = 0; a < K; ++a) {
    if (cnt[static_cast<std::size_t>(a)] < 2) continue;
    ++used;
    for (int b = a + 1; b < K; ++b) {
      if (cnt[static_cast<std::size_t>(b)] < 2) continue;
      const double diff = std::abs(sum[static_cast<std::size_t>(a)] / cnt[static_cast<std::size_t>(a)] -
                                   sum[static_cast<std::size_t>(b)] / cnt[static_cast<std::size_t>(b)]);
      max_diff = std::max(max_diff, diff);
    }
  }
  if (used < 2) return false;
  // A constant covariate has sd 0 and zero differences: report 0, not NaN.
  out = full_sd > 0.0 ? max_diff / full_sd : 0.0;
  return true;
}

// |mean(category z) - mean(rest)| / full-sample sd within one stratum.
// Both sides need >= 2 rows; returns false otherwise.
inline bool split_smd(const Eigen::MatrixXd& x, const std::vector<int>& labels, int z,
                      const std::vector<int>& rows, int col, double full_sd, double& out) {
  double sum_z = 0.0, sum_rest = 0.0;
  int n_z = 0, n_rest = 0;
  for (int r : rows) {
    if (labels[static_cast<std::size_t>(r)] == z) {
      sum_z += x(r, col);
      ++n_z;
    } else {
      sum_rest += x(r, col);
      ++n_rest;
    }
  }
  if (n_z < 2 || n_rest < 2) return false;
  const double diff = std::abs(sum_z / n_z - sum_rest / n_rest);
  out = full_sd > 0.0 ? diff / full_sd : 0.0;
  return true;
}

}  // namespace diag_detail

// Balance of each covariate across treatment categories: the raw standardized
// difference over the whole sample, and the median standardized difference
// between each category and the rest within quantile strata of that
// category's scores. `phi` holds the fitted assignment probability of every
// category at every row (n x K); `lambda` likewise holds the neighborhood
// density of the observed exposure under every category, or null when there
// is no neighborhood score (a zero-interference configuration).
inline std::vector<BalanceRow> covariate_balance(const Eigen::MatrixXd& x,
                                                 const std::vector<std::string>& names,
                                                 const std::vector<int>& labels, int K,
                                                 const Eigen::MatrixXd& phi,
                                                 const Eigen::MatrixXd* lambda,
                                                 int phi_bins = 5, int lambda_bins = 3) {
  const int n = static_cast<int>(x.rows());
  if (n == 0) throw data_error("covariate_balance: empty sample");
  if (static_cast<int>(labels.size()) != n || phi.rows() != n ||
      (lambda != nullptr && lambda->rows() != n))
    throw data_error("covariate_balance: rows, labels and scores are misaligned");
  if (static_cast<int>(phi.cols()) != K || (lambda != nullptr && static_cast<int>(lambda->cols()) != K))
    throw data_error("covariate_balance: scores must cover every treatment category");
  if (static_cast<Eigen::Index>(names.size()) != x.cols())
    throw data_error("covariate_balance: covariate name count mismatch");
  if (phi_bins < 1 || lambda_bins < 1)
    throw config_error("covariate_balance: bin counts must be positive");

  // Per category: group every row (whatever its assignment) by the quantile
  // bins of that category's scores.
  std::vector<std::vector<std::vector<int>>> cells(static_cast<std::size_t>(K));
  for (int z = 0; z < K; ++z) {
    const std::vector<int> pb = diag_detail::quantile_bins(phi.col(z), phi_bins);
    std::vector<int> lb(static_cast<std::size_t>(n), 0);
    if (lambda != nullptr) lb = diag_detail::quantile_bins(lambda->col(z), lambda_bins);
    auto& strata = cells[static_cast<std::size_t>(z)];
    strata.assign(static_cast<std::size_t>(phi_bins) * static_cast<std::size_t>(lambda_bins), {});
    for (int i = 0; i < n; ++i)
      strata[static_cast<std::size_t>(pb[static_cast<std::size_t>(i)] * lambda_bins +
                                      lb[static_cast<std::size_t>(i)])]
          .push_back(i);
  }
  std::vector<int> all_rows(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all_rows[static_cast<std::size_t>(i)] = i;

  std::vector<BalanceRow> out;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<double> col(x.col(j).data(), x.col(j).data() + n);
    const double full_sd = sample_sd(col);
    BalanceRow row;
    row.covariate = names[static_cast<std::size_t>(j)];
    if (!diag_detail::stratum_smd(x, labels, K, all_rows, static_cast<int>(j), full_sd,
                                  row.raw_smd))
      throw data_error("covariate_balance: fewer than two treatment categories with 2+ rows");
    std::vector<double> within;
    for (int z = 0; z < K; ++z) {
      for (const auto& rows : cells[static_cast<std::size_t>(z)]) {
        if (rows.empty()) continue;
        double s = 0.0;
        if (diag_detail::split_smd(x, labels, z, rows, static_cast<int>(j), full_sd, s))
          within.push_back(s);
      }
    }
    if (within.empty())
      throw data_error("covariate_balance: no stratum has 2+ rows on both sides of a category");
    row.strata_used = static_cast<int>(within.size());
    std::sort(within.begin(), within.end());
    const std::size_t m = within.size();
    row.within_smd_median =
        m % 2 == 1 ? within[m / 2] : 0.5 * (within[m / 2 - 1] + within[m / 2]);
    out.push_back(std::move(row));
  }
  return out;
}

// Kolmogorov-Smirnov distance of each transformed exposure column to the
// standard normal.
inline std::vector<NormalityRow> orq_normality(const Eigen::MatrixXd& g_star,
                                               const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != g_star.cols())
    throw data_error("orq_normality: column name count mismatch");
  std::vector<NormalityRow> out;
  for (Eigen::Index j = 0; j < g_star.cols(); ++j) {
    std::vector<double> col(g_star.col(j).data(), g_star.col(j).data() + g_star.rows());
    NormalityRow row;
    row.column = names[static_cast<std::size_t>(j)];
    row.n = static_cast<int>(col.size());
    row.ks = ks_distance(col, [](double v) { return normal_cdf(v); });
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace netdirect
