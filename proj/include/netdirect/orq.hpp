// Ordered-quantile normalization: x -> Phi^-1(rank(x) / (n+1)), ties receiving
// mid-ranks. The fitted map supports monotone out-of-sample application (linear
// rank interpolation between distinct training values, clamped at the extremes)
// and a monotone inverse back to the original scale.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "netdirect/errors.hpp"
#include "netdirect/stats.hpp"

namespace netdirect {

class OrqMap {
 public:
  OrqMap() = default;

  // values: distinct sorted training values; ranks: their mid-ranks on 1..n.
  OrqMap(std::vector<double> values, std::vector<double> ranks, std::size_t n)
      : values_(std::move(values)), ranks_(std::move(ranks)), n_(n) {}

  std::size_t training_size() const { return n_; }
  const std::vector<double>& knot_values() const { return values_; }
  const std::vector<double>& knot_ranks() const { return ranks_; }

  // Out-of-sample transform: exact at training values, linear rank interpolation
  // between adjacent distinct training values, clamped to ranks 1 and n outside
  // the training range.
  double apply(double x) const {
    check_fitted();
    if (!std::isfinite(x)) throw data_error("orq apply: non-finite input");
    double r;
    if (x < values_.front()) {
      r = 1.0;
    } else if (x > values_.back()) {
      r = static_cast<double>(n_);
    } else {
      const auto it = std::lower_bound(values_.begin(), values_.end(), x);
      const std::size_t j = static_cast<std::size_t>(it - values_.begin());
      if (j < values_.size() && values_[j] == x) {
        r = ranks_[j];
      } else {
        const double x0 = values_[j - 1], x1 = values_[j];
        const double r0 = ranks_[j - 1], r1 = ranks_[j];
        r = r0 + (x - x0) / (x1 - x0) * (r1 - r0);
      }
    }
    return normal_quantile(r / static_cast<double>(n_ + 1));
  }

  // Monotone inverse: maps a transformed value back to the original scale.
  // Target ranks are clamped to the fitted rank range; ranks within 1e-9 of a
  // knot snap to it so training points round-trip exactly.
  double inverse(double g_star) const {
    check_fitted();
    if (!std::isfinite(g_star)) throw data_error("orq inverse: non-finite input");
    double r = normal_cdf(g_star) * static_cast<double>(n_ + 1);
    r = std::min(std::max(r, ranks_.front()), ranks_.back());
    const auto it = std::lower_bound(ranks_.begin(), ranks_.end(), r);
    std::size_t j = static_cast<std::size_t>(it - ranks_.begin());
    if (j == ranks_.size()) j = ranks_.size() - 1;
    if (std::abs(ranks_[j] - r) < 1e-9) return values_[j];
    if (j > 0 && std::abs(ranks_[j - 1] - r) < 1e-9) return values_[j - 1];
    const double r0 = ranks_[j - 1], r1 = ranks_[j];
    const double x0 = values_[j - 1], x1 = values_[j];
    return x0 + (r - r0) / (r1 - r0) * (x1 - x0);
  }

 private:
  void check_fitted() const {
    if (values_.empty()) throw config_error("orq map is not fitted");
  }

  std::vector<double> values_;
  std::vector<double> ranks_;
  std::size_t n_ = 0;
};

struct OrqFit {
  OrqMap map;
  std::vector<double> transformed;  // same order as the input
};

// Fits the transform on one column and returns the transformed training values.
// A constant column (zero variance) cannot be rank-normalized and is an error.
inline OrqFit orq_fit_transform(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) throw data_error("orq fit: need at least 2 observations");
  for (double v : x)
    if (!std::isfinite(v)) throw data_error("orq fit: non-finite input");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  if (x[order.front()] == x[order.back()])
    throw numeric_error("orq fit: degenerate constant column");

  std::vector<double> rank_of(n);
  std::vector<double> knot_values, knot_ranks;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) rank_of[order[k]] = mid;
    knot_values.push_back(x[order[i]]);
    knot_ranks.push_back(mid);
    i = j + 1;
  }

  OrqFit fit;
  fit.map = OrqMap(std::move(knot_values), std::move(knot_ranks), n);
  fit.transformed.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    fit.transformed[k] = normal_quantile(rank_of[k] / static_cast<double>(n + 1));
  return fit;
}

// Column-wise fit over a matrix; returns one map per column plus the transformed
// matrix. Errors mention the offending column name when provided.
inline std::pair<std::vector<OrqMap>, Eigen::MatrixXd> orq_fit_columns(
    const Eigen::MatrixXd& m, const std::vector<std::string>& col_names = {}) {
  std::vector<OrqMap> maps;
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    std::vector<double> col(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) col[static_cast<std::size_t>(r)] = m(r, c);
    try {
      OrqFit fit = orq_fit_transform(col);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        out(r, c) = fit.transformed[static_cast<std::size_t>(r)];
      maps.push_back(std::move(fit.map));
    } catch (const error& e) {
      const std::string name = static_cast<std::size_t>(c) < col_names.size()
                                   ? col_names[static_cast<std::size_t>(c)]
                                   : std::to_string(c);
      throw numeric_error("orq fit on column '" + name + "': " + e.what());
    }
  }
  return {std::move(maps), std::move(out)};
}

}  // namespace netdirect
