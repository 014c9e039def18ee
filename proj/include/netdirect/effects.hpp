// Grid-weighted direct effects and their bootstrap.
//
// tau_hat(z', z) = (1/n) * sum_i sum_{g in grid} w_i(g) * [Yhat_i(z', g) - Yhat_i(z, g)]
// with per-unit weights w_i(g) proportional to lambda_hat(g; z, x_g_i), the
// neighborhood propensity at the contrast's baseline category (as printed in the
// estimation procedure); a config switch averages the two categories' densities
// instead. Standard errors and percentile intervals come from a unit-level
// nonparametric bootstrap that refits the entire pipeline per replicate.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "netdirect/csv.hpp"
#include "netdirect/errors.hpp"
#include "netdirect/pipeline.hpp"
#include "netdirect/rng.hpp"
#include "netdirect/stats.hpp"

namespace netdirect {

struct Grid {
  Eigen::MatrixXd points;  // M x K, rows lexicographic; 1 x 0 when no interference
  std::vector<std::pair<double, double>> bounds;
  int per_dim = 0;

  int M() const { return static_cast<int>(points.rows()); }
  int K() const { return static_cast<int>(points.cols()); }

  static Grid single_empty() {
    Grid g;
    g.points.resize(1, 0);
    g.per_dim = 1;
    return g;
  }
};

// Cartesian product of per-dimension equally spaced values between the q_low and
// q_high marginal quantiles of the fitted transformed-exposure columns. Points
// are ordered lexicographically (first dimension slowest). The point count
// per_dim^K is capped before allocation.
inline Grid build_grid(const Eigen::MatrixXd& g_star, int per_dim, double q_low = 0.05,
                       double q_high = 0.95, std::size_t cap = 1000000) {
  const int K = static_cast<int>(g_star.cols());
  if (K < 1) throw config_error("build_grid: need at least one exposure dimension");
  if (g_star.rows() < 2) throw data_error("build_grid: need at least two rows");
  if (per_dim < 2) throw config_error("build_grid: per_dim must be at least 2");
  if (!(q_low >= 0.0 && q_low < q_high && q_high <= 1.0))
    throw config_error("build_grid: need 0 <= q_low < q_high <= 1");

  std::size_t total = 1;
  for (int k = 0; k < K; ++k) {
    if (total > cap / static_cast<std::size_t>(per_dim))
      throw config_error("build_grid: " + std::to_string(per_dim) + "^" + std::to_string(K) +
                         " grid points would exceed the cap of " + std::to_string(cap));
    total *= static_cast<std::size_t>(per_dim);
  }

  Grid grid;
  grid.per_dim = per_dim;
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    std::vector<double> col(static_cast<std::size_t>(g_star.rows()));
    for (Eigen::Index r = 0; r < g_star.rows(); ++r) col[static_cast<std::size_t>(r)] = g_star(r, k);
    const double lo = quantile(col, q_low);
    const double hi = quantile(col, q_high);
    grid.bounds.emplace_back(lo, hi);
    auto& axis = axes[static_cast<std::size_t>(k)];
    axis.resize(static_cast<std::size_t>(per_dim));
    for (int s = 0; s < per_dim; ++s)
      axis[static_cast<std::size_t>(s)] =
          lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(per_dim - 1);
  }

  grid.points.resize(static_cast<Eigen::Index>(total), K);
  std::vector<int> idx(static_cast<std::size_t>(K), 0);
  for (std::size_t m = 0; m < total; ++m) {
    for (int k = 0; k < K; ++k)
      grid.points(static_cast<Eigen::Index>(m), k) =
          axes[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    for (int k = K - 1; k >= 0; --k) {  // first dimension slowest
      if (++idx[static_cast<std::size_t>(k)] < per_dim) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
  }
  return grid;
}

inline Grid make_grid(const FittedPipeline& fp, const PipelineOptions& opts) {
  if (!fp.interference) return Grid::single_empty();
  return build_grid(fp.g_star, opts.grid_per_dim, opts.grid_q_low, opts.grid_q_high,
                    opts.grid_cap);
}

enum class WeightMode { BaselineZ, Symmetrized };

namespace effects_detail {

// Whitened grid points, shared by every unit and category within one
// estimation pass: with a = L^-1 g_m and b = L^-1 mu, the log density is
//   -0.5 (K log 2pi + log|Sigma| + |a|^2 + |b|^2) + a.b,
// so the per-grid-point triangular solves happen once and each (unit,
// category) costs one K x K solve plus one M x K matrix-vector product.
struct GridDensityCache {
  Eigen::MatrixXd whitened;  // M x K, row m = L^-1 g_m
  Eigen::VectorXd base;      // M, constant - 0.5 |a_m|^2

  GridDensityCache(const MvlrFit& mv, const Grid& grid) {
    if (!mv.chol_valid)
      throw numeric_error(
          "grid weights: sigma not positive-definite after jitter escalation to 1e-6");
    whitened =
        mv.chol_lower.triangularView<Eigen::Lower>().solve(grid.points.transpose()).transpose();
    constexpr double kLog2Pi = 1.8378770664093454836;
    base = (-0.5 * whitened.rowwise().squaredNorm().array() -
            0.5 * (mv.K * kLog2Pi + mv.log_det_sigma))
               .matrix();
  }
};

// Log multivariate-normal densities of all grid points at the unit's (z, x_g).
inline Eigen::VectorXd grid_log_density(const GridDensityCache& cache, const MvlrFit& mv,
                                        int z, const Eigen::VectorXd& x_g) {
  const Eigen::VectorXd b =
      mv.chol_lower.triangularView<Eigen::Lower>().solve(mv.mean(z, x_g));
  return cache.base + cache.whitened * b - Eigen::VectorXd::Constant(cache.base.size(),
                                                                     0.5 * b.squaredNorm());
}

inline Eigen::VectorXd normalized_weights(const Eigen::VectorXd& logw,
                                          const std::string& row_id) {
  const double m = logw.maxCoeff();
  if (!std::isfinite(m))
    throw numeric_error("grid weights vanished for unit " + row_id +
                        ": all neighborhood densities underflowed");
  Eigen::VectorXd w = (logw.array() - m).exp();
  const double s = w.sum();
  if (!(s > 0.0) || !std::isfinite(s))
    throw numeric_error("grid weights vanished for unit " + row_id);
  return w / s;
}

}  // namespace effects_detail

// Normalized per-unit grid weights at a given weighting category (exposed for
// tests and diagnostics; sums to 1).
inline Eigen::VectorXd unit_grid_weights(const FittedPipeline& fp, const Grid& grid, int unit,
                                         int weight_z) {
  if (!fp.interference) return Eigen::VectorXd::Ones(1);
  if (unit < 0 || unit >= fp.data.n()) throw config_error("unit_grid_weights: unit out of range");
  const effects_detail::GridDensityCache cache(*fp.mvlr, grid);
  const Eigen::VectorXd logw = effects_detail::grid_log_density(
      cache, *fp.mvlr, weight_z, fp.data.x_g.row(unit).transpose());
  return effects_detail::normalized_weights(logw,
                                            fp.data.row_ids[static_cast<std::size_t>(unit)]);
}

using Contrast = std::pair<int, int>;  // (z_prime, z)

// Grid-weighted direct effects for a batch of contrasts. All
// contrasts share one estimation pass: the whitened grid, and each category's
// grid densities and base imputations, are computed once per unit no matter
// how many contrasts reference them. `weight_override` fixes the weighting
// category explicitly (used by antisymmetry tests); the default follows
// `mode`.
inline std::vector<double> estimate_direct_effects(
    const FittedPipeline& fp, const Grid& grid, const std::vector<Contrast>& contrasts,
    WeightMode mode = WeightMode::BaselineZ, std::optional<int> weight_override = std::nullopt) {
  const int K = fp.data.K;
  if (contrasts.empty()) throw config_error("estimate_direct_effects: no contrasts given");
  for (auto [zp, zb] : contrasts)
    if (zp < 0 || zp >= K || zb < 0 || zb >= K)
      throw config_error("estimate_direct_effect: category index out of range");
  if (weight_override && (*weight_override < 0 || *weight_override >= K))
    throw config_error("estimate_direct_effect: category index out of range");
  const int n = fp.data.n();

  std::vector<char> need(static_cast<std::size_t>(K), 0);
  for (auto [zp, zb] : contrasts) {
    need[static_cast<std::size_t>(zp)] = 1;
    need[static_cast<std::size_t>(zb)] = 1;
  }
  if (weight_override) need[static_cast<std::size_t>(*weight_override)] = 1;

  std::vector<double> acc(contrasts.size(), 0.0);

  if (!fp.interference) {
    const Eigen::VectorXd g0(0);
    std::vector<double> base(static_cast<std::size_t>(K), 0.0);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = fp.data.x_z.row(i).transpose();
      const int t = fp.data.times[static_cast<std::size_t>(i)];
      for (int k = 0; k < K; ++k)
        if (need[static_cast<std::size_t>(k)])
          base[static_cast<std::size_t>(k)] =
              fp.outcome.impute(k, g0, predict_phi(fp.mnl, k, x), 0.0, t);
      for (std::size_t c = 0; c < contrasts.size(); ++c)
        acc[c] += base[static_cast<std::size_t>(contrasts[c].first)] -
                  base[static_cast<std::size_t>(contrasts[c].second)];
    }
  } else {
    const MvlrFit& mv = *fp.mvlr;
    const effects_detail::GridDensityCache cache(mv, grid);
    const double bl = fp.outcome.lambda_coef();
    const int M = grid.M();

    std::vector<Eigen::VectorXd> log_lam(static_cast<std::size_t>(K));
    std::vector<Eigen::VectorXd> lam(static_cast<std::size_t>(K));
    std::vector<double> base(static_cast<std::size_t>(K), 0.0);
    Eigen::VectorXd logw(M), w(M), pot_diff(M);

    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xz = fp.data.x_z.row(i).transpose();
      const Eigen::VectorXd xg = fp.data.x_g.row(i).transpose();
      const int t = fp.data.times[static_cast<std::size_t>(i)];
      const std::string& row_id = fp.data.row_ids[static_cast<std::size_t>(i)];

      for (int k = 0; k < K; ++k) {
        if (!need[static_cast<std::size_t>(k)]) continue;
        log_lam[static_cast<std::size_t>(k)] =
            effects_detail::grid_log_density(cache, mv, k, xg);
        lam[static_cast<std::size_t>(k)] =
            log_lam[static_cast<std::size_t>(k)].array().exp().matrix();
        base[static_cast<std::size_t>(k)] =
            fp.outcome.impute_base(k, predict_phi(fp.mnl, k, xz), t);
      }

      for (std::size_t c = 0; c < contrasts.size(); ++c) {
        const auto [zp, zb] = contrasts[c];
        const int wz = weight_override ? *weight_override : zb;
        if (weight_override || mode == WeightMode::BaselineZ) {
          // Fast path: the plain density ratio, unless the scale is so small
          // (or non-finite) that the log-space normalization is needed.
          const double s = lam[static_cast<std::size_t>(wz)].sum();
          if (std::isfinite(s) && s > 1e-280)
            w = lam[static_cast<std::size_t>(wz)] / s;
          else
            w = effects_detail::normalized_weights(log_lam[static_cast<std::size_t>(wz)],
                                                   row_id);
        } else {
          const Eigen::VectorXd& lp = log_lam[static_cast<std::size_t>(zp)];
          const Eigen::VectorXd& lb = log_lam[static_cast<std::size_t>(zb)];
          for (int m = 0; m < M; ++m) {
            const double a = lp[m], b = lb[m];
            const double hi = std::max(a, b);
            logw[m] = std::isfinite(hi)
                          ? hi + std::log(0.5 * (std::exp(a - hi) + std::exp(b - hi)))
                          : hi;
          }
          w = effects_detail::normalized_weights(logw, row_id);
        }
        // grid_bg enters both potential outcomes and cancels in the difference.
        pot_diff = Eigen::VectorXd::Constant(
                       M, base[static_cast<std::size_t>(zp)] -
                              base[static_cast<std::size_t>(zb)]) +
                   bl * (lam[static_cast<std::size_t>(zp)] -
                         lam[static_cast<std::size_t>(zb)]);
        acc[c] += w.dot(pot_diff);
      }
    }
  }
  for (double& a : acc) a /= static_cast<double>(n);
  return acc;
}

// Single-contrast convenience wrapper.
inline double estimate_direct_effect(const FittedPipeline& fp, const Grid& grid, int z_prime,
                                     int z, WeightMode mode = WeightMode::BaselineZ,
                                     std::optional<int> weight_override = std::nullopt) {
  return estimate_direct_effects(fp, grid, {{z_prime, z}}, mode, weight_override)[0];
}

struct EffectRow {
  std::string z_prime_name, z_name;
  int z_prime = 0, z = 0;
  double tau_hat = std::numeric_limits<double>::quiet_NaN();
  double std_err = std::numeric_limits<double>::quiet_NaN();
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
  int replicates_used = 0;
  int replicates_dropped = 0;
  double alpha = std::numeric_limits<double>::quiet_NaN();  // IIW configuration, when swept
  double beta = std::numeric_limits<double>::quiet_NaN();
};

struct EffectTable {
  std::vector<EffectRow> rows;
  std::vector<std::string> warnings;
};

struct BootstrapOptions {
  int replicates = 200;
  std::uint64_t seed = 20260816;
  double ci_level = 0.95;
  int threads = 1;
  double max_drop_fraction = 0.2;
  // Experimental: resample whole countries (all rows of a drawn country enter
  // together) instead of individual rows. Preserves within-country dependence
  // at the cost of a coarser resampling distribution.
  bool cluster_by_country = false;
  // Test hook: every replicate uses the full sample (no resampling), so all
  // replicate estimates coincide and std_err is exactly zero.
  bool degenerate_full_sample = false;
};

// Unit-level bootstrap of the requested contrasts. Each replicate resamples n
// rows with replacement (exposure rows travel with their units; the network is
// not recomputed), refits the entire pipeline including the ORQ transform and
// the grid, and re-estimates every contrast. Replicates whose refit fails are
// dropped with a warning; more than max_drop_fraction dropped is an error.
// Replicate r draws from a stream derived from (seed, r), so results are
// byte-identical across thread counts.
inline EffectTable bootstrap_effects(const PipelineData& data,
                                     const std::vector<Contrast>& contrasts,
                                     const PipelineOptions& popts,
                                     const BootstrapOptions& bopts) {
  if (bopts.replicates < 2) throw config_error("bootstrap: need at least 2 replicates");
  if (!(bopts.ci_level > 0.0 && bopts.ci_level < 1.0))
    throw config_error("bootstrap: ci_level must lie in (0,1)");
  if (contrasts.empty()) throw config_error("bootstrap: no contrasts requested");
  for (auto [zp, zb] : contrasts)
    if (zp < 0 || zp >= data.K || zb < 0 || zb >= data.K)
      throw config_error("bootstrap: contrast category out of range");

  const WeightMode mode =
      popts.symmetrized_weights ? WeightMode::Symmetrized : WeightMode::BaselineZ;

  const FittedPipeline full = fit_pipeline(data, popts);
  const Grid full_grid = make_grid(full, popts);
  const std::vector<double> point = estimate_direct_effects(full, full_grid, contrasts, mode);

  const int R = bopts.replicates;
  const int n = data.n();
  std::vector<std::optional<std::vector<double>>> results(static_cast<std::size_t>(R));
  std::vector<std::string> failures(static_cast<std::size_t>(R));

  // Country clusters in first-appearance order (used only when resampling by
  // country). row_ids are "country:year".
  std::vector<std::vector<int>> clusters;
  if (bopts.cluster_by_country) {
    std::map<std::string, std::size_t> pos;
    for (int i = 0; i < n; ++i) {
      const std::string& id = data.row_ids[static_cast<std::size_t>(i)];
      const std::string country = id.substr(0, id.find(':'));
      auto it = pos.find(country);
      if (it == pos.end()) {
        pos.emplace(country, clusters.size());
        clusters.push_back({i});
      } else {
        clusters[it->second].push_back(i);
      }
    }
  }

  auto run_replicate = [&](int r) {
    Rng rng(derive_stream(bopts.seed, static_cast<std::uint64_t>(r)));
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(n));
    if (bopts.degenerate_full_sample) {
      for (int i = 0; i < n; ++i) idx.push_back(i);
    } else if (bopts.cluster_by_country) {
      const std::uint64_t C = clusters.size();
      for (std::uint64_t c = 0; c < C; ++c) {
        const auto& rows = clusters[static_cast<std::size_t>(rng.uniform_int(C))];
        idx.insert(idx.end(), rows.begin(), rows.end());
      }
    } else {
      for (int i = 0; i < n; ++i)
        idx.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n))));
    }
    try {
      const PipelineData sub = data.subset(idx);
      const FittedPipeline fp = fit_pipeline(sub, popts);
      const Grid grid = make_grid(fp, popts);
      results[static_cast<std::size_t>(r)] = estimate_direct_effects(fp, grid, contrasts, mode);
    } catch (const error& e) {
      failures[static_cast<std::size_t>(r)] = e.what();
    }
  };

  const int threads = std::max(1, bopts.threads);
  if (threads == 1) {
    for (int r = 0; r < R; ++r) run_replicate(r);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < R; r = next.fetch_add(1)) run_replicate(r);
      });
    for (auto& th : pool) th.join();
  }

  EffectTable table;
  int used = 0;
  for (int r = 0; r < R; ++r) {
    if (results[static_cast<std::size_t>(r)]) {
      ++used;
    } else {
      table.warnings.push_back("bootstrap replicate " + std::to_string(r) +
                               " dropped: " + failures[static_cast<std::size_t>(r)]);
    }
  }
  const int dropped = R - used;
  if (static_cast<double>(dropped) > bopts.max_drop_fraction * static_cast<double>(R))
    throw numeric_error("bootstrap: " + std::to_string(dropped) + " of " + std::to_string(R) +
                        " replicates failed" +
                        (dropped > 0 ? "; first failure: " + table.warnings.front() : ""));

  const double lo_p = 0.5 * (1.0 - bopts.ci_level);
  for (std::size_t c = 0; c < contrasts.size(); ++c) {
    std::vector<double> est;
    est.reserve(static_cast<std::size_t>(used));
    for (int r = 0; r < R; ++r)
      if (results[static_cast<std::size_t>(r)])
        est.push_back((*results[static_cast<std::size_t>(r)])[c]);
    EffectRow row;
    row.z_prime = contrasts[c].first;
    row.z = contrasts[c].second;
    row.z_prime_name = data.level_names[static_cast<std::size_t>(row.z_prime)];
    row.z_name = data.level_names[static_cast<std::size_t>(row.z)];
    row.tau_hat = point[c];
    row.std_err = sample_sd(est);
    row.ci_low = quantile(est, lo_p);
    row.ci_high = quantile(est, 1.0 - lo_p);
    row.replicates_used = used;
    row.replicates_dropped = dropped;
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Default contrast set: every non-reference category versus the reference.
inline std::vector<Contrast> default_contrasts(const TreatmentAssignment& a) {
  std::vector<Contrast> c;
  for (int k = 0; k < a.K; ++k)
    if (k != a.reference) c.emplace_back(k, a.reference);
  return c;
}

struct IiwConfig {
  double alpha = 0.5, beta = 0.5;
};

// Re-runs graph construction, exposure, the full fit and the bootstrap for each
// influence-weight configuration; rows are stamped with (alpha, beta).
inline EffectTable run_iiw_sweep(const PanelFrame& panel, const TreatmentAssignment& assignment,
                                 const PairwiseTable& pairwise,
                                 const std::vector<IiwConfig>& configs,
                                 const std::vector<Contrast>& contrasts,
                                 const PipelineOptions& popts, const BootstrapOptions& bopts) {
  if (configs.empty()) throw config_error("run_iiw_sweep: no configurations given");
  EffectTable all;
  const RequiredKeys keys = panel_keys(panel);
  for (const IiwConfig& cfg : configs) {
    const InfluenceGraph graph = build_influence(pairwise, cfg.alpha, cfg.beta, &keys);
    const PipelineData data = prepare_pipeline_data(panel, assignment, graph);
    EffectTable t = bootstrap_effects(data, contrasts, popts, bopts);
    for (EffectRow& row : t.rows) {
      row.alpha = cfg.alpha;
      row.beta = cfg.beta;
      all.rows.push_back(std::move(row));
    }
    for (auto& w : t.warnings)
      all.warnings.push_back("iiw(" + format_double(cfg.alpha) + "," +
                             format_double(cfg.beta) + "): " + w);
  }
  return all;
}

}  // namespace netdirect
