// Synthetic data-generating process with analytically known direct effects, used
// as the estimation oracle and for CLI fixtures.
//
//   X ~ iid N(0,1); Z | X ~ multinomial logit (reference category first);
//   influence weights i.i.d. Uniform per unordered pair-year (symmetric);
//   Y = intercept + direct[Z] + spillover . G + covariate_coefs . X
//       + trend * centered_year + N(0, noise_sd^2),
// where G is the exposure matrix of the planted assignment on the drawn graph.
// True direct effect of z' vs z is direct[z'] - direct[z] (spillover and
// covariates are held fixed by the estimand).
//
// Two encodings make the fixtures round-trip through the real ingestion path:
// the indicator columns take two-point values (0.25/0.75) chosen so the
// pipeline's lower-median split reproduces the planted labels exactly, and the
// pairwise table sets ling = relig = weight so the cultural-only configuration
// (alpha, beta) = (0, 1) rebuilds the generating graph bit-for-bit.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "netdirect/errors.hpp"
#include "netdirect/exposure.hpp"
#include "netdirect/influence.hpp"
#include "netdirect/panel.hpp"
#include "netdirect/rng.hpp"

namespace netdirect {

struct DgpSpec {
  int countries = 22;
  int years = 30;
  int levels = 4;      // 4 (LL/HL/LH/HH), 3 (L/M/H) or 2 (L/H)
  int covariates = 15;

  Eigen::MatrixXd treatment_coefs;  // (levels-1) x (covariates+1), col 0 intercept
  Eigen::VectorXd direct;           // levels
  Eigen::VectorXd spillover;        // levels
  Eigen::VectorXd covariate_coefs;  // covariates
  double intercept = 1.0;
  double trend_per_year = 0.02;
  double noise_sd = 0.5;

  double weight_lo = 0.0, weight_hi = 0.3;  // pair-year influence weights

  // Optional exposure confounding: countries split into blocks; a shared
  // block-year shock shifts every non-reference treatment propensity, and
  // same-block pairs draw influence weights from a heavier range.
  int blocks = 0;
  double block_shift_sd = 0.0;
  double block_weight_lo = 0.15, block_weight_hi = 0.3;

  std::uint64_t seed = 1;

  // Default oracle: unconfounded by construction (treatment loads on x1-x3,
  // outcome on x4-x8), planted direct effects, mild spillover.
  static DgpSpec standard() {
    DgpSpec s;
    s.treatment_coefs = Eigen::MatrixXd::Zero(3, 16);
    s.treatment_coefs(0, 0) = -0.45;  // HL
    s.treatment_coefs(1, 0) = -0.55;  // LH
    s.treatment_coefs(2, 0) = -0.90;  // HH
    s.treatment_coefs(0, 1) = 0.5;
    s.treatment_coefs(0, 2) = -0.3;
    s.treatment_coefs(0, 3) = 0.2;
    s.treatment_coefs(1, 1) = -0.4;
    s.treatment_coefs(1, 2) = 0.45;
    s.treatment_coefs(1, 3) = 0.15;
    s.treatment_coefs(2, 1) = 0.3;
    s.treatment_coefs(2, 2) = 0.35;
    s.treatment_coefs(2, 3) = -0.25;
    s.direct = Eigen::Vector4d(0.0, 0.3, 0.45, 0.2);
    s.spillover = Eigen::Vector4d(0.3, -0.15, 0.1, -0.05);
    s.covariate_coefs = Eigen::VectorXd::Zero(15);
    s.covariate_coefs[3] = 0.8;
    s.covariate_coefs[4] = -0.6;
    s.covariate_coefs[5] = 0.5;
    s.covariate_coefs[6] = 0.4;
    s.covariate_coefs[7] = -0.7;
    return s;
  }

  // Exposure-confounded variant with strong positive spillover into the
  // reference-exposure channel; the no-interference estimator is biased
  // downward on it while the matched-graph estimator is not.
  static DgpSpec confounded_spillover() {
    DgpSpec s = standard();
    s.blocks = 2;
    s.block_shift_sd = 1.0;
    s.block_weight_lo = 0.15;
    s.block_weight_hi = 0.30;
    s.weight_lo = 0.0;
    s.weight_hi = 0.05;  // cross-block pairs
    s.treatment_coefs(0, 0) = -0.9;
    s.treatment_coefs(1, 0) = -1.0;
    s.treatment_coefs(2, 0) = -1.3;
    s.spillover = Eigen::Vector4d(1.2, -0.6, -0.6, -0.6);
    return s;
  }

  // Small zero-effect spec for bootstrap-coverage studies.
  static DgpSpec small_null() {
    DgpSpec s;
    s.countries = 12;
    s.years = 12;
    s.covariates = 3;
    s.treatment_coefs = Eigen::MatrixXd::Zero(3, 4);
    s.treatment_coefs(0, 0) = -0.45;
    s.treatment_coefs(1, 0) = -0.55;
    s.treatment_coefs(2, 0) = -0.90;
    s.treatment_coefs(0, 1) = 0.3;
    s.treatment_coefs(1, 2) = 0.3;
    s.treatment_coefs(2, 3) = 0.2;
    s.direct = Eigen::Vector4d::Zero();
    s.spillover = Eigen::Vector4d::Zero();
    s.covariate_coefs = Eigen::VectorXd::Zero(3);
    s.noise_sd = 1.0;
    return s;
  }
};

struct DgpResult {
  PanelFrame panel;
  TreatmentAssignment assignment;
  InfluenceGraph graph;
  PairwiseTable pairwise;
  ExposureMatrix exposure;
  Eigen::MatrixXd true_effects;  // [z', z] = direct[z'] - direct[z]
};

inline double true_direct_effect(const DgpSpec& spec, int z_prime, int z) {
  if (z_prime < 0 || z_prime >= spec.levels || z < 0 || z >= spec.levels)
    throw config_error("true_direct_effect: category index out of range");
  return spec.direct[z_prime] - spec.direct[z];
}

namespace dgp_detail {

inline void validate(const DgpSpec& s) {
  if (s.countries < 3) throw config_error("dgp: need at least 3 countries");
  if (s.years < 2) throw config_error("dgp: need at least 2 years");
  if (s.levels != 2 && s.levels != 3 && s.levels != 4)
    throw config_error("dgp: levels must be 2, 3 or 4");
  if (s.covariates < 1) throw config_error("dgp: need at least 1 covariate");
  if (s.treatment_coefs.rows() != s.levels - 1 ||
      s.treatment_coefs.cols() != s.covariates + 1)
    throw config_error("dgp: treatment_coefs must be (levels-1) x (covariates+1)");
  if (s.direct.size() != s.levels || s.spillover.size() != s.levels)
    throw config_error("dgp: direct and spillover must have `levels` entries");
  if (s.covariate_coefs.size() != s.covariates)
    throw config_error("dgp: covariate_coefs must have `covariates` entries");
  if (s.noise_sd < 0.0) throw config_error("dgp: noise_sd must be non-negative");
  if (!(s.weight_lo >= 0.0 && s.weight_lo < s.weight_hi && s.weight_hi <= 1.0))
    throw config_error("dgp: need 0 <= weight_lo < weight_hi <= 1");
  if (s.blocks < 0 || s.blocks > s.countries)
    throw config_error("dgp: invalid block count");
  if (s.blocks > 0 && !(s.block_weight_lo >= 0.0 && s.block_weight_lo < s.block_weight_hi &&
                        s.block_weight_hi <= 1.0))
    throw config_error("dgp: need 0 <= block_weight_lo < block_weight_hi <= 1");
}

inline std::string country_name(int i, int total) {
  int width = 1;
  for (int t = total; t >= 10; t /= 10) ++width;
  std::string num = std::to_string(i + 1);
  return "C" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
}

// Lower-median label recovery needs each low side to hold >= ceil(N/2) rows.
// Returns false when the draw is not encodable under the two-point scheme.
// For levels==3 the M rows are split between the two mixed encodings; `m_as_lh`
// receives which M rows take the (low, high) form.
inline bool encodable(const std::vector<int>& z, int levels, int n, Rng& split_rng,
                      std::vector<bool>& m_as_lh) {
  const int need = (n + 1) / 2;
  if (levels == 4) {
    int reg_low = 0, cont_low = 0;
    for (int v : z) {
      if (v == 0 || v == 2) ++reg_low;
      if (v == 0 || v == 1) ++cont_low;
    }
    return reg_low >= need && cont_low >= need;
  }
  if (levels == 2) {
    int low = 0;
    for (int v : z)
      if (v == 0) ++low;
    return low >= need;
  }
  // levels == 3: L rows count toward both margins; choose how many M rows take
  // the (low, high) form (counting toward the reg-low margin).
  int nl = 0, nm = 0;
  for (int v : z) {
    if (v == 0) ++nl;
    if (v == 1) ++nm;
  }
  const int c = std::max(0, need - nl);
  if (nm < 2 * c) return false;
  int as_lh = std::clamp(nm / 2, c, nm - c);
  // Deterministic shuffle of which M rows get the (low, high) encoding.
  std::vector<int> m_rows;
  for (int i = 0; i < n; ++i)
    if (z[static_cast<std::size_t>(i)] == 1) m_rows.push_back(i);
  for (int i = static_cast<int>(m_rows.size()) - 1; i > 0; --i)
    std::swap(m_rows[static_cast<std::size_t>(i)],
              m_rows[split_rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
  m_as_lh.assign(static_cast<std::size_t>(n), false);
  for (int i = 0; i < as_lh; ++i) m_as_lh[static_cast<std::size_t>(m_rows[static_cast<std::size_t>(i)])] = true;
  return true;
}

}  // namespace dgp_detail

inline DgpResult generate(const DgpSpec& spec) {
  dgp_detail::validate(spec);
  const int C = spec.countries, T = spec.years, K = spec.levels, P = spec.covariates;
  const int n = C * T;

  // Independent deterministic streams so adding draws to one stage never
  // perturbs another.
  Rng rng_x(derive_stream(spec.seed, 0));
  Rng rng_w(derive_stream(spec.seed, 2));
  Rng rng_eps(derive_stream(spec.seed, 3));
  Rng rng_block(derive_stream(spec.seed, 4));
  Rng rng_aux(derive_stream(spec.seed, 5));

  // Covariates, row index = country * T + (year - 1).
  Eigen::MatrixXd x(n, P);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < P; ++j) x(i, j) = rng_x.normal();

  // Block-year treatment shocks.
  auto block_of = [&](int c) { return spec.blocks > 0 ? c % spec.blocks : 0; };
  Eigen::MatrixXd shock = Eigen::MatrixXd::Zero(std::max(1, spec.blocks), T);
  if (spec.blocks > 0 && spec.block_shift_sd > 0.0)
    for (int b = 0; b < spec.blocks; ++b)
      for (int t = 0; t < T; ++t) shock(b, t) = rng_block.normal(0.0, spec.block_shift_sd);

  // Planted assignment from the multinomial-logit law; redraw (bounded,
  // deterministic substreams) until the two-point indicator encoding can
  // reproduce it through the median split.
  std::vector<int> z(static_cast<std::size_t>(n));
  std::vector<bool> m_as_lh;
  bool ok = false;
  for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
    Rng rng_z(derive_stream(spec.seed, 100 + static_cast<std::uint64_t>(attempt)));
    Rng rng_split(derive_stream(spec.seed, 10000 + static_cast<std::uint64_t>(attempt)));
    for (int c = 0; c < C; ++c) {
      for (int t = 0; t < T; ++t) {
        const int i = c * T + t;
        std::vector<double> wts(static_cast<std::size_t>(K));
        wts[0] = 1.0;
        for (int r = 0; r + 1 < K; ++r) {
          double eta = spec.treatment_coefs(r, 0) + shock(block_of(c), t);
          for (int j = 0; j < P; ++j) eta += spec.treatment_coefs(r, j + 1) * x(i, j);
          wts[static_cast<std::size_t>(r + 1)] = std::exp(eta);
        }
        z[static_cast<std::size_t>(i)] = rng_z.categorical(wts);
      }
    }
    ok = dgp_detail::encodable(z, K, n, rng_split, m_as_lh);
  }
  if (!ok)
    throw numeric_error(
        "dgp: planted assignment not encodable after 200 redraws; "
        "category shares leave a low-side minority");

  // Panel rows in (country, year) order with the two-point indicator encoding.
  DgpResult res;
  res.panel.outcome_name = "y";
  for (int j = 0; j < P; ++j) res.panel.covariate_names.push_back("x" + std::to_string(j + 1));
  const double kLow = 0.25, kHigh = 0.75;
  for (int c = 0; c < C; ++c) {
    for (int t = 0; t < T; ++t) {
      const int i = c * T + t;
      Unit u;
      u.country = dgp_detail::country_name(c, C);
      u.year = t + 1;
      u.x = x.row(i).transpose();
      const int zi = z[static_cast<std::size_t>(i)];
      if (K == 4) {
        u.reg = (zi == 1 || zi == 3) ? kHigh : kLow;
        u.cont = (zi == 2 || zi == 3) ? kHigh : kLow;
      } else if (K == 3) {
        const bool lh = zi == 1 && m_as_lh[static_cast<std::size_t>(i)];
        u.reg = (zi == 2 || (zi == 1 && !lh)) ? kHigh : kLow;
        u.cont = (zi == 2 || lh) ? kHigh : kLow;
      } else {
        u.reg = zi == 1 ? kHigh : kLow;
        u.cont = u.reg;
        res.panel.combined_index.push_back(u.reg);
      }
      res.panel.units.push_back(std::move(u));
    }
  }

  res.assignment.labels = z;
  res.assignment.K = K;
  res.assignment.reference = 0;
  res.assignment.level_names = K == 4   ? std::vector<std::string>{"LL", "HL", "LH", "HH"}
                               : K == 3 ? std::vector<std::string>{"L", "M", "H"}
                                        : std::vector<std::string>{"L", "H"};

  // Influence weights per unordered pair-year; the pairwise table encodes each
  // weight as ling = relig = w so IIW (0,1) reproduces the graph exactly.
  res.graph.alpha = 0.0;
  res.graph.beta = 1.0;
  for (int c = 0; c < C; ++c) res.graph.countries.push_back(dgp_detail::country_name(c, C));
  for (int c = 0; c < C; ++c) res.graph.index[res.graph.countries[static_cast<std::size_t>(c)]] = c;
  for (int t = 1; t <= T; ++t) res.graph.years.push_back(t);
  for (int t = 1; t <= T; ++t) res.graph.weights[t] = Eigen::MatrixXd::Zero(C, C);
  for (int a = 0; a < C; ++a) {
    for (int b = a + 1; b < C; ++b) {
      const bool same_block = spec.blocks > 0 && block_of(a) == block_of(b);
      for (int t = 1; t <= T; ++t) {
        const double w = same_block ? rng_w.uniform(spec.block_weight_lo, spec.block_weight_hi)
                                    : rng_w.uniform(spec.weight_lo, spec.weight_hi);
        res.graph.weights[t](a, b) = w;
        res.graph.weights[t](b, a) = w;
        PairRow p;
        p.a = res.graph.countries[static_cast<std::size_t>(a)];
        p.b = res.graph.countries[static_cast<std::size_t>(b)];
        p.year = t;
        p.sp = 1.0 + static_cast<double>(rng_aux.uniform_int(6));
        p.dist_std = rng_aux.uniform01();
        p.ling = w;
        p.relig = w;
        res.pairwise.rows.push_back(std::move(p));
      }
    }
  }

  res.exposure = build_ntem(res.graph, res.assignment, res.panel);

  // Outcomes.
  const double mid_year = 0.5 * static_cast<double>(T + 1);
  for (int i = 0; i < n; ++i) {
    Unit& u = res.panel.units[static_cast<std::size_t>(i)];
    double y = spec.intercept + spec.direct[z[static_cast<std::size_t>(i)]];
    y += res.exposure.g.row(i).dot(spec.spillover);
    y += u.x.dot(spec.covariate_coefs);
    y += spec.trend_per_year * (static_cast<double>(u.year) - mid_year);
    if (spec.noise_sd > 0.0) y += rng_eps.normal(0.0, spec.noise_sd);
    u.y = y;
  }

  res.true_effects.resize(K, K);
  for (int zp = 0; zp < K; ++zp)
    for (int zb = 0; zb < K; ++zb) res.true_effects(zp, zb) = spec.direct[zp] - spec.direct[zb];
  return res;
}

}  // namespace netdirect
