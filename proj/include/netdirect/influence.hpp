// Pairwise influence graph: I = alpha * geographic + beta * cultural, per year.
// Weights admissible when alpha,beta >= 0 and alpha+beta == 1, or alpha==beta==0
// (the deliberate no-interference configuration yielding the all-zero graph).
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "netdirect/csv.hpp"
#include "netdirect/errors.hpp"
#include "netdirect/panel.hpp"

namespace netdirect {

// Geographical closeness: 0.5 * (1/shortest_path) + 0.5 * (1 - standardized distance).
inline double geo_indicator(double sp, double dist_std) {
  if (!(sp >= 1.0)) throw data_error("geo_indicator: shortest path must be >= 1");
  if (!(dist_std >= 0.0 && dist_std <= 1.0))
    throw data_error("geo_indicator: standardized distance must lie in [0,1]");
  return 0.5 * (1.0 / sp) + 0.5 * (1.0 - dist_std);
}

// Cultural closeness: equal-weight mean of linguistic and religious similarity.
inline double cultural_indicator(double ling, double relig) {
  if (!(ling >= 0.0 && ling <= 1.0) || !(relig >= 0.0 && relig <= 1.0))
    throw data_error("cultural_indicator: similarities must lie in [0,1]");
  return 0.5 * ling + 0.5 * relig;
}

struct PairRow {
  std::string a, b;  // canonical order a < b after symmetrization
  int year = 0;
  double sp = 1.0;       // shortest-path hop count, >= 1
  double dist_std = 0.0; // standardized distance in [0,1]
  double ling = 0.0;     // linguistic similarity in [0,1]
  double relig = 0.0;    // religious similarity in [0,1]
};

struct PairwiseTable {
  std::vector<PairRow> rows;
  std::vector<std::string> warnings;  // e.g. asymmetric duplicates averaged
};

struct PairwiseSchema {
  std::string a = "country_a";
  std::string b = "country_b";
  std::string year = "year";
  std::string sp = "sp";
  std::string dist = "dist_std";
  std::string ling = "ling";
  std::string relig = "relig";
  char delimiter = ',';
  // When set, min-max standardize the distance column over the loaded table
  // instead of requiring it to already lie in [0,1].
  bool standardize_dist = false;
};

// Loads pairwise similarity rows and symmetrizes: a row may appear in either
// orientation; when both orientations are present with differing values they are
// averaged and a warning is recorded. Duplicate rows for the same orientation and
// self-pairs are integrity errors.
inline PairwiseTable load_pairwise(std::istream& in, const PairwiseSchema& schema = {}) {
  const CsvTable t = read_csv(in, schema.delimiter);
  const std::size_t ca = t.column(schema.a), cb = t.column(schema.b),
                    cy = t.column(schema.year), cs = t.column(schema.sp),
                    cd = t.column(schema.dist), cl = t.column(schema.ling),
                    cr = t.column(schema.relig);

  struct Raw {
    PairRow row;
    bool seen_both = false;
  };
  std::map<std::tuple<std::string, std::string, int>, Raw> acc;      // canonical key
  std::set<std::tuple<std::string, std::string, int>> seen_oriented; // as-read key
  PairwiseTable out;

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 2;
    std::string a = row[ca], b = row[cb];
    if (a.empty() || b.empty())
      throw data_error("row " + std::to_string(line) + ": empty country id");
    if (a == b)
      throw data_error("row " + std::to_string(line) + ": self-pair (" + a + ", " + b + ")");
    const int year = static_cast<int>(csv_to_int(row[cy], line, schema.year));
    PairRow p;
    p.year = year;
    p.sp = csv_to_double(row[cs], line, schema.sp);
    p.dist_std = csv_to_double(row[cd], line, schema.dist);
    p.ling = csv_to_double(row[cl], line, schema.ling);
    p.relig = csv_to_double(row[cr], line, schema.relig);
    if (!seen_oriented.insert({a, b, year}).second)
      throw data_error("row " + std::to_string(line) + ": duplicate pair-year row (" + a +
                       ", " + b + ", " + std::to_string(year) + ")");
    const bool flip = b < a;
    p.a = flip ? b : a;
    p.b = flip ? a : b;
    dmin = std::min(dmin, p.dist_std);
    dmax = std::max(dmax, p.dist_std);

    auto key = std::make_tuple(p.a, p.b, year);
    auto it = acc.find(key);
    if (it == acc.end()) {
      acc.emplace(key, Raw{p, false});
    } else {
      Raw& existing = it->second;
      if (existing.seen_both)
        throw data_error("row " + std::to_string(line) + ": pair-year (" + p.a + ", " + p.b +
                         ", " + std::to_string(year) + ") appears more than twice");
      const PairRow& q = existing.row;
      if (q.sp != p.sp || q.dist_std != p.dist_std || q.ling != p.ling || q.relig != p.relig)
        out.warnings.push_back("asymmetric pair (" + p.a + ", " + p.b + ", " +
                               std::to_string(year) + ") averaged");
      existing.row.sp = 0.5 * (q.sp + p.sp);
      existing.row.dist_std = 0.5 * (q.dist_std + p.dist_std);
      existing.row.ling = 0.5 * (q.ling + p.ling);
      existing.row.relig = 0.5 * (q.relig + p.relig);
      existing.seen_both = true;
    }
  }

  for (auto& [key, raw] : acc) out.rows.push_back(raw.row);
  if (schema.standardize_dist && !out.rows.empty()) {
    const double span = dmax - dmin;
    for (auto& p : out.rows) p.dist_std = span > 0.0 ? (p.dist_std - dmin) / span : 0.0;
  }
  for (const auto& p : out.rows) {
    if (!(p.sp >= 1.0))
      throw data_error("pair (" + p.a + ", " + p.b + ", " + std::to_string(p.year) +
                       "): shortest path must be >= 1");
    if (!(p.dist_std >= 0.0 && p.dist_std <= 1.0))
      throw data_error("pair (" + p.a + ", " + p.b + ", " + std::to_string(p.year) +
                       "): standardized distance out of [0,1]");
    if (!(p.ling >= 0.0 && p.ling <= 1.0) || !(p.relig >= 0.0 && p.relig <= 1.0))
      throw data_error("pair (" + p.a + ", " + p.b + ", " + std::to_string(p.year) +
                       "): similarity out of [0,1]");
  }
  return out;
}

inline PairwiseTable load_pairwise_file(const std::string& path,
                                        const PairwiseSchema& schema = {}) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open pairwise file '" + path + "'");
  return load_pairwise(f, schema);
}

// Year-sliced symmetric influence matrices with zero diagonal, entries in [0,1].
struct InfluenceGraph {
  std::vector<std::string> countries;  // sorted
  std::map<std::string, int> index;
  std::vector<int> years;              // sorted
  std::map<int, Eigen::MatrixXd> weights;
  double alpha = 0.0, beta = 0.0;

  int n_countries() const { return static_cast<int>(countries.size()); }

  const Eigen::MatrixXd& at(int year) const {
    auto it = weights.find(year);
    if (it == weights.end())
      throw data_error("influence graph has no year " + std::to_string(year));
    return it->second;
  }

  int country_index(const std::string& c) const {
    auto it = index.find(c);
    if (it == index.end()) throw data_error("influence graph has no country '" + c + "'");
    return it->second;
  }
};

struct RequiredKeys {
  std::set<std::string> countries;
  std::set<int> years;
};

inline RequiredKeys panel_keys(const PanelFrame& panel) {
  RequiredKeys k;
  for (const auto& u : panel.units) {
    k.countries.insert(u.country);
    k.years.insert(u.year);
  }
  return k;
}

// Builds the influence graph I = alpha*geo + beta*cultural from symmetrized
// pairwise rows. When `required` is given, the graph is restricted to exactly
// those countries/years and any missing pair-year is a coverage error; otherwise
// the table's own keys are used. alpha==beta==0 yields the all-zero graph.
inline InfluenceGraph build_influence(const PairwiseTable& table, double alpha, double beta,
                                      const RequiredKeys* required = nullptr) {
  if (alpha < 0.0 || beta < 0.0)
    throw config_error("influence weights must be non-negative");
  const bool no_interference = (alpha == 0.0 && beta == 0.0);
  if (!no_interference && std::abs(alpha + beta - 1.0) > 1e-12)
    throw config_error("influence weights must satisfy alpha + beta = 1 (or both zero)");

  InfluenceGraph g;
  g.alpha = alpha;
  g.beta = beta;

  std::set<std::string> cset;
  std::set<int> yset;
  if (required) {
    cset = required->countries;
    yset = required->years;
  } else {
    for (const auto& p : table.rows) {
      cset.insert(p.a);
      cset.insert(p.b);
      yset.insert(p.year);
    }
  }
  if (cset.empty() || yset.empty())
    throw data_error("build_influence: no countries or years to build over");
  g.countries.assign(cset.begin(), cset.end());
  for (std::size_t i = 0; i < g.countries.size(); ++i)
    g.index[g.countries[i]] = static_cast<int>(i);
  g.years.assign(yset.begin(), yset.end());

  const int n = g.n_countries();
  for (int year : g.years) g.weights[year] = Eigen::MatrixXd::Zero(n, n);
  if (no_interference) return g;

  std::map<std::tuple<int, int, int>, const PairRow*> lookup;  // (i, j, year), i < j
  for (const auto& p : table.rows) {
    auto ia = g.index.find(p.a);
    auto ib = g.index.find(p.b);
    if (ia == g.index.end() || ib == g.index.end()) continue;  // outside required set
    if (yset.count(p.year) == 0) continue;
    const int i = std::min(ia->second, ib->second);
    const int j = std::max(ia->second, ib->second);
    lookup[{i, j, p.year}] = &p;
  }

  std::vector<std::string> missing;
  for (int year : g.years) {
    Eigen::MatrixXd& w = g.weights[year];
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        auto it = lookup.find({i, j, year});
        if (it == lookup.end()) {
          if (missing.size() < 8)
            missing.push_back("(" + g.countries[static_cast<std::size_t>(i)] + ", " +
                              g.countries[static_cast<std::size_t>(j)] + ", " +
                              std::to_string(year) + ")");
          else
            missing.push_back("...");
          continue;
        }
        const PairRow& p = *it->second;
        const double v =
            alpha * geo_indicator(p.sp, p.dist_std) + beta * cultural_indicator(p.ling, p.relig);
        w(i, j) = v;
        w(j, i) = v;
      }
    }
    if (missing.size() > 8) break;
  }
  if (!missing.empty()) {
    std::string msg = "influence coverage gap, missing pair-years:";
    for (const auto& m : missing) msg += " " + m;
    throw data_error(msg);
  }
  return g;
}

// Strength centrality: per-country row sums of the year's influence matrix.
inline Eigen::VectorXd vertex_centrality(const InfluenceGraph& g, int year) {
  return g.at(year).rowwise().sum();
}

// CSV dump of the built graph (year, country_a, country_b, weight), upper triangle.
inline void dump_influence(const InfluenceGraph& g, const std::string& path) {
  CsvWriter w;
  w.row({"year", "country_a", "country_b", "weight"});
  for (int year : g.years) {
    const Eigen::MatrixXd& m = g.at(year);
    for (int i = 0; i < g.n_countries(); ++i)
      for (int j = i + 1; j < g.n_countries(); ++j)
        w.row({std::to_string(year), g.countries[static_cast<std::size_t>(i)],
               g.countries[static_cast<std::size_t>(j)], format_double(m(i, j))});
  }
  w.write_file(path);
}

}  // namespace netdirect
