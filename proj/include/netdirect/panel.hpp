// Country-year panel ingestion, lag alignment, and treatment categorization.
//
// A Unit is one analysis row. After lag alignment a row carries: covariates
// measured at t, treatment indicators at t+covariate_lag, and the outcome at
// t+covariate_lag+outcome_lag; the row's `year` is the treatment year, which is
// the slice used for influence-graph lookups and time fixed effects.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "netdirect/csv.hpp"
#include "netdirect/errors.hpp"
#include "netdirect/stats.hpp"

namespace netdirect {

struct Unit {
  std::string country;
  int year = 0;
  Eigen::VectorXd x;   // covariates
  double reg = 0.0;    // regulation-tightness indicator in [0,1]
  double cont = 0.0;   // control/enforcement indicator in [0,1]
  double y = 0.0;      // outcome

  bool operator==(const Unit& o) const {
    return country == o.country && year == o.year && x == o.x && reg == o.reg &&
           cont == o.cont && y == o.y;
  }
};

struct PanelFrame {
  std::vector<Unit> units;                  // sorted by (country, year)
  std::vector<std::string> covariate_names;
  std::string outcome_name = "outcome";
  std::vector<double> combined_index;       // optional policy index, empty or size n()

  int n() const { return static_cast<int>(units.size()); }
  int p() const { return static_cast<int>(covariate_names.size()); }

  // Covariates stacked row-wise, aligned with `units`.
  Eigen::MatrixXd covariate_matrix() const {
    Eigen::MatrixXd m(n(), p());
    for (int i = 0; i < n(); ++i) m.row(i) = units[static_cast<std::size_t>(i)].x;
    return m;
  }

  std::vector<std::string> countries() const {
    std::set<std::string> s;
    for (const auto& u : units) s.insert(u.country);
    return {s.begin(), s.end()};
  }

  std::vector<int> years() const {
    std::set<int> s;
    for (const auto& u : units) s.insert(u.year);
    return {s.begin(), s.end()};
  }
};

struct PanelSchema {
  std::string id = "country";
  std::string year = "year";
  std::string reg = "reg";
  std::string cont = "cont";
  std::string outcome = "outcome";
  std::vector<std::string> covariates;
  std::optional<std::string> combined_index;  // optional policy-index column
  char delimiter = ',';
};

// Parses and validates a panel CSV: all schema columns present, numeric values,
// indicators in [0,1], no duplicate (country, year). Rows are sorted by
// (country, year).
inline PanelFrame load_panel(std::istream& in, const PanelSchema& schema) {
  const CsvTable t = read_csv(in, schema.delimiter);
  const std::size_t ci = t.column(schema.id);
  const std::size_t cy = t.column(schema.year);
  const std::size_t cr = t.column(schema.reg);
  const std::size_t cc = t.column(schema.cont);
  const std::size_t co = t.column(schema.outcome);
  std::vector<std::size_t> cx;
  for (const auto& name : schema.covariates) cx.push_back(t.column(name));
  std::optional<std::size_t> cidx;
  if (schema.combined_index) cidx = t.column(*schema.combined_index);

  PanelFrame panel;
  panel.covariate_names = schema.covariates;
  panel.outcome_name = schema.outcome;

  struct Loaded {
    Unit u;
    double idx;
    bool has_idx;
  };
  std::vector<Loaded> loaded;
  std::set<std::pair<std::string, int>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 2;  // 1-based data row incl. header
    Loaded l{};
    l.u.country = row[ci];
    if (l.u.country.empty())
      throw data_error("row " + std::to_string(line) + ": empty country id");
    l.u.year = static_cast<int>(csv_to_int(row[cy], line, schema.year));
    l.u.reg = csv_to_double(row[cr], line, schema.reg);
    l.u.cont = csv_to_double(row[cc], line, schema.cont);
    l.u.y = csv_to_double(row[co], line, schema.outcome);
    if (!(l.u.reg >= 0.0 && l.u.reg <= 1.0))
      throw data_error("row " + std::to_string(line) + ": column '" + schema.reg +
                       "' out of range [0,1]: " + row[cr]);
    if (!(l.u.cont >= 0.0 && l.u.cont <= 1.0))
      throw data_error("row " + std::to_string(line) + ": column '" + schema.cont +
                       "' out of range [0,1]: " + row[cc]);
    if (!std::isfinite(l.u.y))
      throw data_error("row " + std::to_string(line) + ": non-finite outcome");
    l.u.x.resize(static_cast<Eigen::Index>(cx.size()));
    for (std::size_t j = 0; j < cx.size(); ++j) {
      const double v = csv_to_double(row[cx[j]], line, schema.covariates[j]);
      if (!std::isfinite(v))
        throw data_error("row " + std::to_string(line) + ": non-finite covariate '" +
                         schema.covariates[j] + "'");
      l.u.x[static_cast<Eigen::Index>(j)] = v;
    }
    if (cidx) {
      l.idx = csv_to_double(row[*cidx], line, *schema.combined_index);
      l.has_idx = true;
    }
    if (!seen.insert({l.u.country, l.u.year}).second)
      throw data_error("row " + std::to_string(line) + ": duplicate (country, year) = (" +
                       l.u.country + ", " + std::to_string(l.u.year) + ")");
    loaded.push_back(std::move(l));
  }
  std::sort(loaded.begin(), loaded.end(), [](const Loaded& a, const Loaded& b) {
    return std::tie(a.u.country, a.u.year) < std::tie(b.u.country, b.u.year);
  });
  for (auto& l : loaded) {
    panel.units.push_back(std::move(l.u));
    if (l.has_idx) panel.combined_index.push_back(l.idx);
  }
  if (!panel.combined_index.empty() &&
      panel.combined_index.size() != panel.units.size())
    throw data_error("combined-index column present on only some rows");
  return panel;
}

inline PanelFrame load_panel_file(const std::string& path, const PanelSchema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open panel file '" + path + "'");
  return load_panel(f, schema);
}

// Aligns covariates (t), treatment indicators (t + covariate_lag) and outcome
// (t + covariate_lag + outcome_lag) into single rows keyed by the treatment year.
// When append_contemporaneous_outcome is set, the outcome at the covariate year
// is appended to the covariate vector as an additional pre-treatment variable.
// Rows missing any of the three years are dropped; an empty result is an error.
inline PanelFrame lag_align(const PanelFrame& panel, int covariate_lag, int outcome_lag,
                            bool append_contemporaneous_outcome = true) {
  if (covariate_lag < 0 || outcome_lag < 0)
    throw config_error("lag_align: lags must be non-negative");

  std::map<std::pair<std::string, int>, std::size_t> at;
  for (std::size_t i = 0; i < panel.units.size(); ++i)
    at[{panel.units[i].country, panel.units[i].year}] = i;

  PanelFrame out;
  out.covariate_names = panel.covariate_names;
  out.outcome_name = panel.outcome_name;
  if (append_contemporaneous_outcome)
    out.covariate_names.push_back(panel.outcome_name + "_t");

  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    const Unit& base = panel.units[i];
    const auto it_z = at.find({base.country, base.year + covariate_lag});
    const auto it_y = at.find({base.country, base.year + covariate_lag + outcome_lag});
    if (it_z == at.end() || it_y == at.end()) continue;
    const Unit& zrow = panel.units[it_z->second];
    const Unit& yrow = panel.units[it_y->second];
    Unit u;
    u.country = base.country;
    u.year = base.year + covariate_lag;  // treatment year
    if (append_contemporaneous_outcome) {
      u.x.resize(base.x.size() + 1);
      u.x.head(base.x.size()) = base.x;
      u.x[base.x.size()] = base.y;
    } else {
      u.x = base.x;
    }
    u.reg = zrow.reg;
    u.cont = zrow.cont;
    u.y = yrow.y;
    out.units.push_back(std::move(u));
    if (!panel.combined_index.empty())
      out.combined_index.push_back(panel.combined_index[it_z->second]);
  }
  if (out.units.empty())
    throw data_error("lag_align: no row has all of covariate, treatment and outcome years");
  return out;
}

enum class TreatmentScheme { FOUR, THREE, BINARY };

inline const char* scheme_name(TreatmentScheme s) {
  switch (s) {
    case TreatmentScheme::FOUR: return "four";
    case TreatmentScheme::THREE: return "three";
    case TreatmentScheme::BINARY: return "binary";
  }
  return "?";
}

struct TreatmentAssignment {
  std::vector<int> labels;              // one per panel row, in [0, K)
  int K = 0;
  int reference = 0;                    // index into level_names
  std::vector<std::string> level_names;

  int n() const { return static_cast<int>(labels.size()); }
  const std::string& name(int k) const { return level_names.at(static_cast<std::size_t>(k)); }
  int level_index(const std::string& nm) const {
    for (int k = 0; k < K; ++k)
      if (level_names[static_cast<std::size_t>(k)] == nm) return k;
    throw config_error("unknown treatment level '" + nm + "'");
  }
};

struct CategorizeOptions {
  // BINARY only: weights (w_reg, w_cont) for a combined index when the panel has
  // no combined-index column.
  std::optional<std::pair<double, double>> binary_weights;
};

// Median-split categorization. Medians are lower-medians over the analysis panel.
// FOUR uses strict '>' for the high side of each margin so the four predicates
// exactly partition the indicator plane; THREE collapses FOUR's mixed cells;
// BINARY splits a combined policy index at its median.
inline TreatmentAssignment categorize_treatment(const PanelFrame& panel, TreatmentScheme scheme,
                                                const CategorizeOptions& opts = {}) {
  if (panel.units.empty()) throw data_error("categorize_treatment: empty panel");
  TreatmentAssignment a;
  a.labels.reserve(panel.units.size());

  if (scheme == TreatmentScheme::BINARY) {
    std::vector<double> idx;
    if (!panel.combined_index.empty()) {
      idx = panel.combined_index;
    } else if (opts.binary_weights) {
      const auto [wr, wc] = *opts.binary_weights;
      idx.reserve(panel.units.size());
      for (const auto& u : panel.units) idx.push_back(wr * u.reg + wc * u.cont);
    } else {
      throw config_error(
          "BINARY scheme requires a combined-index column or combining weights");
    }
    const double med = lower_median(idx);
    a.K = 2;
    a.level_names = {"L", "H"};
    for (double v : idx) a.labels.push_back(v > med ? 1 : 0);
    return a;
  }

  std::vector<double> regs, conts;
  regs.reserve(panel.units.size());
  conts.reserve(panel.units.size());
  for (const auto& u : panel.units) {
    regs.push_back(u.reg);
    conts.push_back(u.cont);
  }
  const double med_reg = lower_median(regs);
  const double med_cont = lower_median(conts);
  for (const auto& u : panel.units) {
    const bool reg_high = u.reg > med_reg;
    const bool cont_high = u.cont > med_cont;
    int four = reg_high ? (cont_high ? 3 : 1) : (cont_high ? 2 : 0);  // LL,HL,LH,HH
    if (scheme == TreatmentScheme::FOUR) {
      a.labels.push_back(four);
    } else {  // THREE: LL->L, HL/LH->M, HH->H
      a.labels.push_back(four == 0 ? 0 : (four == 3 ? 2 : 1));
    }
  }
  if (scheme == TreatmentScheme::FOUR) {
    a.K = 4;
    a.level_names = {"LL", "HL", "LH", "HH"};
  } else {
    a.K = 3;
    a.level_names = {"L", "M", "H"};
  }
  return a;
}

// Deterministic coarsening FOUR -> THREE (LL->L, HL/LH->M, HH->H).
inline TreatmentAssignment three_from_four(const TreatmentAssignment& four) {
  if (four.K != 4) throw config_error("three_from_four: input must have K=4");
  TreatmentAssignment a;
  a.K = 3;
  a.level_names = {"L", "M", "H"};
  a.labels.reserve(four.labels.size());
  for (int z : four.labels) a.labels.push_back(z == 0 ? 0 : (z == 3 ? 2 : 1));
  return a;
}

}  // namespace netdirect
