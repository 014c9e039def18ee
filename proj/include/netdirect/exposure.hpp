// Neighborhood treatment exposure: for panel row i and treatment level z,
//   G[i, z] = sum over same-year rows j != i of I[c_i, c_j, t_i] * 1{Z_j == z}.
// Unnormalized weighted counts; cross-year links contribute nothing by
// construction (only the row's own year slice of the graph is consulted).
#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "netdirect/errors.hpp"
#include "netdirect/influence.hpp"
#include "netdirect/panel.hpp"

namespace netdirect {

struct ExposureMatrix {
  Eigen::MatrixXd g;                    // n x K, rows aligned with the panel
  std::vector<std::string> level_names;

  int n() const { return static_cast<int>(g.rows()); }
  int K() const { return static_cast<int>(g.cols()); }
};

inline ExposureMatrix build_ntem(const InfluenceGraph& graph, const TreatmentAssignment& z,
                                 const PanelFrame& panel) {
  if (z.n() != panel.n())
    throw data_error("build_ntem: assignment has " + std::to_string(z.n()) +
                     " labels for " + std::to_string(panel.n()) + " panel rows");
  for (int i = 0; i < z.n(); ++i)
    if (z.labels[static_cast<std::size_t>(i)] < 0 || z.labels[static_cast<std::size_t>(i)] >= z.K)
      throw data_error("build_ntem: label out of range at row " + std::to_string(i));

  std::map<int, std::vector<int>> rows_by_year;
  for (int i = 0; i < panel.n(); ++i)
    rows_by_year[panel.units[static_cast<std::size_t>(i)].year].push_back(i);

  ExposureMatrix em;
  em.level_names = z.level_names;
  em.g = Eigen::MatrixXd::Zero(panel.n(), z.K);

  for (const auto& [year, rows] : rows_by_year) {
    const Eigen::MatrixXd& w = graph.at(year);  // throws if the year is missing
    std::vector<int> cidx(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      cidx[r] = graph.country_index(panel.units[static_cast<std::size_t>(rows[r])].country);
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = 0; b < rows.size(); ++b) {
        if (a == b) continue;
        const double wij = w(cidx[a], cidx[b]);
        if (wij > 0.0)
          em.g(rows[a], z.labels[static_cast<std::size_t>(rows[b])]) += wij;
      }
    }
  }
  return em;
}

// Per-level exposure totals over all rows (column sums).
inline Eigen::VectorXd row_sums_by_level(const ExposureMatrix& em) {
  return em.g.colwise().sum().transpose();
}

// CSV dump of exposure rows keyed by (country, year); optionally with the
// transformed columns appended when `g_star` is non-empty.
inline void dump_ntem(const ExposureMatrix& em, const PanelFrame& panel,
                      const std::string& path, const Eigen::MatrixXd& g_star = {}) {
  CsvWriter w;
  std::vector<std::string> header = {"country", "year"};
  for (const auto& lvl : em.level_names) header.push_back("exposure_" + lvl);
  if (g_star.size() > 0)
    for (const auto& lvl : em.level_names) header.push_back("gstar_" + lvl);
  w.row(header);
  for (int i = 0; i < em.n(); ++i) {
    const auto& u = panel.units[static_cast<std::size_t>(i)];
    std::vector<std::string> row = {u.country, std::to_string(u.year)};
    for (int k = 0; k < em.K(); ++k) row.push_back(format_double(em.g(i, k)));
    if (g_star.size() > 0)
      for (int k = 0; k < static_cast<int>(g_star.cols()); ++k)
        row.push_back(format_double(g_star(i, k)));
    w.row(row);
  }
  w.write_file(path);
}

}  // namespace netdirect
