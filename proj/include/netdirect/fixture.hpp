// Writes a generated scenario to disk in the exact schemas the ingestion path
// reads back: panel.csv, pairwise.csv, a truth.json with the planted effects,
// and a ready-to-run config.json pointing at the files.
#pragma once

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "netdirect/csv.hpp"
#include "netdirect/dgp.hpp"
#include "netdirect/errors.hpp"

namespace netdirect {

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

// Generates the scenario and writes the fixture files; returns the generated
// data so callers can compare against the planted truth directly.
inline DgpResult write_fixture(const DgpSpec& spec, const std::string& dir) {
  DgpResult res = generate(spec);
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);

  // panel.csv
  {
    CsvWriter w;
    std::vector<std::string> header = {"country", "year", "reg", "cont", "y"};
    for (const auto& c : res.panel.covariate_names) header.push_back(c);
    if (spec.levels == 2) header.push_back("impol");
    w.row(header);
    for (std::size_t i = 0; i < res.panel.units.size(); ++i) {
      const Unit& u = res.panel.units[i];
      std::vector<std::string> row = {u.country, std::to_string(u.year), format_double(u.reg),
                                      format_double(u.cont), format_double(u.y)};
      for (Eigen::Index j = 0; j < u.x.size(); ++j) row.push_back(format_double(u.x[j]));
      if (spec.levels == 2) row.push_back(format_double(res.panel.combined_index[i]));
      w.row(row);
    }
    w.write_file((base / "panel.csv").string());
  }

  // pairwise.csv
  {
    CsvWriter w;
    w.row({"country_a", "country_b", "year", "sp", "dist_std", "ling", "relig"});
    for (const PairRow& p : res.pairwise.rows)
      w.row({p.a, p.b, std::to_string(p.year), format_double(p.sp), format_double(p.dist_std),
             format_double(p.ling), format_double(p.relig)});
    w.write_file((base / "pairwise.csv").string());
  }

  // truth.json — planted parameters and all pairwise direct effects.
  {
    nlohmann::json truth;
    truth["seed"] = spec.seed;
    truth["levels"] = spec.levels;
    truth["level_names"] = res.assignment.level_names;
    truth["matched_iiw"] = {0.0, 1.0};
    nlohmann::json direct = nlohmann::json::array();
    nlohmann::json spill = nlohmann::json::array();
    for (int k = 0; k < spec.levels; ++k) {
      direct.push_back(spec.direct[k]);
      spill.push_back(spec.spillover[k]);
    }
    truth["direct"] = direct;
    truth["spillover"] = spill;
    nlohmann::json effects = nlohmann::json::object();
    for (int zp = 0; zp < spec.levels; ++zp)
      for (int zb = 0; zb < spec.levels; ++zb) {
        if (zp == zb) continue;
        effects[res.assignment.level_names[static_cast<std::size_t>(zp)] + "_vs_" +
                res.assignment.level_names[static_cast<std::size_t>(zb)]] =
            res.true_effects(zp, zb);
      }
    truth["effects"] = effects;
    write_json_file((base / "truth.json").string(), truth);
  }

  // config.json — runnable as-is from the fixture directory.
  {
    nlohmann::json cfg;
    nlohmann::json cols;
    cols["id"] = "country";
    cols["year"] = "year";
    cols["regulation"] = "reg";
    cols["control"] = "cont";
    cols["outcome"] = "y";
    nlohmann::json covs = nlohmann::json::array();
    for (const auto& c : res.panel.covariate_names) covs.push_back(c);
    cols["covariates"] = covs;
    if (spec.levels == 2) cols["combined_index"] = "impol";
    cfg["panel"] = {{"path", "panel.csv"}, {"columns", cols}};
    cfg["pairwise"] = {{"path", "pairwise.csv"}};
    cfg["treatment"] = {
        {"scheme", spec.levels == 4 ? "four" : (spec.levels == 3 ? "three" : "binary")}};
    cfg["lags"] = {{"covariate", 0}, {"outcome", 0}, {"append_contemporaneous_outcome", false}};
    cfg["iiw"] = {{0.5, 0.5}, {1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}};
    cfg["grid"] = {{"per_dim", 10}, {"quantile_low", 0.05}, {"quantile_high", 0.95}};
    cfg["bootstrap"] = {{"replicates", 200}, {"seed", spec.seed}, {"ci_level", 0.95}};
    cfg["model"] = {{"ridge", 0.0}, {"symmetrized_weights", false}};
    cfg["output_dir"] = "out";
    write_json_file((base / "config.json").string(), cfg);
  }

  return res;
}

}  // namespace netdirect
