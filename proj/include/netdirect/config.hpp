// JSON run configuration: parsing, validation, canonicalization and hashing.
//
// All file paths in a config are resolved relative to the config file's own
// directory, so a fixture directory is self-contained and relocatable. The
// canonical form (defaults filled in, keys sorted) is what gets hashed into
// the run manifest.
#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "netdirect/dgp.hpp"
#include "netdirect/effects.hpp"
#include "netdirect/errors.hpp"
#include "netdirect/influence.hpp"
#include "netdirect/panel.hpp"
#include "netdirect/pipeline.hpp"

namespace netdirect {

struct RunConfig {
  std::string panel_path;
  PanelSchema panel_schema;
  std::string pairwise_path;
  PairwiseSchema pairwise_schema;

  TreatmentScheme scheme = TreatmentScheme::FOUR;
  std::optional<std::pair<double, double>> binary_weights;

  int covariate_lag = 0;
  int outcome_lag = 0;
  bool append_contemporaneous_outcome = true;

  std::vector<IiwConfig> iiw;
  PipelineOptions pipeline;
  BootstrapOptions bootstrap;

  // Contrast pairs by level name, e.g. {"HL","LL"}; empty means every
  // non-reference level against the reference.
  std::vector<std::pair<std::string, std::string>> contrast_names;

  std::string output_dir = "out";

  nlohmann::json canonical;  // defaults filled in; hashed into the manifest
};

namespace config_detail {

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                                     const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw config_error("config: missing key '" + where + key + "'");
  return *it;
}

inline std::string req_string(const nlohmann::json& j, const std::string& key,
                              const std::string& where) {
  const auto& v = require(j, key, where);
  if (!v.is_string()) throw config_error("config: '" + where + key + "' must be a string");
  return v.get<std::string>();
}

inline std::string opt_string(const nlohmann::json& j, const std::string& key,
                              const std::string& fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw config_error("config: '" + where + key + "' must be a string");
  return it->get<std::string>();
}

inline double opt_number(const nlohmann::json& j, const std::string& key, double fallback,
                         const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw config_error("config: '" + where + key + "' must be a number");
  return it->get<double>();
}

inline int opt_int(const nlohmann::json& j, const std::string& key, int fallback,
                   const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer())
    throw config_error("config: '" + where + key + "' must be an integer");
  return it->get<int>();
}

inline bool opt_bool(const nlohmann::json& j, const std::string& key, bool fallback,
                     const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw config_error("config: '" + where + key + "' must be a boolean");
  return it->get<bool>();
}

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return fp.lexically_normal().string();
  return (base / fp).lexically_normal().string();
}

}  // namespace config_detail

inline TreatmentScheme parse_scheme(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "four") return TreatmentScheme::FOUR;
  if (s == "three") return TreatmentScheme::THREE;
  if (s == "binary") return TreatmentScheme::BINARY;
  throw config_error("config: treatment.scheme must be one of \"four\", \"three\", \"binary\"");
}

inline std::string scheme_string(TreatmentScheme s) {
  switch (s) {
    case TreatmentScheme::FOUR: return "four";
    case TreatmentScheme::THREE: return "three";
    default: return "binary";
  }
}

// FNV-1a 64-bit over the canonical (sorted-key) dump.
inline std::string config_hash(const nlohmann::json& canonical) {
  const std::string s = canonical.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config: invalid JSON in '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw config_error("config: top level of '" + path + "' must be an object");
  return j;
}

inline RunConfig parse_run_config(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir) {
  using namespace config_detail;
  RunConfig cfg;
  nlohmann::json canon;

  // --- panel ---
  const auto& jp = require(j, "panel", "");
  if (!jp.is_object()) throw config_error("config: 'panel' must be an object");
  cfg.panel_path = resolve_path(base_dir, req_string(jp, "path", "panel."));
  nlohmann::json cp = nlohmann::json::object();
  {
    nlohmann::json cols =
        jp.contains("columns") ? require(jp, "columns", "panel.") : nlohmann::json::object();
    if (!cols.is_object()) throw config_error("config: 'panel.columns' must be an object");
    const std::string w = "panel.columns.";
    cfg.panel_schema.id = opt_string(cols, "id", "country", w);
    cfg.panel_schema.year = opt_string(cols, "year", "year", w);
    cfg.panel_schema.reg = opt_string(cols, "regulation", "reg", w);
    cfg.panel_schema.cont = opt_string(cols, "control", "cont", w);
    cfg.panel_schema.outcome = opt_string(cols, "outcome", "y", w);
    const auto& jc = require(cols, "covariates", w);
    if (!jc.is_array() || jc.empty())
      throw config_error("config: 'panel.columns.covariates' must be a non-empty array");
    for (const auto& c : jc) {
      if (!c.is_string())
        throw config_error("config: 'panel.columns.covariates' entries must be strings");
      cfg.panel_schema.covariates.push_back(c.get<std::string>());
    }
    if (cols.contains("combined_index"))
      cfg.panel_schema.combined_index = req_string(cols, "combined_index", w);
    cp["id"] = cfg.panel_schema.id;
    cp["year"] = cfg.panel_schema.year;
    cp["regulation"] = cfg.panel_schema.reg;
    cp["control"] = cfg.panel_schema.cont;
    cp["outcome"] = cfg.panel_schema.outcome;
    cp["covariates"] = cfg.panel_schema.covariates;
    if (cfg.panel_schema.combined_index) cp["combined_index"] = *cfg.panel_schema.combined_index;
  }
  const std::string panel_delim = opt_string(jp, "delimiter", ",", "panel.");
  if (panel_delim.size() != 1) throw config_error("config: 'panel.delimiter' must be one character");
  cfg.panel_schema.delimiter = panel_delim[0];
  canon["panel"] = {
      {"path", req_string(jp, "path", "panel.")}, {"columns", cp}, {"delimiter", panel_delim}};

  // --- pairwise ---
  const auto& jw = require(j, "pairwise", "");
  if (!jw.is_object()) throw config_error("config: 'pairwise' must be an object");
  cfg.pairwise_path = resolve_path(base_dir, req_string(jw, "path", "pairwise."));
  {
    nlohmann::json cols =
        jw.contains("columns") ? require(jw, "columns", "pairwise.") : nlohmann::json::object();
    if (!cols.is_object()) throw config_error("config: 'pairwise.columns' must be an object");
    const std::string w = "pairwise.columns.";
    cfg.pairwise_schema.a = opt_string(cols, "a", "country_a", w);
    cfg.pairwise_schema.b = opt_string(cols, "b", "country_b", w);
    cfg.pairwise_schema.year = opt_string(cols, "year", "year", w);
    cfg.pairwise_schema.sp = opt_string(cols, "shortest_path", "sp", w);
    cfg.pairwise_schema.dist = opt_string(cols, "distance", "dist_std", w);
    cfg.pairwise_schema.ling = opt_string(cols, "linguistic", "ling", w);
    cfg.pairwise_schema.relig = opt_string(cols, "religious", "relig", w);
  }
  cfg.pairwise_schema.standardize_dist =
      opt_bool(jw, "standardize_distance", false, "pairwise.");
  const std::string pw_delim = opt_string(jw, "delimiter", ",", "pairwise.");
  if (pw_delim.size() != 1)
    throw config_error("config: 'pairwise.delimiter' must be one character");
  cfg.pairwise_schema.delimiter = pw_delim[0];
  {
    nlohmann::json cw;
    cw["a"] = cfg.pairwise_schema.a;
    cw["b"] = cfg.pairwise_schema.b;
    cw["year"] = cfg.pairwise_schema.year;
    cw["shortest_path"] = cfg.pairwise_schema.sp;
    cw["distance"] = cfg.pairwise_schema.dist;
    cw["linguistic"] = cfg.pairwise_schema.ling;
    cw["religious"] = cfg.pairwise_schema.relig;
    nlohmann::json jpw;
    jpw["path"] = req_string(jw, "path", "pairwise.");
    jpw["columns"] = cw;
    jpw["standardize_distance"] = cfg.pairwise_schema.standardize_dist;
    jpw["delimiter"] = pw_delim;
    canon["pairwise"] = jpw;
  }

  // --- treatment ---
  {
    nlohmann::json jt =
        j.contains("treatment") ? require(j, "treatment", "") : nlohmann::json::object();
    if (!jt.is_object()) throw config_error("config: 'treatment' must be an object");
    cfg.scheme = parse_scheme(opt_string(jt, "scheme", "four", "treatment."));
    nlohmann::json ct = {{"scheme", scheme_string(cfg.scheme)}};
    if (jt.contains("binary_weights")) {
      const auto& bw = jt["binary_weights"];
      if (!bw.is_array() || bw.size() != 2 || !bw[0].is_number() || !bw[1].is_number())
        throw config_error("config: 'treatment.binary_weights' must be [number, number]");
      cfg.binary_weights = std::make_pair(bw[0].get<double>(), bw[1].get<double>());
      ct["binary_weights"] = bw;
    }
    canon["treatment"] = ct;
  }

  // --- lags ---
  {
    nlohmann::json jl = j.contains("lags") ? require(j, "lags", "") : nlohmann::json::object();
    if (!jl.is_object()) throw config_error("config: 'lags' must be an object");
    cfg.covariate_lag = opt_int(jl, "covariate", 0, "lags.");
    cfg.outcome_lag = opt_int(jl, "outcome", 0, "lags.");
    cfg.append_contemporaneous_outcome =
        opt_bool(jl, "append_contemporaneous_outcome", true, "lags.");
    if (cfg.covariate_lag < 0 || cfg.outcome_lag < 0)
      throw config_error("config: lags must be non-negative");
    canon["lags"] = {{"covariate", cfg.covariate_lag},
                     {"outcome", cfg.outcome_lag},
                     {"append_contemporaneous_outcome", cfg.append_contemporaneous_outcome}};
  }

  // --- iiw ---
  {
    nlohmann::json ji = j.contains("iiw")
                            ? j["iiw"]
                            : nlohmann::json::parse("[[0.5,0.5],[1.0,0.0],[0.0,1.0],[0.0,0.0]]");
    if (!ji.is_array() || ji.empty()) throw config_error("config: 'iiw' must be a non-empty array");
    for (const auto& pair : ji) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
        throw config_error("config: 'iiw' entries must be [alpha, beta] number pairs");
      IiwConfig c{pair[0].get<double>(), pair[1].get<double>()};
      if (c.alpha < 0.0 || c.beta < 0.0 ||
          !(std::abs(c.alpha + c.beta - 1.0) <= 1e-12 || (c.alpha == 0.0 && c.beta == 0.0)))
        throw config_error("config: iiw pair (" + std::to_string(c.alpha) + ", " +
                           std::to_string(c.beta) +
                           ") invalid; weights must be non-negative and sum to 1 or both be 0");
      cfg.iiw.push_back(c);
    }
    canon["iiw"] = ji;
  }

  // --- grid ---
  {
    nlohmann::json jg = j.contains("grid") ? require(j, "grid", "") : nlohmann::json::object();
    if (!jg.is_object()) throw config_error("config: 'grid' must be an object");
    cfg.pipeline.grid_per_dim = opt_int(jg, "per_dim", 10, "grid.");
    cfg.pipeline.grid_q_low = opt_number(jg, "quantile_low", 0.05, "grid.");
    cfg.pipeline.grid_q_high = opt_number(jg, "quantile_high", 0.95, "grid.");
    if (cfg.pipeline.grid_per_dim < 2)
      throw config_error("config: 'grid.per_dim' must be at least 2");
    if (!(0.0 <= cfg.pipeline.grid_q_low && cfg.pipeline.grid_q_low < cfg.pipeline.grid_q_high &&
          cfg.pipeline.grid_q_high <= 1.0))
      throw config_error("config: grid quantile bounds must satisfy 0 <= low < high <= 1");
    canon["grid"] = {{"per_dim", cfg.pipeline.grid_per_dim},
                     {"quantile_low", cfg.pipeline.grid_q_low},
                     {"quantile_high", cfg.pipeline.grid_q_high}};
  }

  // --- bootstrap ---
  {
    nlohmann::json jb =
        j.contains("bootstrap") ? require(j, "bootstrap", "") : nlohmann::json::object();
    if (!jb.is_object()) throw config_error("config: 'bootstrap' must be an object");
    cfg.bootstrap.replicates = opt_int(jb, "replicates", 200, "bootstrap.");
    const double seed = opt_number(jb, "seed", 20260816.0, "bootstrap.");
    if (seed < 0.0 || seed != std::floor(seed))
      throw config_error("config: 'bootstrap.seed' must be a non-negative integer");
    cfg.bootstrap.seed = static_cast<std::uint64_t>(seed);
    cfg.bootstrap.ci_level = opt_number(jb, "ci_level", 0.95, "bootstrap.");
    // Experimental: resample whole countries instead of individual rows.
    cfg.bootstrap.cluster_by_country = opt_bool(jb, "cluster_by_country", false, "bootstrap.");
    if (cfg.bootstrap.replicates < 2)
      throw config_error("config: 'bootstrap.replicates' must be at least 2");
    if (!(cfg.bootstrap.ci_level > 0.0 && cfg.bootstrap.ci_level < 1.0))
      throw config_error("config: 'bootstrap.ci_level' must lie in (0, 1)");
    canon["bootstrap"] = {{"replicates", cfg.bootstrap.replicates},
                          {"seed", cfg.bootstrap.seed},
                          {"ci_level", cfg.bootstrap.ci_level},
                          {"cluster_by_country", cfg.bootstrap.cluster_by_country}};
  }

  // --- model ---
  {
    nlohmann::json jm = j.contains("model") ? require(j, "model", "") : nlohmann::json::object();
    if (!jm.is_object()) throw config_error("config: 'model' must be an object");
    cfg.pipeline.ridge = opt_number(jm, "ridge", 0.0, "model.");
    if (cfg.pipeline.ridge < 0.0) throw config_error("config: 'model.ridge' must be >= 0");
    cfg.pipeline.symmetrized_weights = opt_bool(jm, "symmetrized_weights", false, "model.");
    canon["model"] = {{"ridge", cfg.pipeline.ridge},
                      {"symmetrized_weights", cfg.pipeline.symmetrized_weights}};
  }

  // --- contrasts ---
  {
    nlohmann::json jc = j.contains("contrasts") ? j["contrasts"] : nlohmann::json::array();
    if (!jc.is_array()) throw config_error("config: 'contrasts' must be an array");
    for (const auto& pair : jc) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string())
        throw config_error("config: 'contrasts' entries must be [\"z_prime\", \"z\"] name pairs");
      cfg.contrast_names.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
    }
    canon["contrasts"] = jc;
  }

  cfg.output_dir = resolve_path(base_dir, opt_string(j, "output_dir", "out", ""));
  canon["output_dir"] = opt_string(j, "output_dir", "out", "");

  // Unknown top-level keys are typos until proven otherwise.
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "panel" && k != "pairwise" && k != "treatment" && k != "lags" && k != "iiw" &&
        k != "grid" && k != "bootstrap" && k != "model" && k != "contrasts" && k != "output_dir")
      throw config_error("config: unknown key '" + k + "'");
  }

  if (!std::filesystem::exists(cfg.panel_path))
    throw config_error("config: panel file '" + cfg.panel_path + "' does not exist");
  if (!std::filesystem::exists(cfg.pairwise_path))
    throw config_error("config: pairwise file '" + cfg.pairwise_path + "' does not exist");

  cfg.canonical = std::move(canon);
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  return parse_run_config(j, std::filesystem::path(path).parent_path());
}

// --- simulation specs -------------------------------------------------------

// A simulation spec starts from a named preset and overrides scalar or array
// fields; matrices are given row-major as arrays of arrays.
inline DgpSpec parse_sim_spec(const nlohmann::json& j) {
  using namespace config_detail;
  DgpSpec s;
  const std::string preset = opt_string(j, "preset", "standard", "");
  if (preset == "standard")
    s = DgpSpec::standard();
  else if (preset == "confounded_spillover")
    s = DgpSpec::confounded_spillover();
  else if (preset == "small_null")
    s = DgpSpec::small_null();
  else
    throw config_error(
        "simulate: preset must be one of \"standard\", \"confounded_spillover\", \"small_null\"");

  s.countries = opt_int(j, "countries", s.countries, "");
  s.years = opt_int(j, "years", s.years, "");
  s.levels = opt_int(j, "levels", s.levels, "");
  s.covariates = opt_int(j, "covariates", s.covariates, "");
  s.intercept = opt_number(j, "intercept", s.intercept, "");
  s.trend_per_year = opt_number(j, "trend_per_year", s.trend_per_year, "");
  s.noise_sd = opt_number(j, "noise_sd", s.noise_sd, "");
  s.weight_lo = opt_number(j, "weight_lo", s.weight_lo, "");
  s.weight_hi = opt_number(j, "weight_hi", s.weight_hi, "");
  s.blocks = opt_int(j, "blocks", s.blocks, "");
  s.block_shift_sd = opt_number(j, "block_shift_sd", s.block_shift_sd, "");
  s.block_weight_lo = opt_number(j, "block_weight_lo", s.block_weight_lo, "");
  s.block_weight_hi = opt_number(j, "block_weight_hi", s.block_weight_hi, "");
  const double seed = opt_number(j, "seed", static_cast<double>(s.seed), "");
  if (seed < 0.0 || seed != std::floor(seed))
    throw config_error("simulate: 'seed' must be a non-negative integer");
  s.seed = static_cast<std::uint64_t>(seed);

  auto read_vector = [&](const char* key, Eigen::VectorXd& dst) {
    if (!j.contains(key)) return;
    const auto& a = j[key];
    if (!a.is_array()) throw config_error(std::string("simulate: '") + key + "' must be an array");
    dst.resize(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number())
        throw config_error(std::string("simulate: '") + key + "' entries must be numbers");
      dst[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    }
  };
  read_vector("direct", s.direct);
  read_vector("spillover", s.spillover);
  read_vector("covariate_coefs", s.covariate_coefs);

  if (j.contains("treatment_coefs")) {
    const auto& m = j["treatment_coefs"];
    if (!m.is_array() || m.empty() || !m[0].is_array())
      throw config_error("simulate: 'treatment_coefs' must be an array of row arrays");
    const std::size_t cols = m[0].size();
    s.treatment_coefs.resize(static_cast<Eigen::Index>(m.size()),
                             static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (!m[r].is_array() || m[r].size() != cols)
        throw config_error("simulate: 'treatment_coefs' rows must have equal length");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!m[r][c].is_number())
          throw config_error("simulate: 'treatment_coefs' entries must be numbers");
        s.treatment_coefs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            m[r][c].get<double>();
      }
    }
  }

  // Resize-on-preset-change convenience: when dimensions shrank or grew but the
  // coefficient blocks were not overridden, regenerate zero blocks of the right
  // shape rather than failing on a stale preset shape.
  if (!j.contains("treatment_coefs") &&
      (s.treatment_coefs.rows() != s.levels - 1 || s.treatment_coefs.cols() != s.covariates + 1)) {
    Eigen::MatrixXd fresh = Eigen::MatrixXd::Zero(s.levels - 1, s.covariates + 1);
    for (Eigen::Index r = 0; r < std::min(fresh.rows(), s.treatment_coefs.rows()); ++r)
      for (Eigen::Index c = 0; c < std::min(fresh.cols(), s.treatment_coefs.cols()); ++c)
        fresh(r, c) = s.treatment_coefs(r, c);
    s.treatment_coefs = std::move(fresh);
  }
  auto fit_vector = [](Eigen::VectorXd& v, int size) {
    if (v.size() == size) return;
    Eigen::VectorXd fresh = Eigen::VectorXd::Zero(size);
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(size, v.size()); ++i) fresh[i] = v[i];
    v = std::move(fresh);
  };
  if (!j.contains("direct")) fit_vector(s.direct, s.levels);
  if (!j.contains("spillover")) fit_vector(s.spillover, s.levels);
  if (!j.contains("covariate_coefs")) fit_vector(s.covariate_coefs, s.covariates);

  return s;
}

inline DgpSpec load_sim_spec(const std::string& path) {
  return parse_sim_spec(read_json_file(path));
}

}  // namespace netdirect
