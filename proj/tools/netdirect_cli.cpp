// Command-line front end: configuration-driven estimation runs, synthetic
// fixture generation, and post-run balance diagnostics.
//
// Exit codes: 0 success, 2 configuration/validation, 3 data integrity,
// 4 numeric/fit failure. Errors are emitted as one JSON object on stderr.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "netdirect/config.hpp"
#include "netdirect/csv.hpp"
#include "netdirect/diagnostics.hpp"
#include "netdirect/effects.hpp"
#include "netdirect/errors.hpp"
#include "netdirect/fixture.hpp"
#include "netdirect/influence.hpp"
#include "netdirect/panel.hpp"
#include "netdirect/pipeline.hpp"
#include "netdirect/version.hpp"

namespace nd = netdirect;
using nlohmann::json;

namespace {

void emit_error(const std::string& type, const std::string& message) {
  json j;
  j["error"] = {{"type", type}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

std::string fmt(double v) { return nd::format_double(v); }

struct CommonFlags {
  std::string config_path;
  std::string out_override;
  int threads = 0;
  std::int64_t seed_override = -1;
  bool verbose = false;
};

void vlog(const CommonFlags& f, const std::string& msg) {
  if (f.verbose) std::cerr << "[netdirect] " << msg << '\n';
}

// Ingestion shared by run and diagnose: load, lag-align, categorize.
struct PreparedInputs {
  nd::PanelFrame panel;
  nd::TreatmentAssignment assignment;
  nd::PairwiseTable pairwise;
};

PreparedInputs prepare_inputs(const nd::RunConfig& cfg) {
  PreparedInputs out;
  nd::PanelFrame raw = nd::load_panel_file(cfg.panel_path, cfg.panel_schema);
  out.panel = nd::lag_align(raw, cfg.covariate_lag, cfg.outcome_lag,
                            cfg.append_contemporaneous_outcome);
  nd::CategorizeOptions copts;
  copts.binary_weights = cfg.binary_weights;
  out.assignment = nd::categorize_treatment(out.panel, cfg.scheme, copts);
  out.pairwise = nd::load_pairwise_file(cfg.pairwise_path, cfg.pairwise_schema);
  return out;
}

std::vector<nd::Contrast> resolve_contrasts(const nd::RunConfig& cfg,
                                            const nd::TreatmentAssignment& a) {
  if (cfg.contrast_names.empty()) return nd::default_contrasts(a);
  std::vector<nd::Contrast> out;
  for (const auto& [zp, zb] : cfg.contrast_names) out.emplace_back(a.level_index(zp), a.level_index(zb));
  return out;
}

int cmd_run(const CommonFlags& flags) {
  nd::RunConfig cfg = nd::load_run_config(flags.config_path);
  if (!flags.out_override.empty()) cfg.output_dir = flags.out_override;
  if (flags.seed_override >= 0)
    cfg.bootstrap.seed = static_cast<std::uint64_t>(flags.seed_override);
  int threads = flags.threads;
  if (threads <= 0) threads = std::max(1u, std::thread::hardware_concurrency());
  cfg.bootstrap.threads = threads;

  vlog(flags, "loading inputs");
  PreparedInputs in = prepare_inputs(cfg);
  const std::vector<nd::Contrast> contrasts = resolve_contrasts(cfg, in.assignment);
  const nd::RequiredKeys keys = nd::panel_keys(in.panel);

  std::filesystem::create_directories(cfg.output_dir);
  const std::filesystem::path out(cfg.output_dir);

  nd::CsvWriter effects_csv, mnl_csv, mvlr_csv, sigma_csv, outcome_csv, ntem_csv, prop_csv,
      grid_csv;
  {
    effects_csv.row({"alpha", "beta", "z_prime", "z", "estimate", "std_err", "ci_low", "ci_high",
                     "replicates_used", "replicates_dropped"});
    mnl_csv.row({"alpha", "beta", "level", "term", "estimate"});
    mvlr_csv.row({"alpha", "beta", "response", "term", "estimate"});
    sigma_csv.row({"alpha", "beta", "row", "col", "value"});
    outcome_csv.row({"alpha", "beta", "term", "estimate"});
    std::vector<std::string> nh = {"alpha", "beta", "country", "year"};
    for (const auto& lvl : in.assignment.level_names) nh.push_back("exposure_" + lvl);
    for (const auto& lvl : in.assignment.level_names) nh.push_back("gstar_" + lvl);
    ntem_csv.row(nh);
    prop_csv.row({"alpha", "beta", "country", "year", "treatment", "phi_hat", "lambda_hat"});
    std::vector<std::string> gh = {"alpha", "beta", "point"};
    for (const auto& lvl : in.assignment.level_names) gh.push_back("gstar_" + lvl);
    for (const auto& lvl : in.assignment.level_names) gh.push_back("exposure_" + lvl);
    grid_csv.row(gh);
  }

  json effects_json;
  effects_json["rows"] = json::array();
  std::vector<std::string> all_warnings;

  for (const nd::IiwConfig& iiw : cfg.iiw) {
    const std::string ca = fmt(iiw.alpha), cb = fmt(iiw.beta);
    vlog(flags, "iiw (" + ca + ", " + cb + "): building influence graph");
    const nd::InfluenceGraph graph =
        nd::build_influence(in.pairwise, iiw.alpha, iiw.beta, &keys);
    const nd::PipelineData data = nd::prepare_pipeline_data(in.panel, in.assignment, graph);
    const nd::FittedPipeline fit = nd::fit_pipeline(data, cfg.pipeline);
    const nd::Grid grid = nd::make_grid(fit, cfg.pipeline);

    vlog(flags, "iiw (" + ca + ", " + cb + "): bootstrapping " +
                    std::to_string(cfg.bootstrap.replicates) + " replicates on " +
                    std::to_string(threads) + " thread(s)");
    nd::EffectTable table = nd::bootstrap_effects(data, contrasts, cfg.pipeline, cfg.bootstrap);
    for (const std::string& w : table.warnings)
      all_warnings.push_back("iiw(" + ca + "," + cb + "): " + w);

    for (nd::EffectRow& row : table.rows) {
      row.alpha = iiw.alpha;
      row.beta = iiw.beta;
      effects_csv.row({ca, cb, row.z_prime_name, row.z_name, fmt(row.tau_hat), fmt(row.std_err),
                       fmt(row.ci_low), fmt(row.ci_high), std::to_string(row.replicates_used),
                       std::to_string(row.replicates_dropped)});
      json jr;
      jr["alpha"] = row.alpha;
      jr["beta"] = row.beta;
      jr["z_prime"] = row.z_prime_name;
      jr["z"] = row.z_name;
      jr["estimate"] = row.tau_hat;
      jr["std_err"] = row.std_err;
      jr["ci_low"] = row.ci_low;
      jr["ci_high"] = row.ci_high;
      jr["replicates_used"] = row.replicates_used;
      jr["replicates_dropped"] = row.replicates_dropped;
      effects_json["rows"].push_back(jr);
    }

    // Treatment-model coefficients (one block per non-reference level).
    {
      std::vector<std::string> terms = {"intercept"};
      for (const auto& c : data.covariate_names) terms.push_back(c);
      for (Eigen::Index r = 0; r < fit.mnl.coef.rows(); ++r) {
        const std::string lvl = fit.mnl.level_names[static_cast<std::size_t>(
            fit.mnl.category_of_row(static_cast<int>(r)))];
        for (Eigen::Index c = 0; c < fit.mnl.coef.cols(); ++c)
          mnl_csv.row({ca, cb, lvl, terms[static_cast<std::size_t>(c)], fmt(fit.mnl.coef(r, c))});
      }
    }

    // Neighborhood-model coefficients and error covariance.
    if (fit.mvlr) {
      for (Eigen::Index c = 0; c < fit.mvlr->coef.cols(); ++c)
        for (Eigen::Index r = 0; r < fit.mvlr->coef.rows(); ++r)
          mvlr_csv.row({ca, cb, fit.mvlr->level_names[static_cast<std::size_t>(c)],
                        fit.mvlr->term_names[static_cast<std::size_t>(r)],
                        fmt(fit.mvlr->coef(r, c))});
      for (Eigen::Index r = 0; r < fit.mvlr->sigma.rows(); ++r)
        for (Eigen::Index c = 0; c < fit.mvlr->sigma.cols(); ++c)
          sigma_csv.row({ca, cb, fit.mvlr->level_names[static_cast<std::size_t>(r)],
                         fit.mvlr->level_names[static_cast<std::size_t>(c)],
                         fmt(fit.mvlr->sigma(r, c))});
    }

    // Outcome-model coefficients.
    for (Eigen::Index r = 0; r < fit.outcome.coef.size(); ++r)
      outcome_csv.row(
          {ca, cb, fit.outcome.term_names[static_cast<std::size_t>(r)], fmt(fit.outcome.coef[r])});

    // Exposure dump with the transformed columns when present.
    for (int i = 0; i < data.n(); ++i) {
      std::vector<std::string> row = {ca, cb};
      const std::string& id = data.row_ids[static_cast<std::size_t>(i)];
      const std::size_t colon = id.rfind(':');
      row.push_back(id.substr(0, colon));
      row.push_back(id.substr(colon + 1));
      for (Eigen::Index k = 0; k < data.g_raw.cols(); ++k) row.push_back(fmt(data.g_raw(i, k)));
      for (int k = 0; k < data.K; ++k)
        row.push_back(fit.interference ? fmt(fit.g_star(i, k)) : std::string());
      ntem_csv.row(row);
    }

    // Realized propensity scores.
    for (int i = 0; i < data.n(); ++i) {
      const std::string& id = data.row_ids[static_cast<std::size_t>(i)];
      const std::size_t colon = id.rfind(':');
      prop_csv.row({ca, cb, id.substr(0, colon), id.substr(colon + 1),
                    data.level_names[static_cast<std::size_t>(
                        data.z[static_cast<std::size_t>(i)])],
                    fmt(fit.phi_hat[i]),
                    fit.interference ? fmt(fit.lambda_hat[i]) : std::string()});
    }

    // Imputation grid in transformed and raw exposure scales.
    if (fit.interference) {
      for (int m = 0; m < grid.M(); ++m) {
        std::vector<std::string> row = {ca, cb, std::to_string(m)};
        for (int k = 0; k < grid.K(); ++k) row.push_back(fmt(grid.points(m, k)));
        for (int k = 0; k < grid.K(); ++k)
          row.push_back(fmt(fit.orq[static_cast<std::size_t>(k)].inverse(grid.points(m, k))));
        grid_csv.row(row);
      }
    }
  }

  effects_csv.write_file((out / "effects.csv").string());
  mnl_csv.write_file((out / "mnl_coefficients.csv").string());
  mvlr_csv.write_file((out / "mvlr_coefficients.csv").string());
  sigma_csv.write_file((out / "mvlr_sigma.csv").string());
  outcome_csv.write_file((out / "outcome_coefficients.csv").string());
  ntem_csv.write_file((out / "ntem.csv").string());
  prop_csv.write_file((out / "propensities.csv").string());
  grid_csv.write_file((out / "grid.csv").string());

  effects_json["warnings"] = all_warnings;
  effects_json["config_hash"] = nd::config_hash(cfg.canonical);
  nd::write_json_file((out / "effects.json").string(), effects_json);

  json manifest;
  manifest["command"] = "run";
  manifest["version"] = nd::kVersion;
  manifest["config"] = cfg.canonical;
  manifest["config_hash"] = nd::config_hash(cfg.canonical);
  manifest["seed"] = cfg.bootstrap.seed;
  manifest["threads"] = threads;
  manifest["outputs"] = {"effects.csv",  "effects.json",
                         "mnl_coefficients.csv", "mvlr_coefficients.csv",
                         "mvlr_sigma.csv", "outcome_coefficients.csv",
                         "ntem.csv",     "propensities.csv",
                         "grid.csv",     "manifest.json"};
  manifest["warnings"] = all_warnings;
  nd::write_json_file((out / "manifest.json").string(), manifest);

  for (const std::string& w : all_warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "wrote " << (out / "effects.csv").string() << " ("
            << effects_json["rows"].size() << " rows across " << cfg.iiw.size()
            << " influence configurations)\n";
  return 0;
}

int cmd_simulate(const CommonFlags& flags) {
  nd::DgpSpec spec = nd::load_sim_spec(flags.config_path);
  if (flags.seed_override >= 0) spec.seed = static_cast<std::uint64_t>(flags.seed_override);
  const std::string dir = flags.out_override.empty() ? "fixture" : flags.out_override;
  vlog(flags, "generating fixture into " + dir);
  nd::DgpResult res = nd::write_fixture(spec, dir);
  std::cout << "wrote " << dir << "/panel.csv (" << res.panel.units.size() << " rows), "
            << dir << "/pairwise.csv (" << res.pairwise.rows.size() << " rows), " << dir
            << "/truth.json, " << dir << "/config.json\n";
  return 0;
}

int cmd_diagnose(const CommonFlags& flags) {
  nd::RunConfig cfg = nd::load_run_config(flags.config_path);
  if (!flags.out_override.empty()) cfg.output_dir = flags.out_override;
  const std::filesystem::path out(cfg.output_dir);
  for (const char* f : {"manifest.json", "propensities.csv", "ntem.csv"})
    if (!std::filesystem::exists(out / f))
      throw nd::config_error("diagnose: missing artifact '" + (out / f).string() +
                             "'; run the `run` command first");
  {
    const json manifest = nd::read_json_file((out / "manifest.json").string());
    if (!manifest.contains("config_hash") ||
        manifest["config_hash"].get<std::string>() != nd::config_hash(cfg.canonical))
      throw nd::data_error("diagnose: artifacts in '" + cfg.output_dir +
                           "' were produced by a different configuration");
  }

  PreparedInputs in = prepare_inputs(cfg);
  const nd::RequiredKeys keys = nd::panel_keys(in.panel);
  const nd::CsvTable ntem = nd::read_csv_file((out / "ntem.csv").string());

  // Balance is checked against refitted scores: for every category the fitted
  // assignment probability and the neighborhood density of the observed
  // exposure, both evaluated at every row.
  nd::CsvWriter balance_csv;
  balance_csv.row({"alpha", "beta", "covariate", "raw_smd", "within_smd_median", "strata_used"});
  double worst_median = 0.0;
  for (const nd::IiwConfig& iiw : cfg.iiw) {
    const std::string ca = fmt(iiw.alpha), cb = fmt(iiw.beta);
    vlog(flags, "iiw (" + ca + ", " + cb + "): refitting scores for balance check");
    const nd::InfluenceGraph graph = nd::build_influence(in.pairwise, iiw.alpha, iiw.beta, &keys);
    const nd::PipelineData data = nd::prepare_pipeline_data(in.panel, in.assignment, graph);
    const nd::FittedPipeline fit = nd::fit_pipeline(data, cfg.pipeline);

    Eigen::MatrixXd phi(data.n(), data.K);
    for (int i = 0; i < data.n(); ++i)
      phi.row(i) = nd::predict_probs(fit.mnl, data.x_z.row(i).transpose()).transpose();
    Eigen::MatrixXd lam;
    if (fit.interference) {
      lam.resize(data.n(), data.K);
      for (int i = 0; i < data.n(); ++i)
        for (int z = 0; z < data.K; ++z)
          lam(i, z) = nd::lambda_density(*fit.mvlr, fit.g_star.row(i).transpose(), z,
                                         data.x_g.row(i).transpose());
    }

    const auto rows =
        nd::covariate_balance(data.x_z, data.covariate_names, data.z, data.K, phi,
                              fit.interference ? &lam : nullptr);
    for (const auto& r : rows) {
      balance_csv.row({ca, cb, r.covariate, fmt(r.raw_smd), fmt(r.within_smd_median),
                       std::to_string(r.strata_used)});
      worst_median = std::max(worst_median, r.within_smd_median);
    }
  }
  balance_csv.write_file((out / "balance.csv").string());

  // ORQ normality per transformed exposure column, per configuration.
  nd::CsvWriter ks_csv;
  ks_csv.row({"alpha", "beta", "column", "n", "ks"});
  {
    const std::size_t ia = ntem.column("alpha");
    const std::size_t ib = ntem.column("beta");
    std::vector<std::string> gcols;
    for (const auto& h : ntem.header)
      if (h.rfind("gstar_", 0) == 0) gcols.push_back(h);
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<double>>>
        cols;
    std::vector<std::pair<std::string, std::string>> korder;
    for (const auto& gc : gcols) {
      const std::size_t ic = ntem.column(gc);
      for (std::size_t r = 0; r < ntem.rows.size(); ++r) {
        const std::string& cell = ntem.rows[r][ic];
        if (cell.empty()) continue;  // zero-interference configuration
        const auto key = std::make_pair(ntem.rows[r][ia], ntem.rows[r][ib]);
        if (cols.find(key) == cols.end()) korder.push_back(key);
        cols[key][gc].push_back(nd::csv_to_double(cell, r, gc));
      }
    }
    std::sort(korder.begin(), korder.end());
    korder.erase(std::unique(korder.begin(), korder.end()), korder.end());
    for (const auto& key : korder)
      for (const auto& [name, values] : cols[key]) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
        for (std::size_t i = 0; i < values.size(); ++i)
          m(static_cast<Eigen::Index>(i), 0) = values[i];
        for (const auto& row : nd::orq_normality(m, {name}))
          ks_csv.row({key.first, key.second, row.column, std::to_string(row.n), fmt(row.ks)});
      }
  }
  ks_csv.write_file((out / "orq_normality.csv").string());

  std::cout << "wrote " << (out / "balance.csv").string() << " and "
            << (out / "orq_normality.csv").string()
            << "; worst within-stratum median standardized difference = " << fmt(worst_median)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-based direct-effect estimation under network interference"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto add_common = [&](CLI::App* sub, bool with_threads_seed) {
    sub->add_option("--config", flags.config_path, "Path to the JSON configuration")->required();
    sub->add_option("--out", flags.out_override, "Override the output directory");
    if (with_threads_seed) {
      sub->add_option("--threads", flags.threads,
                      "Worker threads for the bootstrap (default: all cores)");
      sub->add_option("--seed", flags.seed_override, "Override the configured seed");
    }
    sub->add_flag("--verbose", flags.verbose, "Progress logging on stderr");
  };

  CLI::App* run = app.add_subcommand("run", "Estimate direct effects from a configuration");
  add_common(run, true);
  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic fixture with known truth");
  add_common(sim, false);
  sim->add_option("--seed", flags.seed_override, "Override the simulation seed");
  CLI::App* diag =
      app.add_subcommand("diagnose", "Balance and normality diagnostics for a completed run");
  add_common(diag, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(flags);
    if (sim->parsed()) return cmd_simulate(flags);
    return cmd_diagnose(flags);
  } catch (const nd::config_error& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const nd::data_error& e) {
    emit_error("data", e.what());
    return 3;
  } catch (const nd::numeric_error& e) {
    emit_error("numeric", e.what());
    return 4;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 1;
  }
}
