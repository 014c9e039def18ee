#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "test_support.hpp"

using nlohmann::json;
using testsup::run_cli;

namespace {

// Minimal CSV reader for fixture artifacts (no quoted fields are emitted).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    FAIL("column '" << name << "' missing");
    return 0;
  }
};

Table parse_csv(const std::string& path) {
  Table t;
  std::istringstream in(testsup::read_text(path));
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (first) {
      t.header = cells;
      first = false;
    } else {
      t.rows.push_back(cells);
    }
  }
  return t;
}

json parse_error(const std::string& err) {
  // Failed commands emit exactly one JSON object on stderr.
  return json::parse(err);
}

// One simulated-and-estimated fixture shared by the read-only tests. The
// generated config is shrunk (fewer replicates, coarser grid) to keep the
// repeated runs cheap.
struct SharedFixture {
  testsup::TempDir dir{"cli_shared"};
  std::string config;

  SharedFixture() {
    testsup::write_text(dir.str("sim.json"), R"({"preset":"small_null","years":8,"seed":101})");
    auto sim = run_cli("simulate --config " + dir.str("sim.json") + " --out " + dir.str("fx"), dir);
    REQUIRE(sim.exit_code == 0);
    config = dir.str("fx/config.json");
    json cfg = json::parse(testsup::read_text(config));
    cfg["bootstrap"]["replicates"] = 60;
    cfg["grid"]["per_dim"] = 5;
    testsup::write_text(config, cfg.dump(2) + "\n");
    auto run = run_cli("run --config " + config, dir);
    REQUIRE(run.exit_code == 0);
  }

  std::string out(const std::string& rel) const { return dir.str("fx/out/" + rel); }
};

SharedFixture& fixture() {
  static SharedFixture f;
  return f;
}

}  // namespace

TEST_CASE("simulate writes a runnable self-contained fixture", "[cli]") {
  const SharedFixture& f = fixture();
  for (const char* name : {"panel.csv", "pairwise.csv", "truth.json", "config.json"})
    CHECK(std::filesystem::exists(f.dir.str("fx/" + std::string(name))));

  const json truth = json::parse(testsup::read_text(f.dir.str("fx/truth.json")));
  CHECK(truth["levels"] == 4);
  CHECK(truth["seed"] == 101);
  CHECK(truth["effects"].size() == 12);  // every ordered category pair
  CHECK(truth["matched_iiw"] == json({0.0, 1.0}));

  // A different seed draws a different scenario.
  testsup::TempDir other("cli_sim_seed");
  auto sim = run_cli("simulate --config " + f.dir.str("sim.json") + " --seed 500 --out " +
                         other.str("fx"),
                     other);
  REQUIRE(sim.exit_code == 0);
  CHECK(sim.out.find("wrote") != std::string::npos);
  CHECK(testsup::read_text(other.str("fx/panel.csv")) !=
        testsup::read_text(f.dir.str("fx/panel.csv")));

  testsup::write_text(other.str("bad.json"), R"({"preset":"nope"})");
  auto bad = run_cli("simulate --config " + other.str("bad.json"), other);
  CHECK(bad.exit_code == 2);
  CHECK(parse_error(bad.err)["error"]["type"] == "config");
}

TEST_CASE("run writes the full artifact set", "[cli]") {
  const SharedFixture& f = fixture();
  for (const char* name :
       {"effects.csv", "effects.json", "mnl_coefficients.csv", "mvlr_coefficients.csv",
        "mvlr_sigma.csv", "outcome_coefficients.csv", "ntem.csv", "propensities.csv", "grid.csv",
        "manifest.json"})
    CHECK(std::filesystem::exists(f.out(name)));

  const Table effects = parse_csv(f.out("effects.csv"));
  CHECK(effects.header ==
        std::vector<std::string>({"alpha", "beta", "z_prime", "z", "estimate", "std_err",
                                  "ci_low", "ci_high", "replicates_used", "replicates_dropped"}));
  REQUIRE(effects.rows.size() == 12);  // 4 influence configs x 3 default contrasts
  for (const auto& row : effects.rows) {
    CHECK(row[effects.col("z")] == "LL");
    const double se = std::stod(row[effects.col("std_err")]);
    const double lo = std::stod(row[effects.col("ci_low")]);
    const double hi = std::stod(row[effects.col("ci_high")]);
    const double est = std::stod(row[effects.col("estimate")]);
    CHECK(se > 0.0);
    CHECK(lo <= est);
    CHECK(est <= hi);
    CHECK(row[effects.col("replicates_used")] == "60");
  }

  const json ej = json::parse(testsup::read_text(f.out("effects.json")));
  CHECK(ej["rows"].size() == 12);
  const json manifest = json::parse(testsup::read_text(f.out("manifest.json")));
  CHECK(manifest["config_hash"] == ej["config_hash"]);
  CHECK(manifest["command"] == "run");
  CHECK(manifest["seed"] == 101);
  // Reruns must be byte-identical, so the manifest carries no timestamps.
  const std::vector<std::string> expected_keys = {"command",     "config",  "config_hash",
                                                  "outputs",     "seed",    "threads",
                                                  "version",     "warnings"};
  std::vector<std::string> keys;
  for (auto it = manifest.begin(); it != manifest.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  CHECK(keys == expected_keys);
}

TEST_CASE("reruns are byte-identical and thread count does not matter", "[cli]") {
  const SharedFixture& f = fixture();
  testsup::TempDir scratch("cli_rerun");
  auto again = run_cli("run --config " + f.config + " --out " + scratch.str("o2"), scratch);
  REQUIRE(again.exit_code == 0);
  auto threaded =
      run_cli("run --config " + f.config + " --threads 3 --out " + scratch.str("o3"), scratch);
  REQUIRE(threaded.exit_code == 0);
  for (const char* name : {"effects.csv", "ntem.csv", "propensities.csv", "grid.csv",
                           "mnl_coefficients.csv", "outcome_coefficients.csv"}) {
    const std::string base = testsup::read_text(f.out(name));
    CHECK(testsup::read_text(scratch.str("o2/" + std::string(name))) == base);
    CHECK(testsup::read_text(scratch.str("o3/" + std::string(name))) == base);
  }
}

TEST_CASE("seed override changes uncertainty but not point estimates", "[cli]") {
  const SharedFixture& f = fixture();
  testsup::TempDir scratch("cli_seed");
  auto seeded =
      run_cli("run --config " + f.config + " --seed 4242 --out " + scratch.str("o"), scratch);
  REQUIRE(seeded.exit_code == 0);
  const Table base = parse_csv(f.out("effects.csv"));
  const Table alt = parse_csv(scratch.str("o/effects.csv"));
  REQUIRE(alt.rows.size() == base.rows.size());
  bool any_se_differs = false;
  for (std::size_t i = 0; i < base.rows.size(); ++i) {
    CHECK(alt.rows[i][alt.col("estimate")] == base.rows[i][base.col("estimate")]);
    if (alt.rows[i][alt.col("std_err")] != base.rows[i][base.col("std_err")])
      any_se_differs = true;
  }
  CHECK(any_se_differs);
  const json manifest = json::parse(testsup::read_text(scratch.str("o/manifest.json")));
  CHECK(manifest["seed"] == 4242);  // the override is recorded
}

TEST_CASE("zero-weight influence runs without neighborhood scores", "[cli]") {
  const SharedFixture& f = fixture();
  const Table ntem = parse_csv(f.out("ntem.csv"));
  const Table props = parse_csv(f.out("propensities.csv"));
  int zero_rows = 0, zero_prop_rows = 0;
  for (const auto& row : ntem.rows) {
    const bool zero = row[ntem.col("alpha")] == "0" && row[ntem.col("beta")] == "0";
    if (zero) ++zero_rows;
    for (const auto& h : ntem.header)
      if (h.rfind("gstar_", 0) == 0) {
        const std::string& cell = row[ntem.col(h)];
        if (zero)
          CHECK(cell.empty());
        else
          CHECK(!cell.empty());
      }
    if (zero)
      for (const auto& h : ntem.header)
        if (h.rfind("exposure_", 0) == 0) CHECK(row[ntem.col(h)] == "0");
  }
  CHECK(zero_rows == 96);
  for (const auto& row : props.rows) {
    if (row[props.col("alpha")] == "0" && row[props.col("beta")] == "0") {
      ++zero_prop_rows;
      CHECK(row[props.col("lambda_hat")].empty());
      CHECK(!row[props.col("phi_hat")].empty());
    }
  }
  CHECK(zero_prop_rows == 96);
  // The imputation grid only exists for interference configurations.
  const Table grid = parse_csv(f.out("grid.csv"));
  for (const auto& row : grid.rows)
    CHECK(!(row[grid.col("alpha")] == "0" && row[grid.col("beta")] == "0"));
}

TEST_CASE("diagnose emits balance and normality tables", "[cli]") {
  const SharedFixture& f = fixture();
  auto diag = run_cli("diagnose --config " + f.config, f.dir);
  REQUIRE(diag.exit_code == 0);
  CHECK(diag.out.find("worst within-stratum median standardized difference") != std::string::npos);

  const Table balance = parse_csv(f.out("balance.csv"));
  CHECK(balance.header == std::vector<std::string>({"alpha", "beta", "covariate", "raw_smd",
                                                    "within_smd_median", "strata_used"}));
  REQUIRE(balance.rows.size() == 12);  // 4 influence configs x 3 covariates
  for (const auto& row : balance.rows) {
    CHECK(std::stod(row[balance.col("raw_smd")]) >= 0.0);
    CHECK(std::stod(row[balance.col("within_smd_median")]) >= 0.0);
    CHECK(std::stoi(row[balance.col("strata_used")]) >= 1);
  }

  const Table ks = parse_csv(f.out("orq_normality.csv"));
  REQUIRE(ks.rows.size() == 12);  // 3 interference configs x 4 transformed columns
  for (const auto& row : ks.rows) {
    CHECK(row[ks.col("n")] == "96");
    const double d = std::stod(row[ks.col("ks")]);
    CHECK(d >= 0.0);
    CHECK(d < 0.2);  // transformed columns are near-normal by construction
  }
}

TEST_CASE("diagnose requires matching run artifacts", "[cli]") {
  testsup::TempDir scratch("cli_diag_err");
  testsup::write_text(scratch.str("sim.json"), R"({"preset":"small_null","years":8,"seed":140})");
  auto sim = run_cli("simulate --config " + scratch.str("sim.json") + " --out " + scratch.str("fx"),
                     scratch);
  REQUIRE(sim.exit_code == 0);

  // No run yet: required artifacts are missing.
  auto early = run_cli("diagnose --config " + scratch.str("fx/config.json"), scratch);
  CHECK(early.exit_code == 2);
  CHECK(parse_error(early.err)["error"]["type"] == "config");
  CHECK(early.err.find("missing artifact") != std::string::npos);

  json cfg = json::parse(testsup::read_text(scratch.str("fx/config.json")));
  cfg["bootstrap"]["replicates"] = 40;
  cfg["grid"]["per_dim"] = 4;
  testsup::write_text(scratch.str("fx/config.json"), cfg.dump(2) + "\n");
  auto run = run_cli("run --config " + scratch.str("fx/config.json"), scratch);
  REQUIRE(run.exit_code == 0);
  auto diag = run_cli("diagnose --config " + scratch.str("fx/config.json"), scratch);
  CHECK(diag.exit_code == 0);

  // A config that differs from the one that produced the artifacts is refused.
  cfg["grid"]["per_dim"] = 6;
  testsup::write_text(scratch.str("fx/config2.json"), cfg.dump(2) + "\n");
  auto stale = run_cli("diagnose --config " + scratch.str("fx/config2.json"), scratch);
  CHECK(stale.exit_code == 3);
  CHECK(parse_error(stale.err)["error"]["type"] == "data");
  CHECK(stale.err.find("different configuration") != std::string::npos);
}

TEST_CASE("configuration and usage errors exit 2", "[cli]") {
  const SharedFixture& f = fixture();
  testsup::TempDir scratch("cli_cfg_err");

  json cfg = json::parse(testsup::read_text(f.config));
  cfg["bootstrap"]["replicates"] = 1;
  testsup::write_text(scratch.str("r1.json"), cfg.dump(2) + "\n");
  // Paths inside the config are relative to its directory.
  cfg = json::parse(testsup::read_text(f.config));
  cfg["panel"]["path"] = f.dir.str("fx/panel.csv");
  cfg["pairwise"]["path"] = f.dir.str("fx/pairwise.csv");
  cfg["output_dir"] = scratch.str("o");
  cfg["bootstrap"]["replicates"] = 1;
  testsup::write_text(scratch.str("r1.json"), cfg.dump(2) + "\n");
  auto r1 = run_cli("run --config " + scratch.str("r1.json"), scratch);
  CHECK(r1.exit_code == 2);
  CHECK(parse_error(r1.err)["error"]["type"] == "config");
  CHECK(r1.err.find("replicates") != std::string::npos);

  cfg["bootstrap"]["replicates"] = 40;
  cfg["bogus_section"] = 1;
  testsup::write_text(scratch.str("unknown.json"), cfg.dump(2) + "\n");
  auto unknown = run_cli("run --config " + scratch.str("unknown.json"), scratch);
  CHECK(unknown.exit_code == 2);
  CHECK(unknown.err.find("bogus_section") != std::string::npos);

  auto missing_file = run_cli("run --config " + scratch.str("nope.json"), scratch);
  CHECK(missing_file.exit_code == 2);

  // Usage errors from the argument parser share the configuration exit code.
  CHECK(run_cli("", scratch).exit_code == 2);
  CHECK(run_cli("frobnicate --config x.json", scratch).exit_code == 2);
  CHECK(run_cli("run", scratch).exit_code == 2);
  CHECK(run_cli("run --config " + f.config + " --bogus-flag", scratch).exit_code == 2);
  CHECK(run_cli("--help", scratch).exit_code == 0);
}

TEST_CASE("broken input data exits 3 and numeric failures exit 4", "[cli]") {
  testsup::TempDir scratch("cli_err_data");
  testsup::write_text(scratch.str("sim.json"), R"({"preset":"small_null","years":8,"seed":160})");
  auto sim = run_cli("simulate --config " + scratch.str("sim.json") + " --out " + scratch.str("fx"),
                     scratch);
  REQUIRE(sim.exit_code == 0);
  json cfg = json::parse(testsup::read_text(scratch.str("fx/config.json")));
  cfg["bootstrap"]["replicates"] = 40;
  cfg["grid"]["per_dim"] = 4;
  testsup::write_text(scratch.str("fx/config.json"), cfg.dump(2) + "\n");
  const std::string panel_path = scratch.str("fx/panel.csv");
  const std::string pristine = testsup::read_text(panel_path);

  // Duplicate (country, year) row -> ingestion rejects the panel.
  {
    std::string broken = pristine;
    const std::size_t last_nl = broken.find_last_of('\n', broken.size() - 2);
    broken += broken.substr(last_nl + 1);
    testsup::write_text(panel_path, broken);
    auto dup = run_cli("run --config " + scratch.str("fx/config.json"), scratch);
    CHECK(dup.exit_code == 3);
    CHECK(parse_error(dup.err)["error"]["type"] == "data");
    CHECK(dup.err.find("duplicate") != std::string::npos);
    testsup::write_text(panel_path, pristine);
  }

  // Constant covariate column -> the treatment model's Newton system is
  // singular, a numeric failure.
  {
    std::istringstream in(pristine);
    std::string line, rebuilt;
    bool first = true;
    std::size_t x1_col = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (first) {
        for (std::size_t i = 0; i < cells.size(); ++i)
          if (cells[i] == "x1") x1_col = i;
        REQUIRE(x1_col > 0);
        first = false;
      } else {
        cells[x1_col] = "1";
      }
      for (std::size_t i = 0; i < cells.size(); ++i)
        rebuilt += (i ? "," : "") + cells[i];
      rebuilt += "\n";
    }
    testsup::write_text(panel_path, rebuilt);
    auto numeric = run_cli("run --config " + scratch.str("fx/config.json"), scratch);
    CHECK(numeric.exit_code == 4);
    CHECK(parse_error(numeric.err)["error"]["type"] == "numeric");
    testsup::write_text(panel_path, pristine);
  }

  // Pairwise table that no longer covers the panel's country pairs.
  {
    const std::string pw_path = scratch.str("fx/pairwise.csv");
    const std::string pw = testsup::read_text(pw_path);
    testsup::write_text(pw_path, pw.substr(0, pw.find('\n') + 1));
    auto sparse = run_cli("run --config " + scratch.str("fx/config.json"), scratch);
    CHECK(sparse.exit_code == 3);
    CHECK(parse_error(sparse.err)["error"]["type"] == "data");
  }
}

#ifdef NETDIRECT_DEMO_CONFIG
TEST_CASE("the shipped fixture estimates its planted effects", "[shipped]") {
  // Full-size committed fixture with the default configuration; roughly two
  // minutes of bootstrap work, so this runs as its own suite entry.
  testsup::TempDir scratch("cli_shipped");
  const std::string config(NETDIRECT_DEMO_CONFIG);
  REQUIRE(std::filesystem::exists(config));
  auto run = run_cli("run --config " + config + " --out " + scratch.str("out"), scratch);
  REQUIRE(run.exit_code == 0);

  const Table effects = parse_csv(scratch.str("out/effects.csv"));
  REQUIRE(effects.rows.size() == 12);  // 4 influence configs x 3 contrasts

  const std::filesystem::path fixture_dir = std::filesystem::path(config).parent_path();
  const json truth = json::parse(testsup::read_text((fixture_dir / "truth.json").string()));
  const std::string ma = std::to_string(truth["matched_iiw"][0].get<int>());
  const std::string mb = std::to_string(truth["matched_iiw"][1].get<int>());
  int matched_rows = 0;
  for (const auto& row : effects.rows) {
    CHECK(row[effects.col("replicates_used")] == "200");
    CHECK(row[effects.col("replicates_dropped")] == "0");
    if (row[effects.col("alpha")] != ma || row[effects.col("beta")] != mb) continue;
    ++matched_rows;
    const double est = std::stod(row[effects.col("estimate")]);
    const double se = std::stod(row[effects.col("std_err")]);
    const double planted =
        truth["effects"][row[effects.col("z_prime")] + "_vs_" + row[effects.col("z")]]
            .get<double>();
    CHECK(std::abs(est - planted) < 3.0 * se);
  }
  CHECK(matched_rows == 3);
}
#endif
