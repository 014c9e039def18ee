#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "netdirect/diagnostics.hpp"
#include "netdirect/dgp.hpp"
#include "netdirect/mnl.hpp"
#include "netdirect/mvlr.hpp"
#include "netdirect/orq.hpp"
#include "netdirect/pipeline.hpp"
#include "test_support.hpp"

using namespace netdirect;

namespace {

struct Scores {
  Eigen::MatrixXd phi;     // n x K fitted assignment probabilities
  Eigen::MatrixXd lambda;  // n x K neighborhood densities at the observed exposure
};

// Fit the treatment and neighborhood models and evaluate both scores for
// every category at every row, the way the diagnose command does.
Scores fit_scores(const PipelineData& data) {
  const TreatmentAssignment za = data.assignment();
  const MnlFit mnl = fit_mnl(data.x_z, za);
  std::vector<std::string> enames;
  for (const auto& lvl : data.level_names) enames.push_back("e_" + lvl);
  auto [maps, g_star] = orq_fit_columns(data.g_raw, enames);
  (void)maps;
  const MvlrFit mv = fit_mvlr(g_star, za, data.x_g, data.xg_names);
  Scores s;
  s.phi.resize(data.n(), data.K);
  s.lambda.resize(data.n(), data.K);
  for (int i = 0; i < data.n(); ++i) {
    s.phi.row(i) = predict_probs(mnl, data.x_z.row(i).transpose()).transpose();
    for (int z = 0; z < data.K; ++z)
      s.lambda(i, z) = lambda_density(mv, g_star.row(i).transpose(), z, data.x_g.row(i).transpose());
  }
  return s;
}

}  // namespace

TEST_CASE("quantile bins split at type-7 edges", "[diagnostics]") {
  Eigen::VectorXd v(10);
  v << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  const std::vector<int> b2 = diag_detail::quantile_bins(v, 2);
  // Median edge is 5.5: values 1-5 fall in bin 0, values 6-10 in bin 1.
  for (int i = 0; i < 5; ++i) CHECK(b2[static_cast<std::size_t>(i)] == 0);
  for (int i = 5; i < 10; ++i) CHECK(b2[static_cast<std::size_t>(i)] == 1);
  const std::vector<int> b1 = diag_detail::quantile_bins(v, 1);
  for (int bin : b1) CHECK(bin == 0);
  // A constant column collapses every bin to the first.
  Eigen::VectorXd c = Eigen::VectorXd::Constant(6, 2.5);
  for (int bin : diag_detail::quantile_bins(c, 4)) CHECK(bin == 0);
}

TEST_CASE("stratum SMD is the max pairwise mean gap over the full-sample sd",
          "[diagnostics]") {
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  const std::vector<int> labels = {0, 0, 1, 1};
  const std::vector<int> rows = {0, 1, 2, 3};
  std::vector<double> col = {1, 2, 3, 4};
  const double sd = sample_sd(col);
  double out = -1.0;
  REQUIRE(diag_detail::stratum_smd(x, labels, 2, rows, 0, sd, out));
  CHECK_THAT(out, Catch::Matchers::WithinAbs(2.0 / sd, 1e-12));

  // Three categories: the max pairwise gap wins.
  Eigen::MatrixXd x3(6, 1);
  x3 << 0, 0, 1, 1, 5, 5;
  const std::vector<int> l3 = {0, 0, 1, 1, 2, 2};
  const std::vector<int> r3 = {0, 1, 2, 3, 4, 5};
  std::vector<double> col3 = {0, 0, 1, 1, 5, 5};
  REQUIRE(diag_detail::stratum_smd(x3, l3, 3, r3, 0, sample_sd(col3), out));
  CHECK_THAT(out, Catch::Matchers::WithinAbs(5.0 / sample_sd(col3), 1e-12));

  // A category with fewer than two rows does not contribute a mean: only
  // categories 0 (rows 0,1,5 -> mean 5/3) and 1 (mean 1) qualify.
  const std::vector<int> l_thin = {0, 0, 1, 1, 2, 0};
  REQUIRE(diag_detail::stratum_smd(x3, l_thin, 3, r3, 0, sample_sd(col3), out));
  CHECK_THAT(out, Catch::Matchers::WithinAbs((2.0 / 3.0) / sample_sd(col3), 1e-12));

  // Fewer than two usable categories: no SMD.
  const std::vector<int> l_single = {0, 0, 0, 0, 1, 2};
  CHECK_FALSE(diag_detail::stratum_smd(x3, l_single, 3, r3, 0, sample_sd(col3), out));
}

TEST_CASE("split SMD compares one category against the rest", "[diagnostics]") {
  Eigen::MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 10, 12;
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  const std::vector<int> rows = {0, 1, 2, 3, 4, 5};
  std::vector<double> col = {1, 2, 3, 4, 10, 12};
  const double sd = sample_sd(col);
  double out = -1.0;
  // Category 1 mean 3.5 vs rest {1,2,10,12} mean 6.25.
  REQUIRE(diag_detail::split_smd(x, labels, 1, rows, 0, sd, out));
  CHECK_THAT(out, Catch::Matchers::WithinAbs(2.75 / sd, 1e-12));
  // Thin side on either half: unusable.
  const std::vector<int> l_one = {0, 1, 1, 1, 1, 1};
  CHECK_FALSE(diag_detail::split_smd(x, l_one, 0, rows, 0, sd, out));
  CHECK_FALSE(diag_detail::split_smd(x, l_one, 1, rows, 0, sd, out));
  // sd 0 reports 0.
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(6, 1, 7.0);
  REQUIRE(diag_detail::split_smd(flat, labels, 1, rows, 0, 0.0, out));
  CHECK(out == 0.0);
}

TEST_CASE("a constant covariate reports zero imbalance", "[diagnostics]") {
  const int n = 40;
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(n, 1, 3.0);
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % 2);
  Eigen::MatrixXd phi(n, 2);
  phi.col(0) = Eigen::VectorXd::LinSpaced(n, 0.2, 0.8);
  phi.col(1) = Eigen::VectorXd::Ones(n) - phi.col(0);
  const auto rows = covariate_balance(x, {"flat"}, labels, 2, phi, nullptr, 2, 3);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].covariate == "flat");
  CHECK(rows[0].raw_smd == 0.0);
  CHECK(rows[0].within_smd_median == 0.0);
  // 2 categories x 2 phi bins, every cell has both sides populated.
  CHECK(rows[0].strata_used == 4);
}

TEST_CASE("balance inputs are validated", "[diagnostics]") {
  const int n = 6;
  Eigen::MatrixXd x(n, 1);
  x.setRandom();
  std::vector<int> labels = {0, 1, 0, 1, 0, 1};
  Eigen::MatrixXd phi(n, 2);
  phi.col(0) = Eigen::VectorXd::LinSpaced(n, 0.3, 0.7);
  phi.col(1) = Eigen::VectorXd::Ones(n) - phi.col(0);
  CHECK_THROWS_AS(covariate_balance(Eigen::MatrixXd(0, 1), {"a"}, {}, 2,
                                    Eigen::MatrixXd(0, 2), nullptr),
                  data_error);
  CHECK_THROWS_AS(covariate_balance(x, {"a"}, {0, 1}, 2, phi, nullptr), data_error);
  Eigen::MatrixXd short_phi(3, 2);
  short_phi.setConstant(0.5);
  CHECK_THROWS_AS(covariate_balance(x, {"a"}, labels, 2, short_phi, nullptr), data_error);
  Eigen::MatrixXd narrow_phi = phi.leftCols(1);
  CHECK_THROWS_AS(covariate_balance(x, {"a"}, labels, 2, narrow_phi, nullptr), data_error);
  Eigen::MatrixXd short_lambda(3, 2);
  short_lambda.setConstant(0.1);
  CHECK_THROWS_AS(covariate_balance(x, {"a"}, labels, 2, phi, &short_lambda), data_error);
  Eigen::MatrixXd narrow_lambda(n, 1);
  narrow_lambda.setConstant(0.1);
  CHECK_THROWS_AS(covariate_balance(x, {"a"}, labels, 2, phi, &narrow_lambda), data_error);
  CHECK_THROWS_AS(covariate_balance(x, {"a", "b"}, labels, 2, phi, nullptr), data_error);
  CHECK_THROWS_AS(covariate_balance(x, {"a"}, labels, 2, phi, nullptr, 0, 3), config_error);
  CHECK_THROWS_AS(covariate_balance(x, {"a"}, labels, 2, phi, nullptr, 5, 0), config_error);
  const std::vector<int> one_cat(n, 0);
  CHECK_THROWS_AS(covariate_balance(x, {"a"}, one_cat, 2, phi, nullptr), data_error);
}

TEST_CASE("randomized treatment is balanced marginally and within score strata",
          "[diagnostics][mc]") {
  // Zero treatment slopes: assignment ignores the covariates entirely, so both
  // the raw and the within-stratum standardized differences are pure noise.
  DgpSpec s;
  s.countries = 42;
  s.years = 300;
  s.covariates = 4;
  s.treatment_coefs = Eigen::MatrixXd::Zero(3, 5);
  s.treatment_coefs(0, 0) = -0.45;
  s.treatment_coefs(1, 0) = -0.55;
  s.treatment_coefs(2, 0) = -0.90;
  s.direct = Eigen::Vector4d(0.0, 0.3, 0.45, 0.2);
  s.spillover = Eigen::Vector4d(0.3, -0.15, 0.1, -0.05);
  s.covariate_coefs = Eigen::VectorXd::Zero(4);
  s.covariate_coefs[3] = 0.8;
  s.seed = 15;
  const DgpResult res = generate(s);
  const PipelineData data = testsup::pipeline_data_from_dgp(res);
  const Scores sc = fit_scores(data);

  const auto rows =
      covariate_balance(data.x_z, data.covariate_names, data.z, data.K, sc.phi, &sc.lambda, 5, 3);
  REQUIRE(rows.size() == 4);
  std::vector<double> medians;
  for (const auto& r : rows) {
    CHECK(r.raw_smd < 0.12);
    CHECK(r.within_smd_median < 0.12);
    CHECK(r.strata_used >= data.K);
    medians.push_back(r.within_smd_median);
  }
  CHECK(testsup::median_of(medians) < 0.1);
}

TEST_CASE("conditioning on the fitted scores shrinks confounded imbalance",
          "[diagnostics][mc]") {
  // Treatment loads heavily on x1-x3; x4 is clean. Within score strata the
  // loaded covariates must be much closer to balance than raw.
  DgpSpec s;
  s.countries = 40;
  s.years = 200;
  s.covariates = 4;
  s.treatment_coefs = Eigen::MatrixXd::Zero(3, 5);
  s.treatment_coefs(0, 0) = -0.45;
  s.treatment_coefs(1, 0) = -0.55;
  s.treatment_coefs(2, 0) = -0.90;
  s.treatment_coefs(0, 1) = 1.0;
  s.treatment_coefs(0, 2) = -0.6;
  s.treatment_coefs(0, 3) = 0.4;
  s.treatment_coefs(1, 1) = -0.8;
  s.treatment_coefs(1, 2) = 0.9;
  s.treatment_coefs(1, 3) = 0.3;
  s.treatment_coefs(2, 1) = 0.6;
  s.treatment_coefs(2, 2) = 0.7;
  s.treatment_coefs(2, 3) = -0.5;
  s.direct = Eigen::Vector4d(0.0, 0.3, 0.45, 0.2);
  s.spillover = Eigen::Vector4d(0.3, -0.15, 0.1, -0.05);
  s.covariate_coefs = Eigen::VectorXd::Zero(4);
  s.covariate_coefs[3] = 0.8;
  s.seed = 19;
  const DgpResult res = generate(s);
  const PipelineData data = testsup::pipeline_data_from_dgp(res);
  const Scores sc = fit_scores(data);

  const auto rows =
      covariate_balance(data.x_z, data.covariate_names, data.z, data.K, sc.phi, &sc.lambda, 4, 2);
  REQUIRE(rows.size() == 4);
  std::vector<double> raw_loaded, within_loaded;
  for (int j = 0; j < 3; ++j) {
    const BalanceRow& r = rows[static_cast<std::size_t>(j)];
    CHECK(r.raw_smd > 0.3);  // the confounding is real
    CHECK(r.within_smd_median < r.raw_smd);
    raw_loaded.push_back(r.raw_smd);
    within_loaded.push_back(r.within_smd_median);
  }
  CHECK(testsup::median_of(within_loaded) < 0.6 * testsup::median_of(raw_loaded));
  CHECK(rows[3].raw_smd < 0.12);  // the unloaded covariate starts balanced
}

TEST_CASE("transformed exposure columns test as standard normal", "[diagnostics]") {
  Rng rng(8);
  const int n = 660;
  Eigen::MatrixXd raw(n, 2);
  for (int i = 0; i < n; ++i) {
    raw(i, 0) = std::exp(rng.normal());  // heavily skewed
    raw(i, 1) = rng.uniform01();
  }
  auto [maps, g_star] = orq_fit_columns(raw, {"a", "b"});
  (void)maps;
  const auto rows = orq_normality(g_star, {"a", "b"});
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.n == n);
    CHECK(r.ks < 0.05);
  }
  // Untransformed shifted data is far from standard normal.
  Eigen::MatrixXd shifted(n, 1);
  for (int i = 0; i < n; ++i) shifted(i, 0) = 2.0 + rng.normal();
  CHECK(orq_normality(shifted, {"s"})[0].ks > 0.5);
  CHECK_THROWS_AS(orq_normality(g_star, {"a"}), data_error);
}
