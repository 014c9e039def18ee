#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "netdirect/dgp.hpp"
#include "netdirect/errors.hpp"
#include "netdirect/panel.hpp"
#include "netdirect/rng.hpp"
#include "oracle_values.hpp"

using namespace netdirect;

namespace {

PanelSchema two_covariate_schema() {
  PanelSchema s;
  s.id = "country";
  s.year = "year";
  s.reg = "reg";
  s.cont = "cont";
  s.outcome = "y";
  s.covariates = {"x1", "x2"};
  return s;
}

PanelFrame parse(const std::string& csv, const PanelSchema& schema) {
  std::istringstream in(csv);
  return load_panel(in, schema);
}

}  // namespace

TEST_CASE("panel parses and sorts rows by (country, year)", "[panel]") {
  const PanelFrame p = parse(
      "country,year,reg,cont,y,x1,x2\n"
      "B,2001,0.5,0.25,1.5,0.1,0.2\n"
      "A,2002,1,0,2.5,0.3,0.4\n"
      "A,2001,0,1,3.5,0.5,0.6\n",
      two_covariate_schema());
  REQUIRE(p.n() == 3);
  CHECK(p.units[0].country == "A");
  CHECK(p.units[0].year == 2001);
  CHECK(p.units[1].country == "A");
  CHECK(p.units[1].year == 2002);
  CHECK(p.units[2].country == "B");
  CHECK(p.units[0].y == 3.5);
  CHECK(p.units[0].x[1] == 0.6);
  CHECK(p.units[2].reg == 0.5);
  CHECK(p.covariate_names == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("panel errors name the offending column and row", "[panel]") {
  auto schema = two_covariate_schema();
  // Missing covariate column.
  CHECK_THROWS_WITH(parse("country,year,reg,cont,y,x1\nA,2001,0,0,1,2\n", schema),
                    Catch::Matchers::ContainsSubstring("'x2'"));
  // Indicator out of [0,1].
  CHECK_THROWS_WITH(parse("country,year,reg,cont,y,x1,x2\nA,2001,1.2,0,1,2,3\n", schema),
                    Catch::Matchers::ContainsSubstring("out of range") &&
                        Catch::Matchers::ContainsSubstring("'reg'"));
  // Duplicate (country, year).
  CHECK_THROWS_WITH(parse("country,year,reg,cont,y,x1,x2\n"
                          "A,2001,0,0,1,2,3\n"
                          "A,2001,1,1,1,2,3\n",
                          schema),
                    Catch::Matchers::ContainsSubstring("duplicate"));
  // Non-numeric covariate.
  CHECK_THROWS_AS(parse("country,year,reg,cont,y,x1,x2\nA,2001,0,0,1,zzz,3\n", schema),
                  data_error);
  // Empty country id.
  CHECK_THROWS_AS(parse("country,year,reg,cont,y,x1,x2\n,2001,0,0,1,2,3\n", schema),
                  data_error);
}

TEST_CASE("lag (0,0) without the extra regressor is the identity", "[panel]") {
  const PanelFrame p = parse(
      "country,year,reg,cont,y,x1,x2\n"
      "A,2001,0,1,3.5,0.5,0.6\n"
      "A,2002,1,0,2.5,0.3,0.4\n",
      two_covariate_schema());
  const PanelFrame a = lag_align(p, 0, 0, /*append_contemporaneous_outcome=*/false);
  REQUIRE(a.n() == p.n());
  for (int i = 0; i < p.n(); ++i)
    CHECK(a.units[static_cast<std::size_t>(i)] == p.units[static_cast<std::size_t>(i)]);
}

TEST_CASE("lag (0,0) with appended outcome keeps alignment and adds y_t", "[panel]") {
  const PanelFrame p = parse(
      "country,year,reg,cont,y,x1,x2\n"
      "A,2001,0,1,3.5,0.5,0.6\n",
      two_covariate_schema());
  const PanelFrame a = lag_align(p, 0, 0, true);
  REQUIRE(a.n() == 1);
  REQUIRE(a.covariate_names == std::vector<std::string>{"x1", "x2", "y_t"});
  CHECK(a.units[0].x[2] == 3.5);
  CHECK(a.units[0].y == 3.5);
}

TEST_CASE("lags (1,1) on a 22x30 panel keep 28 rows per country", "[panel]") {
  DgpSpec spec = DgpSpec::standard();  // 22 countries x 30 years
  const DgpResult r = generate(spec);
  REQUIRE(r.panel.n() == 22 * 30);
  const PanelFrame a = lag_align(r.panel, 1, 1);
  CHECK(a.n() == 22 * 28);
  // Treatment years span 2..29: covariates come from t-1, outcomes from t+1.
  CHECK(a.years().front() == 2);
  CHECK(a.years().back() == 29);
  // Spot-check one joined row.
  const Unit& u = a.units[0];
  const Unit& base = r.panel.units[0];   // (C01, 1)
  const Unit& zrow = r.panel.units[1];   // (C01, 2)
  const Unit& yrow = r.panel.units[2];   // (C01, 3)
  CHECK(u.country == base.country);
  CHECK(u.year == 2);
  CHECK(u.x.head(base.x.size()) == base.x);
  CHECK(u.x[base.x.size()] == base.y);
  CHECK(u.reg == zrow.reg);
  CHECK(u.cont == zrow.cont);
  CHECK(u.y == yrow.y);
}

TEST_CASE("lags longer than the panel are an error", "[panel]") {
  const PanelFrame p = parse(
      "country,year,reg,cont,y,x1,x2\n"
      "A,2001,0,1,3.5,0.5,0.6\n"
      "A,2002,1,0,2.5,0.3,0.4\n",
      two_covariate_schema());
  CHECK_THROWS_AS(lag_align(p, 2, 1), data_error);
  CHECK_THROWS_AS(lag_align(p, -1, 0), config_error);
}

TEST_CASE("four-way categorization uses lower medians with strict high side", "[panel]") {
  // reg values {0.2, 0.4, 0.6, 0.8} -> lower median 0.4; cont likewise.
  const PanelFrame p = parse(
      "country,year,reg,cont,y,x1,x2\n"
      "A,1,0.2,0.2,0,0,0\n"
      "B,1,0.4,0.8,0,0,0\n"
      "C,1,0.6,0.4,0,0,0\n"
      "D,1,0.8,0.6,0,0,0\n",
      two_covariate_schema());
  const TreatmentAssignment a = categorize_treatment(p, TreatmentScheme::FOUR);
  REQUIRE(a.K == 4);
  REQUIRE(a.level_names == std::vector<std::string>{"LL", "HL", "LH", "HH"});
  // A: (0.2 <= 0.4, 0.2 <= 0.4) -> LL. B: reg exactly at the median is low -> LH.
  // C: (0.6 > 0.4, 0.4 <= 0.4) -> HL. D: both high -> HH.
  CHECK(a.labels == std::vector<int>{0, 2, 1, 3});
}

TEST_CASE("three-way scheme collapses the mixed cells", "[panel]") {
  const PanelFrame p = parse(
      "country,year,reg,cont,y,x1,x2\n"
      "A,1,0.2,0.2,0,0,0\n"
      "B,1,0.4,0.8,0,0,0\n"
      "C,1,0.6,0.4,0,0,0\n"
      "D,1,0.8,0.6,0,0,0\n",
      two_covariate_schema());
  const TreatmentAssignment four = categorize_treatment(p, TreatmentScheme::FOUR);
  const TreatmentAssignment three = categorize_treatment(p, TreatmentScheme::THREE);
  const TreatmentAssignment collapsed = three_from_four(four);
  REQUIRE(three.K == 3);
  REQUIRE(three.level_names == std::vector<std::string>{"L", "M", "H"});
  CHECK(three.labels == collapsed.labels);
  for (std::size_t i = 0; i < four.labels.size(); ++i)
    CHECK(three.labels[i] == oracle::kFourToThree[four.labels[i]]);
}

TEST_CASE("binary scheme uses the combined index or weights", "[panel]") {
  PanelSchema schema = two_covariate_schema();
  schema.combined_index = "impol";
  const PanelFrame with_idx = parse(
      "country,year,reg,cont,y,x1,x2,impol\n"
      "A,1,0,0,0,0,0,0.1\n"
      "B,1,0,0,0,0,0,0.9\n"
      "C,1,0,0,0,0,0,0.5\n",
      schema);
  const TreatmentAssignment a = categorize_treatment(with_idx, TreatmentScheme::BINARY);
  REQUIRE(a.K == 2);
  REQUIRE(a.level_names == std::vector<std::string>{"L", "H"});
  CHECK(a.labels == std::vector<int>{0, 1, 0});  // lower median 0.5; strict > is high

  const PanelFrame no_idx = parse(
      "country,year,reg,cont,y,x1,x2\n"
      "A,1,0.1,0.1,0,0,0\n"
      "B,1,0.9,0.9,0,0,0\n"
      "C,1,0.5,0.5,0,0,0\n",
      two_covariate_schema());
  CHECK_THROWS_AS(categorize_treatment(no_idx, TreatmentScheme::BINARY), config_error);
  CategorizeOptions opts;
  opts.binary_weights = {{0.5, 0.5}};
  const TreatmentAssignment b = categorize_treatment(no_idx, TreatmentScheme::BINARY, opts);
  CHECK(b.labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("four-way cells exactly partition random indicator draws", "[panel]") {
  Rng rng(314);
  PanelFrame p;
  p.covariate_names = {};
  for (int i = 0; i < 500; ++i) {
    Unit u;
    u.country = "C" + std::to_string(i);
    u.year = 1;
    u.x.resize(0);
    // Coarse grid forces many ties at the medians.
    u.reg = static_cast<double>(rng.uniform_int(5)) / 4.0;
    u.cont = static_cast<double>(rng.uniform_int(5)) / 4.0;
    p.units.push_back(std::move(u));
  }
  const TreatmentAssignment a = categorize_treatment(p, TreatmentScheme::FOUR);
  std::vector<double> regs, conts;
  for (const auto& u : p.units) {
    regs.push_back(u.reg);
    conts.push_back(u.cont);
  }
  const double mr = lower_median(regs), mc = lower_median(conts);
  for (std::size_t i = 0; i < p.units.size(); ++i) {
    const int expected = (p.units[i].reg > mr ? 1 : 0) + (p.units[i].cont > mc ? 2 : 0);
    REQUIRE(a.labels[i] == expected);
  }
}
