#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ajreserve/errors.hpp"
#include "ajreserve/workflow.hpp"

using namespace ajreserve;

namespace {

SimulatedPortfolio small_scenario(CensorRule rule, Scenario scenario = Scenario::Alpha) {
  ScenarioConfig c;
  c.k = 4;
  c.scenario = scenario;
  c.first_volume = 300;
  c.volume_decrement = 50;
  c.censor_rule = rule;
  return generate_scenario(c, 0);
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ajreserve_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("parallel_for runs every index and rethrows the first failure") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  try {
    parallel_for(10, 3, [](std::size_t i) {
      if (i == 7 || i == 4) throw ValidationError("index " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()) == "index 4");
  }
}

TEST_CASE("covariate keys") {
  CHECK(covariate_key({}, {}) == "all");
  CHECK(covariate_key({Feature::AccidentPeriod, Feature::ClaimType}, {2.0, 1.0}) == "accident_period=2;claim_type=1");
}

TEST_CASE("fully closed portfolio has no reserve") {
  const auto sim = small_scenario(CensorRule::None);
  FitOptions o;
  o.k = 4;
  const auto result = fit_predict(sim.observed_records(), o);
  CHECK(result.report.n_rbns == 0);
  CHECK(result.report.reserve == 0.0);
  CHECK(result.report.y_tot == sim.actual_total());
  CHECK(result.report.sd_tot == 0.0);
}

TEST_CASE("fit-predict on a censored portfolio") {
  const auto sim = small_scenario(CensorRule::UniformQuantile, Scenario::Beta);
  const auto records = sim.observed_records();
  FitOptions plain;
  plain.k = 4;
  FitOptions featured = plain;
  featured.features = {Feature::AccidentPeriod};
  featured.threads = 2;
  const auto a = fit_predict(records, plain);
  const auto b = fit_predict(records, featured);
  CHECK(a.curves.size() == 1);
  CHECK(b.curves.size() == 3);
  CHECK(a.curve_violations == 0);
  CHECK(b.curve_violations == 0);
  CHECK(a.report.n_rbns == b.report.n_rbns);
  CHECK(a.report.y_closed == b.report.y_closed);
  CHECK(a.report.y_ibnr == b.report.y_ibnr);
  CHECK(a.report.y_rbns != b.report.y_rbns);
  CHECK(a.report.y_tot == a.report.y_closed + a.report.y_rbns + a.report.y_ibnr);
  for (const auto& c : a.rbns.claims) {
    CHECK(c.ultimate >= c.paid);
    CHECK(c.variance >= 0.0);
  }

  const auto j = nlohmann::json::parse(report_json(b));
  CHECK(j.at("metadata").at("features")[0] == "accident_period");
  CHECK(j.at("reserve").get<double>() == doctest::Approx(b.report.reserve));
  std::ostringstream text;
  write_report_text(text, b);
  CHECK(text.str().find("reserve") != std::string::npos);
}

TEST_CASE("fit outputs round trip through scoring") {
  const auto sim = small_scenario(CensorRule::UniformQuantile, Scenario::Beta);
  const auto records = sim.observed_records();
  const auto dir = scratch("score");
  FitOptions plain;
  plain.k = 4;
  FitOptions featured = plain;
  featured.features = {Feature::AccidentPeriod};
  write_fit_outputs(dir / "plain", fit_predict(records, plain));
  write_fit_outputs(dir / "featured", fit_predict(records, featured));

  std::stringstream truth_io;
  write_truth_csv(truth_io, sim);
  const auto truth = read_truth_csv(truth_io);
  CHECK(truth.size() == sim.claims.size());

  const auto single = score_runs({load_prediction_run(dir / "plain")}, truth);
  CHECK(single.summaries[0].relative_crps == 1.0);
  CHECK(single.selected == 0);

  const auto table = score_runs({load_prediction_run(dir / "plain"), load_prediction_run(dir / "featured")}, truth);
  CHECK(table.reference == 1);
  CHECK(table.summaries[1].relative_crps == 1.0);
  CHECK(table.summaries[0].crps.size() == sim.observed.n_rbns());
  std::ostringstream csv;
  write_scores_csv(csv, table);
  CHECK(csv.str().rfind("model,k,features,ei,avg_crps,relative_crps,cv,selected\n", 0) == 0);

  std::istringstream missing("claim_number,ultimate\nnobody,1\n");
  CHECK_THROWS_AS(score_runs({load_prediction_run(dir / "plain")}, read_truth_csv(missing)), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("loading a missing run is an IO error") {
  CHECK_THROWS_AS(load_prediction_run(scratch("absent")), IoError);
}

TEST_CASE("reproduce table shape") {
  ReproduceOptions o;
  o.ks = {4};
  o.replications = 1;
  o.threads = 1;
  const auto r = reproduce(o);
  CHECK(r.rows.size() == 4);
  CHECK(r.replications.size() == 2);
  std::ostringstream csv;
  write_reproduce_csv(csv, r.rows);
  std::istringstream in(csv.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "k,scenario,U,actual_average,ei_aj,ei_cl,cv_aj,cv_cl,relative_crps");
  for (const auto& row : r.rows) {
    if (row.uses_u) CHECK(row.relative_crps == 1.0);
  }
  o.ks = {3};
  CHECK_THROWS_AS(reproduce(o), ValidationError);
}
