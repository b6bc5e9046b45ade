#include <doctest.h>

#include <array>
#include <cmath>

#include "ajreserve/errors.hpp"
#include "ajreserve/simulator.hpp"
#include "support.hpp"

using namespace ajreserve;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

IntensityModel exponential(double rate) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2, 2);
  q(0, 1) = rate;
  return IntensityModel::constant(q);
}

double mean_size(const IntensityModel& model, double divisor, int n, std::uint64_t seed) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    RandomStream rng(seed, static_cast<std::uint64_t>(i));
    total += simulate_path(model, divisor, kInf, rng).absorption_size;
  }
  return total / n;
}

}  // namespace

TEST_CASE("intensity model guards") {
  std::vector<double> negative(9, 0.0);
  negative[0 * 3 + 2] = -1.0;
  CHECK_THROWS_AS(IntensityModel(3, {0.0}, negative, IntensityClock::Size), ValidationError);
  std::vector<double> back(9, 0.0);
  back[1 * 3 + 0] = 1.0;  // 2 -> 1
  CHECK_THROWS_AS(IntensityModel(3, {0.0}, back, IntensityClock::Size), ValidationError);
  std::vector<double> out_of_k(9, 0.0);
  out_of_k[2 * 3 + 1] = 1.0;  // 3 -> 2
  CHECK_THROWS_AS(IntensityModel(3, {0.0}, out_of_k, IntensityClock::Size), ValidationError);
  CHECK_THROWS_AS(IntensityModel(3, {1.0}, std::vector<double>(9, 0.0), IntensityClock::Size), ValidationError);
  const auto d = IntensityModel::default_family(5);
  CHECK(d.rate(0, 1, 5) == 0.5);
  CHECK(d.rate(0, 2, 3) == 0.3);
  CHECK(d.rate(0, 1, 3) == doctest::Approx(0.1));
  CHECK(d.rate(0, 3, 5) == 1.0);
  CHECK(d.rate(0, 4, 5) == 1.25);
  CHECK(d.exit_rate(0, 4) == 1.25);
}

TEST_CASE("intensities from a hazard") {
  SUBCASE("single increment") {
    std::vector<double> inc(4, 0.0);
    inc[1] = 0.5;
    inc[0] = -0.5;
    const auto m = intensities_from_hazard(CumulativeHazard(2, {2.0}, inc));
    CHECK(m.rate_at(1, 2, 1.0) == 0.25);
    CHECK(m.rate_at(1, 2, 2.0) == 0.0);
    CHECK(m.integrated(1, 2, 0.0, 2.0) == 0.5);
  }
  SUBCASE("empty hazard") {
    const auto m = intensities_from_hazard(CumulativeHazard(3, {}, {}));
    CHECK(m.exit_rate(0, 1) == 0.0);
  }
  SUBCASE("increment at size zero is merged forward") {
    std::vector<double> inc{-0.2, 0.2, 0, 0, -0.3, 0.3, 0, 0};
    const auto m = intensities_from_hazard(CumulativeHazard(2, {0.0, 1.0}, inc));
    CHECK(m.merged_points == 1);
    CHECK(m.integrated(1, 2, 0.0, 1.0) == doctest::Approx(0.5));
  }
}

TEST_CASE("re-integrated intensities reproduce the hazard") {
  testing::Rng rng(79);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = testing::uniform_int(rng, 2, 5);
    const auto h = testing::random_hazard(rng, k, 8);
    const auto m = intensities_from_hazard(h);
    double lo = 0.0;
    for (std::size_t i = 0; i < h.n_events(); ++i) {
      const double hi = h.sizes()[i];
      for (int j = 1; j <= k; ++j) {
        for (int to = j + 1; to <= k; ++to) CHECK(std::abs(m.integrated(j, to, lo, hi) - h.increment(i, j, to)) < 1e-12);
      }
      lo = hi;
    }
  }
}

TEST_CASE("exponential absorption by Monte Carlo") {
  const auto m = exponential(1.0);
  const double unit = mean_size(m, 1.0, 100000, 5);
  CHECK(std::abs(unit - 1.0) < 0.02);
  const double scaled = mean_size(m, 12.0, 100000, 6);
  CHECK(std::abs(scaled / 12.0 - 1.0) < 0.03);
}

TEST_CASE("simulated paths are valid") {
  const auto m = IntensityModel::default_family(6);
  const StateSpace space(6);
  for (std::uint64_t i = 0; i < 2000; ++i) {
    RandomStream rng(9, i);
    const double w = i % 3 == 0 ? kInf : 2.0 * RandomStream(9, i, 1).uniform();
    const auto p = simulate_path(m, 1.0 + static_cast<double>(i % 4), w, rng);
    CHECK_NOTHROW(validate_path(p, space));
  }
}

TEST_CASE("a state with no way out needs a censor bound") {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3, 3);
  q(0, 1) = 1.0;
  const auto m = IntensityModel::constant(q);
  RandomStream rng(1, 0);
  CHECK_THROWS_AS(simulate_path(m, 1.0, kInf, rng), NumericError);
  RandomStream again(1, 0);
  CHECK_FALSE(simulate_path(m, 1.0, 5.0, again).absorbed);
}

TEST_CASE("random streams are reproducible and distinct") {
  RandomStream a(1, 2, 3);
  RandomStream b(1, 2, 3);
  RandomStream c(1, 2, 4);
  for (int i = 0; i < 10; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u != c.uniform());
  }
}

TEST_CASE("scenario volumes") {
  ScenarioConfig alpha;
  alpha.k = 4;
  CHECK(alpha.total_claims() == 3600);
  CHECK(generate_scenario(alpha, 0).claims.size() == 3600);
  ScenarioConfig beta = alpha;
  beta.scenario = Scenario::Beta;
  CHECK(beta.total_claims() == 3300);
  CHECK(beta.divisor(1) == 13.0);
  CHECK(beta.divisor(3) == 11.0);
  beta.volume_preset = VolumePreset::Formula;
  CHECK(beta.total_claims() == 3400);
  ScenarioConfig bad = alpha;
  bad.first_volume = 100;
  bad.k = 5;
  bad.scenario = Scenario::Beta;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("scenario generation is deterministic") {
  ScenarioConfig c;
  c.k = 5;
  c.scenario = Scenario::Beta;
  c.first_volume = 200;
  c.volume_decrement = 50;
  const auto a = generate_scenario(c, 3);
  const auto b = generate_scenario(c, 3);
  CHECK(a.full_paths == b.full_paths);
  CHECK(a.observed.paths() == b.observed.paths());
  CHECK(a.censor_levels == b.censor_levels);
  CHECK(generate_scenario(c, 4).full_paths != a.full_paths);
  CHECK(a.observed.n_rbns() > 0);
  CHECK(a.observed.n_closed() > 0);
}

TEST_CASE("scenario config from json") {
  ScenarioConfig c;
  apply_scenario_json(c, R"({"k": 6, "scenario": "beta", "censor_rule": "none", "seed": 7})");
  CHECK(c.k == 6);
  CHECK(c.scenario == Scenario::Beta);
  CHECK(c.censor_rule == CensorRule::None);
  CHECK(c.seed == 7);
  CHECK(c.first_volume == 1200);
  CHECK_THROWS_AS(apply_scenario_json(c, "[1]"), ParseError);
  CHECK_THROWS_AS(apply_scenario_json(c, R"({"scenario": "gamma"})"), ValidationError);
}

TEST_CASE("censor levels look alike across accident periods") {
  ScenarioConfig c;
  c.k = 4;
  const auto sim = generate_scenario(c, 0);
  double cap = 0.0;
  for (double w : sim.censor_levels) cap = std::max(cap, w);
  constexpr int kBins = 5;
  std::array<std::array<double, kBins>, 3> counts{};
  for (std::size_t i = 0; i < sim.claims.size(); ++i) {
    const int bin = std::min(kBins - 1, static_cast<int>(sim.censor_levels[i] / cap * kBins));
    counts[static_cast<std::size_t>(sim.claims[i].accident_period - 1)][static_cast<std::size_t>(bin)] += 1.0;
  }
  double chi2 = 0.0;
  const double n = static_cast<double>(sim.claims.size());
  for (int b = 0; b < kBins; ++b) {
    double col = 0.0;
    for (const auto& row : counts) col += row[static_cast<std::size_t>(b)];
    for (const auto& row : counts) {
      double total = 0.0;
      for (double v : row) total += v;
      const double expected = total * col / n;
      chi2 += std::pow(row[static_cast<std::size_t>(b)] - expected, 2) / expected;
    }
  }
  MESSAGE("censor level chi-square over accident periods: " << chi2 << " on 8 df");
  // 8 df: the 0.999 quantile is 26.12
  WARN(chi2 < 26.12);
}

TEST_CASE("matrix-exponential truth") {
  const auto m = exponential(2.0);
  const double z[] = {0.0, 0.5, 1.0};
  const auto f = true_absorption_cdf(m, 4.0, z);
  CHECK(f[0] == 0.0);
  CHECK(f[1] == doctest::Approx(1.0 - std::exp(-0.25)).epsilon(1e-12));
  CHECK(f[2] == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-12));
}
