#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ajreserve/core.hpp"
#include "ajreserve/estimator.hpp"

namespace ajreserve {

/// Clock that drives a piecewise-constant intensity: time since entering the
/// current state (semi-Markov) or the cumulative size itself (Markov with
/// size-dependent rates).
enum class IntensityClock { Duration, Size };

/// Transition intensities q_jh(t), piecewise constant on a grid
/// 0 = g_0 < g_1 < ... ; the last piece extends to infinity.
class IntensityModel {
 public:
  IntensityModel(int k, std::vector<double> grid, std::vector<double> rates, IntensityClock clock);

  /// Time-homogeneous model from a k x k matrix of off-diagonal rates.
  static IntensityModel constant(const Eigen::MatrixXd& rates);
  /// Shipped ground truth: from transient state j the claim closes at rate
  /// 0.5 + 0.25 (j - 1), moves to j + 1 at rate 0.6 / j and skips to j + 2 at
  /// rate 0.1 / j; the deepest transient state can only close.
  static IntensityModel default_family(int k);

  [[nodiscard]] int k() const noexcept { return k_; }
  [[nodiscard]] IntensityClock clock() const noexcept { return clock_; }
  [[nodiscard]] const std::vector<double>& grid() const noexcept { return grid_; }
  [[nodiscard]] std::size_t n_pieces() const noexcept { return grid_.size(); }
  [[nodiscard]] bool duration_dependent() const noexcept {
    return clock_ == IntensityClock::Duration && grid_.size() > 1;
  }
  [[nodiscard]] bool markov() const noexcept { return !duration_dependent(); }

  [[nodiscard]] double rate(std::size_t piece, int from, int to) const {
    return rates_[(piece * k_ + (from - 1)) * k_ + (to - 1)];
  }
  [[nodiscard]] double exit_rate(std::size_t piece, int from) const;
  [[nodiscard]] std::size_t piece_at(double t) const;
  [[nodiscard]] double rate_at(int from, int to, double t) const { return rate(piece_at(t), from, to); }
  /// Generator matrix of one piece (diagonal = minus exit rate).
  [[nodiscard]] Eigen::MatrixXd generator(std::size_t piece) const;
  /// int_a^b q_{from,to}(t) dt.
  [[nodiscard]] double integrated(int from, int to, double a, double b) const;

  /// Points folded into a neighbour because they had no room (zero gap).
  std::size_t merged_points = 0;

 private:
  int k_;
  std::vector<double> grid_;
  std::vector<double> rates_;
  IntensityClock clock_;
};

/// Size-clock intensities whose integral between consecutive event sizes
/// reproduces the hazard increments. An increment at size 0 has no room and
/// is merged into the next point (counted in merged_points).
IntensityModel intensities_from_hazard(const CumulativeHazard& hazard);

/// Deterministic per-claim random stream: (seed, stream ids) are mixed with
/// SplitMix64 into a 64-bit Mersenne Twister seed.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);
  /// Uniform on [0, 1) from the top 53 bits.
  double uniform();
  /// Standard exponential by inversion.
  double exponential();

 private:
  std::mt19937_64 engine_;
};

/// Simulates a path from state 1 with every intensity divided by `divisor`,
/// observed up to `censor_level` (infinity for a fully developed path).
/// Throws NumericError when a transient state can never be left and the
/// censor level is infinite.
ClaimPath simulate_path(const IntensityModel& model, double divisor, double censor_level, RandomStream& rng);

enum class Scenario { Alpha, Beta };
Scenario parse_scenario(std::string_view name);
std::string scenario_name(Scenario scenario);

/// Per-period volume schedules. Narrative: v0 - d (U - 1) in period U.
/// Formula: v0 in the first period and v0 - d in every later one, matching a
/// total of v0 (k - 1) - d (k - 2).
enum class VolumePreset { Narrative, Formula };
VolumePreset parse_volume_preset(std::string_view name);
std::string volume_preset_name(VolumePreset preset);

/// UniformQuantile: W ~ U(0, q) with q the empirical `censor_quantile` of the
/// replication's true ultimates. None: every path fully observed.
enum class CensorRule { UniformQuantile, None };
CensorRule parse_censor_rule(std::string_view name);
std::string censor_rule_name(CensorRule rule);

struct ScenarioConfig {
  int k = 4;
  Scenario scenario = Scenario::Alpha;
  std::optional<IntensityModel> intensities;  // default family when empty
  int first_volume = 1200;
  int volume_decrement = 100;
  VolumePreset volume_preset = VolumePreset::Narrative;
  CensorRule censor_rule = CensorRule::UniformQuantile;
  double censor_quantile = 0.95;
  std::uint64_t seed = 1;
  int replications = 1;

  void validate() const;
  [[nodiscard]] int volume(int accident_period) const;
  /// 1 in Alpha; 10 + k - U in Beta.
  [[nodiscard]] double divisor(int accident_period) const;
  [[nodiscard]] IntensityModel base_model() const;
  [[nodiscard]] std::size_t total_claims() const;
};

/// Reads a JSON object with any of the keys k, scenario, first_volume,
/// volume_decrement, volume_preset, censor_rule, censor_quantile, seed,
/// replications; missing keys keep the values already in `config`.
void apply_scenario_json(ScenarioConfig& config, const std::string& json_text);

/// One replication with the ground truth retained.
struct SimulatedPortfolio {
  int replication = 0;
  std::vector<ClaimInfo> claims;
  std::vector<ClaimPath> full_paths;
  std::vector<double> censor_levels;
  Portfolio observed;  // censored paths, no covariates
  Portfolio complete;  // fully developed paths

  [[nodiscard]] std::vector<double> ultimates() const;
  [[nodiscard]] double actual_total() const;
  [[nodiscard]] std::vector<ClaimRecord> observed_records() const;
  [[nodiscard]] std::vector<ClaimRecord> full_records() const;
};

SimulatedPortfolio generate_scenario(const ScenarioConfig& config, int replication);

/// True absorbing-state cdf at ascending sizes `z` for a Markov model with
/// intensities divided by `divisor`, from the product of piecewise matrix
/// exponentials.
std::vector<double> true_absorption_cdf(const IntensityModel& model, double divisor, std::span<const double> z);

}  // namespace ajreserve
