#include "ajreserve/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "ajreserve/errors.hpp"
#include "ajreserve/numeric.hpp"

namespace ajreserve {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

IntensityModel::IntensityModel(int k, std::vector<double> grid, std::vector<double> rates, IntensityClock clock)
    : k_(k), grid_(std::move(grid)), rates_(std::move(rates)), clock_(clock) {
  if (k_ < 2) throw ValidationError("intensity model needs at least 2 states");
  if (grid_.empty() || grid_.front() != 0.0) throw ValidationError("intensity grid must start at 0");
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) throw ValidationError("intensity grid must be strictly increasing");
  }
  const auto ks = static_cast<std::size_t>(k_);
  if (rates_.size() != grid_.size() * ks * ks) throw ValidationError("intensity rates do not match the grid");
  for (std::size_t p = 0; p < grid_.size(); ++p) {
    for (int j = 1; j <= k_; ++j) {
      for (int h = 1; h <= k_; ++h) {
        const double r = rate(p, j, h);
        if (j == h) {
          if (r != 0.0) throw ValidationError("intensity diagonal entries must be 0");
          continue;
        }
        if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("intensities must be finite and nonnegative");
        if (j == k_ && r != 0.0) throw ValidationError("no intensity may leave the absorbing state");
        if (h < j && r != 0.0) throw ValidationError("intensities must point to later states");
      }
    }
  }
}

IntensityModel IntensityModel::constant(const Eigen::MatrixXd& rates) {
  const auto k = static_cast<int>(rates.rows());
  if (rates.cols() != k) throw ValidationError("rate matrix must be square");
  std::vector<double> flat(static_cast<std::size_t>(k * k), 0.0);
  for (int j = 0; j < k; ++j) {
    for (int h = 0; h < k; ++h) {
      if (h != j) flat[static_cast<std::size_t>(j * k + h)] = rates(j, h);
    }
  }
  return IntensityModel(k, {0.0}, std::move(flat), IntensityClock::Duration);
}

IntensityModel IntensityModel::default_family(int k) {
  if (k < 3) throw ValidationError("k must be at least 3");
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(k, k);
  for (int j = 1; j <= k - 1; ++j) {
    q(j - 1, k - 1) = 0.5 + 0.25 * (j - 1);
    if (j <= k - 2) q(j - 1, j) = 0.6 / j;
    if (j <= k - 3) q(j - 1, j + 1) = 0.1 / j;
  }
  return constant(q);
}

double IntensityModel::exit_rate(std::size_t piece, int from) const {
  double total = 0.0;
  for (int h = 1; h <= k_; ++h) {
    if (h != from) total += rate(piece, from, h);
  }
  return total;
}

std::size_t IntensityModel::piece_at(double t) const {
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  return it == grid_.begin() ? 0 : static_cast<std::size_t>(it - grid_.begin()) - 1;
}

Eigen::MatrixXd IntensityModel::generator(std::size_t piece) const {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(k_, k_);
  for (int j = 1; j <= k_; ++j) {
    for (int h = 1; h <= k_; ++h) {
      if (h != j) q(j - 1, h - 1) = rate(piece, j, h);
    }
    q(j - 1, j - 1) = -exit_rate(piece, j);
  }
  return q;
}

double IntensityModel::integrated(int from, int to, double a, double b) const {
  if (!(b >= a)) throw ValidationError("integration bounds must be ordered");
  CompensatedSum total;
  for (std::size_t p = piece_at(a); p < grid_.size(); ++p) {
    const double lo = std::max(a, grid_[p]);
    const double hi = p + 1 < grid_.size() ? std::min(b, grid_[p + 1]) : b;
    if (hi > lo) total += rate(p, from, to) * (hi - lo);
    if (p + 1 < grid_.size() && grid_[p + 1] >= b) break;
  }
  return total.value();
}

IntensityModel intensities_from_hazard(const CumulativeHazard& hazard) {
  const int k = hazard.k();
  const auto ks = static_cast<std::size_t>(k);
  std::vector<double> grid{0.0};
  std::vector<double> rates;
  std::size_t merged = 0;
  std::vector<double> carry(ks * ks, 0.0);
  double lo = 0.0;
  for (std::size_t i = 0; i < hazard.n_events(); ++i) {
    const double z = hazard.sizes()[i];
    for (int j = 1; j <= k; ++j) {
      for (int h = 1; h <= k; ++h) {
        if (h != j) carry[(j - 1) * ks + (h - 1)] += hazard.increment(i, j, h);
      }
    }
    if (!(z > lo)) {
      ++merged;
      continue;
    }
    for (double c : carry) rates.push_back(c / (z - lo));
    grid.push_back(z);
    std::fill(carry.begin(), carry.end(), 0.0);
    lo = z;
  }
  if (std::any_of(carry.begin(), carry.end(), [](double c) { return c != 0.0; })) ++merged;
  // Nothing happens beyond the last event size.
  rates.insert(rates.end(), ks * ks, 0.0);
  IntensityModel model(k, std::move(grid), std::move(rates), IntensityClock::Size);
  model.merged_points = merged;
  return model;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t state = seed;
  std::uint64_t mixed = splitmix64(state);
  for (std::uint64_t id : {a, b, c}) {
    state ^= id + 0x632BE59BD9B4E019ULL + (mixed << 6) + (mixed >> 2);
    mixed = splitmix64(state);
  }
  engine_.seed(mixed);
}

double RandomStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RandomStream::exponential() { return -std::log1p(-uniform()); }

ClaimPath simulate_path(const IntensityModel& model, double divisor, double censor_level, RandomStream& rng) {
  if (!(divisor > 0.0)) throw ValidationError("intensity divisor must be positive");
  if (!(censor_level >= 0.0)) throw ValidationError("censor level must be nonnegative");
  const int k = model.k();
  const auto& grid = model.grid();
  ClaimPath path;
  path.initial_state = 1;
  int state = 1;
  double entry = 0.0;
  while (state != k) {
    // Clock value at entry and the piece it falls in.
    double t = model.clock() == IntensityClock::Duration ? 0.0 : entry;
    const double offset = entry - t;
    std::size_t piece = model.piece_at(t);
    double budget = rng.exponential();
    bool jumped = false;
    while (true) {
      const double r = model.exit_rate(piece, state) / divisor;
      const double end = piece + 1 < grid.size() ? grid[piece + 1] : kInf;
      if (r > 0.0 && budget < r * (end - t)) {
        t += budget / r;
        jumped = true;
        break;
      }
      if (end == kInf) break;
      if (r > 0.0) budget -= r * (end - t);
      t = end;
      ++piece;
      if (t + offset > censor_level) break;
    }
    const double size = t + offset;
    if (!jumped || size > censor_level) {
      if (!jumped && censor_level == kInf) {
        throw NumericError("non-terminating state " + std::to_string(state) +
                           ": no outgoing intensity remains and no finite censor bound was given");
      }
      path.censor_level = censor_level;
      return path;
    }
    const double total = model.exit_rate(piece, state);
    double pick = rng.uniform() * total;
    int to = state;
    for (int h = state + 1; h <= k; ++h) {
      const double r = model.rate(piece, state, h);
      if (r <= 0.0) continue;
      to = h;
      if (pick < r) break;
      pick -= r;
    }
    path.events.push_back({size, state, to});
    state = to;
    entry = size;
  }
  path.absorbed = true;
  path.absorption_size = entry;
  path.censor_level = std::isfinite(censor_level) ? censor_level : entry;
  return path;
}

Scenario parse_scenario(std::string_view name) {
  if (name == "alpha" || name == "Alpha") return Scenario::Alpha;
  if (name == "beta" || name == "Beta") return Scenario::Beta;
  throw ValidationError("unknown scenario '" + std::string(name) + "' (expected alpha or beta)");
}

std::string scenario_name(Scenario scenario) { return scenario == Scenario::Alpha ? "alpha" : "beta"; }

VolumePreset parse_volume_preset(std::string_view name) {
  if (name == "narrative") return VolumePreset::Narrative;
  if (name == "formula") return VolumePreset::Formula;
  throw ValidationError("unknown volume preset '" + std::string(name) + "' (expected narrative or formula)");
}

std::string volume_preset_name(VolumePreset preset) {
  return preset == VolumePreset::Narrative ? "narrative" : "formula";
}

CensorRule parse_censor_rule(std::string_view name) {
  if (name == "uniform_quantile") return CensorRule::UniformQuantile;
  if (name == "none") return CensorRule::None;
  throw ValidationError("unknown censor rule '" + std::string(name) + "' (expected uniform_quantile or none)");
}

std::string censor_rule_name(CensorRule rule) {
  switch (rule) {
    case CensorRule::UniformQuantile: return "uniform_quantile";
    case CensorRule::None: return "none";
  }
  return "?";
}

void ScenarioConfig::validate() const {
  if (k < 3) throw ValidationError("k must be at least 3");
  if (replications < 1) throw ValidationError("replications must be at least 1");
  if (!(censor_quantile > 0.0 && censor_quantile <= 1.0)) throw ValidationError("censor quantile must lie in (0, 1]");
  for (int u = 1; u <= k - 1; ++u) {
    if (volume(u) <= 0) throw ValidationError("volume of accident period " + std::to_string(u) + " is not positive");
    if (!(divisor(u) > 0.0)) throw ValidationError("intensity divisor must be positive");
  }
  if (intensities && intensities->k() != k) throw ValidationError("intensity model has the wrong number of states");
}

int ScenarioConfig::volume(int accident_period) const {
  if (scenario == Scenario::Alpha) return first_volume;
  if (volume_preset == VolumePreset::Formula) return accident_period == 1 ? first_volume : first_volume - volume_decrement;
  return first_volume - volume_decrement * (accident_period - 1);
}

double ScenarioConfig::divisor(int accident_period) const {
  return scenario == Scenario::Alpha ? 1.0 : static_cast<double>(10 + k - accident_period);
}

IntensityModel ScenarioConfig::base_model() const {
  return intensities ? *intensities : IntensityModel::default_family(k);
}

std::size_t ScenarioConfig::total_claims() const {
  std::size_t n = 0;
  for (int u = 1; u <= k - 1; ++u) n += static_cast<std::size_t>(std::max(volume(u), 0));
  return n;
}

void apply_scenario_json(ScenarioConfig& config, const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("scenario config must be a JSON object");
  try {
    if (j.contains("k")) config.k = j.at("k").get<int>();
    if (j.contains("scenario")) config.scenario = parse_scenario(j.at("scenario").get<std::string>());
    if (j.contains("first_volume")) config.first_volume = j.at("first_volume").get<int>();
    if (j.contains("volume_decrement")) config.volume_decrement = j.at("volume_decrement").get<int>();
    if (j.contains("volume_preset")) config.volume_preset = parse_volume_preset(j.at("volume_preset").get<std::string>());
    if (j.contains("censor_rule")) config.censor_rule = parse_censor_rule(j.at("censor_rule").get<std::string>());
    if (j.contains("censor_quantile")) config.censor_quantile = j.at("censor_quantile").get<double>();
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("replications")) config.replications = j.at("replications").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario config: ") + e.what());
  }
}

namespace {

std::string claim_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "C%06zu", index + 1);
  return buf;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

std::vector<ClaimRecord> records_of(const std::vector<ClaimInfo>& claims, const std::vector<ClaimPath>& paths) {
  std::vector<ClaimRecord> out;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    auto r = records_from_path(claims[i], paths[i]);
    out.insert(out.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  return out;
}

}  // namespace

std::vector<double> SimulatedPortfolio::ultimates() const {
  std::vector<double> out;
  out.reserve(full_paths.size());
  for (const auto& p : full_paths) out.push_back(p.absorption_size);
  return out;
}

double SimulatedPortfolio::actual_total() const { return actual_ultimate(complete); }

std::vector<ClaimRecord> SimulatedPortfolio::observed_records() const {
  return records_of(claims, observed.paths());
}

std::vector<ClaimRecord> SimulatedPortfolio::full_records() const { return records_of(claims, full_paths); }

SimulatedPortfolio generate_scenario(const ScenarioConfig& config, int replication) {
  config.validate();
  const IntensityModel model = config.base_model();
  const StateSpace space(config.k);
  const auto rep = static_cast<std::uint64_t>(replication);

  std::vector<ClaimInfo> claims;
  std::vector<double> divisors;
  claims.reserve(config.total_claims());
  for (int u = 1; u <= config.k - 1; ++u) {
    for (int c = 0; c < config.volume(u); ++c) {
      claims.push_back({claim_id(claims.size()), 1, u, 1});
      divisors.push_back(config.divisor(u));
    }
  }

  std::vector<ClaimPath> full;
  full.reserve(claims.size());
  for (std::size_t i = 0; i < claims.size(); ++i) {
    RandomStream rng(config.seed, rep, i, 0);
    full.push_back(simulate_path(model, divisors[i], kInf, rng));
  }

  std::vector<double> levels(claims.size(), kInf);
  std::vector<ClaimPath> observed = full;
  if (config.censor_rule == CensorRule::UniformQuantile && !full.empty()) {
    std::vector<double> ult;
    ult.reserve(full.size());
    for (const auto& p : full) ult.push_back(p.absorption_size);
    const double cap = nearest_rank_quantile(std::move(ult), config.censor_quantile);
    for (std::size_t i = 0; i < claims.size(); ++i) {
      RandomStream rng(config.seed, rep, i, 1);
      levels[i] = rng.uniform() * cap;
      observed[i] = censor_path(full[i], levels[i]);
    }
  }

  Portfolio observed_portfolio(space, claims, std::move(observed));
  Portfolio complete_portfolio(space, claims, full);
  return SimulatedPortfolio{replication,
                            std::move(claims),
                            std::move(full),
                            std::move(levels),
                            std::move(observed_portfolio),
                            std::move(complete_portfolio)};
}

std::vector<double> true_absorption_cdf(const IntensityModel& model, double divisor, std::span<const double> z) {
  if (!model.markov()) throw ValidationError("the matrix-exponential truth needs a Markov intensity model");
  if (!(divisor > 0.0)) throw ValidationError("intensity divisor must be positive");
  const int k = model.k();
  const auto& grid = model.grid();
  Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(k);
  p(0) = 1.0;
  double t = 0.0;
  std::vector<double> out;
  out.reserve(z.size());
  for (double target : z) {
    if (!(target >= t)) throw ValidationError("evaluation sizes must be ascending and nonnegative");
    while (t < target) {
      const std::size_t piece = model.piece_at(t);
      const double end = piece + 1 < grid.size() ? std::min(grid[piece + 1], target) : target;
      const Eigen::MatrixXd step = (model.generator(piece) * ((end - t) / divisor)).exp();
      p = p * step;
      t = end;
    }
    out.push_back(std::clamp(p(k - 1), 0.0, 1.0));
  }
  return out;
}

}  // namespace ajreserve
