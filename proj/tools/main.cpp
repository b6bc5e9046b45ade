// ajreserve: simulate, fit-predict, score and reproduce from the shell.
//
// Exit codes: 0 success, 2 parse error, 3 validation error, 4 numeric error,
// 5 IO error, 1 anything else.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "ajreserve/errors.hpp"
#include "ajreserve/workflow.hpp"

namespace fs = std::filesystem;
using namespace ajreserve;

namespace {

struct RunConfig {
  int k = 4;
  std::string scenario;  // alpha for simulate, both for reproduce
  std::string kernel = "exact";
  double eta = 0.75;
  std::string features;
  std::uint64_t seed = 1;
  int reps = 0;  // 0 = command default: 1 for simulate, 20 for reproduce
  int censor_depth = 0;  // 0 = no calendar cut
  std::string input;
  std::string output;
  std::string fallback = "zero";
  int months_per_period = 12;
  std::string ks = "4,5,6,7";  // reproduce
  std::string volume_preset = "narrative";
  std::string censor_rule = "uniform_quantile";
  std::size_t threads = 0;
  std::string truth;
  std::string config;
};

// Flags registered on the active subcommand, by config-file key.
using OptionMap = std::map<std::string, CLI::Option*>;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Config-file values fill every setting whose flag was not given.
void merge_config_file(RunConfig& cfg, const OptionMap& flags) {
  if (cfg.config.empty()) return;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(cfg.config));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(cfg.config + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(cfg.config + ": expected a JSON object");
  auto given = [&](const std::string& key) {
    const auto it = flags.find(key);
    return it != flags.end() && it->second->count() > 0;
  };
  auto take = [&](const std::string& key, auto& target) {
    if (!j.contains(key) || given(key)) return;
    try {
      j.at(key).get_to(target);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(cfg.config + ": key '" + key + "': " + e.what());
    }
  };
  for (const auto& [key, value] : j.items()) {
    static const std::vector<std::string> known{
        "k",        "scenario", "kernel",      "eta",     "features", "seed",
        "reps",     "censor_depth", "input",   "output",  "fallback", "months_per_period",
        "volume_preset", "censor_rule", "threads", "truth"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError(cfg.config + ": unknown key '" + key + "'");
    }
  }
  if (j.contains("k") && !given("k")) {
    // reproduce reads k as a list; the other commands as one value.
    const auto& v = j.at("k");
    if (v.is_array()) {
      std::string list;
      for (const auto& e : v) list += (list.empty() ? "" : ",") + std::to_string(e.get<int>());
      cfg.ks = list;
    } else if (v.is_number_integer()) {
      cfg.k = v.get<int>();
      cfg.ks = std::to_string(cfg.k);
    } else {
      throw ParseError(cfg.config + ": key 'k' must be an integer or a list of integers");
    }
  }
  take("scenario", cfg.scenario);
  take("kernel", cfg.kernel);
  take("eta", cfg.eta);
  take("features", cfg.features);
  take("seed", cfg.seed);
  take("reps", cfg.reps);
  if (j.contains("reps") && !given("reps") && cfg.reps < 1) {
    throw ValidationError(cfg.config + ": reps must be at least 1");
  }
  take("censor_depth", cfg.censor_depth);
  take("input", cfg.input);
  take("output", cfg.output);
  take("fallback", cfg.fallback);
  take("months_per_period", cfg.months_per_period);
  take("volume_preset", cfg.volume_preset);
  take("censor_rule", cfg.censor_rule);
  take("threads", cfg.threads);
  take("truth", cfg.truth);
}

KernelSpec kernel_spec(const std::string& text) {
  KernelSpec spec;
  spec.families.clear();
  std::stringstream s(text);
  std::string part;
  while (std::getline(s, part, ',')) spec.families.push_back(parse_kernel_family(part));
  if (spec.families.empty()) throw ValidationError("--kernel is empty");
  return spec;
}

std::vector<int> int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream s(text);
  std::string part;
  while (std::getline(s, part, ',')) {
    try {
      out.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw ParseError("not an integer: '" + part + "'");
    }
  }
  return out;
}

std::vector<std::string> string_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream s(text);
  std::string part;
  while (std::getline(s, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ValidationError(std::string("missing required ") + flag);
}

int cmd_simulate(RunConfig& cfg) {
  require(cfg.output, "--output");
  ScenarioConfig sc;
  sc.k = cfg.k;
  sc.scenario = parse_scenario(cfg.scenario.empty() ? "alpha" : cfg.scenario);
  sc.seed = cfg.seed;
  sc.replications = cfg.reps > 0 ? cfg.reps : 1;
  sc.volume_preset = parse_volume_preset(cfg.volume_preset);
  sc.censor_rule = parse_censor_rule(cfg.censor_rule);
  sc.validate();
  const IngestOptions ingest{cfg.months_per_period};
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw IoError("cannot create " + cfg.output + ": " + ec.message());
  for (int r = 1; r <= sc.replications; ++r) {
    const auto sim = generate_scenario(sc, r - 1);
    const fs::path dir(cfg.output);
    std::ofstream portfolio(dir / ("portfolio_" + std::to_string(r) + ".csv"));
    std::ofstream truth(dir / ("truth_" + std::to_string(r) + ".csv"));
    if (!portfolio || !truth) throw IoError("cannot write into " + cfg.output);
    write_claim_records(portfolio, sim.observed_records(), ingest);
    write_truth_csv(truth, sim);
    if (!portfolio || !truth) throw IoError("write failed in " + cfg.output);
    std::cout << "replication " << r << ": " << sim.claims.size() << " claims, " << sim.observed.n_rbns()
              << " open\n";
  }
  return 0;
}

int cmd_fit_predict(RunConfig& cfg) {
  require(cfg.input, "--input");
  require(cfg.output, "--output");
  FitOptions fo;
  fo.k = cfg.k;
  fo.kernel = kernel_spec(cfg.kernel);
  fo.eta = cfg.eta;
  fo.features = parse_feature_list(cfg.features);
  fo.fallback = parse_support_fallback(cfg.fallback);
  if (cfg.censor_depth > 0) fo.censor_depth = cfg.censor_depth;
  fo.ingest.months_per_period = cfg.months_per_period;
  fo.threads = cfg.threads;
  auto records = read_claim_records_file(cfg.input, fo.ingest);
  const auto result = fit_predict(std::move(records), fo);
  write_fit_outputs(cfg.output, result);
  write_report_text(std::cout, result);
  return 0;
}

int cmd_score(RunConfig& cfg) {
  require(cfg.input, "--input");
  require(cfg.truth, "--truth");
  std::vector<PredictionRun> runs;
  for (const auto& dir : string_list(cfg.input)) runs.push_back(load_prediction_run(dir));
  std::ifstream truth_in(cfg.truth);
  if (!truth_in) throw IoError("cannot open truth file " + cfg.truth);
  const auto table = score_runs(runs, read_truth_csv(truth_in));
  if (!cfg.output.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.output, ec);
    if (ec) throw IoError("cannot create " + cfg.output + ": " + ec.message());
    std::ofstream csv(fs::path(cfg.output) / "scores.csv");
    std::ofstream js(fs::path(cfg.output) / "scores.json");
    if (!csv || !js) throw IoError("cannot write into " + cfg.output);
    write_scores_csv(csv, table);
    js << scores_json(table);
  }
  write_scores_csv(std::cout, table);
  return 0;
}

int cmd_reproduce(RunConfig& cfg) {
  ReproduceOptions ro;
  ro.ks = int_list(cfg.ks);
  if (!cfg.scenario.empty() && cfg.scenario != "both") ro.scenarios = {parse_scenario(cfg.scenario)};
  ro.replications = cfg.reps > 0 ? cfg.reps : 20;
  ro.seed = cfg.seed;
  ro.eta = cfg.eta;
  ro.kernel = kernel_spec(cfg.kernel);
  ro.fallback = parse_support_fallback(cfg.fallback);
  ro.volume_preset = parse_volume_preset(cfg.volume_preset);
  ro.censor_rule = parse_censor_rule(cfg.censor_rule);
  ro.threads = cfg.threads;
  const auto result = reproduce(ro);
  if (cfg.output.empty()) {
    write_reproduce_csv(std::cout, result.rows);
    return 0;
  }
  fs::path path(cfg.output);
  if (fs::is_directory(path) || path.extension() != ".csv") {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw IoError("cannot create " + path.string() + ": " + ec.message());
    path /= "reproduce.csv";
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_reproduce_csv(out, result.rows);
  if (!out) throw IoError("write failed: " + path.string());
  write_reproduce_csv(std::cout, result.rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Claim-size-clock Aalen-Johansen reserving"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::map<std::string, OptionMap> flags;

  auto common = [&](CLI::App* sub) {
    auto& f = flags[sub->get_name()];
    f["config"] = sub->add_option("--config", cfg.config, "JSON file with default settings; flags take precedence");
    f["seed"] = sub->add_option("--seed", cfg.seed, "Random seed");
    f["output"] = sub->add_option("--output", cfg.output, "Output path");
    f["threads"] = sub->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
    return sub;
  };
  auto fitting = [&](CLI::App* sub) {
    auto& f = flags[sub->get_name()];
    f["kernel"] = sub->add_option("--kernel", cfg.kernel, "uniform, epanechnikov, triangular or exact (comma list per feature)");
    f["eta"] = sub->add_option("--eta", cfg.eta, "Bandwidth exponent in (0, 1)");
    f["fallback"] = sub->add_option("--fallback", cfg.fallback, "Claims beyond the fitted support: zero or error")
                        ->check(CLI::IsMember({"zero", "error"}));
  };

  auto* simulate = common(app.add_subcommand("simulate", "Simulate portfolios and their true ultimates"));
  flags["simulate"]["k"] = simulate->add_option("--k", cfg.k, "Number of states (k-1 development buckets plus Closed)");
  flags["simulate"]["scenario"] = simulate->add_option("--scenario", cfg.scenario, "alpha or beta");
  flags["simulate"]["reps"] = simulate->add_option("--reps", cfg.reps, "Replications (default 1)")->check(CLI::PositiveNumber);
  flags["simulate"]["months_per_period"] =
      simulate->add_option("--months-per-period", cfg.months_per_period, "Months per development period");
  flags["simulate"]["volume_preset"] =
      simulate->add_option("--volume-preset", cfg.volume_preset, "Beta volumes: narrative or formula");
  flags["simulate"]["censor_rule"] =
      simulate->add_option("--censor-rule", cfg.censor_rule, "uniform_quantile (default) or none");

  auto* fit = common(app.add_subcommand("fit-predict", "Fit conditional claim-size cdfs and predict the reserve"));
  fitting(fit);
  flags["fit-predict"]["k"] = fit->add_option("--k", cfg.k, "Number of states (k-1 development buckets plus Closed)");
  flags["fit-predict"]["input"] = fit->add_option("--input", cfg.input, "Claims CSV");
  flags["fit-predict"]["features"] =
      fit->add_option("--features", cfg.features, "Comma list of claim_type, accident_period (U), reporting_delay (T)");
  flags["fit-predict"]["censor_depth"] =
      fit->add_option("--censor-depth", cfg.censor_depth, "Keep only what is known at the end of this calendar period");
  flags["fit-predict"]["months_per_period"] =
      fit->add_option("--months-per-period", cfg.months_per_period, "Months per development period");

  auto* score = common(app.add_subcommand("score", "Score fit-predict outputs against realized ultimates"));
  flags["score"]["input"] = score->add_option("--input", cfg.input, "Comma list of fit-predict output directories");
  flags["score"]["truth"] = score->add_option("--truth", cfg.truth, "CSV with claim_number and ultimate columns");

  auto* repro = common(app.add_subcommand("reproduce", "Simulate, fit and score the Alpha/Beta experiment tables"));
  fitting(repro);
  flags["reproduce"]["scenario"] = repro->add_option("--scenario", cfg.scenario, "alpha, beta or both (default)");
  flags["reproduce"]["k"] = repro->add_option("--k", cfg.ks, "Comma list of k values");
  flags["reproduce"]["reps"] = repro->add_option("--reps", cfg.reps, "Replications per (k, scenario), default 20")->check(CLI::PositiveNumber);
  flags["reproduce"]["censor_rule"] =
      repro->add_option("--censor-rule", cfg.censor_rule, "uniform_quantile (default) or none");
  flags["reproduce"]["volume_preset"] =
      repro->add_option("--volume-preset", cfg.volume_preset, "Beta volumes: narrative or formula");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      const std::string name = sub->get_name();
      merge_config_file(cfg, flags[name]);
      if (name == "simulate") return cmd_simulate(cfg);
      if (name == "fit-predict") return cmd_fit_predict(cfg);
      if (name == "score") return cmd_score(cfg);
      if (name == "reproduce") return cmd_reproduce(cfg);
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
