#include "ajreserve/workflow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ajreserve/errors.hpp"
#include "ajreserve/numeric.hpp"

namespace ajreserve {

using nlohmann::json;

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return s.str();
}

std::vector<std::string> feature_names(const std::vector<Feature>& features) {
  std::vector<std::string> out;
  for (auto f : features) out.push_back(feature_name(f));
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream s(line);
  while (std::getline(s, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

double parse_double(const std::string& text, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + text + "'", row);
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string covariate_key(const std::vector<Feature>& features, const std::vector<double>& x) {
  if (features.empty()) return "all";
  std::string key;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (i) key += ';';
    key += feature_name(features[i]) + "=" + format_number(x.at(i));
  }
  return key;
}

FitPredictResult fit_predict(const Portfolio& portfolio, const Triangle& count_triangle, const FitOptions& options) {
  if (portfolio.size() == 0) throw ValidationError("portfolio is empty");
  if (portfolio.state_space().k() != options.k) {
    throw ValidationError("portfolio was built for k = " + std::to_string(portfolio.state_space().k()) +
                          ", options ask for k = " + std::to_string(options.k));
  }
  FitPredictResult result;

  std::vector<std::vector<double>> sample;
  sample.reserve(portfolio.size());
  for (const auto& p : portfolio.paths()) sample.push_back(p.covariates);
  const Bandwidth bandwidth = sample_bandwidth(sample, options.eta);

  // Distinct covariate points of open claims, in order of first appearance.
  std::map<std::vector<double>, std::size_t> index;
  for (const auto& p : portfolio.paths()) {
    if (p.absorbed) continue;
    auto [it, inserted] = index.emplace(p.covariates, result.curves.size());
    if (inserted) result.curves.push_back({p.covariates, covariate_key(options.features, p.covariates), {}});
    result.curve_of_open_claim.push_back(it->second);
  }

  std::vector<std::size_t> skipped(result.curves.size(), 0);
  std::vector<std::size_t> violations(result.curves.size(), 0);
  parallel_for(result.curves.size(), options.threads, [&](std::size_t i) {
    auto fit = fit_conditional(portfolio, result.curves[i].x, options.kernel, bandwidth);
    skipped[i] = fit.hazard.diagnostics().skipped_zero_at_risk;
    violations[i] = audit_curve(fit.curve);
    result.curves[i].cdf = std::move(fit.cdf);
  });
  for (std::size_t i = 0; i < result.curves.size(); ++i) {
    result.skipped_zero_at_risk += skipped[i];
    result.curve_violations += violations[i];
  }

  std::vector<StepCdf> cdfs;
  cdfs.reserve(result.curve_of_open_claim.size());
  for (auto i : result.curve_of_open_claim) cdfs.push_back(result.curves[i].cdf);
  result.rbns = predict_rbns(portfolio, cdfs, options.fallback);
  result.ibnr = predict_ibnr(count_triangle, portfolio,
                             IbnrOptions{.allow_zero_variance = options.fallback == SupportFallback::Zero});

  ReportMetadata meta;
  meta.k = options.k;
  meta.kernel = options.kernel.describe();
  meta.features = feature_names(options.features);
  meta.eta = options.eta;
  meta.fallback = support_fallback_name(options.fallback);
  result.report = assemble_report(portfolio, result.rbns, result.ibnr, std::move(meta));
  return result;
}

FitPredictResult fit_predict(std::vector<ClaimRecord> records, const FitOptions& options) {
  validate_records(records);
  if (options.censor_depth) records = apply_calendar_cut(records, *options.censor_depth);
  if (records.empty()) throw ValidationError("no claims are reported by the requested calendar cut");
  const StateSpace space(options.k);
  const Portfolio portfolio = paths_from_records(records, space, options.features);
  const auto counts = build_count_triangle(records, space);
  auto result = fit_predict(portfolio, counts.triangle, options);
  result.count_triangle_excluded = counts.excluded;
  return result;
}

std::string report_json(const FitPredictResult& result) {
  const auto& r = result.report;
  json j;
  j["y_closed"] = r.y_closed;
  j["y_rbns"] = r.y_rbns;
  j["y_ibnr"] = r.y_ibnr;
  j["y_tot"] = r.y_tot;
  j["reserve"] = r.reserve;
  j["sd_tot"] = r.sd_tot;
  j["paid_to_date"] = r.paid_to_date;
  j["var_rbns"] = r.var_rbns;
  j["var_ibnr"] = r.var_ibnr;
  j["n_closed"] = r.n_closed;
  j["n_rbns"] = r.n_rbns;
  j["ibnr"] = {{"n_ibnr", result.ibnr.n_ibnr},
               {"n_variance", result.ibnr.n_variance},
               {"severity_mean", result.ibnr.severity_mean},
               {"severity_second", result.ibnr.severity_second}};
  j["diagnostics"] = {{"beyond_support", r.n_beyond_support},
                      {"tail_truncated", r.n_tail_truncated},
                      {"skipped_zero_at_risk", result.skipped_zero_at_risk},
                      {"curve_violations", result.curve_violations},
                      {"count_triangle_excluded", result.count_triangle_excluded},
                      {"ibnr_zero_variance_fallback", r.ibnr_zero_variance_fallback}};
  j["metadata"] = {{"k", r.metadata.k},
                   {"kernel", r.metadata.kernel},
                   {"features", r.metadata.features},
                   {"eta", r.metadata.eta},
                   {"fallback", r.metadata.fallback}};
  return j.dump(2) + "\n";
}

void write_report_text(std::ostream& out, const FitPredictResult& result) {
  const auto& r = result.report;
  std::string features;
  for (const auto& f : r.metadata.features) features += (features.empty() ? "" : ",") + f;
  out << "k = " << r.metadata.k << ", kernel = " << r.metadata.kernel
      << ", features = " << (features.empty() ? "none" : features) << "\n\n";
  const auto old_flags = out.flags();
  const auto old_precision = out.precision(3);
  out << std::fixed;
  auto line = [&](const char* label, double v) { out << std::left << std::setw(16) << label << std::right << std::setw(18) << v << '\n'; };
  line("closed", r.y_closed);
  line("rbns", r.y_rbns);
  line("ibnr", r.y_ibnr);
  line("total", r.y_tot);
  line("paid to date", r.paid_to_date);
  line("reserve", r.reserve);
  line("sd(total)", r.sd_tot);
  out.flags(old_flags);
  out.precision(old_precision);
  out << "\nclaims: " << r.n_closed << " closed, " << r.n_rbns << " open";
  if (r.n_beyond_support) out << ", " << r.n_beyond_support << " beyond estimated support";
  if (r.n_tail_truncated) out << ", " << r.n_tail_truncated << " tail-truncated";
  out << '\n';
}

void write_claims_csv(std::ostream& out, const FitPredictResult& result) {
  out << "claim_id,covariate_key,paid,mean_residual,ultimate,second_moment,variance,beyond_support,tail_truncated\n";
  for (std::size_t i = 0; i < result.rbns.claims.size(); ++i) {
    const auto& c = result.rbns.claims[i];
    out << c.claim_id << ',' << result.curves[result.curve_of_open_claim[i]].key << ',' << format_number(c.paid)
        << ',' << format_number(c.mean_residual) << ',' << format_number(c.ultimate) << ','
        << format_number(c.second_moment) << ',' << format_number(c.variance) << ',' << (c.beyond_support ? 1 : 0)
        << ',' << (c.tail_truncated ? 1 : 0) << '\n';
  }
}

void write_curves_csv(std::ostream& out, const FitPredictResult& result) {
  out << "covariate_key,size,probability\n";
  for (const auto& c : result.curves) {
    const auto& sizes = c.cdf.sizes();
    if (sizes.empty() || sizes.front() > 0.0) out << c.key << ",0," << format_number(c.cdf.base()) << '\n';
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      out << c.key << ',' << format_number(sizes[i]) << ',' << format_number(c.cdf.values()[i]) << '\n';
    }
  }
}

void write_fit_outputs(const std::filesystem::path& dir, const FitPredictResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  {
    auto out = open_output(dir / "report.json");
    out << report_json(result);
  }
  {
    auto out = open_output(dir / "report.txt");
    write_report_text(out, result);
  }
  {
    auto out = open_output(dir / "claims.csv");
    write_claims_csv(out, result);
  }
  auto out = open_output(dir / "curves.csv");
  write_curves_csv(out, result);
  if (!out) throw IoError("write failed in " + dir.string());
}

PredictionRun load_prediction_run(const std::filesystem::path& dir) {
  PredictionRun run;
  run.name = dir.filename().string();
  if (run.name.empty()) run.name = dir.parent_path().filename().string();
  {
    auto in = open_input(dir / "report.json");
    json j;
    try {
      j = json::parse(in);
      run.y_tot = j.at("y_tot").get<double>();
      run.sd_tot = j.at("sd_tot").get<double>();
      run.model.k = j.at("metadata").at("k").get<int>();
      run.model.features = j.at("metadata").at("features").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ParseError((dir / "report.json").string() + ": " + e.what());
    }
    run.model.name = run.name;
  }

  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> curves;
  {
    auto in = open_input(dir / "curves.csv");
    std::string line;
    std::getline(in, line);
    if (strip_cr(line) != "covariate_key,size,probability") throw ParseError("curves.csv: unexpected header");
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      line = strip_cr(line);
      if (line.empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != 3) throw ParseError("curves.csv: expected 3 fields", row);
      auto& c = curves[f[0]];
      c.first.push_back(parse_double(f[1], row));
      c.second.push_back(parse_double(f[2], row));
    }
  }
  std::map<std::string, StepCdf> cdfs;
  for (auto& [key, c] : curves) cdfs.emplace(key, StepCdf(std::move(c.first), std::move(c.second)));

  auto in = open_input(dir / "claims.csv");
  std::string line;
  std::getline(in, line);
  if (strip_cr(line).rfind("claim_id,covariate_key,", 0) != 0) throw ParseError("claims.csv: unexpected header");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() < 2) throw ParseError("claims.csv: expected claim_id and covariate_key", row);
    const auto it = cdfs.find(f[1]);
    if (it == cdfs.end()) throw ParseError("claims.csv: no curve for covariate '" + f[1] + "'", row);
    run.open_ids.push_back(f[0]);
    run.open_cdfs.push_back(it->second);
  }
  return run;
}

void write_truth_csv(std::ostream& out, const SimulatedPortfolio& sim) {
  out << "claim_number,accident_period,ultimate\n";
  for (std::size_t i = 0; i < sim.claims.size(); ++i) {
    out << sim.claims[i].claim_id << ',' << sim.claims[i].accident_period << ','
        << format_number(sim.full_paths[i].absorption_size) << '\n';
  }
}

std::unordered_map<std::string, double> read_truth_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("truth file is empty");
  const auto header = split(strip_cr(line), ',');
  const auto id_col = std::find(header.begin(), header.end(), "claim_number") - header.begin();
  const auto ult_col = std::find(header.begin(), header.end(), "ultimate") - header.begin();
  if (id_col == static_cast<std::ptrdiff_t>(header.size()) || ult_col == static_cast<std::ptrdiff_t>(header.size())) {
    throw ParseError("truth file needs claim_number and ultimate columns");
  }
  std::unordered_map<std::string, double> truth;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw ParseError("truth file: wrong number of fields", row);
    truth[f[id_col]] = parse_double(f[ult_col], row);
  }
  return truth;
}

ScoreTable score_runs(const std::vector<PredictionRun>& runs, const std::unordered_map<std::string, double>& truth) {
  if (runs.empty()) throw ValidationError("nothing to score");
  if (truth.empty()) throw ValidationError("truth file has no claims");
  // Sum in a fixed order so the total does not depend on hash layout.
  std::vector<std::pair<std::string, double>> ordered(truth.begin(), truth.end());
  std::sort(ordered.begin(), ordered.end());
  CompensatedSum actual;
  for (const auto& [id, y] : ordered) actual += y;

  ScoreTable table;
  for (const auto& run : runs) {
    std::vector<double> scores;
    scores.reserve(run.open_ids.size());
    for (std::size_t i = 0; i < run.open_ids.size(); ++i) {
      const auto it = truth.find(run.open_ids[i]);
      if (it == truth.end()) throw ValidationError("claim " + run.open_ids[i] + " is missing from the truth file");
      scores.push_back(crps(run.open_cdfs[i], it->second));
    }
    const double ei = error_incidence(run.y_tot, actual.value());
    const double cv = run.y_tot > 0.0 ? run.sd_tot / run.y_tot : 0.0;
    table.summaries.push_back(summarize_scores(run.model, run.open_ids, std::move(scores), ei, cv));
  }
  table.reference = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i].model.features.empty()) {
      table.reference = i;
      break;
    }
  }
  if (table.summaries[table.reference].average_crps > 0.0) apply_relative_crps(table.summaries, table.reference);
  table.selected = select_model(table.summaries);
  return table;
}

namespace {

std::string join_features(const std::vector<std::string>& features) {
  std::string out;
  for (const auto& f : features) out += (out.empty() ? "" : "+") + f;
  return out.empty() ? "none" : out;
}

}  // namespace

void write_scores_csv(std::ostream& out, const ScoreTable& table) {
  out << "model,k,features,ei,avg_crps,relative_crps,cv,selected\n";
  for (std::size_t i = 0; i < table.summaries.size(); ++i) {
    const auto& s = table.summaries[i];
    out << s.model.name << ',' << s.model.k << ',' << join_features(s.model.features) << ',' << format_number(s.ei)
        << ',' << format_number(s.average_crps) << ',' << format_number(s.relative_crps) << ','
        << format_number(s.cv) << ',' << (i == table.selected ? 1 : 0) << '\n';
  }
}

std::string scores_json(const ScoreTable& table) {
  json models = json::array();
  for (std::size_t i = 0; i < table.summaries.size(); ++i) {
    const auto& s = table.summaries[i];
    models.push_back({{"model", s.model.name},
                      {"k", s.model.k},
                      {"features", s.model.features},
                      {"ei", s.ei},
                      {"avg_crps", s.average_crps},
                      {"relative_crps", s.relative_crps},
                      {"cv", s.cv},
                      {"n_claims", s.crps.size()},
                      {"selected", i == table.selected}});
  }
  json j{{"models", models},
         {"reference", table.summaries[table.reference].model.name},
         {"selected", table.summaries[table.selected].model.name}};
  return j.dump(2) + "\n";
}

ReplicationResult run_replication(int k, Scenario scenario, int replication, const ReproduceOptions& options) {
  ScenarioConfig config;
  config.k = k;
  config.scenario = scenario;
  config.seed = options.seed;
  config.volume_preset = options.volume_preset;
  config.censor_rule = options.censor_rule;
  const SimulatedPortfolio sim = generate_scenario(config, replication);
  const StateSpace space(k);
  // Both benchmarks see only the observed portfolio; full paths are for scoring.
  const auto records = sim.observed_records();
  const Triangle counts = build_count_triangle(records, space).triangle;

  ReplicationResult out;
  out.k = k;
  out.scenario = scenario;
  out.replication = replication;
  out.actual = sim.actual_total();
  out.n_open = sim.observed.n_rbns();

  for (int v = 0; v < 2; ++v) {
    FitOptions fo;
    fo.k = k;
    fo.kernel = options.kernel;
    fo.eta = options.eta;
    fo.fallback = options.fallback;
    if (v == 1) fo.features = {Feature::AccidentPeriod};
    const Portfolio portfolio = sim.observed.with_features(fo.features);
    const auto fit = fit_predict(portfolio, counts, fo);
    out.aj_total[v] = fit.report.y_tot;
    out.aj_sd[v] = fit.report.sd_tot;
    out.curve_violations += fit.curve_violations;
    CompensatedSum total;
    std::size_t open = 0;
    for (std::size_t i = 0; i < portfolio.size(); ++i) {
      if (portfolio.paths()[i].absorbed) continue;
      const auto& cdf = fit.curves[fit.curve_of_open_claim[open++]].cdf;
      total += crps(cdf, sim.full_paths[i].absorption_size);
    }
    out.avg_crps[v] = open ? total.value() / static_cast<double>(open) : 0.0;
  }

  const Triangle paid = build_paid_triangle(records, space).triangle;
  const auto cl = chain_ladder(paid);
  out.cl_total = cl.total_ultimate;
  out.cl_sd = std::sqrt(mack_process_variance(paid, cl).total);
  return out;
}

ReproduceResult reproduce(const ReproduceOptions& options) {
  if (options.replications < 1) throw ValidationError("replications must be at least 1");
  if (options.ks.empty() || options.scenarios.empty()) throw ValidationError("nothing to reproduce");
  for (int k : options.ks) {
    if (k < 4) throw ValidationError("reproduce needs k >= 4 so the chain-ladder variance is defined");
  }
  struct Job {
    int k;
    Scenario scenario;
    int rep;
  };
  std::vector<Job> jobs;
  for (int k : options.ks) {
    for (auto s : options.scenarios) {
      for (int r = 0; r < options.replications; ++r) jobs.push_back({k, s, r});
    }
  }
  ReproduceResult result;
  result.replications.resize(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t i) {
    result.replications[i] = run_replication(jobs[i].k, jobs[i].scenario, jobs[i].rep, options);
  });

  const auto n = static_cast<double>(options.replications);
  std::size_t at = 0;
  for (int k : options.ks) {
    for (auto s : options.scenarios) {
      const auto first = result.replications.begin() + static_cast<std::ptrdiff_t>(at);
      const auto last = first + options.replications;
      at += static_cast<std::size_t>(options.replications);
      for (int v = 0; v < 2; ++v) {
        CompensatedSum actual, ei_aj, ei_cl, cv_aj, cv_cl, rel;
        for (auto it = first; it != last; ++it) {
          actual += it->actual;
          ei_aj += it->aj_total[v] / it->actual - 1.0;
          ei_cl += it->cl_total / it->actual - 1.0;
          cv_aj += it->aj_sd[v] / it->aj_total[v];
          cv_cl += it->cl_sd / it->cl_total;
          rel += it->avg_crps[1] > 0.0 ? it->avg_crps[v] / it->avg_crps[1] : 1.0;
        }
        result.rows.push_back({k, s, v == 1, actual.value() / n, ei_aj.value() / n, ei_cl.value() / n,
                               cv_aj.value() / n, cv_cl.value() / n, rel.value() / n});
      }
    }
  }
  return result;
}

void write_reproduce_csv(std::ostream& out, const std::vector<ReproduceRow>& rows) {
  out << "k,scenario,U,actual_average,ei_aj,ei_cl,cv_aj,cv_cl,relative_crps\n";
  const auto old = out.precision(8);
  for (const auto& r : rows) {
    out << r.k << ',' << scenario_name(r.scenario) << ',' << (r.uses_u ? "yes" : "no") << ',' << r.actual_average
        << ',' << r.ei_aj << ',' << r.ei_cl << ',' << r.cv_aj << ',' << r.cv_cl << ',' << r.relative_crps << '\n';
  }
  out.precision(old);
}

}  // namespace ajreserve
