#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ajreserve/core.hpp"
#include "ajreserve/estimator.hpp"
#include "ajreserve/kernels.hpp"
#include "ajreserve/reserving.hpp"
#include "ajreserve/scoring.hpp"
#include "ajreserve/simulator.hpp"

namespace ajreserve {

/// Runs fn(0) .. fn(n - 1) on up to `threads` workers (0 picks the hardware
/// concurrency). The first exception in index order is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct FitOptions {
  int k = 4;
  KernelSpec kernel;
  double eta = 0.75;
  std::vector<Feature> features;
  SupportFallback fallback = SupportFallback::Zero;
  std::optional<int> censor_depth;
  IngestOptions ingest;
  std::size_t threads = 1;
};

/// Fitted absorbing-state cdf at one covariate point.
struct CovariateCurve {
  std::vector<double> x;
  std::string key;
  StepCdf cdf;
};

struct FitPredictResult {
  ReserveReport report;
  RbnsPrediction rbns;
  IbnrModel ibnr;
  std::vector<CovariateCurve> curves;
  std::vector<std::size_t> curve_of_open_claim;  // index into curves, per open claim
  std::size_t count_triangle_excluded = 0;
  std::size_t skipped_zero_at_risk = 0;
  std::size_t curve_violations = 0;  // audit_curve over every fitted curve
};

/// `k=...` style label of a covariate point, "all" without features.
std::string covariate_key(const std::vector<Feature>& features, const std::vector<double>& x);

/// Fits one conditional cdf per distinct open-claim covariate and assembles
/// the reserve. `portfolio` must already carry the covariates of `features`.
FitPredictResult fit_predict(const Portfolio& portfolio, const Triangle& count_triangle, const FitOptions& options);

/// Record-level pipeline: validation, optional calendar cut, paths, count
/// triangle, then the portfolio-level fit.
FitPredictResult fit_predict(std::vector<ClaimRecord> records, const FitOptions& options);

std::string report_json(const FitPredictResult& result);
void write_report_text(std::ostream& out, const FitPredictResult& result);
void write_claims_csv(std::ostream& out, const FitPredictResult& result);
/// Tidy `covariate_key,size,probability`; a size-0 row carries F(0).
void write_curves_csv(std::ostream& out, const FitPredictResult& result);
/// Writes report.json, report.txt, claims.csv and curves.csv into `dir`.
void write_fit_outputs(const std::filesystem::path& dir, const FitPredictResult& result);

/// A fit-predict output directory read back for scoring.
struct PredictionRun {
  std::string name;
  ModelInfo model;
  double y_tot = 0.0;
  double sd_tot = 0.0;
  std::vector<std::string> open_ids;
  std::vector<StepCdf> open_cdfs;
};

PredictionRun load_prediction_run(const std::filesystem::path& dir);

/// `claim_number,accident_period,ultimate`.
void write_truth_csv(std::ostream& out, const SimulatedPortfolio& sim);
std::unordered_map<std::string, double> read_truth_csv(std::istream& in);

struct ScoreTable {
  std::vector<ScoreSummary> summaries;
  std::size_t reference = 0;
  std::size_t selected = 0;
};

/// Scores every run on its open claims against the realized ultimates. The
/// relative-CRPS reference is the first run with features, else the first.
ScoreTable score_runs(const std::vector<PredictionRun>& runs, const std::unordered_map<std::string, double>& truth);
void write_scores_csv(std::ostream& out, const ScoreTable& table);
std::string scores_json(const ScoreTable& table);

struct ReproduceOptions {
  std::vector<int> ks{4, 5, 6, 7};
  std::vector<Scenario> scenarios{Scenario::Alpha, Scenario::Beta};
  int replications = 20;
  std::uint64_t seed = 1;
  double eta = 0.75;
  KernelSpec kernel;
  SupportFallback fallback = SupportFallback::Zero;
  VolumePreset volume_preset = VolumePreset::Narrative;
  CensorRule censor_rule = CensorRule::UniformQuantile;
  std::size_t threads = 0;
};

/// One simulated dataset scored by both AJ variants and chain ladder.
/// Index 0 is the model without features, index 1 the one using U.
struct ReplicationResult {
  int k = 0;
  Scenario scenario = Scenario::Alpha;
  int replication = 0;
  double actual = 0.0;
  double aj_total[2] = {0.0, 0.0};
  double aj_sd[2] = {0.0, 0.0};
  double avg_crps[2] = {0.0, 0.0};
  double cl_total = 0.0;
  double cl_sd = 0.0;
  std::size_t n_open = 0;
  std::size_t curve_violations = 0;
};

ReplicationResult run_replication(int k, Scenario scenario, int replication, const ReproduceOptions& options);

struct ReproduceRow {
  int k = 0;
  Scenario scenario = Scenario::Alpha;
  bool uses_u = false;
  double actual_average = 0.0;
  double ei_aj = 0.0;
  double ei_cl = 0.0;
  double cv_aj = 0.0;
  double cv_cl = 0.0;
  double relative_crps = 0.0;
};

struct ReproduceResult {
  std::vector<ReplicationResult> replications;
  std::vector<ReproduceRow> rows;
};

ReproduceResult reproduce(const ReproduceOptions& options);
void write_reproduce_csv(std::ostream& out, const std::vector<ReproduceRow>& rows);

}  // namespace ajreserve
