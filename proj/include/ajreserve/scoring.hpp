#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ajreserve/estimator.hpp"

namespace ajreserve {

/// int_0^y F^2 + int_y^inf (1 - F)^2 for the effective (residual-atom) cdf,
/// exact for step functions.
double crps(const StepCdf& cdf, double y);

/// predicted / actual - 1. Throws ValidationError when actual <= 0.
double error_incidence(double predicted_total, double actual_total);

struct ModelInfo {
  std::string name;
  int k = 0;
  std::vector<std::string> features;
};

struct ScoreSummary {
  ModelInfo model;
  std::vector<std::string> claim_ids;
  std::vector<double> crps;
  double average_crps = 0.0;
  double relative_crps = 1.0;
  double ei = 0.0;
  double cv = 0.0;  // sd(Y_tot) / Y_tot
};

/// Fills the average from per-claim scores.
ScoreSummary summarize_scores(ModelInfo model, std::vector<std::string> claim_ids, std::vector<double> crps,
                              double ei = 0.0, double cv = 0.0);

/// Sets relative_crps = average / average of `summaries[reference]`.
void apply_relative_crps(std::span<ScoreSummary> summaries, std::size_t reference);

/// Index of the minimum average CRPS; ties go to the smaller k, then to the
/// model with fewer features. All candidates must be scored on the same claims.
std::size_t select_model(std::span<const ScoreSummary> candidates);

}  // namespace ajreserve
