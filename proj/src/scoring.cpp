#include "ajreserve/scoring.hpp"

#include <algorithm>

#include "ajreserve/errors.hpp"
#include "ajreserve/numeric.hpp"

namespace ajreserve {

double crps(const StepCdf& cdf, double y) {
  if (!(y >= 0.0)) throw ValidationError("CRPS needs a nonnegative observation");
  CompensatedSum total;
  cdf.for_each_piece([&](double lo, double hi, double f) {
    if (lo < y) total += (std::min(hi, y) - lo) * f * f;
    if (hi > y) total += (hi - std::max(lo, y)) * (1.0 - f) * (1.0 - f);
  });
  // Effective F is 1 from z_cap on.
  if (y > cdf.z_cap()) total += y - cdf.z_cap();
  return std::max(total.value(), 0.0);
}

double error_incidence(double predicted_total, double actual_total) {
  if (!(actual_total > 0.0)) throw ValidationError("error incidence needs a positive actual total");
  return predicted_total / actual_total - 1.0;
}

ScoreSummary summarize_scores(ModelInfo model, std::vector<std::string> claim_ids, std::vector<double> crps,
                              double ei, double cv) {
  if (claim_ids.size() != crps.size()) throw ValidationError("one CRPS value per claim id");
  ScoreSummary s;
  s.model = std::move(model);
  s.claim_ids = std::move(claim_ids);
  s.crps = std::move(crps);
  CompensatedSum total;
  for (double v : s.crps) total += v;
  s.average_crps = s.crps.empty() ? 0.0 : total.value() / static_cast<double>(s.crps.size());
  s.ei = ei;
  s.cv = cv;
  return s;
}

void apply_relative_crps(std::span<ScoreSummary> summaries, std::size_t reference) {
  if (reference >= summaries.size()) throw ValidationError("reference model index out of range");
  const double base = summaries[reference].average_crps;
  if (!(base > 0.0)) throw NumericError("reference model has zero average CRPS");
  for (auto& s : summaries) s.relative_crps = s.average_crps / base;
}

std::size_t select_model(std::span<const ScoreSummary> candidates) {
  if (candidates.empty()) throw ValidationError("model selection needs at least one candidate");
  for (const auto& c : candidates) {
    if (c.claim_ids != candidates.front().claim_ids) {
      throw ValidationError("candidate '" + c.model.name + "' was scored on a different set of claims");
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& a = candidates[i];
    const auto& b = candidates[best];
    if (a.average_crps != b.average_crps) {
      if (a.average_crps < b.average_crps) best = i;
    } else if (a.model.k != b.model.k) {
      if (a.model.k < b.model.k) best = i;
    } else if (a.model.features.size() < b.model.features.size()) {
      best = i;
    }
  }
  return best;
}

}  // namespace ajreserve
