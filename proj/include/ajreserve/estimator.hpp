#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ajreserve/core.hpp"
#include "ajreserve/kernels.hpp"

namespace ajreserve {

/// Weighted counting-process aggregates of a sample of paths, evaluated at
/// the pooled distinct event sizes. State arguments are 1-based.
struct CountingAggregate {
  int k = 0;
  std::vector<double> sizes;       // ascending, distinct
  std::vector<double> event_mass;  // [event][from][to], k*k per event
  std::vector<double> at_risk;     // [event][state], mass occupying `state` just before the event
  std::vector<double> initial;     // weighted occupancy before any event
  double total_weight = 0.0;

  [[nodiscard]] std::size_t n_events() const noexcept { return sizes.size(); }
  [[nodiscard]] double events(std::size_t i, int from, int to) const {
    return event_mass[(i * k + (from - 1)) * k + (to - 1)];
  }
  [[nodiscard]] double risk(std::size_t i, int state) const { return at_risk[i * k + (state - 1)]; }
};

/// Pools weighted jumps and at-risk masses. A path contributes to the at-risk
/// mass of state j at event size s when it occupies j just before s and is
/// still under observation at s (s <= W for open paths). Paths with zero
/// weight contribute nothing.
CountingAggregate aggregate_counts(const Portfolio& portfolio, std::span<const double> weights);

struct HazardDiagnostics {
  std::size_t skipped_zero_at_risk = 0;
};

/// Piecewise-constant cumulative hazard: a k x k increment matrix per event
/// size, off-diagonals >= 0 and each diagonal equal to minus its row's
/// off-diagonal sum, so Id + dLambda has unit row sums.
class CumulativeHazard {
 public:
  CumulativeHazard(int k, std::vector<double> sizes, std::vector<double> increments,
                   HazardDiagnostics diagnostics = {});

  [[nodiscard]] int k() const noexcept { return k_; }
  [[nodiscard]] const std::vector<double>& sizes() const noexcept { return sizes_; }
  [[nodiscard]] std::size_t n_events() const noexcept { return sizes_.size(); }
  [[nodiscard]] double increment(std::size_t i, int from, int to) const {
    return increments_[(i * k_ + (from - 1)) * k_ + (to - 1)];
  }
  [[nodiscard]] Eigen::MatrixXd increment_matrix(std::size_t i) const;
  /// Lambda_{from,to}(z): sum of increments at sizes <= z.
  [[nodiscard]] double cumulative(int from, int to, double z) const;
  [[nodiscard]] const HazardDiagnostics& diagnostics() const noexcept { return diagnostics_; }

  /// Tidy rows `size,from,to,increment` for nonzero off-diagonal increments.
  void write_csv(std::ostream& out) const;

  /// Builds a hazard from off-diagonal increment matrices; diagonals are
  /// recomputed.
  static CumulativeHazard from_matrices(std::vector<double> sizes, const std::vector<Eigen::MatrixXd>& increments);

 private:
  int k_;
  std::vector<double> sizes_;
  std::vector<double> increments_;
  HazardDiagnostics diagnostics_;
};

/// dLambda_jh = dN_jh / I_j(s-); event points with zero at-risk mass are
/// skipped and counted in the diagnostics.
CumulativeHazard nelson_aalen(const CountingAggregate& aggregate);

CumulativeHazard conditional_nelson_aalen(const Portfolio& portfolio, std::span<const double> x,
                                          const KernelSpec& kernel, const Bandwidth& bandwidth);

/// Occupation probabilities p(z|x) at each event size; constant in between.
struct OccupationCurve {
  int k = 0;
  std::vector<double> initial;  // p before the first event
  std::vector<double> sizes;
  std::vector<double> probs;  // [event][state]

  [[nodiscard]] double prob(std::size_t i, int state) const { return probs[i * k + (state - 1)]; }
  /// Row vector p(z), right-continuous.
  [[nodiscard]] std::vector<double> at(double z) const;

  /// Tidy rows `size,state,probability`.
  void write_csv(std::ostream& out) const;
};

/// Left-to-right product integral of (Id + dLambda) applied to `initial`,
/// evaluated with the first-order recursion on the occupation vector.
/// Throws NumericError when a factor has a negative entry or when a result
/// leaves the probability simplex by more than 1e-10.
OccupationCurve aalen_johansen(const CumulativeHazard& hazard, std::span<const double> initial);

/// Counts simplex and absorbing-monotonicity violations of a curve. Used by
/// audits; aalen_johansen output always scores zero.
std::size_t audit_curve(const OccupationCurve& curve, double tolerance = 1e-10);

/// Right-continuous step cdf. Beyond the support cap z_cap (the last jump
/// size) any residual mass 1 - F_end is treated as an atom at z_cap, so
/// `effective(z)` is 1 for z >= z_cap.
class StepCdf {
 public:
  StepCdf() = default;
  StepCdf(std::vector<double> sizes, std::vector<double> values, double base = 0.0);
  static StepCdf degenerate(double at);

  [[nodiscard]] const std::vector<double>& sizes() const noexcept { return sizes_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
  /// F on [0, first size).
  [[nodiscard]] double base() const noexcept { return base_; }
  [[nodiscard]] double z_cap() const noexcept { return sizes_.empty() ? 0.0 : sizes_.back(); }
  [[nodiscard]] double f_end() const noexcept { return values_.empty() ? base_ : values_.back(); }
  [[nodiscard]] double residual_mass() const noexcept { return 1.0 - f_end(); }
  [[nodiscard]] bool tail_truncated() const noexcept { return f_end() < 1.0 - 1e-6; }

  /// Estimated F(z).
  [[nodiscard]] double operator()(double z) const noexcept;
  /// F(z) with the residual atom placed at z_cap.
  [[nodiscard]] double effective(double z) const noexcept;

  /// Calls fn(lo, hi, F) for consecutive pieces of the effective cdf covering
  /// [0, z_cap); beyond z_cap the effective cdf is 1.
  template <class Fn>
  void for_each_piece(Fn&& fn) const {
    double lo = 0.0;
    double value = base_;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      if (sizes_[i] > lo) fn(lo, sizes_[i], value);
      lo = sizes_[i];
      value = values_[i];
    }
  }

 private:
  std::vector<double> sizes_;
  std::vector<double> values_;
  double base_ = 0.0;
};

/// Absorbing-state column of an occupation curve.
StepCdf occupation_cdf(const OccupationCurve& curve);

struct ConditionalFit {
  CumulativeHazard hazard;
  OccupationCurve curve;
  StepCdf cdf;
};

/// Conditional Nelson-Aalen followed by Aalen-Johansen, started from the
/// weighted initial occupancy at x.
ConditionalFit fit_conditional(const Portfolio& portfolio, std::span<const double> x, const KernelSpec& kernel,
                               const Bandwidth& bandwidth);
StepCdf fit_conditional_cdf(const Portfolio& portfolio, std::span<const double> x, const KernelSpec& kernel,
                            const Bandwidth& bandwidth);

/// Same composition with explicit per-path weights.
ConditionalFit fit_weighted(const Portfolio& portfolio, std::span<const double> weights);

}  // namespace ajreserve
