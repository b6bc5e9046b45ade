#include "ajreserve/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ajreserve/errors.hpp"

namespace ajreserve {

CountingAggregate aggregate_counts(const Portfolio& portfolio, std::span<const double> weights) {
  const auto& paths = portfolio.paths();
  if (weights.size() != paths.size()) {
    throw ValidationError("expected " + std::to_string(paths.size()) + " weights, got " +
                          std::to_string(weights.size()));
  }
  const int k = portfolio.state_space().k();
  CountingAggregate agg;
  agg.k = k;
  agg.initial.assign(k, 0.0);

  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw ValidationError("weights must be finite and nonnegative");
    }
    agg.total_weight += weights[i];
    if (weights[i] == 0.0) continue;
    for (const auto& e : paths[i].events) agg.sizes.push_back(e.size);
  }
  if (!(agg.total_weight > 0.0)) throw ValidationError("all weights are zero");
  std::sort(agg.sizes.begin(), agg.sizes.end());
  agg.sizes.erase(std::unique(agg.sizes.begin(), agg.sizes.end()), agg.sizes.end());

  const std::size_t m = agg.sizes.size();
  const auto ks = static_cast<std::size_t>(k);
  agg.event_mass.assign(m * ks * ks, 0.0);
  // Difference arrays over event indices, one per state.
  std::vector<double> diff((m + 1) * ks, 0.0);
  auto index_of = [&](double z) {
    return static_cast<std::size_t>(std::lower_bound(agg.sizes.begin(), agg.sizes.end(), z) - agg.sizes.begin());
  };
  auto first_after = [&](double z) {
    return static_cast<std::size_t>(std::upper_bound(agg.sizes.begin(), agg.sizes.end(), z) - agg.sizes.begin());
  };
  auto add_risk = [&](int state, std::size_t lo, std::size_t hi, double w) {
    if (lo >= hi) return;
    diff[lo * ks + (state - 1)] += w;
    diff[hi * ks + (state - 1)] -= w;
  };

  for (std::size_t i = 0; i < paths.size(); ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const auto& p = paths[i];
    agg.initial[p.initial_state - 1] += w;

    int state = p.initial_state;
    double entry = 0.0;
    bool first_segment = true;
    for (const auto& e : p.events) {
      // Occupies `state` just before every s in (entry, e.size]; the initial
      // segment also covers s = 0.
      const std::size_t lo = first_segment ? 0 : first_after(entry);
      add_risk(state, lo, first_after(e.size), w);
      const std::size_t at = index_of(e.size);
      agg.event_mass[(at * ks + (e.from - 1)) * ks + (e.to - 1)] += w;
      entry = e.size;
      state = e.to;
      first_segment = false;
    }
    if (!p.absorbed) {
      const std::size_t lo = first_segment ? 0 : first_after(entry);
      add_risk(state, lo, first_after(p.censor_level), w);
    }
  }

  agg.at_risk.assign(m * ks, 0.0);
  std::vector<double> running(ks, 0.0);
  const double slack = 1e-9 * agg.total_weight;
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t j = 0; j < ks; ++j) {
      running[j] += diff[t * ks + j];
      double risk = std::max(running[j], 0.0);
      double leaving = 0.0;
      for (std::size_t h = 0; h < ks; ++h) leaving += agg.event_mass[(t * ks + j) * ks + h];
      // The running sum can undershoot by rounding when the last mass leaves.
      if (leaving > risk) {
        if (leaving - risk > slack) {
          throw NumericError("event mass exceeds at-risk mass at size " + std::to_string(agg.sizes[t]));
        }
        risk = leaving;
      }
      agg.at_risk[t * ks + j] = risk;
    }
  }
  return agg;
}

CumulativeHazard::CumulativeHazard(int k, std::vector<double> sizes, std::vector<double> increments,
                                   HazardDiagnostics diagnostics)
    : k_(k), sizes_(std::move(sizes)), increments_(std::move(increments)), diagnostics_(diagnostics) {
  const auto ks = static_cast<std::size_t>(k_);
  if (increments_.size() != sizes_.size() * ks * ks) {
    throw ValidationError("hazard increments do not match the number of sizes");
  }
  for (std::size_t i = 1; i < sizes_.size(); ++i) {
    if (!(sizes_[i] > sizes_[i - 1])) throw ValidationError("hazard sizes must be strictly increasing");
  }
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    for (int j = 1; j <= k_; ++j) {
      double row = 0.0;
      for (int h = 1; h <= k_; ++h) {
        const double v = increment(i, j, h);
        if (h == j) continue;
        if (!(v >= 0.0)) throw ValidationError("off-diagonal hazard increments must be nonnegative");
        if (j == k_ && v != 0.0) throw ValidationError("the absorbing state has no outgoing hazard");
        row += v;
      }
      if (std::abs(increment(i, j, j) + row) > 1e-12 * std::max(1.0, row)) {
        throw ValidationError("hazard diagonal must equal minus the row's off-diagonal sum");
      }
    }
  }
}

Eigen::MatrixXd CumulativeHazard::increment_matrix(std::size_t i) const {
  Eigen::MatrixXd m(k_, k_);
  for (int j = 1; j <= k_; ++j) {
    for (int h = 1; h <= k_; ++h) m(j - 1, h - 1) = increment(i, j, h);
  }
  return m;
}

double CumulativeHazard::cumulative(int from, int to, double z) const {
  double total = 0.0;
  for (std::size_t i = 0; i < sizes_.size() && sizes_[i] <= z; ++i) total += increment(i, from, to);
  return total;
}

void CumulativeHazard::write_csv(std::ostream& out) const {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << "size,from,to,increment\n";
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    for (int j = 1; j <= k_; ++j) {
      for (int h = 1; h <= k_; ++h) {
        if (h != j && increment(i, j, h) != 0.0) {
          out << sizes_[i] << ',' << j << ',' << h << ',' << increment(i, j, h) << '\n';
        }
      }
    }
  }
  out.precision(old);
}

CumulativeHazard CumulativeHazard::from_matrices(std::vector<double> sizes,
                                                 const std::vector<Eigen::MatrixXd>& increments) {
  if (increments.size() != sizes.size()) throw ValidationError("one increment matrix per size");
  const int k = increments.empty() ? 3 : static_cast<int>(increments.front().rows());
  const auto ks = static_cast<std::size_t>(k);
  std::vector<double> flat(sizes.size() * ks * ks, 0.0);
  for (std::size_t i = 0; i < increments.size(); ++i) {
    const auto& m = increments[i];
    if (m.rows() != k || m.cols() != k) throw ValidationError("increment matrices must be k x k");
    for (int j = 0; j < k; ++j) {
      double row = 0.0;
      for (int h = 0; h < k; ++h) {
        if (h == j) continue;
        flat[(i * ks + j) * ks + h] = m(j, h);
        row += m(j, h);
      }
      flat[(i * ks + j) * ks + j] = -row;
    }
  }
  return CumulativeHazard(k, std::move(sizes), std::move(flat));
}

CumulativeHazard nelson_aalen(const CountingAggregate& agg) {
  const int k = agg.k;
  const auto ks = static_cast<std::size_t>(k);
  HazardDiagnostics diag;
  std::vector<double> sizes;
  std::vector<double> flat;
  sizes.reserve(agg.n_events());
  flat.reserve(agg.n_events() * ks * ks);
  for (std::size_t i = 0; i < agg.n_events(); ++i) {
    std::vector<double> block(ks * ks, 0.0);
    bool any = false;
    for (int j = 1; j < k; ++j) {
      const double risk = agg.risk(i, j);
      double row = 0.0;
      for (int h = 1; h <= k; ++h) {
        if (h == j) continue;
        const double dn = agg.events(i, j, h);
        if (dn == 0.0) continue;
        if (!(risk > 0.0)) {
          ++diag.skipped_zero_at_risk;
          continue;
        }
        const double inc = dn / risk;
        block[(j - 1) * ks + (h - 1)] = inc;
        row += inc;
        any = true;
      }
      block[(j - 1) * ks + (j - 1)] = -row;
    }
    if (!any) continue;
    sizes.push_back(agg.sizes[i]);
    flat.insert(flat.end(), block.begin(), block.end());
  }
  return CumulativeHazard(k, std::move(sizes), std::move(flat), diag);
}

namespace {

std::vector<std::vector<double>> covariate_sample(const Portfolio& portfolio) {
  std::vector<std::vector<double>> sample;
  sample.reserve(portfolio.size());
  for (const auto& p : portfolio.paths()) sample.push_back(p.covariates);
  return sample;
}

std::vector<double> local_weights(const Portfolio& portfolio, std::span<const double> x, const KernelSpec& kernel,
                                  const Bandwidth& bandwidth) {
  const auto sample = covariate_sample(portfolio);
  return nw_weights(kernel, x, sample, bandwidth);
}

}  // namespace

CumulativeHazard conditional_nelson_aalen(const Portfolio& portfolio, std::span<const double> x,
                                          const KernelSpec& kernel, const Bandwidth& bandwidth) {
  const auto w = local_weights(portfolio, x, kernel, bandwidth);
  return nelson_aalen(aggregate_counts(portfolio, w));
}

std::vector<double> OccupationCurve::at(double z) const {
  const auto it = std::upper_bound(sizes.begin(), sizes.end(), z);
  if (it == sizes.begin()) return initial;
  const auto i = static_cast<std::size_t>(it - sizes.begin()) - 1;
  return {probs.begin() + static_cast<std::ptrdiff_t>(i * k),
          probs.begin() + static_cast<std::ptrdiff_t>((i + 1) * k)};
}

void OccupationCurve::write_csv(std::ostream& out) const {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << "size,state,probability\n";
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    for (int j = 1; j <= k; ++j) out << sizes[i] << ',' << j << ',' << prob(i, j) << '\n';
  }
  out.precision(old);
}

OccupationCurve aalen_johansen(const CumulativeHazard& hazard, std::span<const double> initial) {
  const int k = hazard.k();
  const auto ks = static_cast<std::size_t>(k);
  if (initial.size() != ks) throw ValidationError("initial vector must have k entries");
  double mass = 0.0;
  for (double v : initial) {
    if (!(v >= 0.0)) throw ValidationError("initial occupation probabilities must be nonnegative");
    mass += v;
  }
  if (std::abs(mass - 1.0) > 1e-10) throw ValidationError("initial occupation probabilities must sum to 1");

  OccupationCurve curve;
  curve.k = k;
  curve.initial.assign(initial.begin(), initial.end());
  curve.sizes = hazard.sizes();
  curve.probs.resize(hazard.n_events() * ks);

  std::vector<double> p(initial.begin(), initial.end());
  std::vector<double> next(ks);
  for (std::size_t i = 0; i < hazard.n_events(); ++i) {
    for (int j = 1; j <= k; ++j) {
      if (1.0 + hazard.increment(i, j, j) < -1e-12) {
        throw NumericError("product-integral factor has a negative diagonal at size " +
                           std::to_string(hazard.sizes()[i]) + " for state " + std::to_string(j));
      }
    }
    // p_h(t+) = p_h(t) + sum_{j != h} p_j dL_jh - p_h sum_{j != h} dL_hj
    for (int h = 1; h <= k; ++h) {
      double v = p[h - 1];
      for (int j = 1; j <= k; ++j) v += p[j - 1] * hazard.increment(i, j, h);
      next[h - 1] = v;
    }
    double total = 0.0;
    for (std::size_t h = 0; h < ks; ++h) {
      if (next[h] < -1e-12 || next[h] > 1.0 + 1e-12) {
        throw NumericError("occupation probability left [0, 1] at size " + std::to_string(hazard.sizes()[i]));
      }
      next[h] = std::clamp(next[h], 0.0, 1.0);
      total += next[h];
    }
    if (std::abs(total - 1.0) > 1e-10) {
      throw NumericError("occupation probabilities no longer sum to 1 at size " +
                         std::to_string(hazard.sizes()[i]));
    }
    // Absorbing inflow is nonnegative; clamping can only shave rounding noise.
    next[ks - 1] = std::max(next[ks - 1], p[ks - 1]);
    p.swap(next);
    std::copy(p.begin(), p.end(), curve.probs.begin() + static_cast<std::ptrdiff_t>(i * ks));
  }
  return curve;
}

std::size_t audit_curve(const OccupationCurve& curve, double tolerance) {
  std::size_t violations = 0;
  double previous_absorbed = curve.initial.empty() ? 0.0 : curve.initial.back();
  auto check = [&](std::span<const double> v) {
    double total = 0.0;
    for (double x : v) {
      if (x < -1e-12 || x > 1.0 + 1e-12) ++violations;
      total += x;
    }
    if (std::abs(total - 1.0) > tolerance) ++violations;
  };
  check(curve.initial);
  for (std::size_t i = 0; i < curve.sizes.size(); ++i) {
    std::span<const double> row(curve.probs.data() + i * curve.k, static_cast<std::size_t>(curve.k));
    check(row);
    if (row.back() < previous_absorbed) ++violations;
    previous_absorbed = row.back();
  }
  return violations;
}

StepCdf::StepCdf(std::vector<double> sizes, std::vector<double> values, double base)
    : sizes_(std::move(sizes)), values_(std::move(values)), base_(base) {
  if (sizes_.size() != values_.size()) throw ValidationError("step cdf needs one value per size");
  if (!(base_ >= 0.0 && base_ <= 1.0)) throw ValidationError("step cdf values must lie in [0, 1]");
  double prev_v = base_;
  double prev_z = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (!(sizes_[i] >= 0.0) || !(sizes_[i] > prev_z)) {
      throw ValidationError("step cdf sizes must be nonnegative and strictly increasing");
    }
    if (!(values_[i] >= prev_v) || values_[i] > 1.0) {
      throw ValidationError("step cdf values must be nondecreasing within [0, 1]");
    }
    prev_z = sizes_[i];
    prev_v = values_[i];
  }
}

StepCdf StepCdf::degenerate(double at) { return StepCdf({at}, {1.0}); }

double StepCdf::operator()(double z) const noexcept {
  const auto it = std::upper_bound(sizes_.begin(), sizes_.end(), z);
  if (it == sizes_.begin()) return base_;
  return values_[static_cast<std::size_t>(it - sizes_.begin()) - 1];
}

double StepCdf::effective(double z) const noexcept {
  if (z >= z_cap()) return 1.0;
  return (*this)(z);
}

StepCdf occupation_cdf(const OccupationCurve& curve) {
  std::vector<double> sizes;
  std::vector<double> values;
  const double base = curve.initial.back();
  double prev = base;
  for (std::size_t i = 0; i < curve.sizes.size(); ++i) {
    const double v = std::max(curve.prob(i, curve.k), prev);
    // Keep only points where the absorbing column moves, plus the last one so
    // the support cap is the last event size.
    if (v != prev || i + 1 == curve.sizes.size()) {
      sizes.push_back(curve.sizes[i]);
      values.push_back(v);
    }
    prev = v;
  }
  return StepCdf(std::move(sizes), std::move(values), base);
}

ConditionalFit fit_weighted(const Portfolio& portfolio, std::span<const double> weights) {
  const auto agg = aggregate_counts(portfolio, weights);
  auto hazard = nelson_aalen(agg);
  std::vector<double> p0(agg.initial);
  for (auto& v : p0) v /= agg.total_weight;
  auto curve = aalen_johansen(hazard, p0);
  auto cdf = occupation_cdf(curve);
  return {std::move(hazard), std::move(curve), std::move(cdf)};
}

ConditionalFit fit_conditional(const Portfolio& portfolio, std::span<const double> x, const KernelSpec& kernel,
                               const Bandwidth& bandwidth) {
  return fit_weighted(portfolio, local_weights(portfolio, x, kernel, bandwidth));
}

StepCdf fit_conditional_cdf(const Portfolio& portfolio, std::span<const double> x, const KernelSpec& kernel,
                            const Bandwidth& bandwidth) {
  return fit_conditional(portfolio, x, kernel, bandwidth).cdf;
}

}  // namespace ajreserve
