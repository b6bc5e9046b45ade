#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ajreserve/core.hpp"
#include "ajreserve/estimator.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Step cdf with 1..max_atoms jumps on (0, 10]; sometimes defective, sometimes
/// with mass at the first size only.
inline ajreserve::StepCdf random_step_cdf(Rng& rng, int max_atoms = 50) {
  const int n = uniform_int(rng, 1, max_atoms);
  std::vector<double> sizes(static_cast<std::size_t>(n));
  for (auto& s : sizes) s = uniform(rng, 0.01, 10.0);
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::vector<double> jumps(sizes.size());
  double total = 0.0;
  for (auto& j : jumps) {
    j = uniform(rng);
    total += j;
  }
  const double top = uniform(rng) < 0.3 ? uniform(rng, 0.5, 0.99) : 1.0;
  std::vector<double> values(sizes.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    acc += jumps[i] / total * top;
    values[i] = std::min(acc, top);
  }
  values.back() = top;
  return {sizes, values};
}

/// Adaptive 5-point Gauss-Legendre quadrature of f over [a, b] with known
/// discontinuities `breaks`. Nodes are interior, so right-continuity at a
/// break never matters.
inline double quadrature(const std::function<double(double)>& f, double a, double b, std::vector<double> breaks,
                         double tol = 1e-13) {
  static const double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                              0.9061798459386640};
  static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                              0.2369268850561891};
  auto rule = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi);
    const double h = 0.5 * (hi - lo);
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += w[i] * f(c + h * x[i]);
    return s * h;
  };
  std::function<double(double, double, double, int)> adapt = [&](double lo, double hi, double whole, int depth) {
    const double mid = 0.5 * (lo + hi);
    const double left = rule(lo, mid);
    const double right = rule(mid, hi);
    if (depth > 40 || std::abs(left + right - whole) < tol) return left + right;
    return adapt(lo, mid, left, depth + 1) + adapt(mid, hi, right, depth + 1);
  };
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]);
    const double hi = std::min(b, breaks[i + 1]);
    if (hi > lo) total += adapt(lo, hi, rule(lo, hi), 0);
  }
  return total;
}

/// Three-state sample where every claim closes straight from state 1, so the
/// absorbing cdf is a classical survival problem. Sizes are continuous, so
/// ties have probability zero.
inline ajreserve::Portfolio random_two_state_sample(Rng& rng, int n) {
  std::vector<ajreserve::ClaimInfo> claims;
  std::vector<ajreserve::ClaimPath> paths;
  for (int i = 0; i < n; ++i) {
    const double y = -std::log1p(-uniform(rng)) * uniform(rng, 0.5, 2.0);
    const double w = uniform(rng, 0.0, 3.0);
    ajreserve::ClaimPath p;
    if (y <= w) {
      p.events.push_back({y, 1, 3});
      p.absorbed = true;
      p.absorption_size = y;
      p.censor_level = y;
    } else {
      p.censor_level = w;
    }
    claims.push_back({"c" + std::to_string(i), 0, 1, 1});
    paths.push_back(std::move(p));
  }
  return {ajreserve::StateSpace(3), std::move(claims), std::move(paths)};
}

/// Kaplan-Meier 1 - S at each distinct event time, computed directly from the
/// observations; an observation censored at t counts as at risk at t.
inline std::vector<std::pair<double, double>> km_cdf(const ajreserve::Portfolio& sample) {
  std::vector<double> times;
  for (const auto& p : sample.paths()) {
    if (p.absorbed) times.push_back(p.absorption_size);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<std::pair<double, double>> out;
  double survival = 1.0;
  for (double t : times) {
    double at_risk = 0.0;
    double deaths = 0.0;
    for (const auto& p : sample.paths()) {
      if (p.observed_size() >= t) at_risk += 1.0;
      if (p.absorbed && p.absorption_size == t) deaths += 1.0;
    }
    survival *= 1.0 - deaths / at_risk;
    out.emplace_back(t, 1.0 - survival);
  }
  return out;
}

/// Random hazard with 1..max_events increments whose factors Id + dL are
/// stochastic matrices.
inline ajreserve::CumulativeHazard random_hazard(Rng& rng, int k, int max_events) {
  const int n = uniform_int(rng, 1, max_events);
  std::vector<double> sizes;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    s += uniform(rng, 0.1, 1.0);
    sizes.push_back(s);
  }
  std::vector<Eigen::MatrixXd> mats;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
    for (int j = 0; j + 1 < k; ++j) {
      const double budget = uniform(rng) < 0.2 ? 1.0 : uniform(rng);
      std::vector<double> parts(static_cast<std::size_t>(k - 1 - j));
      double total = 0.0;
      for (auto& p : parts) {
        p = uniform(rng);
        total += p;
      }
      for (std::size_t h = 0; h < parts.size(); ++h) m(j, j + 1 + static_cast<int>(h)) = parts[h] / total * budget;
    }
    mats.push_back(m);
  }
  return ajreserve::CumulativeHazard::from_matrices(sizes, mats);
}

/// Random portfolio of forward jump paths on k states, about a third censored.
inline ajreserve::Portfolio random_portfolio(Rng& rng, int k, int n) {
  std::vector<ajreserve::ClaimInfo> claims;
  std::vector<ajreserve::ClaimPath> paths;
  for (int i = 0; i < n; ++i) {
    ajreserve::ClaimPath p;
    int state = 1;
    double z = 0.0;
    const double w = uniform(rng) < 0.35 ? uniform(rng, 0.0, 4.0) : 1e300;
    while (state < k) {
      z += uniform(rng, 0.05, 1.0);
      if (z > w) break;
      const int to = uniform(rng) < 0.5 ? k : uniform_int(rng, state + 1, k);
      p.events.push_back({z, state, to});
      state = to;
    }
    if (state == k) {
      p.absorbed = true;
      p.absorption_size = z;
      p.censor_level = z;
    } else {
      p.censor_level = w;
    }
    claims.push_back({"c" + std::to_string(i), uniform_int(rng, 0, 1), uniform_int(rng, 1, k - 1), 1});
    paths.push_back(std::move(p));
  }
  return {ajreserve::StateSpace(k), std::move(claims), std::move(paths)};
}

}  // namespace testing
