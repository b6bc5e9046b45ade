#include "ajreserve/kernels.hpp"

#include <cmath>
#include <sstream>

#include "ajreserve/errors.hpp"

namespace ajreserve {

namespace {

std::string format_point(std::span<const double> x) {
  std::ostringstream s;
  s << '(';
  for (std::size_t i = 0; i < x.size(); ++i) s << (i ? ", " : "") << x[i];
  s << ')';
  return s.str();
}

}  // namespace

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "uniform") return KernelFamily::Uniform;
  if (name == "epanechnikov") return KernelFamily::Epanechnikov;
  if (name == "triangular") return KernelFamily::Triangular;
  if (name == "exact" || name == "exact_match") return KernelFamily::ExactMatch;
  throw ValidationError("unknown kernel '" + std::string(name) + "'");
}

std::string kernel_family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::Uniform: return "uniform";
    case KernelFamily::Epanechnikov: return "epanechnikov";
    case KernelFamily::Triangular: return "triangular";
    case KernelFamily::ExactMatch: return "exact";
  }
  return "?";
}

double kernel_profile(KernelFamily family, double u) noexcept {
  const double a = std::abs(u);
  switch (family) {
    case KernelFamily::Uniform: return a <= 1.0 ? 0.5 : 0.0;
    case KernelFamily::Epanechnikov: return a <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelFamily::Triangular: return a <= 1.0 ? 1.0 - a : 0.0;
    case KernelFamily::ExactMatch: return u == 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

KernelFamily KernelSpec::family(std::size_t dim) const {
  if (families.empty()) throw ValidationError("kernel spec has no family");
  if (families.size() == 1) return families.front();
  if (dim >= families.size()) throw ValidationError("kernel spec has no family for dimension " + std::to_string(dim));
  return families[dim];
}

std::string KernelSpec::describe() const {
  std::string out;
  for (std::size_t i = 0; i < families.size(); ++i) {
    if (i) out += ',';
    out += kernel_family_name(families[i]);
  }
  return out;
}

Bandwidth default_bandwidth(std::size_t n, std::size_t d, double eta, std::span<const double> per_dim_scale) {
  if (n < 2) throw ValidationError("bandwidth schedule needs n >= 2");
  if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("bandwidth exponent eta must lie in (0, 1)");
  if (per_dim_scale.size() != 1 && per_dim_scale.size() != d) {
    throw ValidationError("per-dimension scale must have 1 or d entries");
  }
  Bandwidth bw;
  if (d == 0) return bw;
  const double nn = static_cast<double>(n);
  const double base = std::pow(std::log(nn) / std::pow(nn, 1.0 - eta), 1.0 / static_cast<double>(d));
  for (std::size_t b = 0; b < d; ++b) {
    const double scale = per_dim_scale.size() == 1 ? per_dim_scale[0] : per_dim_scale[b];
    if (!(scale > 0.0)) throw ValidationError("bandwidth scale must be positive");
    bw.widths.push_back(scale * base);
  }
  return bw;
}

Bandwidth sample_bandwidth(std::span<const std::vector<double>> sample, double eta) {
  if (sample.empty()) throw ValidationError("empty sample");
  const std::size_t d = sample.front().size();
  std::vector<double> scale(d, 1.0);
  for (std::size_t b = 0; b < d; ++b) {
    double mean = 0.0;
    for (const auto& xi : sample) mean += xi[b];
    mean /= static_cast<double>(sample.size());
    double ss = 0.0;
    for (const auto& xi : sample) ss += (xi[b] - mean) * (xi[b] - mean);
    const double sd = sample.size() > 1 ? std::sqrt(ss / static_cast<double>(sample.size() - 1)) : 0.0;
    if (sd > 0.0) scale[b] = sd;
  }
  if (d == 0) return {};
  return default_bandwidth(std::max<std::size_t>(sample.size(), 2), d, eta, scale);
}

double kernel_weight(const KernelSpec& spec, std::span<const double> x, std::span<const double> xi,
                     const Bandwidth& bandwidth) {
  if (x.size() != xi.size()) {
    throw ValidationError("covariate dimension mismatch: " + std::to_string(x.size()) + " vs " +
                          std::to_string(xi.size()));
  }
  double w = 1.0;
  for (std::size_t b = 0; b < x.size(); ++b) {
    const KernelFamily family = spec.family(b);
    if (family == KernelFamily::ExactMatch) {
      if (x[b] != xi[b]) return 0.0;
      continue;
    }
    if (b >= bandwidth.dim()) throw ValidationError("bandwidth dimension mismatch");
    const double a = bandwidth.widths[b];
    w *= kernel_profile(family, (x[b] - xi[b]) / a) / a;
    if (w == 0.0) return 0.0;
  }
  return w;
}

double density_estimate(const KernelSpec& spec, std::span<const double> x,
                        std::span<const std::vector<double>> sample, const Bandwidth& bandwidth) {
  if (sample.empty()) throw ValidationError("density estimate needs a nonempty sample");
  double total = 0.0;
  for (const auto& xi : sample) total += kernel_weight(spec, x, xi, bandwidth);
  return total / static_cast<double>(sample.size());
}

std::vector<double> nw_weights(const KernelSpec& spec, std::span<const double> x,
                               std::span<const std::vector<double>> sample, const Bandwidth& bandwidth) {
  if (sample.empty()) throw ValidationError("Nadaraya-Watson weights need a nonempty sample");
  std::vector<double> w;
  w.reserve(sample.size());
  double total = 0.0;
  for (const auto& xi : sample) {
    w.push_back(kernel_weight(spec, x, xi, bandwidth));
    total += w.back();
  }
  if (!(total > 0.0)) {
    throw NumericError("no local data at x = " + format_point(x));
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace ajreserve
