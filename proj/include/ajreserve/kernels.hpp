#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ajreserve {

enum class KernelFamily { Uniform, Epanechnikov, Triangular, ExactMatch };

/// Accepts "uniform", "epanechnikov", "triangular" and "exact".
KernelFamily parse_kernel_family(std::string_view name);
std::string kernel_family_name(KernelFamily family);

/// Kernel profile K(u) on [-1, 1]. ExactMatch is 1 at u = 0 and 0 elsewhere.
double kernel_profile(KernelFamily family, double u) noexcept;

/// Product kernel: one family per covariate dimension, or a single family
/// broadcast to every dimension.
struct KernelSpec {
  std::vector<KernelFamily> families{KernelFamily::ExactMatch};

  [[nodiscard]] KernelFamily family(std::size_t dim) const;
  [[nodiscard]] std::string describe() const;
};

struct Bandwidth {
  std::vector<double> widths;

  [[nodiscard]] std::size_t dim() const noexcept { return widths.size(); }
};

/// a_n = scale * (log n / n^(1 - eta))^(1/d), one entry per dimension.
/// `per_dim_scale` holds either d entries or a single broadcast value.
Bandwidth default_bandwidth(std::size_t n, std::size_t d, double eta, std::span<const double> per_dim_scale);

/// default_bandwidth with per-dimension sample standard deviations as scale
/// (1 for constant coordinates).
Bandwidth sample_bandwidth(std::span<const std::vector<double>> sample, double eta);

/// prod_b (1/a_b) K_b((x_b - xi_b) / a_b); ExactMatch dimensions contribute a
/// factor 1 or 0 and ignore the bandwidth.
double kernel_weight(const KernelSpec& spec, std::span<const double> x, std::span<const double> xi,
                     const Bandwidth& bandwidth);

double density_estimate(const KernelSpec& spec, std::span<const double> x,
                        std::span<const std::vector<double>> sample, const Bandwidth& bandwidth);

/// Nadaraya-Watson weights g_i(x) / sum_j g_j(x). Throws NumericError ("no local
/// data") when no observation carries weight at x.
std::vector<double> nw_weights(const KernelSpec& spec, std::span<const double> x,
                               std::span<const std::vector<double>> sample, const Bandwidth& bandwidth);

}  // namespace ajreserve
