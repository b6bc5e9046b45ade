#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ajreserve/core.hpp"
#include "ajreserve/estimator.hpp"

namespace ajreserve {

/// What to do with an open claim whose paid amount already lies at or beyond
/// the support of its fitted cdf.
enum class SupportFallback { Zero, Error };

SupportFallback parse_support_fallback(std::string_view name);
std::string support_fallback_name(SupportFallback policy);

/// int_w^inf m y^(m-1) (1 - F(y)) dy for the effective (residual-atom) cdf,
/// integrated piece by piece in closed form.
double tail_integral(const StepCdf& cdf, double w, int m);

/// int_w^inf m (y - w)^(m-1) (1 - F(y)) dy, so that dividing by 1 - F(w)
/// gives E[(Y - w)^m | Y > w].
double residual_tail_integral(const StepCdf& cdf, double w, int m);

/// tail_integral / (1 - F(W)). Throws NumericError ("beyond estimated
/// support") when F(W) >= 1 - 1e-12.
double rbns_conditional_moment(const StepCdf& cdf, double w, int m);

/// E[(Y - W)^m | Y > W]; same support rule as rbns_conditional_moment.
double residual_moment(const StepCdf& cdf, double w, int m);

struct RbnsClaim {
  std::string claim_id;
  double paid = 0.0;  // W
  double mean_residual = 0.0;
  double ultimate = 0.0;
  double second_moment = 0.0;  // E[(Y - W)^2 | Y > W]
  double variance = 0.0;
  bool beyond_support = false;
  bool tail_truncated = false;
};

struct RbnsPrediction {
  std::vector<RbnsClaim> claims;
  double total = 0.0;
  double variance = 0.0;
  std::size_t n_beyond_support = 0;
  std::size_t n_tail_truncated = 0;
};

/// Predicts every open claim. `cdfs` holds one fitted cdf per open claim, in
/// portfolio order.
RbnsPrediction predict_rbns(const Portfolio& portfolio, std::span<const StepCdf> cdfs,
                            SupportFallback fallback = SupportFallback::Zero);

struct ChainLadderResult {
  std::vector<double> factors;             // f_1 .. f_{dim-1}
  std::vector<std::vector<double>> completed;  // [row][col], 0-based
  std::vector<double> latest;               // diagonal cells
  std::vector<double> ultimates;
  double total_ultimate = 0.0;
  double total_reserve = 0.0;  // sum of ultimates minus latest diagonal
};

/// Volume-weighted development factors and forward completion of a
/// cumulative triangle.
ChainLadderResult chain_ladder(const Triangle& cumulative);

struct MackVariance {
  std::vector<double> sigma2;        // one per factor
  std::vector<double> row_variance;  // process variance of each row's ultimate
  double total = 0.0;
};

/// Process variance of the chain-ladder ultimates. The last sigma^2 is
/// extrapolated from the two before it (copied when only one exists). Needs
/// at least 3 rows.
MackVariance mack_process_variance(const Triangle& cumulative, const ChainLadderResult& fit);
MackVariance mack_process_variance(const Triangle& cumulative);

struct IbnrModel {
  double n_ibnr = 0.0;
  double n_variance = 0.0;
  double severity_mean = 0.0;
  double severity_second = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  bool zero_variance_fallback = false;
};

/// Collective-risk mean and variance:
/// mean = n E[Y], var = n (E[Y^2] - E[Y]^2) + E[Y]^2 Var(n).
IbnrModel compound_ibnr(double n, double n_variance, double severity_mean, double severity_second);

struct IbnrOptions {
  /// Use Var(n) = 0 when the triangle is too small for the Mack estimator.
  bool allow_zero_variance = false;
};

/// Unconditional severity fit plus chain-ladder counts on `count_triangle`
/// (incremental or cumulative counts).
IbnrModel predict_ibnr(const Triangle& count_triangle, const Portfolio& portfolio, const IbnrOptions& options = {});

struct ReportMetadata {
  int k = 0;
  std::string kernel;
  std::vector<std::string> features;
  double eta = 0.75;
  std::string fallback = "zero";
};

struct ReserveReport {
  double y_closed = 0.0;
  double y_rbns = 0.0;
  double y_ibnr = 0.0;
  double y_tot = 0.0;
  double paid_to_date = 0.0;
  double reserve = 0.0;
  double var_rbns = 0.0;
  double var_ibnr = 0.0;
  double sd_tot = 0.0;
  std::size_t n_closed = 0;
  std::size_t n_rbns = 0;
  std::size_t n_beyond_support = 0;
  std::size_t n_tail_truncated = 0;
  bool ibnr_zero_variance_fallback = false;
  ReportMetadata metadata;
};

ReserveReport assemble_report(const Portfolio& portfolio, const RbnsPrediction& rbns, const IbnrModel& ibnr,
                              ReportMetadata metadata = {});

}  // namespace ajreserve
