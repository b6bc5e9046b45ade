#include "ajreserve/reserving.hpp"

#include <algorithm>
#include <cmath>

#include "ajreserve/errors.hpp"
#include "ajreserve/numeric.hpp"

namespace ajreserve {

SupportFallback parse_support_fallback(std::string_view name) {
  if (name == "zero") return SupportFallback::Zero;
  if (name == "error") return SupportFallback::Error;
  throw ValidationError("unknown fallback policy '" + std::string(name) + "' (expected zero or error)");
}

std::string support_fallback_name(SupportFallback policy) {
  return policy == SupportFallback::Zero ? "zero" : "error";
}

namespace {

void check_moment_args(double w, int m) {
  if (m < 1) throw ValidationError("moment order must be at least 1");
  if (!(w >= 0.0)) throw ValidationError("integration start must be nonnegative");
}

double survival_at(const StepCdf& cdf, double w) {
  const double f = cdf.effective(w);
  if (f >= 1.0 - 1e-12) {
    throw NumericError("beyond estimated support: F(" + std::to_string(w) + ") = " + std::to_string(f));
  }
  return 1.0 - f;
}

}  // namespace

double tail_integral(const StepCdf& cdf, double w, int m) {
  check_moment_args(w, m);
  CompensatedSum total;
  cdf.for_each_piece([&](double lo, double hi, double f) {
    if (hi <= w || f >= 1.0) return;
    const double a = std::max(lo, w);
    total += (1.0 - f) * (std::pow(hi, m) - std::pow(a, m));
  });
  return total.value();
}

double residual_tail_integral(const StepCdf& cdf, double w, int m) {
  check_moment_args(w, m);
  CompensatedSum total;
  cdf.for_each_piece([&](double lo, double hi, double f) {
    if (hi <= w || f >= 1.0) return;
    const double a = std::max(lo, w);
    total += (1.0 - f) * (std::pow(hi - w, m) - std::pow(a - w, m));
  });
  return total.value();
}

double rbns_conditional_moment(const StepCdf& cdf, double w, int m) {
  check_moment_args(w, m);
  const double s = survival_at(cdf, w);
  return tail_integral(cdf, w, m) / s;
}

double residual_moment(const StepCdf& cdf, double w, int m) {
  check_moment_args(w, m);
  const double s = survival_at(cdf, w);
  return residual_tail_integral(cdf, w, m) / s;
}

RbnsPrediction predict_rbns(const Portfolio& portfolio, std::span<const StepCdf> cdfs, SupportFallback fallback) {
  if (cdfs.size() != portfolio.n_rbns()) {
    throw ValidationError("expected one cdf per open claim (" + std::to_string(portfolio.n_rbns()) + "), got " +
                          std::to_string(cdfs.size()));
  }
  RbnsPrediction out;
  CompensatedSum total;
  CompensatedSum variance;
  std::size_t next = 0;
  for (std::size_t i = 0; i < portfolio.size(); ++i) {
    const auto& path = portfolio.paths()[i];
    if (path.absorbed) continue;
    const StepCdf& cdf = cdfs[next++];
    RbnsClaim c;
    c.claim_id = portfolio.claims()[i].claim_id;
    c.paid = path.censor_level;
    c.tail_truncated = cdf.tail_truncated();
    try {
      c.mean_residual = residual_moment(cdf, c.paid, 1);
      c.second_moment = residual_moment(cdf, c.paid, 2);
      c.variance = std::max(c.second_moment - c.mean_residual * c.mean_residual, 0.0);
    } catch (const NumericError& e) {
      if (fallback == SupportFallback::Error) {
        throw NumericError("claim " + c.claim_id + ": " + e.what());
      }
      c.beyond_support = true;
      c.mean_residual = c.second_moment = c.variance = 0.0;
    }
    c.ultimate = c.paid + c.mean_residual;
    total += c.ultimate;
    variance += c.variance;
    out.n_beyond_support += c.beyond_support ? 1 : 0;
    out.n_tail_truncated += c.tail_truncated ? 1 : 0;
    out.claims.push_back(std::move(c));
  }
  out.total = total.value();
  out.variance = variance.value();
  return out;
}

namespace {

Triangle as_cumulative(const Triangle& t) { return t.kind() == TriangleKind::Count ? t.cumulated() : t; }

}  // namespace

ChainLadderResult chain_ladder(const Triangle& triangle) {
  const Triangle c = as_cumulative(triangle);
  const int n = c.dim();
  ChainLadderResult out;
  for (int j = 1; j < n; ++j) {
    CompensatedSum num;
    CompensatedSum den;
    for (int row = 1; row <= n - j; ++row) {
      num += c.at(row, j + 1);
      den += c.at(row, j);
    }
    if (!(den.value() > 0.0)) {
      throw NumericError("chain ladder: development column " + std::to_string(j) + " sums to zero");
    }
    out.factors.push_back(num.value() / den.value());
  }
  out.completed.assign(n, std::vector<double>(n, 0.0));
  CompensatedSum total;
  CompensatedSum reserve;
  for (int row = 1; row <= n; ++row) {
    auto& r = out.completed[row - 1];
    const int last = c.latest_col(row);
    for (int col = 1; col <= last; ++col) r[col - 1] = c.at(row, col);
    for (int col = last + 1; col <= n; ++col) r[col - 1] = r[col - 2] * out.factors[col - 2];
    out.latest.push_back(r[last - 1]);
    out.ultimates.push_back(r[n - 1]);
    total += r[n - 1];
    reserve += r[n - 1] - r[last - 1];
  }
  out.total_ultimate = total.value();
  out.total_reserve = reserve.value();
  return out;
}

MackVariance mack_process_variance(const Triangle& triangle, const ChainLadderResult& fit) {
  const Triangle c = as_cumulative(triangle);
  const int n = c.dim();
  if (n < 3) {
    throw ValidationError("Mack variance needs at least 3 accident periods; use the zero-variance fallback explicitly");
  }
  const int n_factors = n - 1;
  MackVariance out;
  out.sigma2.assign(n_factors, 0.0);
  // Interior estimates need two usable ratios, i.e. columns 1 .. n-2.
  for (int j = 1; j <= n - 2; ++j) {
    const double f = fit.factors[j - 1];
    CompensatedSum ss;
    int usable = 0;
    for (int row = 1; row <= n - j; ++row) {
      const double base = c.at(row, j);
      if (!(base > 0.0)) continue;
      const double d = c.at(row, j + 1) / base - f;
      ss += base * d * d;
      ++usable;
    }
    out.sigma2[j - 1] = usable >= 2 ? ss.value() / (usable - 1) : 0.0;
  }
  if (n_factors >= 3) {
    const double a = out.sigma2[n_factors - 3];
    const double b = out.sigma2[n_factors - 2];
    out.sigma2[n_factors - 1] = a > 0.0 ? std::min(b * b / a, std::min(a, b)) : 0.0;
  } else {
    out.sigma2[n_factors - 1] = out.sigma2[n_factors - 2];
  }

  CompensatedSum total;
  for (int row = 1; row <= n; ++row) {
    double var = 0.0;
    for (int j = c.latest_col(row); j < n; ++j) {
      const double f = fit.factors[j - 1];
      var = var * f * f + fit.completed[row - 1][j - 1] * out.sigma2[j - 1];
    }
    out.row_variance.push_back(var);
    total += var;
  }
  out.total = total.value();
  return out;
}

MackVariance mack_process_variance(const Triangle& triangle) {
  return mack_process_variance(triangle, chain_ladder(triangle));
}

IbnrModel compound_ibnr(double n, double n_variance, double severity_mean, double severity_second) {
  if (!(n >= 0.0) || !(n_variance >= 0.0)) throw ValidationError("IBNR count and its variance must be nonnegative");
  const double spread = severity_second - severity_mean * severity_mean;
  if (spread < -1e-9 * std::max(1.0, severity_second)) {
    throw NumericError("severity second moment is below the squared mean");
  }
  IbnrModel m;
  m.n_ibnr = n;
  m.n_variance = n_variance;
  m.severity_mean = severity_mean;
  m.severity_second = severity_second;
  m.mean = n * severity_mean;
  m.variance = n * std::max(spread, 0.0) + severity_mean * severity_mean * n_variance;
  return m;
}

IbnrModel predict_ibnr(const Triangle& count_triangle, const Portfolio& portfolio, const IbnrOptions& options) {
  if (portfolio.size() == 0) throw ValidationError("IBNR severity needs a nonempty portfolio");
  const auto fit = chain_ladder(count_triangle);
  const double n = std::max(fit.total_reserve, 0.0);
  double n_variance = 0.0;
  bool fallback = false;
  if (count_triangle.dim() >= 3) {
    n_variance = mack_process_variance(count_triangle, fit).total;
  } else if (options.allow_zero_variance) {
    fallback = true;
  } else {
    mack_process_variance(count_triangle, fit);  // throws the guard message
  }
  const std::vector<double> ones(portfolio.size(), 1.0);
  const StepCdf severity = fit_weighted(portfolio, ones).cdf;
  IbnrModel m = compound_ibnr(n, n_variance, tail_integral(severity, 0.0, 1), tail_integral(severity, 0.0, 2));
  m.zero_variance_fallback = fallback;
  return m;
}

ReserveReport assemble_report(const Portfolio& portfolio, const RbnsPrediction& rbns, const IbnrModel& ibnr,
                              ReportMetadata metadata) {
  ReserveReport r;
  r.y_closed = portfolio.closed_total();
  r.y_rbns = rbns.total;
  r.y_ibnr = ibnr.mean;
  r.y_tot = r.y_closed + r.y_rbns + r.y_ibnr;
  r.paid_to_date = portfolio.paid_to_date();
  r.reserve = r.y_tot - r.paid_to_date;
  r.var_rbns = rbns.variance;
  r.var_ibnr = ibnr.variance;
  r.sd_tot = std::sqrt(r.var_rbns + r.var_ibnr);
  r.n_closed = portfolio.n_closed();
  r.n_rbns = portfolio.n_rbns();
  r.n_beyond_support = rbns.n_beyond_support;
  r.n_tail_truncated = rbns.n_tail_truncated;
  r.ibnr_zero_variance_fallback = ibnr.zero_variance_fallback;
  r.metadata = std::move(metadata);
  return r;
}

}  // namespace ajreserve
