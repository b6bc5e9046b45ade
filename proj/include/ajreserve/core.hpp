#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ajreserve {

/// States 1..k-1 are development-period buckets (the last one collects every
/// deeper period) and state k is Closed. State numbers are 1-based throughout
/// the public API; matrices use index `state - 1`.
class StateSpace {
 public:
  explicit StateSpace(int k);

  [[nodiscard]] int k() const noexcept { return k_; }
  [[nodiscard]] int closed() const noexcept { return k_; }
  [[nodiscard]] int last_transient() const noexcept { return k_ - 1; }
  [[nodiscard]] bool is_absorbing(int state) const noexcept { return state == k_; }
  [[nodiscard]] bool contains(int state) const noexcept { return state >= 1 && state <= k_; }

  /// Transient state that holds payments of development period `dp` (>= 1).
  [[nodiscard]] int state_for_period(int dp) const;

  [[nodiscard]] std::string label(int state) const;

  friend bool operator==(const StateSpace&, const StateSpace&) = default;

 private:
  int k_;
};

struct ClaimRecord {
  std::string claim_id;
  int claim_type = 0;
  int accident_period = 1;  // U
  int reporting_delay = 1;  // T
  int development_period = 1;
  double incremental_paid = 0.0;
  bool settled = false;  // delta
};

struct IngestOptions {
  int months_per_period = 12;
};

/// Reads the comma-separated schema
/// `claim_number,claim_type,AM,CM,DM,incPaid,Delta`. Month columns are mapped
/// onto periods of `months_per_period` months: AM gives the accident period,
/// CM - AM the reporting delay and DM (months since the accident month,
/// 1-based) the development period.
std::vector<ClaimRecord> read_claim_records(std::istream& in, const IngestOptions& options = {});
std::vector<ClaimRecord> read_claim_records_file(const std::string& path,
                                                 const IngestOptions& options = {});

/// Writes records in the ingestion schema; each period maps to its first month.
void write_claim_records(std::ostream& out, const std::vector<ClaimRecord>& records,
                         const IngestOptions& options = {});

/// Checks the per-claim consistency rules (shared U, T, type and delta;
/// nonnegative payments; periods >= 1).
void validate_records(const std::vector<ClaimRecord>& records);

struct JumpEvent {
  double size = 0.0;
  int from = 1;
  int to = 2;

  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

/// A right-censored jump path in claim-size time.
struct ClaimPath {
  std::vector<double> covariates;
  std::vector<JumpEvent> events;
  double censor_level = 0.0;  // W
  bool absorbed = false;      // delta
  double absorption_size = 0.0;  // Y, meaningful only when absorbed
  int initial_state = 1;

  /// Size up to which the path is observed: Y for closed claims, W otherwise.
  [[nodiscard]] double observed_size() const noexcept {
    return absorbed ? absorption_size : censor_level;
  }
  /// State occupied at size z (right-continuous).
  [[nodiscard]] int state_at(double z) const noexcept;
  [[nodiscard]] int final_state() const noexcept {
    return events.empty() ? initial_state : events.back().to;
  }

  friend bool operator==(const ClaimPath&, const ClaimPath&) = default;
};

/// Throws ValidationError when the path breaks a ClaimPath invariant.
void validate_path(const ClaimPath& path, const StateSpace& space);

/// Truncates a fully observed path at censor level `w`. If the path is
/// absorbed at Y <= w it stays absorbed; otherwise events beyond w are dropped.
ClaimPath censor_path(const ClaimPath& full, double w);

/// Claim-level attributes that are not part of the jump process.
struct ClaimInfo {
  std::string claim_id;
  int claim_type = 0;
  int accident_period = 1;
  int reporting_delay = 1;

  friend bool operator==(const ClaimInfo&, const ClaimInfo&) = default;
};

enum class Feature { ClaimType, AccidentPeriod, ReportingDelay };

/// Accepts `claim_type`, `accident_period` (alias `U`) and `reporting_delay`
/// (alias `T`).
Feature parse_feature(std::string_view name);
std::string feature_name(Feature feature);
std::vector<Feature> parse_feature_list(std::string_view comma_separated);
double feature_value(const ClaimInfo& info, Feature feature);

class Portfolio {
 public:
  Portfolio(StateSpace space, std::vector<ClaimInfo> claims, std::vector<ClaimPath> paths);

  [[nodiscard]] const StateSpace& state_space() const noexcept { return space_; }
  [[nodiscard]] const std::vector<ClaimInfo>& claims() const noexcept { return claims_; }
  [[nodiscard]] const std::vector<ClaimPath>& paths() const noexcept { return paths_; }
  [[nodiscard]] std::size_t size() const noexcept { return paths_.size(); }
  [[nodiscard]] std::size_t n_closed() const noexcept { return n_closed_; }
  [[nodiscard]] std::size_t n_rbns() const noexcept { return paths_.size() - n_closed_; }

  /// Copy with covariate vectors rebuilt from claim attributes.
  [[nodiscard]] Portfolio with_features(const std::vector<Feature>& features) const;

  /// Sum of observed paid amounts (Y for closed claims, W for open ones).
  [[nodiscard]] double paid_to_date() const;
  [[nodiscard]] double closed_total() const;

 private:
  StateSpace space_;
  std::vector<ClaimInfo> claims_;
  std::vector<ClaimPath> paths_;
  std::size_t n_closed_ = 0;
};

/// Converts validated records into operational-time jump paths, one per claim
/// in order of first appearance.
Portfolio paths_from_records(const std::vector<ClaimRecord>& records, const StateSpace& space,
                             const std::vector<Feature>& features = {});

/// Inverse of paths_from_records for a single path: one record per
/// payment-bearing development period.
std::vector<ClaimRecord> records_from_path(const ClaimInfo& info, const ClaimPath& path);

/// Keeps what is known at the end of calendar period `depth`: claims reported
/// by then, payments made by then, and closure only when the period after the
/// last payment has been reached.
std::vector<ClaimRecord> apply_calendar_cut(const std::vector<ClaimRecord>& records, int depth);

/// Sum of absorption sizes. Throws ValidationError when any path is open.
double actual_ultimate(const Portfolio& portfolio);

enum class TriangleKind { Count, CumulativeCount, CumulativePaid };

/// (k-1)x(k-1) run-off triangle; cell (l, j) is observed when l + j <= k,
/// i.e. l + j <= dim + 1. Indices are 1-based.
class Triangle {
 public:
  Triangle(int dim, TriangleKind kind);

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] TriangleKind kind() const noexcept { return kind_; }
  [[nodiscard]] bool observed(int row, int col) const noexcept;
  [[nodiscard]] double at(int row, int col) const;
  void set(int row, int col, double value);
  void add(int row, int col, double value);
  /// Column of the latest observed diagonal cell in `row`.
  [[nodiscard]] int latest_col(int row) const noexcept { return dim_ + 1 - row; }

  /// Running sums across development columns; Count becomes CumulativeCount.
  [[nodiscard]] Triangle cumulated() const;

  /// One line per accident period, blank for unobserved cells.
  void write_csv(std::ostream& out) const;

  friend bool operator==(const Triangle&, const Triangle&) = default;

 private:
  int dim_;
  TriangleKind kind_;
  std::vector<double> cells_;
};

struct TriangleBuild {
  Triangle triangle;
  std::size_t excluded = 0;  // records beyond the latest diagonal
};

/// d(l, j): distinct claims with accident period l and reporting delay j.
TriangleBuild build_count_triangle(const std::vector<ClaimRecord>& records, const StateSpace& space);
/// C(l, j): cumulative paid through development period j for accident period l.
TriangleBuild build_paid_triangle(const std::vector<ClaimRecord>& records, const StateSpace& space);

}  // namespace ajreserve
