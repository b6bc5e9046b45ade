#include "ajreserve/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "ajreserve/errors.hpp"
#include "ajreserve/numeric.hpp"

namespace ajreserve {

StateSpace::StateSpace(int k) : k_(k) {
  if (k < 3) {
    throw ValidationError("state space needs k >= 3, got " + std::to_string(k));
  }
}

int StateSpace::state_for_period(int dp) const {
  if (dp < 1) {
    throw ValidationError("development period must be >= 1, got " + std::to_string(dp));
  }
  return std::min(dp, k_ - 1);
}

std::string StateSpace::label(int state) const {
  if (state == k_) return "Closed";
  if (state == k_ - 1) return "DP " + std::to_string(state) + "+";
  return "DP " + std::to_string(state);
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

constexpr const char* kHeader[] = {"claim_number", "claim_type", "AM", "CM", "DM", "incPaid", "Delta"};
constexpr std::size_t kColumns = std::size(kHeader);

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s.remove_prefix(1);
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

int parse_int(std::string_view field, const char* column, std::size_t row) {
  int value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError(std::string("column ") + column + ": expected integer, got '" +
                         std::string(field) + "'",
                     row);
  }
  return value;
}

double parse_double(std::string_view field, const char* column, std::size_t row) {
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty() || !std::isfinite(value)) {
    throw ParseError(std::string("column ") + column + ": expected number, got '" +
                         std::string(field) + "'",
                     row);
  }
  return value;
}

bool parse_flag(std::string_view field, std::size_t row) {
  if (field == "1" || field == "TRUE" || field == "true") return true;
  if (field == "0" || field == "FALSE" || field == "false") return false;
  throw ParseError("column Delta: expected 0 or 1, got '" + std::string(field) + "'", row);
}

int period_of_month(int month, int months_per_period) { return (month - 1) / months_per_period + 1; }

}  // namespace

std::vector<ClaimRecord> read_claim_records(std::istream& in, const IngestOptions& options) {
  if (options.months_per_period < 1) {
    throw ValidationError("months_per_period must be >= 1");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("missing header row");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
    line.erase(0, 3);  // UTF-8 byte order mark
  }
  const auto header = split_fields(line);
  bool header_ok = header.size() == kColumns;
  for (std::size_t c = 0; header_ok && c < kColumns; ++c) header_ok = header[c] == kHeader[c];
  if (!header_ok) {
    throw ParseError("header must be exactly claim_number,claim_type,AM,CM,DM,incPaid,Delta");
  }

  std::vector<ClaimRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != kColumns) {
      throw ParseError("expected 7 fields, got " + std::to_string(f.size()), row);
    }
    if (f[0].empty()) throw ParseError("empty claim_number", row);
    const int type = parse_int(f[1], "claim_type", row);
    const int am = parse_int(f[2], "AM", row);
    const int cm = parse_int(f[3], "CM", row);
    const int dm = parse_int(f[4], "DM", row);
    if (type < 0) throw ParseError("claim_type must be nonnegative", row);
    if (am < 1 || cm < 1 || dm < 1) throw ParseError("month columns must be >= 1", row);
    if (cm < am) throw ParseError("report month CM precedes accident month AM", row);

    ClaimRecord r;
    r.claim_id = std::string(f[0]);
    r.claim_type = type;
    r.accident_period = period_of_month(am, options.months_per_period);
    r.reporting_delay = (cm - am) / options.months_per_period + 1;
    r.development_period = period_of_month(dm, options.months_per_period);
    r.incremental_paid = parse_double(f[5], "incPaid", row);
    r.settled = parse_flag(f[6], row);
    records.push_back(std::move(r));
  }
  validate_records(records);
  return records;
}

std::vector<ClaimRecord> read_claim_records_file(const std::string& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_claim_records(in, options);
}

void write_claim_records(std::ostream& out, const std::vector<ClaimRecord>& records,
                         const IngestOptions& options) {
  const int mpp = options.months_per_period;
  out << "claim_number,claim_type,AM,CM,DM,incPaid,Delta\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : records) {
    const int am = (r.accident_period - 1) * mpp + 1;
    const int cm = am + (r.reporting_delay - 1) * mpp;
    const int dm = (r.development_period - 1) * mpp + 1;
    out << r.claim_id << ',' << r.claim_type << ',' << am << ',' << cm << ',' << dm << ','
        << r.incremental_paid << ',' << (r.settled ? 1 : 0) << '\n';
  }
}

void validate_records(const std::vector<ClaimRecord>& records) {
  std::unordered_map<std::string, const ClaimRecord*> first;
  for (const auto& r : records) {
    if (!(r.incremental_paid >= 0.0)) {
      throw ValidationError("claim " + r.claim_id + ": negative incremental payment " +
                            std::to_string(r.incremental_paid) + " rejected");
    }
    if (r.development_period < 1 || r.accident_period < 1 || r.reporting_delay < 1) {
      throw ValidationError("claim " + r.claim_id + ": periods must be >= 1");
    }
    auto [it, inserted] = first.emplace(r.claim_id, &r);
    if (inserted) continue;
    const ClaimRecord& f = *it->second;
    if (f.settled != r.settled) {
      throw ValidationError("claim " + r.claim_id + ": inconsistent settlement flag across rows");
    }
    if (f.accident_period != r.accident_period || f.reporting_delay != r.reporting_delay ||
        f.claim_type != r.claim_type) {
      throw ValidationError("claim " + r.claim_id +
                            ": accident period, reporting delay and claim type must agree across rows");
    }
  }
}

// ---------------------------------------------------------------------------
// Paths

int ClaimPath::state_at(double z) const noexcept {
  int state = initial_state;
  for (const auto& e : events) {
    if (e.size > z) break;
    state = e.to;
  }
  return state;
}

void validate_path(const ClaimPath& path, const StateSpace& space) {
  auto fail = [](const std::string& msg) { throw ValidationError("invalid claim path: " + msg); };
  if (!space.contains(path.initial_state) || space.is_absorbing(path.initial_state)) {
    fail("initial state must be transient");
  }
  if (!(path.censor_level >= 0.0)) fail("censor level must be nonnegative");
  int state = path.initial_state;
  double last = 0.0;
  for (std::size_t i = 0; i < path.events.size(); ++i) {
    const auto& e = path.events[i];
    if (e.from != state) fail("event does not start from the occupied state");
    if (!(e.to > e.from) || !space.contains(e.to)) fail("jumps must move strictly forward");
    if (!(e.size >= last)) fail("jump sizes must be nondecreasing");
    if (space.is_absorbing(e.to) && i + 1 != path.events.size()) fail("events after absorption");
    last = e.size;
    state = e.to;
  }
  const bool reached_k = space.is_absorbing(state);
  if (path.absorbed != reached_k) fail("absorption flag disagrees with the final state");
  if (path.absorbed) {
    if (path.absorption_size != last) fail("absorption size must equal the last jump size");
  } else if (last > path.censor_level) {
    fail("open path has jumps beyond its censor level");
  }
}

ClaimPath censor_path(const ClaimPath& full, double w) {
  if (!(w >= 0.0)) throw ValidationError("censor level must be nonnegative");
  ClaimPath out = full;
  out.censor_level = w;
  if (full.absorbed && full.absorption_size <= w) return out;
  out.absorbed = false;
  out.absorption_size = 0.0;
  out.events.clear();
  for (const auto& e : full.events) {
    if (e.size > w) break;
    out.events.push_back(e);
  }
  return out;
}

Feature parse_feature(std::string_view name) {
  if (name == "claim_type") return Feature::ClaimType;
  if (name == "accident_period" || name == "U") return Feature::AccidentPeriod;
  if (name == "reporting_delay" || name == "T") return Feature::ReportingDelay;
  throw ValidationError("unknown feature '" + std::string(name) + "'");
}

std::string feature_name(Feature feature) {
  switch (feature) {
    case Feature::ClaimType: return "claim_type";
    case Feature::AccidentPeriod: return "accident_period";
    case Feature::ReportingDelay: return "reporting_delay";
  }
  return "?";
}

std::vector<Feature> parse_feature_list(std::string_view s) {
  std::vector<Feature> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(parse_feature(item));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

double feature_value(const ClaimInfo& info, Feature feature) {
  switch (feature) {
    case Feature::ClaimType: return info.claim_type;
    case Feature::AccidentPeriod: return info.accident_period;
    case Feature::ReportingDelay: return info.reporting_delay;
  }
  return 0.0;
}

Portfolio::Portfolio(StateSpace space, std::vector<ClaimInfo> claims, std::vector<ClaimPath> paths)
    : space_(space), claims_(std::move(claims)), paths_(std::move(paths)) {
  if (claims_.size() != paths_.size()) {
    throw ValidationError("portfolio needs one ClaimInfo per path");
  }
  for (const auto& p : paths_) {
    validate_path(p, space_);
    if (p.absorbed) ++n_closed_;
  }
}

Portfolio Portfolio::with_features(const std::vector<Feature>& features) const {
  std::vector<ClaimPath> paths = paths_;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto& x = paths[i].covariates;
    x.clear();
    for (auto f : features) x.push_back(feature_value(claims_[i], f));
  }
  return Portfolio(space_, claims_, std::move(paths));
}

double Portfolio::paid_to_date() const {
  CompensatedSum s;
  for (const auto& p : paths_) s += p.observed_size();
  return s.value();
}

double Portfolio::closed_total() const {
  CompensatedSum s;
  for (const auto& p : paths_) {
    if (p.absorbed) s += p.absorption_size;
  }
  return s.value();
}

namespace {

struct ClaimGroup {
  ClaimInfo info;
  bool settled = false;
  std::map<int, double> paid_by_state;  // transient state -> amount
};

std::vector<ClaimGroup> group_claims(const std::vector<ClaimRecord>& records, const StateSpace& space) {
  std::vector<ClaimGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.emplace(r.claim_id, groups.size());
    if (inserted) {
      ClaimGroup g;
      g.info = {r.claim_id, r.claim_type, r.accident_period, r.reporting_delay};
      g.settled = r.settled;
      groups.push_back(std::move(g));
    }
    groups[it->second].paid_by_state[space.state_for_period(r.development_period)] += r.incremental_paid;
  }
  return groups;
}

}  // namespace

Portfolio paths_from_records(const std::vector<ClaimRecord>& records, const StateSpace& space,
                             const std::vector<Feature>& features) {
  validate_records(records);
  std::vector<ClaimInfo> infos;
  std::vector<ClaimPath> paths;
  for (auto& g : group_claims(records, space)) {
    if (g.info.accident_period > space.k() - 1) {
      throw ValidationError("claim " + g.info.claim_id + ": accident period " +
                            std::to_string(g.info.accident_period) + " exceeds k-1 = " +
                            std::to_string(space.k() - 1) + " (use a calendar cut or a larger k)");
    }
    ClaimPath path;
    for (auto f : features) path.covariates.push_back(feature_value(g.info, f));

    int state = 1;
    double z = 0.0;
    for (const auto& [s, amount] : g.paid_by_state) {
      if (!(amount > 0.0)) continue;
      if (s != state) {
        path.events.push_back({z, state, s});
        state = s;
      }
      z += amount;
    }
    if (g.settled) {
      path.events.push_back({z, state, space.closed()});
      path.absorbed = true;
      path.absorption_size = z;
    }
    path.censor_level = z;
    infos.push_back(std::move(g.info));
    paths.push_back(std::move(path));
  }
  return Portfolio(space, std::move(infos), std::move(paths));
}

std::vector<ClaimRecord> records_from_path(const ClaimInfo& info, const ClaimPath& path) {
  std::vector<ClaimRecord> out;
  auto emit = [&](int state, double amount) {
    ClaimRecord r;
    r.claim_id = info.claim_id;
    r.claim_type = info.claim_type;
    r.accident_period = info.accident_period;
    r.reporting_delay = info.reporting_delay;
    r.development_period = state;
    r.incremental_paid = amount;
    r.settled = path.absorbed;
    out.push_back(std::move(r));
  };
  int state = path.initial_state;
  double entry = 0.0;
  for (const auto& e : path.events) {
    if (e.size > entry) emit(state, e.size - entry);
    entry = e.size;
    state = e.to;
  }
  if (!path.absorbed && path.censor_level > entry) emit(state, path.censor_level - entry);
  if (out.empty()) emit(path.initial_state, 0.0);
  return out;
}

std::vector<ClaimRecord> apply_calendar_cut(const std::vector<ClaimRecord>& records, int depth) {
  if (depth < 1) throw ValidationError("calendar cut depth must be >= 1");
  // Last payment-bearing development period per claim, over the full history.
  std::unordered_map<std::string, int> last_paid;
  std::unordered_map<std::string, int> last_any;
  for (const auto& r : records) {
    auto& any = last_any[r.claim_id];
    any = std::max(any, r.development_period);
    if (r.incremental_paid > 0.0) {
      auto& lp = last_paid[r.claim_id];
      lp = std::max(lp, r.development_period);
    }
  }
  std::vector<ClaimRecord> out;
  for (const auto& r : records) {
    if (r.accident_period + r.reporting_delay - 1 > depth) continue;  // not yet reported
    if (r.accident_period + r.development_period - 1 > depth) continue;
    ClaimRecord kept = r;
    const auto lp = last_paid.find(r.claim_id);
    const int last = lp != last_paid.end() ? lp->second : last_any[r.claim_id];
    // Closure lands in the development period after the last payment.
    kept.settled = r.settled && r.accident_period + last <= depth;
    out.push_back(std::move(kept));
  }
  return out;
}

double actual_ultimate(const Portfolio& portfolio) {
  CompensatedSum s;
  for (std::size_t i = 0; i < portfolio.size(); ++i) {
    const auto& p = portfolio.paths()[i];
    if (!p.absorbed) {
      throw ValidationError("claim " + portfolio.claims()[i].claim_id +
                            " is open; the actual ultimate needs fully developed claims");
    }
    s += p.absorption_size;
  }
  return s.value();
}

// ---------------------------------------------------------------------------
// Triangles

Triangle::Triangle(int dim, TriangleKind kind)
    : dim_(dim), kind_(kind), cells_(static_cast<std::size_t>(dim) * dim, 0.0) {
  if (dim < 1) throw ValidationError("triangle dimension must be >= 1");
}

bool Triangle::observed(int row, int col) const noexcept {
  return row >= 1 && col >= 1 && row <= dim_ && col <= dim_ && row + col <= dim_ + 1;
}

double Triangle::at(int row, int col) const {
  if (!observed(row, col)) {
    throw ValidationError("triangle cell (" + std::to_string(row) + ", " + std::to_string(col) +
                          ") is not observed");
  }
  return cells_[static_cast<std::size_t>(row - 1) * dim_ + (col - 1)];
}

void Triangle::set(int row, int col, double value) {
  if (!observed(row, col)) {
    throw ValidationError("triangle cell (" + std::to_string(row) + ", " + std::to_string(col) +
                          ") is not observed");
  }
  cells_[static_cast<std::size_t>(row - 1) * dim_ + (col - 1)] = value;
}

void Triangle::add(int row, int col, double value) { set(row, col, at(row, col) + value); }

Triangle Triangle::cumulated() const {
  Triangle out(dim_, kind_ == TriangleKind::Count ? TriangleKind::CumulativeCount : kind_);
  for (int r = 1; r <= dim_; ++r) {
    double run = 0.0;
    for (int c = 1; c <= latest_col(r); ++c) {
      run += at(r, c);
      out.set(r, c, run);
    }
  }
  return out;
}

void Triangle::write_csv(std::ostream& out) const {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (int r = 1; r <= dim_; ++r) {
    for (int c = 1; c <= dim_; ++c) {
      if (c > 1) out << ',';
      if (observed(r, c)) out << at(r, c);
    }
    out << '\n';
  }
  out.precision(old);
}

TriangleBuild build_count_triangle(const std::vector<ClaimRecord>& records, const StateSpace& space) {
  TriangleBuild result{Triangle(space.k() - 1, TriangleKind::Count), 0};
  std::unordered_map<std::string, bool> seen;
  for (const auto& r : records) {
    if (!seen.emplace(r.claim_id, true).second) continue;
    if (r.accident_period + r.reporting_delay > space.k()) {
      ++result.excluded;
      continue;
    }
    result.triangle.add(r.accident_period, r.reporting_delay, 1.0);
  }
  return result;
}

TriangleBuild build_paid_triangle(const std::vector<ClaimRecord>& records, const StateSpace& space) {
  const int dim = space.k() - 1;
  TriangleBuild result{Triangle(dim, TriangleKind::CumulativePaid), 0};
  for (const auto& r : records) {
    if (r.accident_period + r.reporting_delay > space.k()) {
      ++result.excluded;
      continue;
    }
    const int first_col = std::min(r.development_period, dim);
    for (int c = first_col; c <= result.triangle.latest_col(r.accident_period); ++c) {
      result.triangle.add(r.accident_period, c, r.incremental_paid);
    }
  }
  return result;
}

}  // namespace ajreserve
