#include <doctest.h>

#include <map>
#include <sstream>

#include "ajreserve/core.hpp"
#include "ajreserve/errors.hpp"
#include "support.hpp"

using namespace ajreserve;

namespace {

const char* kHeader = "claim_number,claim_type,AM,CM,DM,incPaid,Delta\n";

std::vector<ClaimRecord> parse(const std::string& body, int mpp = 1) {
  std::istringstream in(std::string(kHeader) + body);
  return read_claim_records(in, IngestOptions{mpp});
}

ClaimRecord rec(std::string id, int u, int t, int dp, double paid, bool settled) {
  return {std::move(id), 0, u, t, dp, paid, settled};
}

}  // namespace

TEST_CASE("state space rejects fewer than three states") {
  CHECK_THROWS_AS(StateSpace(2), ValidationError);
  const StateSpace s(4);
  CHECK(s.closed() == 4);
  CHECK(s.state_for_period(1) == 1);
  CHECK(s.state_for_period(3) == 3);
  CHECK(s.state_for_period(9) == 3);
}

TEST_CASE("csv ingestion") {
  SUBCASE("one valid row") {
    const auto r = parse("A,2,1,1,1,10.5,0\n");
    REQUIRE(r.size() == 1);
    CHECK(r[0].claim_id == "A");
    CHECK(r[0].claim_type == 2);
    CHECK(r[0].incremental_paid == 10.5);
    CHECK_FALSE(r[0].settled);
  }
  SUBCASE("negative payment is rejected") { CHECK_THROWS_AS(parse("A,0,1,1,1,-5,0\n"), ValidationError); }
  SUBCASE("three rows of one claim keep their periods") {
    const auto r = parse("A,0,1,1,1,3,1\nA,0,1,1,2,2,1\nA,0,1,1,3,1,1\n");
    REQUIRE(r.size() == 3);
    CHECK(r[2].development_period == 3);
    const auto p = paths_from_records(r, StateSpace(5));
    CHECK(p.size() == 1);
    CHECK(p.paths()[0].absorption_size == 6.0);
  }
  SUBCASE("months are bucketed into periods") {
    const auto r = parse("A,0,13,14,25,1,0\n", 12);
    CHECK(r[0].accident_period == 2);
    CHECK(r[0].reporting_delay == 1);
    CHECK(r[0].development_period == 3);
  }
  SUBCASE("bad header and bad fields carry the row") {
    std::istringstream bad("id,type\n");
    CHECK_THROWS_AS(read_claim_records(bad), ParseError);
    try {
      parse("A,0,1,1,1,1,0\nB,0,x,1,1,1,0\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 2);
    }
  }
  SUBCASE("inconsistent claim attributes") {
    CHECK_THROWS_AS(parse("A,0,1,1,1,1,0\nA,0,1,1,2,1,1\n"), ValidationError);
  }
}

TEST_CASE("write and read back records") {
  const std::vector<ClaimRecord> records{rec("A", 1, 1, 1, 0.1, false), rec("A", 1, 1, 2, 2.25, false),
                                         rec("B", 2, 1, 1, 7.0, true)};
  for (int mpp : {1, 3, 12}) {
    std::stringstream io;
    write_claim_records(io, records, IngestOptions{mpp});
    const auto back = read_claim_records(io, IngestOptions{mpp});
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(back[i].claim_id == records[i].claim_id);
      CHECK(back[i].accident_period == records[i].accident_period);
      CHECK(back[i].development_period == records[i].development_period);
      CHECK(back[i].incremental_paid == records[i].incremental_paid);
      CHECK(back[i].settled == records[i].settled);
    }
  }
}

TEST_CASE("records to paths") {
  const StateSpace space(4);
  SUBCASE("closed single payment") {
    const auto p = paths_from_records({rec("A", 1, 1, 1, 5, true)}, space).paths()[0];
    REQUIRE(p.events.size() == 1);
    CHECK(p.events[0] == JumpEvent{5.0, 1, 4});
    CHECK(p.absorbed);
    CHECK(p.absorption_size == 5.0);
  }
  SUBCASE("open with two periods") {
    const auto p = paths_from_records({rec("A", 1, 1, 1, 3, false), rec("A", 1, 1, 2, 2, false)}, space).paths()[0];
    REQUIRE(p.events.size() == 1);
    CHECK(p.events[0] == JumpEvent{3.0, 1, 2});
    CHECK_FALSE(p.absorbed);
    CHECK(p.censor_level == 5.0);
  }
  SUBCASE("open without payments") {
    const auto p = paths_from_records({rec("A", 1, 1, 1, 0, false)}, space).paths()[0];
    CHECK(p.events.empty());
    CHECK(p.censor_level == 0.0);
    CHECK_FALSE(p.absorbed);
  }
  SUBCASE("empty periods are skipped") {
    const auto p = paths_from_records({rec("A", 1, 1, 1, 1, true), rec("A", 1, 1, 3, 2, true)}, space).paths()[0];
    REQUIRE(p.events.size() == 2);
    CHECK(p.events[0] == JumpEvent{1.0, 1, 3});
    CHECK(p.events[1] == JumpEvent{3.0, 3, 4});
  }
  SUBCASE("accident period beyond k - 1") {
    CHECK_THROWS_AS(paths_from_records({rec("A", 4, 1, 1, 1, false)}, space), ValidationError);
  }
}

TEST_CASE("path round trip preserves paid totals") {
  testing::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = testing::uniform_int(rng, 3, 6);
    const StateSpace space(k);
    std::vector<ClaimRecord> records;
    std::map<std::string, double> paid;
    const int n = testing::uniform_int(rng, 1, 8);
    for (int c = 0; c < n; ++c) {
      const std::string id = "c" + std::to_string(c);
      const bool settled = testing::uniform(rng) < 0.5;
      const int u = testing::uniform_int(rng, 1, k - 1);
      for (int dp = 1; dp <= k - 1; ++dp) {
        if (testing::uniform(rng) < 0.3 && dp > 1) continue;
        const double amount = testing::uniform(rng) < 0.2 ? 0.0 : std::round(testing::uniform(rng, 0, 100)) / 4;
        records.push_back(rec(id, u, 1, dp, amount, settled));
        paid[id] += amount;
      }
    }
    const auto portfolio = paths_from_records(records, space);
    for (std::size_t i = 0; i < portfolio.size(); ++i) {
      const auto& p = portfolio.paths()[i];
      validate_path(p, space);
      CHECK(p.observed_size() == paid[portfolio.claims()[i].claim_id]);
      double back = 0.0;
      for (const auto& r : records_from_path(portfolio.claims()[i], p)) back += r.incremental_paid;
      CHECK(back == p.observed_size());
    }
  }
}

TEST_CASE("censoring a full path") {
  ClaimPath full;
  full.events = {{1.0, 1, 2}, {3.0, 2, 4}};
  full.absorbed = true;
  full.absorption_size = 3.0;
  full.censor_level = 3.0;
  const auto open = censor_path(full, 2.0);
  CHECK_FALSE(open.absorbed);
  CHECK(open.events.size() == 1);
  CHECK(open.censor_level == 2.0);
  CHECK(censor_path(full, 3.0).absorbed);
  CHECK(full.state_at(0.5) == 1);
  CHECK(full.state_at(1.0) == 2);
}

TEST_CASE("portfolio totals") {
  const StateSpace space(3);
  ClaimPath a;
  a.events = {{2.0, 1, 3}};
  a.absorbed = true;
  a.absorption_size = 2.0;
  a.censor_level = 2.0;
  ClaimPath b = a;
  b.events = {{3.0, 1, 3}};
  b.absorption_size = 3.0;
  b.censor_level = 3.0;
  const Portfolio p(space, {{"a", 0, 1, 1}, {"b", 0, 1, 1}}, {a, b});
  CHECK(actual_ultimate(p) == 5.0);
  CHECK(actual_ultimate(Portfolio(space, {}, {})) == 0.0);
  CHECK(p.n_closed() == 2);
  CHECK(p.n_rbns() == 0);
}

TEST_CASE("count triangle") {
  const StateSpace space(3);
  SUBCASE("single claim") {
    const auto t = build_count_triangle({rec("A", 1, 1, 1, 1, false)}, space).triangle;
    CHECK(t.at(1, 1) == 1.0);
    CHECK(t.at(1, 2) == 0.0);
    CHECK(t.at(2, 1) == 0.0);
  }
  SUBCASE("hand counts") {
    const auto t = build_count_triangle({rec("A", 1, 1, 1, 1, false), rec("A", 1, 1, 2, 1, false),
                                         rec("B", 1, 1, 1, 1, false), rec("C", 1, 2, 2, 1, false),
                                         rec("D", 2, 1, 1, 1, false)},
                                        space)
                       .triangle;
    CHECK(t.at(1, 1) == 2.0);
    CHECK(t.at(1, 2) == 1.0);
    CHECK(t.at(2, 1) == 1.0);
  }
  SUBCASE("empty") {
    const auto t = build_count_triangle({}, space).triangle;
    CHECK(t.at(1, 1) == 0.0);
    CHECK_FALSE(t.observed(2, 2));
  }
}

TEST_CASE("paid triangle") {
  const StateSpace space(3);
  const auto t = build_paid_triangle({rec("A", 1, 1, 1, 10, false), rec("A", 1, 1, 2, 5, false),
                                      rec("B", 2, 1, 1, 4, false), rec("C", 2, 1, 1, 6, false)},
                                     space)
                     .triangle;
  CHECK(t.at(1, 1) == 10.0);
  CHECK(t.at(1, 2) == 15.0);
  CHECK(t.at(2, 1) == 10.0);
  CHECK(build_paid_triangle({}, space).triangle.at(1, 1) == 0.0);
}

TEST_CASE("paid triangle rows never decrease") {
  testing::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = testing::uniform_int(rng, 3, 7);
    const StateSpace space(k);
    std::vector<ClaimRecord> records;
    for (int c = 0; c < 30; ++c) {
      const int u = testing::uniform_int(rng, 1, k - 1);
      for (int dp = 1; dp <= k - u; ++dp) {
        records.push_back(rec("c" + std::to_string(c), u, 1, dp, testing::uniform(rng, 0, 5), false));
      }
    }
    const auto t = build_paid_triangle(records, space).triangle;
    for (int row = 1; row <= t.dim(); ++row) {
      for (int col = 2; col <= t.latest_col(row); ++col) CHECK(t.at(row, col) >= t.at(row, col - 1));
    }
  }
}

TEST_CASE("closed claims end the paid row at their ultimate") {
  const StateSpace space(4);
  const std::vector<ClaimRecord> records{rec("A", 1, 1, 1, 2, true), rec("A", 1, 1, 3, 1.5, true)};
  const auto t = build_paid_triangle(records, space).triangle;
  CHECK(t.at(1, 3) == paths_from_records(records, space).paths()[0].absorption_size);
}

TEST_CASE("calendar cut") {
  const std::vector<ClaimRecord> records{rec("A", 1, 1, 1, 1, true), rec("A", 1, 1, 2, 1, true),
                                         rec("B", 2, 1, 1, 3, true), rec("C", 3, 1, 1, 1, false)};
  const auto cut = apply_calendar_cut(records, 2);
  std::map<std::string, std::pair<double, bool>> seen;
  for (const auto& r : cut) {
    seen[r.claim_id].first += r.incremental_paid;
    seen[r.claim_id].second = r.settled;
  }
  CHECK(seen.size() == 2);
  CHECK(seen["A"].first == 2.0);
  CHECK_FALSE(seen["A"].second);
  CHECK(seen["B"].first == 3.0);
  CHECK_FALSE(seen["B"].second);
  const auto later = apply_calendar_cut(records, 3);
  for (const auto& r : later) {
    if (r.claim_id != "C") CHECK(r.settled);
  }
}
