#include <gtest/gtest.h>

#include <random>

#include "twintest/error.hpp"
#include "twintest/snapshot.hpp"

using namespace twintest;

namespace {

const FurnaceLayout& layout() {
  static const FurnaceLayout l = FurnaceLayout::standard();
  return l;
}

TelemetryRecord rec(double ts, Tag t, double v) { return {ts, std::move(t), v}; }

// Every non-position field once, all at `ts`.
std::vector<TelemetryRecord> warm_up(double ts, double temp = 500.0, double speed = 20.0) {
  std::vector<TelemetryRecord> out;
  for (int z = 1; z <= 5; ++z) out.push_back(rec(ts, tag::ZonePower{z}, 100.0 * z));
  for (const auto& s : layout().sensors) out.push_back(rec(ts, tag::SensorTemp{s.id}, temp));
  out.push_back(rec(ts, tag::Speed{}, speed));
  out.push_back(rec(ts, tag::HoldingIndicator{}, 0.0));
  return out;
}

std::optional<Snapshot> feed(SnapshotAssembler& a, const std::vector<TelemetryRecord>& records) {
  std::optional<Snapshot> last;
  for (const auto& r : records) {
    if (auto s = a.ingest(r)) last = s;
  }
  return last;
}

}  // namespace

TEST(Assembler, CompletesOnHeadAfterBack) {
  SnapshotAssembler a(layout());
  EXPECT_FALSE(feed(a, warm_up(0.0)));
  EXPECT_TRUE(a.warmed_up());
  EXPECT_FALSE(a.ingest(rec(1.0, tag::BackPosition{}, 1000.0)));
  auto snap = a.ingest(rec(1.0, tag::HeadPosition{}, 3000.0));
  ASSERT_TRUE(snap);
  EXPECT_EQ(snap->ts, 1.0);
  EXPECT_EQ(snap->back, 1000.0);
  EXPECT_EQ(snap->head, 3000.0);
  EXPECT_EQ(snap->speed, 20.0);
  EXPECT_EQ(snap->powers, (std::vector<double>{100, 200, 300, 400, 500}));
  EXPECT_EQ(a.completed_count(), 1u);
}

TEST(Assembler, LatestValueWins) {
  SnapshotAssembler a(layout());
  feed(a, warm_up(0.0));
  a.ingest(rec(0.2, tag::SensorTemp{{1, 3}}, 800.0));
  a.ingest(rec(0.4, tag::SensorTemp{{1, 3}}, 820.0));
  a.ingest(rec(0.5, tag::BackPosition{}, 1000.0));
  auto snap = a.ingest(rec(0.5, tag::HeadPosition{}, 3000.0));
  ASSERT_TRUE(snap);
  EXPECT_EQ(snap->temps[*layout().sensor_index({1, 3})], 820.0);
  EXPECT_EQ(snap->temp_ts[*layout().sensor_index({1, 3})], 0.4);
}

TEST(Assembler, MissingSpeedNeverCompletes) {
  SnapshotAssembler a(layout());
  auto records = warm_up(0.0);
  std::erase_if(records, [](const TelemetryRecord& r) { return std::holds_alternative<tag::Speed>(r.tag); });
  feed(a, records);
  for (int k = 1; k < 100; ++k) {
    EXPECT_FALSE(a.ingest(rec(k, tag::BackPosition{}, 1000.0 + k)));
    EXPECT_FALSE(a.ingest(rec(k, tag::HeadPosition{}, 3000.0 + k)));
  }
  EXPECT_EQ(a.completed_count(), 0u);
}

TEST(Assembler, NonPositionRecordsNeverComplete) {
  SnapshotAssembler a(layout());
  feed(a, warm_up(0.0));
  a.ingest(rec(1.0, tag::BackPosition{}, 1000.0));
  a.ingest(rec(1.0, tag::HeadPosition{}, 3000.0));
  for (const auto& r : warm_up(2.0, 600.0)) EXPECT_FALSE(a.ingest(r));
}

TEST(Assembler, PositionFreshnessClearedOnCompletion) {
  SnapshotAssembler a(layout());
  feed(a, warm_up(0.0));
  a.ingest(rec(1.0, tag::BackPosition{}, 1000.0));
  ASSERT_TRUE(a.ingest(rec(1.0, tag::HeadPosition{}, 3000.0)));
  EXPECT_FALSE(a.ingest(rec(2.0, tag::HeadPosition{}, 3020.0)));
  auto snap = a.ingest(rec(2.0, tag::BackPosition{}, 1020.0));
  ASSERT_TRUE(snap);
  EXPECT_EQ(snap->head, 3020.0);
  EXPECT_EQ(snap->temps, std::vector<double>(15, 500.0));
}

TEST(Assembler, ResetClearsEverything) {
  SnapshotAssembler a(layout());
  feed(a, warm_up(0.0));
  a.ingest(rec(1.0, tag::BackPosition{}, 1000.0));
  a.ingest(rec(1.0, tag::HeadPosition{}, 3000.0));
  a.reset();
  EXPECT_EQ(a.completed_count(), 0u);
  EXPECT_FALSE(a.warmed_up());
  EXPECT_FALSE(a.ingest(rec(2.0, tag::SensorTemp{{1, 1}}, 700.0)));
  a.reset();
  a.reset();
  EXPECT_FALSE(a.warmed_up());
  EXPECT_EQ(a.completed_count(), 0u);
}

TEST(Assembler, BackNotBehindHeadRejected) {
  SnapshotAssembler a(layout());
  feed(a, warm_up(0.0));
  a.ingest(rec(1.0, tag::BackPosition{}, 3000.0));
  EXPECT_FALSE(a.ingest(rec(1.0, tag::HeadPosition{}, 3000.0)));
  EXPECT_EQ(a.rejected_count(), 1u);
  ASSERT_EQ(a.diagnostics().size(), 1u);
  EXPECT_NE(a.diagnostics()[0].find("not behind head"), std::string::npos);
  // Freshness was cleared: a head alone does not complete.
  EXPECT_FALSE(a.ingest(rec(2.0, tag::HeadPosition{}, 5000.0)));
  EXPECT_TRUE(a.ingest(rec(2.0, tag::BackPosition{}, 3000.0)));
}

TEST(Assembler, StalePartnerIsDiscarded) {
  SnapshotAssembler a(layout(), 0.5);
  feed(a, warm_up(0.0));
  a.ingest(rec(1.0, tag::BackPosition{}, 1000.0));
  // The head of the same instant was lost; the next head is a second later.
  EXPECT_FALSE(a.ingest(rec(2.0, tag::HeadPosition{}, 3020.0)));
  EXPECT_EQ(a.stale_positions(), 1u);
  auto snap = a.ingest(rec(2.0, tag::BackPosition{}, 1020.0));
  ASSERT_TRUE(snap);
  EXPECT_EQ(snap->back, 1020.0);
  EXPECT_EQ(snap->head, 3020.0);
}

TEST(Assembler, NegativeWindowRejected) {
  EXPECT_THROW(SnapshotAssembler(layout(), -1.0), Error);
}

TEST(Assembler, CountBoundedByPositionRecords) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution keep(0.7);
  std::uniform_int_distribution<int> pick(0, 3);
  SnapshotAssembler a(layout());
  feed(a, warm_up(0.0));
  std::size_t heads = 0;
  std::size_t backs = 0;
  for (int k = 1; k < 5000; ++k) {
    const double ts = k * 0.25;
    if (keep(rng)) {
      a.ingest(rec(ts, tag::HeadPosition{}, 3000.0 + k));
      ++heads;
    }
    if (keep(rng)) {
      a.ingest(rec(ts, tag::BackPosition{}, 1000.0 + k));
      ++backs;
    }
    if (pick(rng) == 0) a.ingest(rec(ts, tag::SensorTemp{{2, 2}}, 600.0 + k));
  }
  EXPECT_GT(a.completed_count(), 0u);
  EXPECT_LE(a.completed_count(), std::min(heads, backs));
}

TEST(SnapshotText, RoundTrip) {
  Snapshot s;
  s.powers = {250, 200, 180, 130, 120};
  s.temps.assign(15, 612.25);
  s.temp_ts.assign(15, 41.5);
  s.back = -8000.5;
  s.head = 12000.0;
  s.speed = -20.0;
  s.holding = true;
  s.ts = 42.0;
  EXPECT_EQ(parse_snapshot(render_snapshot(s)), s);
}

TEST(SnapshotText, Errors) {
  try {
    parse_snapshot("{");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLine);
  }
  try {
    parse_snapshot(R"({"ts": 1, "power": [1], "temp": [1], "position": [1], "speed": 0})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIncompleteSnapshot);
  }
}

TEST(SnapshotValidation, SizesChecked) {
  Snapshot s;
  s.powers.assign(5, 0.0);
  s.temps.assign(14, 0.0);
  EXPECT_THROW(validate_snapshot(s, layout()), Error);
  s.temps.assign(15, 0.0);
  EXPECT_NO_THROW(validate_snapshot(s, layout()));
  s.speed = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(validate_snapshot(s, layout()), Error);
}
