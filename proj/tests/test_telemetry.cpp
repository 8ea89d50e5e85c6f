#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

#include "twintest/error.hpp"
#include "twintest/telemetry.hpp"

using namespace twintest;

namespace {

const TagSchema& schema() {
  static const TagSchema s(FurnaceLayout::standard());
  return s;
}

ErrorCode parse_error(std::string_view line) {
  try {
    parse_record(line, schema());
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << line;
  return ErrorCode::kConfigError;
}

std::string temp_file(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / ("twintest_" + name);
  std::ofstream(path) << content;
  return path.string();
}

}  // namespace

TEST(Tags, CanonicalForms) {
  EXPECT_EQ(render_tag(tag::ZonePower{3}), "power.z3");
  EXPECT_EQ(render_tag(tag::SensorTemp{{1, 3}}), "temp.z1.s3");
  EXPECT_EQ(render_tag(tag::HeadPosition{}), "pos.head");
  EXPECT_EQ(render_tag(tag::BackPosition{}), "pos.back");
  EXPECT_EQ(render_tag(tag::Speed{}), "speed");
  EXPECT_EQ(render_tag(tag::HoldingIndicator{}), "mode.holding");
}

TEST(Tags, RoundTrip) {
  std::vector<Tag> all{tag::ZonePower{1}, tag::ZonePower{12}, tag::SensorTemp{{4, 2}}, tag::HeadPosition{},
                       tag::BackPosition{}, tag::Speed{}, tag::HoldingIndicator{}};
  for (const auto& t : all) {
    auto back = parse_tag(render_tag(t));
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, t);
  }
  EXPECT_FALSE(parse_tag("Power.z1"));
  EXPECT_FALSE(parse_tag("power.z"));
  EXPECT_FALSE(parse_tag("temp.z1"));
  EXPECT_FALSE(parse_tag("pos.middle"));
}

TEST(Records, ParseExample) {
  auto r = parse_record(R"({"ts": 100.0, "tag": "temp.z1.s3", "value": 851.2})", schema());
  EXPECT_EQ(r.ts, 100.0);
  EXPECT_EQ(r.tag, Tag(tag::SensorTemp{{1, 3}}));
  EXPECT_EQ(r.value, 851.2);
}

TEST(Records, NegativeSpeed) {
  auto r = parse_record(R"({"ts": 1, "tag": "speed", "value": -12.5})", schema());
  EXPECT_EQ(r.tag, Tag(tag::Speed{}));
  EXPECT_EQ(r.value, -12.5);
}

TEST(Records, Errors) {
  EXPECT_EQ(parse_error(R"({"ts": 100.0, "tag": "temp.z9.s1", "value": 1})"), ErrorCode::kUnknownTag);
  EXPECT_EQ(parse_error(R"({"ts": 100.0, "tag": "temp.z1.s4", "value": 1})"), ErrorCode::kUnknownTag);
  EXPECT_EQ(parse_error(R"({"ts": 1, "tag": "bogus", "value": 1})"), ErrorCode::kUnknownTag);
  EXPECT_EQ(parse_error(R"({"ts": 1, "tag": "speed"})"), ErrorCode::kMissingField);
  EXPECT_EQ(parse_error(R"({"tag": "speed", "value": 3})"), ErrorCode::kMissingField);
  EXPECT_EQ(parse_error(R"({"ts": 1, "tag": "speed", "value": NaN})"), ErrorCode::kMalformedLine);
  EXPECT_EQ(parse_error(R"({"ts": 1, "tag": "speed", "value": 1e999})"), ErrorCode::kNonFiniteValue);
  EXPECT_EQ(parse_error(R"({"ts": 1, "tag": "speed", "value": "3"})"), ErrorCode::kMalformedLine);
  EXPECT_EQ(parse_error(R"({"ts": 1, "tag": "mode.holding", "value": 0.5})"), ErrorCode::kMalformedLine);
  EXPECT_EQ(parse_error("not json at all"), ErrorCode::kMalformedLine);
  EXPECT_EQ(parse_error("[1, 2, 3]"), ErrorCode::kMalformedLine);
}

TEST(Records, RenderParseRoundTripIsExact) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  std::uniform_int_distribution<int> e(-300, 300);
  std::vector<Tag> tags{tag::ZonePower{2}, tag::SensorTemp{{5, 3}}, tag::HeadPosition{}, tag::Speed{}};
  for (int i = 0; i < 20000; ++i) {
    TelemetryRecord r{std::abs(u(rng)) * 1e5, tags[static_cast<std::size_t>(i) % tags.size()],
                      std::ldexp(u(rng), e(rng) / 10)};
    auto back = parse_record(render_record(r), schema());
    ASSERT_EQ(back, r) << render_record(r);
  }
  for (double v : {0.0, -0.0, 1700000000.0, 1e-300, 5e-324, std::numeric_limits<double>::max(), 0.1}) {
    TelemetryRecord r{1.0, tag::Speed{}, v};
    EXPECT_EQ(parse_record(render_record(r), schema()).value, v);
  }
}

TEST(Records, WholeNumbersStayPlain) {
  EXPECT_EQ(format_number(1700000000.0), "1700000000");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(render_record({2.5, tag::HeadPosition{}, 11000.0}), R"({"ts": 2.5, "tag": "pos.head", "value": 11000})");
}

TEST(FileSource, ThreeValidLines) {
  auto path = temp_file("three.jsonl",
                        "{\"ts\": 0, \"tag\": \"speed\", \"value\": 20}\n"
                        "{\"ts\": 0, \"tag\": \"pos.head\", \"value\": 100}\n"
                        "{\"ts\": 1, \"tag\": \"pos.back\", \"value\": 50}\n");
  FileReplaySource src(path, schema());
  int n = 0;
  while (src.next()) ++n;
  EXPECT_EQ(n, 3);
  EXPECT_EQ(src.parse_errors(), 0u);
  EXPECT_FALSE(src.next());
}

TEST(FileSource, MalformedLineSkippedAndCounted) {
  std::string content;
  for (int i = 0; i < 10; ++i) {
    content += i == 6 ? "{\"ts\": 6, \"tag\": \"speed\", \"value\": }\n"
                      : "{\"ts\": " + std::to_string(i) + ", \"tag\": \"speed\", \"value\": " + std::to_string(i) + "}\n";
  }
  FileReplaySource src(temp_file("ten.jsonl", content), schema());
  std::vector<double> values;
  while (auto r = src.next()) values.push_back(r->value);
  EXPECT_EQ(values, (std::vector<double>{0, 1, 2, 3, 4, 5, 7, 8, 9}));
  ASSERT_EQ(src.parse_errors(), 1u);
  EXPECT_EQ(src.failures()[0].line, 7u);
}

TEST(FileSource, BlankLinesIgnoredWithoutError) {
  FileReplaySource src(temp_file("blank.jsonl", "\n{\"ts\": 0, \"tag\": \"speed\", \"value\": 1}\n\n"), schema());
  EXPECT_TRUE(src.next());
  EXPECT_FALSE(src.next());
  EXPECT_EQ(src.parse_errors(), 0u);
}

TEST(FileSource, MissingFileIsIoError) {
  try {
    FileReplaySource src("/nonexistent/twintest.jsonl", schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

TEST(PacedSource, SpeedupTenOverTwoSeconds) {
  auto path = temp_file("paced.jsonl",
                        "{\"ts\": 0, \"tag\": \"speed\", \"value\": 1}\n"
                        "{\"ts\": 1, \"tag\": \"speed\", \"value\": 1}\n"
                        "{\"ts\": 2, \"tag\": \"speed\", \"value\": 1}\n");
  PacedReplaySource src(path, schema(), 10.0);
  const auto t0 = std::chrono::steady_clock::now();
  int n = 0;
  while (src.next()) ++n;
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(n, 3);
  EXPECT_GE(elapsed, 0.2);
  EXPECT_LT(elapsed, 0.5);
}

TEST(SourceSpecTest, Parse) {
  auto f = SourceSpec::parse("file:/tmp/a.jsonl");
  EXPECT_EQ(f.kind, SourceSpec::Kind::kFile);
  EXPECT_EQ(f.path, "/tmp/a.jsonl");
  auto p = SourceSpec::parse("paced:/tmp/a:b.jsonl:2.5");
  EXPECT_EQ(p.kind, SourceSpec::Kind::kPaced);
  EXPECT_EQ(p.path, "/tmp/a:b.jsonl");
  EXPECT_EQ(p.speedup, 2.5);
  auto t = SourceSpec::parse("tcp:localhost:9099");
  EXPECT_EQ(t.kind, SourceSpec::Kind::kSocket);
  EXPECT_EQ(t.host, "localhost");
  EXPECT_EQ(t.port, 9099);
  for (const char* bad : {"ftp:x", "file:", "paced:/a", "paced:/a:0", "tcp:host", "tcp:host:99999"}) {
    EXPECT_THROW(SourceSpec::parse(bad), Error) << bad;
  }
}

TEST(SocketSourceTest, ReceivesServedLines) {
  LineServer server(0);
  const auto port = server.port();
  std::thread writer([&] {
    server.accept_client();
    for (int i = 0; i < 1000; ++i) {
      server.write_line(render_record({static_cast<double>(i), tag::HeadPosition{}, 10.0 * i}));
    }
    server.write_line("garbage");
    server.close_client();
  });
  SocketSource src("127.0.0.1", port, schema());
  int n = 0;
  double last = -1.0;
  while (auto r = src.next()) {
    EXPECT_GT(r->ts, last);
    last = r->ts;
    ++n;
  }
  writer.join();
  EXPECT_EQ(n, 1000);
  EXPECT_EQ(src.parse_errors(), 1u);
}

TEST(SocketSourceTest, RefusedConnectionIsIoError) {
  std::uint16_t port = 0;
  {
    LineServer probe(0);
    port = probe.port();
  }
  try {
    SocketSource src("127.0.0.1", port, schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}
