#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "twintest/furnace.hpp"

namespace twintest {

namespace tag {
struct ZonePower {
  int zone = 0;
  auto operator<=>(const ZonePower&) const = default;
};
struct SensorTemp {
  SensorId sensor;
  auto operator<=>(const SensorTemp&) const = default;
};
struct HeadPosition {
  auto operator<=>(const HeadPosition&) const = default;
};
struct BackPosition {
  auto operator<=>(const BackPosition&) const = default;
};
struct Speed {
  auto operator<=>(const Speed&) const = default;
};
struct HoldingIndicator {
  auto operator<=>(const HoldingIndicator&) const = default;
};
}  // namespace tag

using Tag = std::variant<tag::ZonePower, tag::SensorTemp, tag::HeadPosition, tag::BackPosition,
                         tag::Speed, tag::HoldingIndicator>;

/// Canonical lowercase form: power.z1, temp.z1.s3, pos.head, pos.back,
/// speed, mode.holding.
std::string render_tag(const Tag& t);
/// Syntactic parse only; nullopt when the text is not a canonical tag.
std::optional<Tag> parse_tag(std::string_view text);

/// The set of tags a given furnace can produce.
class TagSchema {
 public:
  TagSchema() = default;
  explicit TagSchema(const FurnaceLayout& layout);

  bool accepts(const Tag& t) const;
  int zones() const { return zones_; }

 private:
  int zones_ = 0;
  std::vector<SensorId> sensors_;
};

struct TelemetryRecord {
  double ts = 0.0;
  Tag tag;
  double value = 0.0;

  bool operator==(const TelemetryRecord&) const = default;
};

/// Parses one wire line `{"ts": <n>, "tag": "<tag>", "value": <n>}`.
/// Throws Error with kMalformedLine, kMissingField, kUnknownTag or
/// kNonFiniteValue.
TelemetryRecord parse_record(std::string_view line, const TagSchema& schema);

/// Renders a record with shortest round-trip number formatting.
std::string render_record(const TelemetryRecord& r);

/// Shortest representation that parses back to the same double.
std::string format_number(double v);

struct ParseFailure {
  std::size_t line = 0;
  std::string message;
};

/// Single-consumer record iterator. Malformed lines are skipped and counted.
class RecordSource {
 public:
  virtual ~RecordSource() = default;

  /// Next valid record; nullopt at end of stream.
  virtual std::optional<TelemetryRecord> next() = 0;

  std::size_t parse_errors() const { return failures_.size(); }
  const std::vector<ParseFailure>& failures() const { return failures_; }
  std::size_t lines_read() const { return lines_read_; }

 protected:
  /// Parses `line`; records a failure and returns nullopt when invalid.
  std::optional<TelemetryRecord> accept_line(std::string_view line, const TagSchema& schema);

 private:
  std::vector<ParseFailure> failures_;
  std::size_t lines_read_ = 0;
};

/// Reads every line of a file as fast as possible.
class FileReplaySource : public RecordSource {
 public:
  FileReplaySource(const std::string& path, TagSchema schema);
  std::optional<TelemetryRecord> next() override;

 protected:
  std::ifstream in_;
  TagSchema schema_;
  std::string line_;
};

/// File replay that sleeps so that ts deltas elapse `speedup` times faster
/// than recorded.
class PacedReplaySource : public FileReplaySource {
 public:
  using Clock = std::chrono::steady_clock;

  PacedReplaySource(const std::string& path, TagSchema schema, double speedup);
  std::optional<TelemetryRecord> next() override;

 private:
  double speedup_;
  std::optional<double> first_ts_;
  Clock::time_point start_;
};

/// Newline-delimited records from a TCP server.
class SocketSource : public RecordSource {
 public:
  SocketSource(const std::string& host, std::uint16_t port, TagSchema schema);
  ~SocketSource() override;
  SocketSource(const SocketSource&) = delete;
  SocketSource& operator=(const SocketSource&) = delete;

  std::optional<TelemetryRecord> next() override;

 private:
  bool read_line(std::string& out);

  int fd_ = -1;
  TagSchema schema_;
  std::string buffer_;
  std::size_t offset_ = 0;
  bool eof_ = false;
};

/// Source location parsed from `file:<path>`, `tcp:<host:port>` or
/// `paced:<path>:<factor>`.
struct SourceSpec {
  enum class Kind { kFile, kPaced, kSocket };
  Kind kind = Kind::kFile;
  std::string path;
  std::string host;
  std::uint16_t port = 0;
  double speedup = 1.0;

  static SourceSpec parse(std::string_view text);
};

std::unique_ptr<RecordSource> open_source(const SourceSpec& spec, const TagSchema& schema);

/// Accepts one TCP client on `port` and writes lines to it.
class LineServer {
 public:
  explicit LineServer(std::uint16_t port);
  ~LineServer();
  LineServer(const LineServer&) = delete;
  LineServer& operator=(const LineServer&) = delete;

  /// Port actually bound (useful when constructed with 0).
  std::uint16_t port() const { return port_; }
  void accept_client();
  void write_line(std::string_view line);
  void close_client();

 private:
  int listen_fd_ = -1;
  int client_fd_ = -1;
  std::uint16_t port_ = 0;
  std::string pending_;
};

}  // namespace twintest
