#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twintest/furnace.hpp"
#include "twintest/telemetry.hpp"

namespace twintest {

/// One coherent view of the line: a test case for the oracle.
struct Snapshot {
  std::vector<double> powers;  // kW, one per zone
  std::vector<double> temps;   // degC, parallel to FurnaceLayout::sensors
  double back = 0.0;           // mm
  double head = 0.0;           // mm
  double speed = 0.0;          // mm/s, negative = backward
  bool holding = false;
  double ts = 0.0;             // timestamp of the completing record

  /// Timestamp of the record each temperature came from.
  std::vector<double> temp_ts;

  bool operator==(const Snapshot&) const = default;
};

/// Throws kIncompleteSnapshot when sizes or values are missing or invalid.
void validate_snapshot(const Snapshot& snap, const FurnaceLayout& layout);

/// Fixture line: {"ts":..,"power":[..],"temp":[..],"temp_ts":[..],
/// "position":[back,head],"speed":..,"holding":0|1}
std::string render_snapshot(const Snapshot& snap);
Snapshot parse_snapshot(std::string_view line);

/// Builds snapshots from an unordered telemetry stream. Non-position tags
/// overwrite the value being built; a snapshot completes once both position
/// components are fresh and every other field has been seen at least once.
///
/// Head and back must form a coherent pair: when one arrives while the other
/// is fresh but more than `pair_window` seconds older, the older one is
/// treated as stale and must be refreshed before completion.
class SnapshotAssembler {
 public:
  explicit SnapshotAssembler(const FurnaceLayout& layout, double pair_window = 0.5);

  std::optional<Snapshot> ingest(const TelemetryRecord& record);
  void reset();

  std::size_t completed_count() const { return completed_; }
  /// Completions discarded because back >= head.
  std::size_t rejected_count() const { return rejected_; }
  /// Position components discarded because their partner arrived too late.
  std::size_t stale_positions() const { return stale_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  bool warmed_up() const;

 private:
  FurnaceLayout layout_;
  Snapshot building_;
  std::vector<bool> power_seen_;
  std::vector<bool> temp_seen_;
  bool speed_seen_ = false;
  bool holding_seen_ = false;
  bool head_fresh_ = false;
  bool back_fresh_ = false;
  double head_ts_ = 0.0;
  double back_ts_ = 0.0;
  double pair_window_;
  std::size_t completed_ = 0;
  std::size_t rejected_ = 0;
  std::size_t stale_ = 0;
  std::vector<std::string> diagnostics_;
};

}  // namespace twintest
