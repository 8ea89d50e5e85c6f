#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twintest/furnace.hpp"

namespace twintest {

enum class SkipReason {
  kMotionInconsistent,
  kGapTooLarge,
  kSeedFailed,
  kTrackLost,
};

std::string_view to_string(SkipReason reason);
std::optional<SkipReason> parse_skip_reason(std::string_view text);

/// Field id used for the head position in verdicts and reports.
inline constexpr std::string_view kPositionField = "pos.head";
/// Field id of a sensor: its telemetry tag, e.g. "temp.z2.s2".
std::string sensor_field(SensorId id);

/// Outcome of one snapshot pair. Errors are simulated minus observed.
struct Verdict {
  double ts1 = 0.0;
  double ts2 = 0.0;
  double t_simulation = 0.0;
  double position_error = 0.0;
  std::map<SensorId, double> sensor_errors;  // only sensors with a fresh reading
  bool passed = false;
  std::vector<std::string> failing_fields;
  std::optional<SkipReason> skipped;
  std::string skip_detail;

  bool operator==(const Verdict&) const = default;
};

/// One verdict per line: keys ts1, ts2, t_sim, pos_err, err.<tag>, passed,
/// failing, skipped.
std::string render_verdict(const Verdict& v);
/// Throws kMalformedLine on a corrupt line.
Verdict parse_verdict(std::string_view line);

}  // namespace twintest
