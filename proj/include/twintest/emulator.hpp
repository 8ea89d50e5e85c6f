#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "twintest/furnace.hpp"
#include "twintest/telemetry.hpp"

namespace twintest {

namespace fault {
/// Offset added to one sensor's emitted readings.
struct SensorBias {
  SensorId sensor;
  double offset = 0.0;  // degC
};
/// Unannounced change of one zone's true power.
struct PowerStep {
  int zone = 0;
  double from = 0.0;  // kW
  double to = 0.0;    // kW
  double at = 0.0;    // s, relative to the start of the run
};
/// Axial heat conduction inside the bars, absent from the DT.
struct AxialConduction {
  double diffusivity = 0.0;  // mm^2/s
};
/// Gaussian noise on every emitted temperature.
struct MeasurementNoise {
  double sigma = 0.0;  // degC
};
/// Each record is dropped independently.
struct TelemetryLoss {
  double drop_prob = 0.0;
};
/// Overrides the update period and phase of matching tags. `tag` is a
/// canonical tag or a prefix followed by '*', e.g. "temp.*".
struct UpdateJitter {
  std::string tag;
  double period = 1.0;
  double phase = 0.0;
};
}  // namespace fault

using FaultInjection = std::variant<fault::SensorBias, fault::PowerStep, fault::AxialConduction,
                                    fault::MeasurementNoise, fault::TelemetryLoss, fault::UpdateJitter>;

struct FaultSpec {
  std::vector<FaultInjection> injections;
};

struct TagPeriods {
  double position = 1.0;
  double temp = 1.0;
  double power = 5.0;
  double speed = 5.0;
  double holding = 5.0;
};

/// A change of the line's operating program at time `at` (s from start).
struct TimelineEvent {
  double at = 0.0;
  std::optional<OperatingMode> mode;
  std::optional<std::vector<double>> powers;
  std::optional<BarPlacement> insert_bar;
};

struct EmitSchedule {
  double duration = 60.0;  // s
  double start_ts = 0.0;   // timestamp of the first tick
  TagPeriods periods;
  std::vector<TimelineEvent> timeline;
  /// Timeline changes (powers, mode, holding reversals) are published
  /// immediately in addition to the periodic samples.
  bool publish_on_change = true;
};

/// True line state after each emulator tick.
struct GroundTruthStep {
  double ts = 0.0;
  std::optional<double> head;
  std::optional<double> back;
  std::vector<double> sensors;  // parallel to FurnaceLayout::sensors
  std::vector<double> powers;
};

struct EmissionResult {
  std::size_t emitted = 0;
  std::size_t dropped = 0;
  std::size_t ticks = 0;
  std::vector<GroundTruthStep> truth;  // filled when requested, one per tick
};

using RecordSink = std::function<void(const TelemetryRecord&)>;

/// Reference plant. Shares only configuration types with FurnaceSim; the
/// physics loop is separate so that DT/plant agreement is a real check.
class PlantEmulator {
 public:
  /// Throws kInvalidSchedule or kInvalidParameter on inconsistent input.
  PlantEmulator(FurnaceConfig furnace, EmitSchedule schedule, FaultSpec faults, std::uint64_t seed);

  /// Runs the whole schedule, pushing records in timestamp order.
  EmissionResult run(const RecordSink& sink, bool log_truth = false) const;

  /// Convenience: collects every emitted record.
  std::vector<TelemetryRecord> records() const;

  const FurnaceConfig& furnace() const { return furnace_; }
  const EmitSchedule& schedule() const { return schedule_; }

 private:
  FurnaceConfig furnace_;
  EmitSchedule schedule_;
  FaultSpec faults_;
  std::uint64_t seed_;
};

}  // namespace twintest
