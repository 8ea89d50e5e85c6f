#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace twintest {

inline constexpr double kStefanBoltzmann = 5.670374419e-8;  // W/(m^2 K^4)
inline constexpr double kCelsiusToKelvin = 273.15;

/// Geometry and material of one steel bar. Lengths in mm, density in kg/m^3,
/// specific heat in J/(kg K).
struct BarSpec {
  double length = 0.0;
  double diameter = 0.0;
  double density = 7850.0;
  double specific_heat = 490.0;
  double segment_resolution = 10.0;

  /// Builds a spec from a total bar mass, back-solving the density.
  static BarSpec from_mass(double length, double diameter, double mass_kg,
                           double specific_heat, double segment_resolution);

  void validate() const;

  std::size_t segment_count() const;
  double segment_length() const;     // mm
  double segment_mass() const;       // kg
  double segment_area() const;       // lateral surface, m^2
  double segment_capacity() const;   // J/K
};

struct SensorId {
  int zone = 0;
  int index = 0;

  auto operator<=>(const SensorId&) const = default;

  /// "z2.s2" form used in field names and fault configs.
  std::string name() const;
  static std::optional<SensorId> parse(std::string_view text);
};

struct CoilConfig {
  int zone = 0;
  int index_in_zone = 0;
  double start_pos = 0.0;
  double end_pos = 0.0;

  double length() const { return end_pos - start_pos; }
};

struct SensorConfig {
  SensorId id;
  double position = 0.0;
};

struct FurnaceLayout {
  int zones = 0;
  int coils_per_zone = 0;
  std::vector<CoilConfig> coils;      // sorted by start_pos
  std::vector<SensorConfig> sensors;  // sorted by (zone, index)
  double line_end = 0.0;
  double ambient_temp = 25.0;

  /// Regular layout: `zones` x `coils_per_zone` equal coils, one sensor in
  /// each gap between neighbouring coils of the same zone.
  static FurnaceLayout regular(int zones, int coils_per_zone, double coil_length,
                               double coil_gap, double zone_gap, double origin,
                               double exit_length, double ambient_temp);
  /// Five zones of four coils.
  static FurnaceLayout standard();

  void validate() const;

  double furnace_start() const { return coils.front().start_pos; }
  double furnace_end() const { return coils.back().end_pos; }
  std::optional<std::size_t> sensor_index(SensorId id) const;
};

struct ThermalParams {
  std::vector<double> heating_efficiency;  // one per zone, (0, 1]
  double emissivity = 0.8;

  static ThermalParams uniform(int zones, double efficiency, double emissivity);
  void validate(int zones) const;
};

struct NormalMode {
  double speed = 0.0;  // mm/s, >= 0
};

struct HoldingMode {
  double speed = 0.0;              // mm/s magnitude
  double reversal_interval = 0.0;  // s
  int initial_direction = +1;      // +1 forward, -1 backward
};

using OperatingMode = std::variant<NormalMode, HoldingMode>;

void validate_mode(const OperatingMode& mode);
bool is_holding(const OperatingMode& mode);

struct BarState {
  BarSpec spec;
  double head_pos = 0.0;
  std::vector<double> segment_temps;  // index 0 = tail segment

  double tail_pos() const { return head_pos - spec.length; }
};

struct BarExit {
  double time = 0.0;
  double head_temp = 0.0;
};

struct SensorSample {
  double time = 0.0;
  std::vector<double> values;  // parallel to FurnaceLayout::sensors
};

struct TemperatureSample {
  double time = 0.0;
  std::vector<std::vector<double>> bar_temps;
};

struct SimState {
  double clock = 0.0;
  std::vector<BarState> bars;  // front of line first
  std::vector<double> zone_powers;  // kW
  OperatingMode mode = NormalMode{};
  int holding_direction = +1;
  double holding_leg_elapsed = 0.0;
  std::vector<double> sensor_values;  // parallel to FurnaceLayout::sensors
  std::vector<BarExit> exit_log;
  std::vector<TemperatureSample> temp_history;
  std::vector<SensorSample> sensor_history;
};

/// Initial placement of one bar: its spec, head coordinate and an optional
/// uniform starting temperature (ambient when absent).
struct BarPlacement {
  BarSpec spec;
  double head_pos = 0.0;
  std::optional<double> initial_temp;
};

struct HistoryOptions {
  bool sensors = true;
  bool temperatures = false;
};

/// The discrete-event furnace simulator. One instance per thread; copies are
/// independent.
class FurnaceSim {
 public:
  FurnaceSim(FurnaceLayout layout, ThermalParams thermal,
             std::span<const BarPlacement> bars, OperatingMode mode,
             std::vector<double> powers, HistoryOptions history = {});

  const FurnaceLayout& layout() const { return layout_; }
  const ThermalParams& thermal() const { return thermal_; }
  const SimState& state() const { return state_; }
  SimState& mutable_state() { return state_; }
  HistoryOptions& history_options() { return history_; }

  void set_zone_powers(std::span<const double> powers);
  void set_mode(const OperatingMode& mode);

  /// One step: movement, temperature, sensors, exits; clock += dt.
  std::vector<BarExit> advance(double dt);

  /// Runs `duration` seconds as whole `step`s followed by one residual step.
  std::vector<BarExit> run_for(double duration, double step);

  void movement_update(double dt);
  void temperature_update(double dt);
  void sensor_update();
  std::vector<BarExit> handle_exits();

  /// Segment and bar covering `x`, using half-open spans (lo, hi] so that a
  /// boundary belongs to the tail-side segment.
  std::optional<std::pair<std::size_t, std::size_t>> covering_segment(double x) const;

 private:
  FurnaceLayout layout_;
  ThermalParams thermal_;
  SimState state_;
  HistoryOptions history_;
};

/// Checks that bars are ordered front-first and do not overlap.
void validate_bar_order(std::span<const BarState> bars);

/// Everything needed to build the DT of one line.
struct FurnaceConfig {
  FurnaceLayout layout = FurnaceLayout::standard();
  ThermalParams thermal = ThermalParams::uniform(5, 0.75, 0.8);
  std::vector<BarPlacement> bars;  // the bar train
  OperatingMode mode = NormalMode{20.0};
  std::vector<double> powers = std::vector<double>(5, 0.0);
  double dt = 0.1;
  /// Reversal interval the DT assumes for holding mode seeded from telemetry.
  double holding_reversal_interval = 10.0;

  void validate() const;
  FurnaceSim make_sim(HistoryOptions history = {}) const;
};

}  // namespace twintest
