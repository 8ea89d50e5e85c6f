#include "twintest/furnace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "twintest/error.hpp"

namespace twintest {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Both sides must agree on "exactly at the end of a holding leg" even when
// the leg is assembled from many 0.1 s steps.
constexpr double kLegEpsilon = 1e-9;

}  // namespace

BarSpec BarSpec::from_mass(double length, double diameter, double mass_kg,
                           double specific_heat, double segment_resolution) {
  BarSpec spec;
  spec.length = length;
  spec.diameter = diameter;
  spec.specific_heat = specific_heat;
  spec.segment_resolution = segment_resolution;
  const double radius_m = diameter * 1e-3 / 2.0;
  const double volume = std::numbers::pi * radius_m * radius_m * length * 1e-3;
  if (!positive_finite(volume) || !positive_finite(mass_kg)) {
    fail(ErrorCode::kInvalidParameter, "bar mass and geometry must be positive");
  }
  spec.density = mass_kg / volume;
  spec.validate();
  return spec;
}

void BarSpec::validate() const {
  if (!positive_finite(length) || !positive_finite(diameter) || !positive_finite(density) ||
      !positive_finite(specific_heat)) {
    fail(ErrorCode::kInvalidParameter,
         "bar length, diameter, density and specific heat must be positive");
  }
  if (!positive_finite(segment_resolution) || segment_resolution > length) {
    fail(ErrorCode::kInvalidParameter, "segment resolution must be in (0, length]");
  }
}

std::size_t BarSpec::segment_count() const {
  const double n = std::ceil(length / segment_resolution - 1e-12);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

double BarSpec::segment_length() const {
  return length / static_cast<double>(segment_count());
}

double BarSpec::segment_mass() const {
  const double radius_m = diameter * 1e-3 / 2.0;
  return density * std::numbers::pi * radius_m * radius_m * segment_length() * 1e-3;
}

double BarSpec::segment_area() const {
  return std::numbers::pi * (diameter * 1e-3) * (segment_length() * 1e-3);
}

double BarSpec::segment_capacity() const { return segment_mass() * specific_heat; }

std::string SensorId::name() const {
  return "z" + std::to_string(zone) + ".s" + std::to_string(index);
}

std::optional<SensorId> SensorId::parse(std::string_view text) {
  // z<zone>.s<index>
  int zone = 0;
  int index = 0;
  std::size_t i = 0;
  auto read_int = [&](int& out) {
    const std::size_t start = i;
    out = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
      out = out * 10 + (text[i] - '0');
      if (out > 1'000'000) return false;
      ++i;
    }
    return i > start && text[start] != '0';
  };
  if (i >= text.size() || text[i++] != 'z' || !read_int(zone)) return std::nullopt;
  if (i + 1 >= text.size() || text[i] != '.' || text[i + 1] != 's') return std::nullopt;
  i += 2;
  if (!read_int(index) || i != text.size()) return std::nullopt;
  return SensorId{zone, index};
}

FurnaceLayout FurnaceLayout::regular(int zones, int coils_per_zone, double coil_length,
                                     double coil_gap, double zone_gap, double origin,
                                     double exit_length, double ambient_temp) {
  if (zones < 1 || coils_per_zone < 1) {
    fail(ErrorCode::kInvalidParameter, "zones and coils per zone must be >= 1");
  }
  if (!positive_finite(coil_length) || !positive_finite(coil_gap) || !(zone_gap >= 0.0) ||
      !(exit_length >= 0.0)) {
    fail(ErrorCode::kInvalidParameter, "coil length and gaps must be positive");
  }
  FurnaceLayout layout;
  layout.zones = zones;
  layout.coils_per_zone = coils_per_zone;
  layout.ambient_temp = ambient_temp;
  const double zone_pitch = coils_per_zone * coil_length + (coils_per_zone - 1) * coil_gap + zone_gap;
  for (int z = 1; z <= zones; ++z) {
    const double zone_start = origin + (z - 1) * zone_pitch;
    for (int k = 1; k <= coils_per_zone; ++k) {
      const double start = zone_start + (k - 1) * (coil_length + coil_gap);
      layout.coils.push_back({z, k, start, start + coil_length});
      if (k < coils_per_zone) {
        layout.sensors.push_back({{z, k}, start + coil_length + coil_gap / 2.0});
      }
    }
  }
  layout.line_end = layout.coils.back().end_pos + exit_length;
  layout.validate();
  return layout;
}

FurnaceLayout FurnaceLayout::standard() {
  return regular(5, 4, 400.0, 150.0, 300.0, 0.0, 550.0, 25.0);
}

void FurnaceLayout::validate() const {
  if (zones < 1 || coils_per_zone < 1) {
    fail(ErrorCode::kInvalidParameter, "zones and coils per zone must be >= 1");
  }
  if (coils.size() != static_cast<std::size_t>(zones * coils_per_zone)) {
    fail(ErrorCode::kInvalidGeometry, "coil count must equal zones x coils_per_zone");
  }
  if (!std::isfinite(ambient_temp) || ambient_temp <= -kCelsiusToKelvin) {
    fail(ErrorCode::kInvalidParameter, "ambient temperature must be above absolute zero");
  }
  for (std::size_t i = 0; i < coils.size(); ++i) {
    const auto& c = coils[i];
    if (c.zone < 1 || c.zone > zones || c.index_in_zone < 1 || c.index_in_zone > coils_per_zone) {
      fail(ErrorCode::kInvalidGeometry, "coil zone/index out of range");
    }
    if (!std::isfinite(c.start_pos) || !std::isfinite(c.end_pos) || !(c.start_pos < c.end_pos)) {
      fail(ErrorCode::kInvalidGeometry, "coil start must be below coil end");
    }
    if (i > 0 && coils[i - 1].end_pos > c.start_pos) {
      fail(ErrorCode::kInvalidGeometry, "coils must be sorted and must not overlap");
    }
  }
  if (!(line_end >= coils.back().end_pos)) {
    fail(ErrorCode::kInvalidGeometry, "line end must not precede the last coil");
  }
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const auto& s = sensors[i];
    if (s.id.zone < 1 || s.id.zone > zones || s.id.index < 1) {
      fail(ErrorCode::kInvalidGeometry, "sensor " + s.id.name() + " out of range");
    }
    if (i > 0 && !(sensors[i - 1].id < s.id)) {
      fail(ErrorCode::kInvalidGeometry, "sensor ids must be unique and sorted by (zone, index)");
    }
    bool in_gap = false;
    for (std::size_t k = 0; k + 1 < coils.size(); ++k) {
      if (s.position > coils[k].end_pos && s.position < coils[k + 1].start_pos) {
        in_gap = true;
        break;
      }
    }
    if (!in_gap) {
      fail(ErrorCode::kInvalidGeometry, "sensor " + s.id.name() + " is not in an inter-coil gap");
    }
  }
}

std::optional<std::size_t> FurnaceLayout::sensor_index(SensorId id) const {
  auto it = std::lower_bound(sensors.begin(), sensors.end(), id,
                             [](const SensorConfig& s, SensorId v) { return s.id < v; });
  if (it == sensors.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - sensors.begin());
}

ThermalParams ThermalParams::uniform(int zones, double efficiency, double emissivity) {
  ThermalParams p;
  p.heating_efficiency.assign(static_cast<std::size_t>(std::max(zones, 0)), efficiency);
  p.emissivity = emissivity;
  return p;
}

void ThermalParams::validate(int zones) const {
  if (heating_efficiency.size() != static_cast<std::size_t>(zones)) {
    fail(ErrorCode::kLengthMismatch, "one heating efficiency per zone is required");
  }
  for (double eta : heating_efficiency) {
    if (!(eta > 0.0 && eta <= 1.0)) {
      fail(ErrorCode::kInvalidParameter, "heating efficiency must be in (0, 1]");
    }
  }
  if (!(emissivity >= 0.0 && emissivity <= 1.0)) {
    fail(ErrorCode::kInvalidParameter, "emissivity must be in [0, 1]");
  }
}

void validate_mode(const OperatingMode& mode) {
  if (const auto* n = std::get_if<NormalMode>(&mode)) {
    if (!std::isfinite(n->speed) || n->speed < 0.0) {
      fail(ErrorCode::kInvalidParameter, "normal-mode speed must be >= 0");
    }
    return;
  }
  const auto& h = std::get<HoldingMode>(mode);
  if (!positive_finite(h.speed) || !positive_finite(h.reversal_interval)) {
    fail(ErrorCode::kInvalidParameter, "holding speed and reversal interval must be positive");
  }
  if (h.initial_direction != 1 && h.initial_direction != -1) {
    fail(ErrorCode::kInvalidParameter, "holding direction must be +1 or -1");
  }
}

bool is_holding(const OperatingMode& mode) { return std::holds_alternative<HoldingMode>(mode); }

void validate_bar_order(std::span<const BarState> bars) {
  for (std::size_t i = 0; i < bars.size(); ++i) {
    if (!std::isfinite(bars[i].head_pos)) {
      fail(ErrorCode::kInvalidParameter, "bar position must be finite");
    }
    if (i > 0 && bars[i - 1].tail_pos() < bars[i].head_pos) {
      std::ostringstream os;
      os << "bars " << i - 1 << " and " << i << " overlap";
      fail(ErrorCode::kInvalidGeometry, os.str());
    }
  }
}

FurnaceSim::FurnaceSim(FurnaceLayout layout, ThermalParams thermal,
                       std::span<const BarPlacement> bars, OperatingMode mode,
                       std::vector<double> powers, HistoryOptions history)
    : layout_(std::move(layout)), thermal_(std::move(thermal)), history_(history) {
  layout_.validate();
  thermal_.validate(layout_.zones);
  for (const auto& placement : bars) {
    placement.spec.validate();
    const double t0 = placement.initial_temp.value_or(layout_.ambient_temp);
    if (!std::isfinite(t0) || t0 <= -kCelsiusToKelvin) {
      fail(ErrorCode::kInvalidParameter, "initial bar temperature must be above absolute zero");
    }
    BarState bar;
    bar.spec = placement.spec;
    bar.head_pos = placement.head_pos;
    bar.segment_temps.assign(placement.spec.segment_count(), t0);
    state_.bars.push_back(std::move(bar));
  }
  std::stable_sort(state_.bars.begin(), state_.bars.end(),
                   [](const BarState& a, const BarState& b) { return a.head_pos > b.head_pos; });
  validate_bar_order(state_.bars);
  state_.sensor_values.assign(layout_.sensors.size(), layout_.ambient_temp);
  state_.zone_powers.assign(static_cast<std::size_t>(layout_.zones), 0.0);
  set_zone_powers(powers);
  set_mode(mode);
}

void FurnaceSim::set_zone_powers(std::span<const double> powers) {
  if (powers.size() != static_cast<std::size_t>(layout_.zones)) {
    fail(ErrorCode::kLengthMismatch, "expected " + std::to_string(layout_.zones) +
                                         " zone powers, got " + std::to_string(powers.size()));
  }
  for (double p : powers) {
    if (!std::isfinite(p)) fail(ErrorCode::kInvalidParameter, "zone power must be finite");
    if (p < 0.0) fail(ErrorCode::kNegativePower, "zone power must be >= 0");
  }
  state_.zone_powers.assign(powers.begin(), powers.end());
}

void FurnaceSim::set_mode(const OperatingMode& mode) {
  validate_mode(mode);
  state_.mode = mode;
  state_.holding_leg_elapsed = 0.0;
  state_.holding_direction = 1;
  if (const auto* h = std::get_if<HoldingMode>(&mode)) state_.holding_direction = h->initial_direction;
}

std::vector<BarExit> FurnaceSim::advance(double dt) {
  if (!positive_finite(dt)) fail(ErrorCode::kInvalidParameter, "time step must be positive");
  movement_update(dt);
  temperature_update(dt);
  state_.clock += dt;
  sensor_update();
  if (history_.temperatures) {
    TemperatureSample sample{state_.clock, {}};
    for (const auto& bar : state_.bars) sample.bar_temps.push_back(bar.segment_temps);
    state_.temp_history.push_back(std::move(sample));
  }
  return handle_exits();
}

std::vector<BarExit> FurnaceSim::run_for(double duration, double step) {
  if (!positive_finite(step)) fail(ErrorCode::kInvalidParameter, "time step must be positive");
  if (!(duration >= 0.0) || !std::isfinite(duration)) {
    fail(ErrorCode::kInvalidParameter, "duration must be >= 0");
  }
  std::vector<BarExit> exits;
  const double ratio = duration / step;
  const double nearest = std::round(ratio);
  std::size_t whole = 0;
  double residual = 0.0;
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    whole = static_cast<std::size_t>(nearest);
  } else {
    whole = static_cast<std::size_t>(std::floor(ratio));
    residual = duration - static_cast<double>(whole) * step;
  }
  for (std::size_t i = 0; i < whole; ++i) {
    auto e = advance(step);
    exits.insert(exits.end(), e.begin(), e.end());
  }
  if (residual > 0.0) {
    auto e = advance(residual);
    exits.insert(exits.end(), e.begin(), e.end());
  }
  return exits;
}

void FurnaceSim::movement_update(double dt) {
  double displacement = 0.0;
  if (const auto* n = std::get_if<NormalMode>(&state_.mode)) {
    displacement = n->speed * dt;
  } else {
    const auto& h = std::get<HoldingMode>(state_.mode);
    double remaining = dt;
    while (remaining > 0.0) {
      const double to_flip = h.reversal_interval - state_.holding_leg_elapsed;
      if (remaining < to_flip - kLegEpsilon) {
        displacement += state_.holding_direction * h.speed * remaining;
        state_.holding_leg_elapsed += remaining;
        break;
      }
      // Reaches the reversal instant inside (or at the end of) this step.
      const double leg = std::abs(remaining - to_flip) <= kLegEpsilon ? remaining : to_flip;
      displacement += state_.holding_direction * h.speed * leg;
      remaining -= leg;
      state_.holding_direction = -state_.holding_direction;
      state_.holding_leg_elapsed = 0.0;
    }
  }
  for (auto& bar : state_.bars) bar.head_pos += displacement;
}

void FurnaceSim::temperature_update(double dt) {
  const double ambient = layout_.ambient_temp;
  const double ambient_k4 = std::pow(ambient + kCelsiusToKelvin, 4);
  const double coil_share = 1000.0 / static_cast<double>(layout_.coils_per_zone);

  for (auto& bar : state_.bars) {
    const std::size_t n = bar.segment_temps.size();
    const double seg_len = bar.spec.segment_length();
    const double capacity = bar.spec.segment_capacity();
    const double tail = bar.tail_pos();

    // Heating: each coil spreads its delivered power over the segments it
    // covers, in proportion to covered length.
    for (const auto& coil : layout_.coils) {
      const double lo = std::max(coil.start_pos, tail);
      const double hi = std::min(coil.end_pos, bar.head_pos);
      if (!(hi > lo)) continue;
      const double eta = thermal_.heating_efficiency[static_cast<std::size_t>(coil.zone - 1)];
      const double coil_watts = state_.zone_powers[static_cast<std::size_t>(coil.zone - 1)] * coil_share;
      const double watts_per_mm = eta * coil_watts / coil.length();
      if (watts_per_mm == 0.0) continue;
      auto first = static_cast<std::size_t>(std::max(0.0, std::floor((lo - tail) / seg_len)));
      for (std::size_t i = first; i < n; ++i) {
        const double seg_lo = tail + static_cast<double>(i) * seg_len;
        if (seg_lo >= hi) break;
        const double seg_hi = tail + static_cast<double>(i + 1) * seg_len;
        const double covered = std::min(seg_hi, hi) - std::max(seg_lo, lo);
        if (covered > 0.0) bar.segment_temps[i] += watts_per_mm * covered * dt / capacity;
      }
    }

    // Radiative cooling of the lateral surface, clamped at ambient.
    if (thermal_.emissivity > 0.0) {
      const double k = thermal_.emissivity * kStefanBoltzmann * bar.spec.segment_area() * dt / capacity;
      for (double& t : bar.segment_temps) {
        const double tk = t + kCelsiusToKelvin;
        const double delta = k * (tk * tk * tk * tk - ambient_k4);
        const double next = t - delta;
        if (t >= ambient) {
          t = std::max(next, ambient);
        } else {
          t = std::min(next, ambient);
        }
      }
    }
  }
}

std::optional<std::pair<std::size_t, std::size_t>> FurnaceSim::covering_segment(double x) const {
  // Bars are ordered front first; the rear bar wins a shared boundary, so
  // scan from the back.
  for (std::size_t b = state_.bars.size(); b-- > 0;) {
    const auto& bar = state_.bars[b];
    const double tail = bar.tail_pos();
    if (!(x > tail && x <= bar.head_pos)) continue;
    const double seg_len = bar.spec.segment_length();
    const std::size_t n = bar.segment_temps.size();
    auto i = static_cast<std::size_t>(std::max(0.0, std::ceil((x - tail) / seg_len) - 1.0));
    if (i >= n) i = n - 1;
    // Guard the rounding of the division against the exact segment bounds.
    while (i > 0 && x <= tail + static_cast<double>(i) * seg_len) --i;
    while (i + 1 < n && x > tail + static_cast<double>(i + 1) * seg_len) ++i;
    return std::make_pair(b, i);
  }
  return std::nullopt;
}

void FurnaceSim::sensor_update() {
  for (std::size_t s = 0; s < layout_.sensors.size(); ++s) {
    if (auto hit = covering_segment(layout_.sensors[s].position)) {
      state_.sensor_values[s] = state_.bars[hit->first].segment_temps[hit->second];
    }
  }
  if (history_.sensors) state_.sensor_history.push_back({state_.clock, state_.sensor_values});
}

std::vector<BarExit> FurnaceSim::handle_exits() {
  std::vector<BarExit> exits;
  // Front bar first, which is also the log order.
  auto it = state_.bars.begin();
  while (it != state_.bars.end()) {
    if (it->tail_pos() > layout_.line_end) {
      BarExit e{state_.clock, it->segment_temps.back()};
      exits.push_back(e);
      state_.exit_log.push_back(e);
      it = state_.bars.erase(it);
    } else {
      ++it;
    }
  }
  return exits;
}

}  // namespace twintest

namespace twintest {

void FurnaceConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::kInvalidParameter, "dt must be positive");
  if (!(holding_reversal_interval > 0.0) || !std::isfinite(holding_reversal_interval)) {
    throw Error(ErrorCode::kInvalidParameter, "holding reversal interval must be positive");
  }
  (void)make_sim(HistoryOptions{false, false});
}

FurnaceSim FurnaceConfig::make_sim(HistoryOptions history) const {
  return FurnaceSim(layout, thermal, bars, mode, powers, history);
}

}  // namespace twintest
