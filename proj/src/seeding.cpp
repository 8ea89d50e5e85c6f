#include "twintest/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "twintest/error.hpp"

namespace twintest {

double train_length(std::span<const BarPlacement> train) {
  if (train.empty()) return 0.0;
  double front = -INFINITY;
  double rear = INFINITY;
  for (const auto& b : train) {
    front = std::max(front, b.head_pos);
    rear = std::min(rear, b.head_pos - b.spec.length);
  }
  return front - rear;
}

double interpolate_sensor_profile(const FurnaceLayout& layout, std::span<const double> temps,
                                  double x) {
  if (x < layout.furnace_start() || x > layout.furnace_end() || layout.sensors.empty()) {
    return layout.ambient_temp;
  }
  // Sensors sorted by id are not necessarily sorted by position.
  std::vector<std::size_t> order(layout.sensors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return layout.sensors[a].position < layout.sensors[b].position;
  });
  const auto pos = [&](std::size_t k) { return layout.sensors[order[k]].position; };
  const auto val = [&](std::size_t k) { return temps[order[k]]; };
  if (x <= pos(0)) return val(0);
  const std::size_t last = order.size() - 1;
  if (x >= pos(last)) return val(last);
  std::size_t hi = 1;
  while (pos(hi) < x) ++hi;
  const double x0 = pos(hi - 1);
  const double x1 = pos(hi);
  const double w = (x - x0) / (x1 - x0);
  return val(hi - 1) + w * (val(hi) - val(hi - 1));
}

OperatingMode mode_from_snapshot(const Snapshot& snap, double reversal_interval) {
  const bool backward = snap.speed < 0.0;
  if ((snap.holding || backward) && snap.speed != 0.0) {
    return HoldingMode{std::abs(snap.speed), reversal_interval, backward ? -1 : +1};
  }
  return NormalMode{std::abs(snap.speed)};
}

FurnaceSim seed_from_snapshot(const FurnaceLayout& layout, const ThermalParams& thermal,
                              std::span<const BarPlacement> train, const Snapshot& snap,
                              double reversal_interval, double position_tolerance,
                              HistoryOptions history) {
  validate_snapshot(snap, layout);
  if (train.empty()) throw Error(ErrorCode::kIncompleteSnapshot, "no bar train configured");
  if (!(snap.back < snap.head)) {
    throw Error(ErrorCode::kInconsistentPositions, "snapshot back must be behind head");
  }
  const double expected = train_length(train);
  if (std::abs((snap.head - snap.back) - expected) > position_tolerance) {
    throw Error(ErrorCode::kInconsistentPositions,
                "snapshot span " + format_number(snap.head - snap.back) +
                    " mm does not match configured train length " + format_number(expected) + " mm");
  }
  double front = -INFINITY;
  for (const auto& b : train) front = std::max(front, b.head_pos);
  const double shift = snap.head - front;

  std::vector<BarPlacement> placed(train.begin(), train.end());
  for (auto& b : placed) {
    b.head_pos += shift;
    b.initial_temp.reset();
  }
  FurnaceSim sim(layout, thermal, placed, mode_from_snapshot(snap, reversal_interval), snap.powers,
                 history);
  auto& state = sim.mutable_state();
  for (auto& bar : state.bars) {
    const double seg_len = bar.spec.segment_length();
    const double tail = bar.tail_pos();
    for (std::size_t i = 0; i < bar.segment_temps.size(); ++i) {
      const double center = tail + (static_cast<double>(i) + 0.5) * seg_len;
      bar.segment_temps[i] = interpolate_sensor_profile(layout, snap.temps, center);
    }
  }
  state.sensor_values = snap.temps;
  return sim;
}

}  // namespace twintest
