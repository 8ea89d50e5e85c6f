#include "twintest/snapshot.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "twintest/error.hpp"

namespace twintest {

namespace {

[[noreturn]] void incomplete(const std::string& msg) {
  throw Error(ErrorCode::kIncompleteSnapshot, msg);
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void validate_snapshot(const Snapshot& snap, const FurnaceLayout& layout) {
  if (snap.powers.size() != static_cast<std::size_t>(layout.zones)) {
    incomplete("snapshot needs one power per zone");
  }
  if (snap.temps.size() != layout.sensors.size()) incomplete("snapshot needs one temperature per sensor");
  if (!snap.temp_ts.empty() && snap.temp_ts.size() != snap.temps.size()) {
    incomplete("temperature timestamps must parallel temperatures");
  }
  if (!all_finite(snap.powers) || !all_finite(snap.temps) || !all_finite(snap.temp_ts) ||
      !std::isfinite(snap.back) || !std::isfinite(snap.head) || !std::isfinite(snap.speed) ||
      !std::isfinite(snap.ts)) {
    incomplete("snapshot values must be finite");
  }
}

std::string render_snapshot(const Snapshot& snap) {
  nlohmann::ordered_json j;
  j["ts"] = snap.ts;
  j["power"] = snap.powers;
  j["temp"] = snap.temps;
  if (!snap.temp_ts.empty()) j["temp_ts"] = snap.temp_ts;
  j["position"] = {snap.back, snap.head};
  j["speed"] = snap.speed;
  j["holding"] = snap.holding ? 1 : 0;
  return j.dump();
}

Snapshot parse_snapshot(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line.begin(), line.end());
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::kMalformedLine, "snapshot line is not a valid object");
  }
  try {
    Snapshot s;
    s.ts = j.at("ts").get<double>();
    s.powers = j.at("power").get<std::vector<double>>();
    s.temps = j.at("temp").get<std::vector<double>>();
    if (j.contains("temp_ts")) s.temp_ts = j["temp_ts"].get<std::vector<double>>();
    const auto pos = j.at("position").get<std::vector<double>>();
    if (pos.size() != 2) incomplete("position must be [back, head]");
    s.back = pos[0];
    s.head = pos[1];
    s.speed = j.at("speed").get<double>();
    s.holding = j.value("holding", 0) != 0;
    return s;
  } catch (const nlohmann::json::exception& e) {
    incomplete(std::string("snapshot field missing or mistyped: ") + e.what());
  }
}

SnapshotAssembler::SnapshotAssembler(const FurnaceLayout& layout, double pair_window)
    : layout_(layout), pair_window_(pair_window) {
  if (!(pair_window >= 0.0)) throw Error(ErrorCode::kInvalidParameter, "pair window must be >= 0");
  reset();
}

void SnapshotAssembler::reset() {
  building_ = Snapshot{};
  building_.powers.assign(static_cast<std::size_t>(layout_.zones), 0.0);
  building_.temps.assign(layout_.sensors.size(), 0.0);
  building_.temp_ts.assign(layout_.sensors.size(), 0.0);
  power_seen_.assign(building_.powers.size(), false);
  temp_seen_.assign(building_.temps.size(), false);
  speed_seen_ = false;
  holding_seen_ = false;
  head_fresh_ = false;
  back_fresh_ = false;
  completed_ = 0;
  rejected_ = 0;
  stale_ = 0;
  diagnostics_.clear();
}

bool SnapshotAssembler::warmed_up() const {
  auto all = [](const std::vector<bool>& v) { return std::all_of(v.begin(), v.end(), [](bool b) { return b; }); };
  return speed_seen_ && all(power_seen_) && all(temp_seen_);
}

std::optional<Snapshot> SnapshotAssembler::ingest(const TelemetryRecord& record) {
  bool position_record = false;
  if (const auto* p = std::get_if<tag::ZonePower>(&record.tag)) {
    const auto z = static_cast<std::size_t>(p->zone - 1);
    if (z >= power_seen_.size()) return std::nullopt;
    building_.powers[z] = record.value;
    power_seen_[z] = true;
  } else if (const auto* t = std::get_if<tag::SensorTemp>(&record.tag)) {
    auto idx = layout_.sensor_index(t->sensor);
    if (!idx) return std::nullopt;
    building_.temps[*idx] = record.value;
    building_.temp_ts[*idx] = record.ts;
    temp_seen_[*idx] = true;
  } else if (std::holds_alternative<tag::Speed>(record.tag)) {
    building_.speed = record.value;
    speed_seen_ = true;
  } else if (std::holds_alternative<tag::HoldingIndicator>(record.tag)) {
    building_.holding = record.value != 0.0;
    holding_seen_ = true;
  } else if (std::holds_alternative<tag::HeadPosition>(record.tag)) {
    building_.head = record.value;
    head_fresh_ = true;
    head_ts_ = record.ts;
    if (back_fresh_ && std::abs(head_ts_ - back_ts_) > pair_window_) {
      back_fresh_ = false;
      ++stale_;
    }
    position_record = true;
  } else if (std::holds_alternative<tag::BackPosition>(record.tag)) {
    building_.back = record.value;
    back_fresh_ = true;
    back_ts_ = record.ts;
    if (head_fresh_ && std::abs(back_ts_ - head_ts_) > pair_window_) {
      head_fresh_ = false;
      ++stale_;
    }
    position_record = true;
  }

  if (!position_record || !head_fresh_ || !back_fresh_ || !warmed_up()) return std::nullopt;

  head_fresh_ = false;
  back_fresh_ = false;
  if (!(building_.back < building_.head)) {
    ++rejected_;
    diagnostics_.push_back("ts " + format_number(record.ts) + ": back " + format_number(building_.back) +
                           " is not behind head " + format_number(building_.head));
    return std::nullopt;
  }
  Snapshot out = building_;
  out.ts = record.ts;
  ++completed_;
  return out;
}

}  // namespace twintest
