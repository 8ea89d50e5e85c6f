#include "twintest/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "twintest/error.hpp"
#include "twintest/seeding.hpp"

namespace twintest {

namespace {

// A sample is matched to a DT step when their times agree this closely.
constexpr double kTimeMatch = 1e-6;

double dt_value_at(const std::vector<SensorSample>& history, const std::vector<double>& initial,
                   std::size_t sensor, double tau) {
  double prev_t = 0.0;
  double prev_v = initial[sensor];
  if (std::abs(tau) <= kTimeMatch) return prev_v;
  for (const auto& sample : history) {
    const double v = sample.values[sensor];
    if (std::abs(sample.time - tau) <= kTimeMatch) return v;
    if (sample.time > tau) {
      const double w = (tau - prev_t) / (sample.time - prev_t);
      return prev_v + w * (v - prev_v);
    }
    prev_t = sample.time;
    prev_v = v;
  }
  return prev_v;
}

}  // namespace

std::string_view to_string(SeedPolicy policy) {
  return policy == SeedPolicy::kInterpolate ? "interpolate" : "carry-forward";
}

std::optional<SeedPolicy> parse_seed_policy(std::string_view text) {
  if (text == "interpolate") return SeedPolicy::kInterpolate;
  if (text == "carry-forward") return SeedPolicy::kCarryForward;
  return std::nullopt;
}

void OracleConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(temp_tolerance) || !positive(position_tolerance) || !positive(max_gap) ||
      !positive(dt_step) || !(min_speed >= 0.0) || !std::isfinite(min_speed)) {
    throw Error(ErrorCode::kInvalidParameter,
                "oracle tolerances, max_gap and dt_step must be positive; min_speed >= 0");
  }
}

std::variant<double, SkipReason> simulation_time(const Snapshot& snap1, const Snapshot& snap2,
                                                 const OracleConfig& config) {
  double t = 0.0;
  if (snap1.speed != 0.0 && std::abs(snap1.speed) >= config.min_speed) {
    t = (snap2.head - snap1.head) / snap1.speed;
  } else {
    t = snap2.ts - snap1.ts;
  }
  if (!(t > 0.0)) return SkipReason::kMotionInconsistent;
  if (t > config.max_gap) return SkipReason::kGapTooLarge;
  return t;
}

Verdict evaluate_seeded(FurnaceSim& dt, const Snapshot& snap1, const Snapshot& snap2,
                        double t_simulation, const OracleConfig& config) {
  Verdict v;
  v.ts1 = snap1.ts;
  v.ts2 = snap2.ts;
  v.t_simulation = t_simulation;

  auto& state = dt.mutable_state();
  state.clock = 0.0;
  state.sensor_history.clear();
  state.temp_history.clear();
  dt.history_options().sensors = true;
  const std::vector<double> initial = state.sensor_values;

  dt.run_for(t_simulation, config.dt_step);

  if (state.bars.empty()) {
    v.skipped = SkipReason::kTrackLost;
    v.skip_detail = "every DT bar left the line";
    return v;
  }
  v.position_error = state.bars.front().head_pos - snap2.head;
  if (std::abs(v.position_error) > config.position_tolerance) {
    v.failing_fields.emplace_back(kPositionField);
  }

  const auto& sensors = dt.layout().sensors;
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    const double sample_ts = snap2.temp_ts.empty() ? snap2.ts : snap2.temp_ts[s];
    // DT time at which the observed value was sampled.
    const double tau = t_simulation - (snap2.ts - sample_ts);
    if (tau <= kTimeMatch) continue;  // no reading newer than Dataset1
    const double simulated = dt_value_at(state.sensor_history, initial, s, tau);
    const double err = simulated - snap2.temps[s];
    v.sensor_errors[sensors[s].id] = err;
    if (!(std::abs(err) <= config.temp_tolerance)) v.failing_fields.push_back(sensor_field(sensors[s].id));
  }
  v.passed = v.failing_fields.empty();
  return v;
}

Verdict evaluate_pair(const Snapshot& snap1, const Snapshot& snap2, const FurnaceConfig& furnace,
                      const OracleConfig& config) {
  auto t = simulation_time(snap1, snap2, config);
  if (const auto* reason = std::get_if<SkipReason>(&t)) {
    Verdict v;
    v.ts1 = snap1.ts;
    v.ts2 = snap2.ts;
    v.skipped = *reason;
    return v;
  }
  try {
    validate_snapshot(snap2, furnace.layout);
    FurnaceSim dt = seed_from_snapshot(furnace.layout, furnace.thermal, furnace.bars, snap1,
                                       furnace.holding_reversal_interval, config.position_tolerance);
    return evaluate_seeded(dt, snap1, snap2, std::get<double>(t), config);
  } catch (const Error& e) {
    Verdict v;
    v.ts1 = snap1.ts;
    v.ts2 = snap2.ts;
    v.skipped = SkipReason::kSeedFailed;
    v.skip_detail = e.what();
    return v;
  }
}

StreamOracle::StreamOracle(FurnaceConfig furnace, OracleConfig config)
    : furnace_(std::move(furnace)), config_(config) {
  config_.validate();
}

namespace {

// Moves a carried DT onto `snap`: head position, powers, motion and sensor
// hold values. A holding DT keeps its reversal phase while its direction
// agrees with the snapshot's speed.
void resync(FurnaceSim& dt, const Snapshot& snap, double reversal_interval) {
  auto& state = dt.mutable_state();
  const double shift = snap.head - state.bars.front().head_pos;
  for (auto& bar : state.bars) bar.head_pos += shift;
  dt.set_zone_powers(snap.powers);
  const OperatingMode wanted = mode_from_snapshot(snap, reversal_interval);
  const auto* now = std::get_if<HoldingMode>(&state.mode);
  const auto* next = std::get_if<HoldingMode>(&wanted);
  const bool same_leg = now != nullptr && next != nullptr && now->speed == next->speed &&
                        now->reversal_interval == next->reversal_interval &&
                        state.holding_direction == next->initial_direction;
  if (!same_leg) dt.set_mode(wanted);
  state.sensor_values = snap.temps;
  state.exit_log.clear();
}

}  // namespace

void StreamOracle::forget() {
  memory_.reset();
  memory_snap_.reset();
}

void StreamOracle::bridge_to(const Snapshot& snap1) {
  if (!memory_ || memory_snap_->ts == snap1.ts) return;
  // Pairs were skipped since the DT was last evaluated: run it across the
  // gap without judging, as if the skipped pair had been evaluated.
  const auto t = simulation_time(*memory_snap_, snap1, config_);
  if (!std::holds_alternative<double>(t)) {
    forget();
    return;
  }
  auto& dt = *memory_;
  resync(dt, *memory_snap_, furnace_.holding_reversal_interval);
  auto& state = dt.mutable_state();
  state.clock = 0.0;
  state.sensor_history.clear();
  state.temp_history.clear();
  dt.history_options().sensors = false;
  dt.run_for(std::get<double>(t), config_.dt_step);
  if (state.bars.empty()) {
    forget();
    return;
  }
  memory_snap_ = snap1;
}

std::optional<FurnaceSim> StreamOracle::seed_pair(const Snapshot& snap1, Verdict& verdict) {
  try {
    validate_snapshot(snap1, furnace_.layout);
    if (config_.seed_policy == SeedPolicy::kCarryForward) bridge_to(snap1);
    const bool can_carry =
        config_.seed_policy == SeedPolicy::kCarryForward && memory_ &&
        memory_->state().bars.size() == furnace_.bars.size() &&
        std::abs(memory_->state().bars.front().head_pos - snap1.head) <= config_.position_tolerance;
    if (!can_carry) {
      forget();
      ++summary_.cold_seeds;
      return seed_from_snapshot(furnace_.layout, furnace_.thermal, furnace_.bars, snap1,
                                furnace_.holding_reversal_interval, config_.position_tolerance);
    }
    if (!(snap1.back < snap1.head) ||
        std::abs((snap1.head - snap1.back) - train_length(furnace_.bars)) > config_.position_tolerance) {
      throw Error(ErrorCode::kInconsistentPositions, "snapshot span does not match the bar train");
    }
    FurnaceSim dt = std::move(*memory_);
    forget();
    resync(dt, snap1, furnace_.holding_reversal_interval);
    return dt;
  } catch (const Error& e) {
    verdict.skipped = SkipReason::kSeedFailed;
    verdict.skip_detail = e.what();
    return std::nullopt;
  }
}

std::optional<Verdict> StreamOracle::push(const Snapshot& snap) {
  ++summary_.snapshots;
  if (!dataset1_) {
    dataset1_ = snap;
    return std::nullopt;
  }
  const Snapshot& snap1 = *dataset1_;
  Verdict v;
  v.ts1 = snap1.ts;
  v.ts2 = snap.ts;

  auto t = simulation_time(snap1, snap, config_);
  if (const auto* reason = std::get_if<SkipReason>(&t)) {
    v.skipped = *reason;
  } else if (auto dt = seed_pair(snap1, v)) {
    try {
      validate_snapshot(snap, furnace_.layout);
      v = evaluate_seeded(*dt, snap1, snap, std::get<double>(t), config_);
      if (!v.skipped) {
        memory_ = std::move(*dt);
        memory_snap_ = snap;
      }
    } catch (const Error& e) {
      v.skipped = SkipReason::kSeedFailed;
      v.skip_detail = e.what();
    }
  }

  ++summary_.verdicts;
  if (v.skipped) {
    ++summary_.skipped;
    ++summary_.skip_reasons[*v.skipped];
  } else if (v.passed) {
    ++summary_.passed;
  } else {
    ++summary_.failed;
  }
  dataset1_ = snap;
  return v;
}

StreamSummary run_stream(RecordSource& source, SnapshotAssembler& assembler, StreamOracle& oracle,
                         const VerdictSink& sink) {
  StreamSummary summary;
  try {
    while (auto record = source.next()) {
      ++summary.records;
      if (auto snap = assembler.ingest(*record)) {
        if (auto verdict = oracle.push(*snap)) {
          if (sink) sink(*verdict);
        }
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kIoError) throw;
    summary.io_error = e.what();
  }
  summary.oracle = oracle.summary();
  summary.parse_errors = source.parse_errors();
  summary.rejected_snapshots = assembler.rejected_count();
  return summary;
}

}  // namespace twintest
