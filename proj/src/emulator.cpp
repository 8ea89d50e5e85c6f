#include "twintest/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "twintest/error.hpp"

namespace twintest {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::kInvalidSchedule, msg); }

constexpr double kSigma = 5.670374419e-8;

/// Integer tick arithmetic so that periodic samples land on exact steps.
struct TickClock {
  double dt = 0.1;
  double start = 0.0;
  double rate = 0.0;  // ticks per second when 1/dt is integral, else 0

  explicit TickClock(double step, double start_ts) : dt(step), start(start_ts) {
    const double r = 1.0 / step;
    if (std::abs(r - std::round(r)) <= 1e-9 * r) rate = std::round(r);
  }

  double time(std::int64_t k) const {
    const double rel = rate > 0.0 ? static_cast<double>(k) / rate : static_cast<double>(k) * dt;
    return start + rel;
  }

  std::int64_t ticks(double seconds, const char* what) const {
    const double r = seconds / dt;
    const double n = std::round(r);
    if (std::abs(r - n) > 1e-6 || n < 0) {
      invalid(std::string(what) + " must be a non-negative multiple of the time step");
    }
    return static_cast<std::int64_t>(n);
  }
};

struct PlantBar {
  double head = 0.0;
  double length = 0.0;
  double seg_len = 0.0;
  double capacity = 0.0;  // J/K per segment
  double area = 0.0;      // m^2 per segment
  std::vector<double> temps;

  double tail() const { return head - length; }
};

PlantBar make_plant_bar(const BarPlacement& p, double ambient) {
  p.spec.validate();
  PlantBar bar;
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(p.spec.length / p.spec.segment_resolution - 1e-12)));
  bar.head = p.head_pos;
  bar.length = p.spec.length;
  bar.seg_len = p.spec.length / static_cast<double>(n);
  const double r = p.spec.diameter * 1e-3 / 2.0;
  const double mass = p.spec.density * std::numbers::pi * r * r * (bar.seg_len * 1e-3);
  bar.capacity = mass * p.spec.specific_heat;
  bar.area = std::numbers::pi * (p.spec.diameter * 1e-3) * (bar.seg_len * 1e-3);
  bar.temps.assign(n, p.initial_temp.value_or(ambient));
  return bar;
}

enum class TagKind { kPower, kTemp, kSpeed, kHolding, kBack, kHead };

struct TagPlan {
  Tag tag;
  TagKind kind;
  std::size_t index = 0;  // zone or sensor index
  std::int64_t period = 1;
  std::int64_t phase = 0;
  bool changed = false;
};

bool pattern_matches(const std::string& pattern, const std::string& tag_text) {
  if (!pattern.empty() && pattern.back() == '*') {
    return tag_text.starts_with(std::string_view(pattern).substr(0, pattern.size() - 1));
  }
  return pattern == tag_text;
}

/// The emulated line: bars, program and true physics.
class Plant {
 public:
  Plant(const FurnaceConfig& cfg, double diffusivity)
      : layout_(cfg.layout), thermal_(cfg.thermal), dt_(cfg.dt), diffusivity_(diffusivity) {
    for (const auto& p : cfg.bars) add_bar(p);
    powers_ = cfg.powers;
    truth_sensors_.assign(layout_.sensors.size(), layout_.ambient_temp);
    const double per_coil = 1000.0 / static_cast<double>(layout_.coils_per_zone);
    for (const auto& c : layout_.coils) {
      coil_zone_.push_back(static_cast<std::size_t>(c.zone - 1));
      coil_scale_.push_back(thermal_.heating_efficiency[static_cast<std::size_t>(c.zone - 1)] * per_coil /
                            (c.end_pos - c.start_pos));
    }
  }

  void add_bar(const BarPlacement& p) {
    PlantBar bar = make_plant_bar(p, layout_.ambient_temp);
    if (diffusivity_ > 0.0 && diffusivity_ * dt_ / (bar.seg_len * bar.seg_len) >= 0.5) {
      throw Error(ErrorCode::kInvalidParameter,
                  "axial conduction is unstable: diffusivity * dt / segment_length^2 must be < 0.5");
    }
    auto pos = std::find_if(bars_.begin(), bars_.end(), [&](const PlantBar& b) { return b.head < bar.head; });
    pos = bars_.insert(pos, std::move(bar));
    const auto i = static_cast<std::size_t>(pos - bars_.begin());
    const bool overlaps_front = i > 0 && bars_[i - 1].tail() < bars_[i].head;
    const bool overlaps_rear = i + 1 < bars_.size() && bars_[i].tail() < bars_[i + 1].head;
    if (overlaps_front || overlaps_rear) {
      bars_.erase(pos);
      throw Error(ErrorCode::kInvalidGeometry, "inserted bar overlaps an existing bar");
    }
  }

  void set_powers(const std::vector<double>& p) { powers_ = p; }
  void set_zone_power(std::size_t zone, double p) { powers_[zone] = p; }
  const std::vector<double>& powers() const { return powers_; }

  void step(double velocity) {
    const double displacement = velocity * dt_;
    for (auto& bar : bars_) bar.head += displacement;
    for (auto& bar : bars_) {
      heat(bar);
      cool(bar);
      if (diffusivity_ > 0.0) conduct(bar);
    }
    sample_sensors();
    bars_.erase(std::remove_if(bars_.begin(), bars_.end(),
                               [&](const PlantBar& b) { return b.tail() > layout_.line_end; }),
                bars_.end());
  }

  void sample_sensors() {
    for (std::size_t s = 0; s < layout_.sensors.size(); ++s) {
      const double x = layout_.sensors[s].position;
      // Rear bars first: a shared boundary belongs to the rear bar's head.
      for (auto it = bars_.rbegin(); it != bars_.rend(); ++it) {
        const double tail = it->tail();
        if (x <= tail || x > it->head) continue;
        auto i = static_cast<std::size_t>((x - tail) / it->seg_len);
        if (i >= it->temps.size()) i = it->temps.size() - 1;
        if (i > 0 && tail + static_cast<double>(i) * it->seg_len >= x) --i;
        if (i + 1 < it->temps.size() && tail + static_cast<double>(i + 1) * it->seg_len < x) ++i;
        truth_sensors_[s] = it->temps[i];
        break;
      }
    }
  }

  const std::vector<double>& truth_sensors() const { return truth_sensors_; }
  std::optional<double> head() const {
    if (bars_.empty()) return std::nullopt;
    return bars_.front().head;
  }
  std::optional<double> back() const {
    if (bars_.empty()) return std::nullopt;
    return bars_.back().tail();
  }

 private:
  void heat(PlantBar& bar) const {
    const double tail = bar.tail();
    const auto& coils = layout_.coils;
    for (std::size_t i = 0; i < bar.temps.size(); ++i) {
      const double lo = tail + static_cast<double>(i) * bar.seg_len;
      const double hi = tail + static_cast<double>(i + 1) * bar.seg_len;
      if (hi <= coils.front().start_pos || lo >= coils.back().end_pos) continue;
      // First coil ending after the segment start.
      auto c = std::upper_bound(coils.begin(), coils.end(), lo,
                                [](double v, const CoilConfig& coil) { return v < coil.end_pos; });
      double watts = 0.0;
      for (; c != coils.end() && c->start_pos < hi; ++c) {
        const double seg_lo = std::max(lo, std::max(tail, c->start_pos));
        const double seg_hi = std::min(hi, std::min(bar.head, c->end_pos));
        if (seg_hi <= seg_lo) continue;
        const auto k = static_cast<std::size_t>(c - coils.begin());
        watts += coil_scale_[k] * powers_[coil_zone_[k]] * (seg_hi - seg_lo);
      }
      bar.temps[i] += watts * dt_ / bar.capacity;
    }
  }

  void cool(PlantBar& bar) const {
    if (thermal_.emissivity <= 0.0) return;
    const double amb = layout_.ambient_temp;
    const double amb_k = amb + 273.15;
    const double amb4 = amb_k * amb_k * amb_k * amb_k;
    const double factor = thermal_.emissivity * kSigma * bar.area * dt_ / bar.capacity;
    for (double& t : bar.temps) {
      const double tk = t + 273.15;
      const double next = t - factor * (tk * tk * tk * tk - amb4);
      t = t >= amb ? std::max(next, amb) : std::min(next, amb);
    }
  }

  void conduct(PlantBar& bar) {
    const std::size_t n = bar.temps.size();
    if (n < 2) return;
    const double r = diffusivity_ * dt_ / (bar.seg_len * bar.seg_len);
    scratch_ = bar.temps;
    for (std::size_t i = 0; i < n; ++i) {
      const double left = i == 0 ? scratch_[i] : scratch_[i - 1];
      const double right = i + 1 == n ? scratch_[i] : scratch_[i + 1];
      bar.temps[i] = scratch_[i] + r * (right - 2.0 * scratch_[i] + left);
    }
  }

  FurnaceLayout layout_;
  ThermalParams thermal_;
  double dt_;
  double diffusivity_;
  std::vector<PlantBar> bars_;  // front first
  std::vector<double> powers_;
  std::vector<double> truth_sensors_;
  std::vector<std::size_t> coil_zone_;
  std::vector<double> coil_scale_;  // eta * W per kW of zone power / coil length
  std::vector<double> scratch_;
};

struct Motion {
  OperatingMode mode = NormalMode{};
  std::int64_t holding_start = 0;
  std::int64_t reversal_ticks = 1;

  int direction(std::int64_t k) const {
    const auto& h = std::get<HoldingMode>(mode);
    const auto leg = (k - holding_start) / reversal_ticks;
    return leg % 2 == 0 ? h.initial_direction : -h.initial_direction;
  }
  double velocity(std::int64_t k) const {
    if (const auto* n = std::get_if<NormalMode>(&mode)) return n->speed;
    const auto& h = std::get<HoldingMode>(mode);
    return direction(k) * h.speed;
  }
  bool flips_at(std::int64_t k) const {
    return is_holding(mode) && k > holding_start && (k - holding_start) % reversal_ticks == 0;
  }
};

void check_powers(const std::vector<double>& powers, int zones) {
  if (powers.size() != static_cast<std::size_t>(zones)) invalid("power program needs one value per zone");
  for (double p : powers) {
    if (!std::isfinite(p) || p < 0.0) invalid("power program values must be finite and >= 0");
  }
}

}  // namespace

PlantEmulator::PlantEmulator(FurnaceConfig furnace, EmitSchedule schedule, FaultSpec faults,
                             std::uint64_t seed)
    : furnace_(std::move(furnace)), schedule_(std::move(schedule)), faults_(std::move(faults)), seed_(seed) {
  furnace_.validate();
  const TickClock clock(furnace_.dt, schedule_.start_ts);
  if (!(schedule_.duration > 0.0) || !std::isfinite(schedule_.duration)) invalid("duration must be positive");
  clock.ticks(schedule_.duration, "duration");
  const auto& p = schedule_.periods;
  for (double period : {p.position, p.temp, p.power, p.speed, p.holding}) {
    if (!(period > 0.0)) invalid("tag periods must be positive");
    if (clock.ticks(period, "tag period") == 0) invalid("tag periods must be at least one time step");
  }
  auto check_mode = [&](const OperatingMode& m) {
    validate_mode(m);
    if (const auto* h = std::get_if<HoldingMode>(&m)) {
      if (clock.ticks(h->reversal_interval, "holding reversal interval") == 0) {
        invalid("holding reversal interval must be at least one time step");
      }
    }
  };
  check_mode(furnace_.mode);
  std::stable_sort(schedule_.timeline.begin(), schedule_.timeline.end(),
                   [](const TimelineEvent& a, const TimelineEvent& b) { return a.at < b.at; });
  for (const auto& ev : schedule_.timeline) {
    if (ev.at > schedule_.duration) invalid("timeline event after the end of the run");
    clock.ticks(ev.at, "timeline event time");
    if (ev.mode) check_mode(*ev.mode);
    if (ev.powers) check_powers(*ev.powers, furnace_.layout.zones);
    if (ev.insert_bar) ev.insert_bar->spec.validate();
  }

  const TagSchema schema(furnace_.layout);
  for (const auto& inj : faults_.injections) {
    if (const auto* b = std::get_if<fault::SensorBias>(&inj)) {
      if (!furnace_.layout.sensor_index(b->sensor)) invalid("bias on unknown sensor " + b->sensor.name());
      if (!std::isfinite(b->offset)) invalid("bias offset must be finite");
    } else if (const auto* s = std::get_if<fault::PowerStep>(&inj)) {
      if (s->zone < 1 || s->zone > furnace_.layout.zones) invalid("power step on unknown zone");
      if (!(s->to >= 0.0) || !std::isfinite(s->to)) invalid("power step target must be >= 0");
      if (s->at > schedule_.duration) invalid("power step after the end of the run");
      clock.ticks(s->at, "power step time");
      double programmed = furnace_.powers[static_cast<std::size_t>(s->zone - 1)];
      for (const auto& ev : schedule_.timeline) {
        if (ev.at <= s->at && ev.powers) programmed = (*ev.powers)[static_cast<std::size_t>(s->zone - 1)];
      }
      if (std::abs(programmed - s->from) > 1e-9 * std::max(1.0, std::abs(s->from))) {
        invalid("power step 'from' does not match the programmed zone power at that time");
      }
    } else if (const auto* c = std::get_if<fault::AxialConduction>(&inj)) {
      if (!(c->diffusivity >= 0.0) || !std::isfinite(c->diffusivity)) invalid("diffusivity must be >= 0");
    } else if (const auto* n = std::get_if<fault::MeasurementNoise>(&inj)) {
      if (!(n->sigma >= 0.0) || !std::isfinite(n->sigma)) invalid("noise sigma must be >= 0");
    } else if (const auto* l = std::get_if<fault::TelemetryLoss>(&inj)) {
      if (!(l->drop_prob >= 0.0 && l->drop_prob <= 1.0)) invalid("drop probability must be in [0, 1]");
    } else if (const auto* j = std::get_if<fault::UpdateJitter>(&inj)) {
      if (!(j->period > 0.0) || clock.ticks(j->period, "jitter period") == 0) invalid("jitter period must be positive");
      clock.ticks(j->phase, "jitter phase");
      const bool wildcard = !j->tag.empty() && j->tag.back() == '*';
      if (!wildcard) {
        auto t = parse_tag(j->tag);
        if (!t || !schema.accepts(*t)) invalid("jitter on unknown tag '" + j->tag + "'");
      }
    }
  }
  double diffusivity = 0.0;
  for (const auto& inj : faults_.injections) {
    if (const auto* c = std::get_if<fault::AxialConduction>(&inj)) diffusivity += c->diffusivity;
  }
  // Builds the plant once so stability and bar geometry fail early.
  Plant probe(furnace_, diffusivity);
  for (const auto& ev : schedule_.timeline) {
    if (ev.insert_bar) {
      PlantBar b = make_plant_bar(*ev.insert_bar, furnace_.layout.ambient_temp);
      if (diffusivity * furnace_.dt / (b.seg_len * b.seg_len) >= 0.5) {
        throw Error(ErrorCode::kInvalidParameter, "axial conduction is unstable for an inserted bar");
      }
    }
  }
}

EmissionResult PlantEmulator::run(const RecordSink& sink, bool log_truth) const {
  const auto& layout = furnace_.layout;
  const TickClock clock(furnace_.dt, schedule_.start_ts);
  const std::int64_t last_tick = clock.ticks(schedule_.duration, "duration");

  double diffusivity = 0.0;
  double sigma = 0.0;
  double drop_prob = 0.0;
  std::vector<double> bias(layout.sensors.size(), 0.0);
  std::vector<std::pair<std::int64_t, const fault::PowerStep*>> steps;
  for (const auto& inj : faults_.injections) {
    if (const auto* c = std::get_if<fault::AxialConduction>(&inj)) diffusivity += c->diffusivity;
    if (const auto* n = std::get_if<fault::MeasurementNoise>(&inj)) sigma = std::hypot(sigma, n->sigma);
    if (const auto* l = std::get_if<fault::TelemetryLoss>(&inj)) drop_prob = std::max(drop_prob, l->drop_prob);
    if (const auto* b = std::get_if<fault::SensorBias>(&inj)) bias[*layout.sensor_index(b->sensor)] += b->offset;
    if (const auto* s = std::get_if<fault::PowerStep>(&inj)) steps.emplace_back(clock.ticks(s->at, "at"), s);
  }

  // Emission plan in per-tick order: powers, temps, speed, holding, back, head.
  std::vector<TagPlan> plan;
  const auto& periods = schedule_.periods;
  auto add = [&](Tag t, TagKind kind, std::size_t index, double period) {
    plan.push_back({std::move(t), kind, index, clock.ticks(period, "tag period"), 0, false});
  };
  for (int z = 1; z <= layout.zones; ++z) {
    add(tag::ZonePower{z}, TagKind::kPower, static_cast<std::size_t>(z - 1), periods.power);
  }
  for (std::size_t s = 0; s < layout.sensors.size(); ++s) {
    add(tag::SensorTemp{layout.sensors[s].id}, TagKind::kTemp, s, periods.temp);
  }
  add(tag::Speed{}, TagKind::kSpeed, 0, periods.speed);
  add(tag::HoldingIndicator{}, TagKind::kHolding, 0, periods.holding);
  add(tag::BackPosition{}, TagKind::kBack, 0, periods.position);
  add(tag::HeadPosition{}, TagKind::kHead, 0, periods.position);
  for (const auto& inj : faults_.injections) {
    const auto* j = std::get_if<fault::UpdateJitter>(&inj);
    if (j == nullptr) continue;
    for (auto& p : plan) {
      if (pattern_matches(j->tag, render_tag(p.tag))) {
        p.period = clock.ticks(j->period, "jitter period");
        p.phase = clock.ticks(j->phase, "jitter phase");
      }
    }
  }

  std::mt19937_64 loss_rng(seed_);
  std::mt19937_64 noise_rng(seed_ ^ 0x9e3779b97f4a7c15ULL);
  std::bernoulli_distribution drop(drop_prob);
  std::normal_distribution<double> noise(0.0, 1.0);

  Plant plant(furnace_, diffusivity);
  plant.sample_sensors();
  Motion motion;
  auto set_mode = [&](const OperatingMode& m, std::int64_t k) {
    motion.mode = m;
    motion.holding_start = k;
    if (const auto* h = std::get_if<HoldingMode>(&m)) {
      motion.reversal_ticks = clock.ticks(h->reversal_interval, "reversal interval");
    }
  };
  set_mode(furnace_.mode, 0);

  EmissionResult result;
  std::size_t next_event = 0;
  const auto& timeline = schedule_.timeline;
  for (std::int64_t k = 0; k <= last_tick; ++k) {
    bool powers_changed = false;
    bool mode_changed = false;
    while (next_event < timeline.size() && clock.ticks(timeline[next_event].at, "at") <= k) {
      const auto& ev = timeline[next_event++];
      if (ev.powers) {
        plant.set_powers(*ev.powers);
        powers_changed = true;
      }
      if (ev.mode) {
        set_mode(*ev.mode, k);
        mode_changed = true;
      }
      if (ev.insert_bar) plant.add_bar(*ev.insert_bar);
    }
    for (const auto& [tick, step] : steps) {
      if (tick == k) plant.set_zone_power(static_cast<std::size_t>(step->zone - 1), step->to);
    }
    const bool flipped = motion.flips_at(k);
    const double velocity = motion.velocity(k);
    const double ts = clock.time(k);

    if (log_truth) {
      result.truth.push_back({ts, plant.head(), plant.back(), plant.truth_sensors(), plant.powers()});
    }

    for (auto& p : plan) {
      bool due = k >= p.phase && (k - p.phase) % p.period == 0;
      if (schedule_.publish_on_change) {
        if (p.kind == TagKind::kPower && powers_changed) due = true;
        if ((p.kind == TagKind::kSpeed || p.kind == TagKind::kHolding) && mode_changed) due = true;
        if (p.kind == TagKind::kSpeed && flipped) due = true;
      }
      if (!due) continue;
      double value = 0.0;
      switch (p.kind) {
        case TagKind::kPower:
          value = plant.powers()[p.index];
          break;
        case TagKind::kTemp:
          value = plant.truth_sensors()[p.index] + bias[p.index];
          if (sigma > 0.0) value += sigma * noise(noise_rng);
          break;
        case TagKind::kSpeed:
          value = velocity;
          break;
        case TagKind::kHolding:
          value = is_holding(motion.mode) ? 1.0 : 0.0;
          break;
        case TagKind::kBack:
          if (!plant.back()) continue;
          value = *plant.back();
          break;
        case TagKind::kHead:
          if (!plant.head()) continue;
          value = *plant.head();
          break;
      }
      if (drop_prob > 0.0 && drop(loss_rng)) {
        ++result.dropped;
        continue;
      }
      ++result.emitted;
      if (sink) sink(TelemetryRecord{ts, p.tag, value});
    }

    if (k == last_tick) break;
    plant.step(velocity);
    ++result.ticks;
  }
  return result;
}

std::vector<TelemetryRecord> PlantEmulator::records() const {
  std::vector<TelemetryRecord> out;
  run([&](const TelemetryRecord& r) { out.push_back(r); });
  return out;
}

}  // namespace twintest
