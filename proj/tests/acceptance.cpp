// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "twintest/config.hpp"
#include "twintest/emulator.hpp"
#include "twintest/error.hpp"
#include "twintest/oracle.hpp"
#include "twintest/snapshot.hpp"
#include "twintest/stats.hpp"
#include "twintest/telemetry.hpp"

namespace fs = std::filesystem;
using namespace twintest;

namespace {

const fs::path kConfigs = TWINTEST_CONFIG_DIR;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class VectorSource : public RecordSource {
 public:
  explicit VectorSource(const std::vector<TelemetryRecord>& records) : records_(records) {}
  std::optional<TelemetryRecord> next() override {
    if (pos_ >= records_.size()) return std::nullopt;
    return records_[pos_++];
  }

 private:
  const std::vector<TelemetryRecord>& records_;
  std::size_t pos_ = 0;
};

struct Run {
  std::vector<Snapshot> snapshots;
  std::vector<Verdict> verdicts;
  StreamSummary summary;
  VerdictStats stats;
  EmissionResult emission;
  std::size_t stale_positions = 0;
  double seconds = 0.0;
};

Run run_scenario(const LineConfig& line, const FaultSpec& faults, std::uint64_t seed,
                 const AnalysisConfig& analysis = {}) {
  Run run;
  const auto t0 = Clock::now();
  PlantEmulator plant(line.furnace, line.scenario, faults, seed);
  std::vector<TelemetryRecord> records;
  run.emission = plant.run([&](const TelemetryRecord& r) { records.push_back(r); }, true);

  VectorSource source(records);
  SnapshotAssembler assembler(line.furnace.layout, analysis.pair_window);
  StreamOracle oracle(line.furnace, analysis.oracle);
  run.stats = VerdictStats(analysis.temp_bin_width, analysis.position_bin_width);
  StreamSummary summary;
  try {
    while (auto r = source.next()) {
      ++summary.records;
      if (auto snap = assembler.ingest(*r)) {
        run.snapshots.push_back(*snap);
        if (auto v = oracle.push(*snap)) {
          run.stats.add(*v);
          run.verdicts.push_back(std::move(*v));
        }
      }
    }
  } catch (const Error& e) {
    summary.io_error = e.what();
  }
  summary.oracle = oracle.summary();
  summary.parse_errors = source.parse_errors();
  summary.rejected_snapshots = assembler.rejected_count();
  run.summary = summary;
  run.stale_positions = assembler.stale_positions();
  run.seconds = seconds_since(t0);
  return run;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::size_t judged(const Run& r) { return r.summary.oracle.passed + r.summary.oracle.failed; }

// Mean |temperature error| over the selected sensors, on pairs judged in
// both runs.
std::pair<double, double> paired_mean_abs(const Run& baseline, const Run& faulty,
                                          const std::function<bool(SensorId)>& select, std::size_t& pairs) {
  std::map<std::pair<double, double>, const Verdict*> base;
  for (const auto& v : baseline.verdicts) {
    if (!v.skipped) base[{v.ts1, v.ts2}] = &v;
  }
  double sum_base = 0.0;
  double sum_fault = 0.0;
  std::size_t n = 0;
  pairs = 0;
  for (const auto& v : faulty.verdicts) {
    if (v.skipped) continue;
    auto it = base.find({v.ts1, v.ts2});
    if (it == base.end()) continue;
    ++pairs;
    for (const auto& [id, err] : v.sensor_errors) {
      if (!select(id)) continue;
      auto b = it->second->sensor_errors.find(id);
      if (b == it->second->sensor_errors.end()) continue;
      sum_fault += std::abs(err);
      sum_base += std::abs(b->second);
      ++n;
    }
  }
  if (n == 0) return {0.0, 0.0};
  return {sum_base / static_cast<double>(n), sum_fault / static_cast<double>(n)};
}

bool histogram_sound(const ErrorHistogram& h, std::string& why) {
  double area = 0.0;
  for (const auto& [c, d] : h.pdf()) area += d * h.bin_width();
  if (std::abs(area - 1.0) > 1e-12) {
    why = "pdf area " + fmt(area, 17);
    return false;
  }
  double prev = 0.0;
  const double lo = h.min() - 2.0 * h.bin_width();
  const double hi = h.max() + 2.0 * h.bin_width();
  const double step = (hi - lo) / 2000.0;
  for (int i = 0; i <= 2000; ++i) {
    const double c = h.cdf_at(lo + step * i);
    if (c < prev || c < 0.0 || c > 1.0) {
      why = "cdf not monotone";
      return false;
    }
    prev = c;
  }
  if (h.cdf_at(hi) != 1.0) {
    why = "cdf does not reach 1";
    return false;
  }
  return true;
}

// Perfect twin, normal and holding modes.
Outcome criterion1(const Run& clean) {
  double max_temp = 0.0;
  double max_pos = 0.0;
  for (const auto& v : clean.verdicts) {
    if (v.skipped) continue;
    max_pos = std::max(max_pos, std::abs(v.position_error));
    for (const auto& [id, e] : v.sensor_errors) max_temp = std::max(max_temp, std::abs(e));
  }
  std::size_t holding = 0;
  for (const auto& s : clean.snapshots) holding += s.holding ? 1 : 0;
  const auto& o = clean.summary.oracle;
  const bool pass = clean.snapshots.size() >= 1000 && judged(clean) >= 999 && o.failed == 0 && holding > 0 &&
                    holding < clean.snapshots.size() && max_temp <= 1e-6 && max_pos <= 1e-6 && clean.seconds <= 30.0;
  return {pass, std::to_string(clean.snapshots.size()) + " snapshots (" + std::to_string(holding) +
                    " holding), " + std::to_string(o.passed) + "/" + std::to_string(judged(clean)) +
                    " pass, max |dT| " + fmt(max_temp) + " C, max |dx| " + fmt(max_pos) + " mm, " +
                    fmt(clean.seconds, 3) + " s"};
}

// Sensor bias localisation.
Outcome criterion2(const Run& biased) {
  const SensorId target{2, 2};
  const std::string target_field = sensor_field(target);
  std::size_t n = 0;
  std::size_t flagged = 0;
  double sum = 0.0;
  std::size_t with_error = 0;
  std::map<std::string, std::size_t> others;
  for (const auto& v : biased.verdicts) {
    if (v.skipped) continue;
    ++n;
    for (const auto& f : v.failing_fields) {
      if (f == target_field) {
        ++flagged;
      } else {
        ++others[f];
      }
    }
    if (auto it = v.sensor_errors.find(target); it != v.sensor_errors.end()) {
      sum += it->second;
      ++with_error;
    }
  }
  const double rate = n == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(n);
  const double mean = with_error == 0 ? 0.0 : sum / static_cast<double>(with_error);
  double worst_other = 0.0;
  std::string worst_name = "none";
  for (const auto& [name, count] : others) {
    const double r = static_cast<double>(count) / static_cast<double>(n);
    if (r > worst_other) {
      worst_other = r;
      worst_name = name;
    }
  }
  const bool pass = n > 0 && rate >= 0.95 && std::abs(mean + 20.0) <= 1.0 && worst_other <= 0.05;
  return {pass, target_field + " flagged in " + fmt(100.0 * rate) + "% of " + std::to_string(n) +
                    " verdicts, mean error " + fmt(mean) + " C, worst other " + worst_name + " " +
                    fmt(100.0 * worst_other) + "%"};
}

// Power step in zone 3.
Outcome criterion3(const Run& clean, const Run& stepped) {
  std::size_t pairs = 0;
  auto [base, fault] = paired_mean_abs(clean, stepped, [](SensorId id) { return id.zone >= 3; }, pairs);
  const bool pass = pairs >= 200 && fault > base;
  return {pass, "zone 3+ mean |dT| " + fmt(base) + " -> " + fmt(fault) + " C over " + std::to_string(pairs) +
                    " paired verdicts"};
}

// Axial conduction.
Outcome criterion4(const Run& clean, const Run& conducting) {
  std::size_t pairs = 0;
  auto [base, fault] = paired_mean_abs(clean, conducting, [](SensorId id) { return id.zone == 1; }, pairs);
  const bool pass = pairs > 0 && fault > base;
  return {pass, "zone 1 mean |dT| " + fmt(base) + " -> " + fmt(fault) + " C over " + std::to_string(pairs) +
                    " paired verdicts"};
}

Snapshot kinematic(double ts, double head, double speed) {
  Snapshot s;
  s.ts = ts;
  s.head = head;
  s.speed = speed;
  return s;
}

// Simulation time from displacement and speed.
Outcome criterion5() {
  OracleConfig cfg;
  cfg.min_speed = 0.5;
  auto forward = simulation_time(kinematic(0.0, 500.0, 50.0), kinematic(7.0, 600.0, 50.0), cfg);
  auto backward = simulation_time(kinematic(0.0, 600.0, -50.0), kinematic(7.0, 500.0, -50.0), cfg);
  auto wrong = simulation_time(kinematic(0.0, 500.0, -50.0), kinematic(7.0, 600.0, -50.0), cfg);
  auto slow = simulation_time(kinematic(10.0, 500.0, 0.25), kinematic(12.5, 510.0, 0.25), cfg);
  const bool ok_forward = std::holds_alternative<double>(forward) && std::get<double>(forward) == 2.0;
  const bool ok_backward = std::holds_alternative<double>(backward) && std::get<double>(backward) == 2.0;
  const bool ok_wrong =
      std::holds_alternative<SkipReason>(wrong) && std::get<SkipReason>(wrong) == SkipReason::kMotionInconsistent;
  const bool ok_slow = std::holds_alternative<double>(slow) && std::get<double>(slow) == 2.5;
  return {ok_forward && ok_backward && ok_wrong && ok_slow,
          std::string("500->600 @50: ") + (ok_forward ? "2 s" : "wrong") + ", 600->500 @-50: " +
              (ok_backward ? "2 s" : "wrong") + ", sign mismatch: " + (ok_wrong ? "skip" : "no skip") +
              ", slow fallback: " + (ok_slow ? "2.5 s" : "wrong")};
}

// Energy conservation with cooling off.
Outcome criterion6() {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> kw(0.0, 500.0);
  const auto layout = FurnaceLayout::standard();
  ThermalParams thermal{{0.95, 0.85, 0.7, 0.75, 0.6}, 0.0};
  std::vector<BarPlacement> bars{{BarSpec{6000.0, 100.0}, 5000.0, std::nullopt},
                                 {BarSpec{4000.0, 80.0, 7800.0, 460.0, 20.0}, -1200.0, 300.0}};
  FurnaceSim sim(layout, thermal, bars, NormalMode{0.83}, std::vector<double>(5, 0.0),
                 HistoryOptions{false, false});
  auto enthalpy = [&] {
    double h = 0.0;
    for (const auto& b : sim.state().bars) {
      for (double t : b.segment_temps) h += b.spec.segment_capacity() * t;
    }
    return h;
  };
  const double dt = 0.1;
  const double h0 = enthalpy();
  double delivered = 0.0;
  for (int step = 0; step < 10000; ++step) {
    if (step % 250 == 0) {
      std::vector<double> p(5);
      for (double& v : p) v = kw(rng);
      sim.set_zone_powers(p);
    }
    sim.movement_update(dt);
    for (const auto& b : sim.state().bars) {
      for (const auto& c : layout.coils) {
        const double overlap = std::min(c.end_pos, b.head_pos) - std::max(c.start_pos, b.tail_pos());
        if (overlap <= 0.0) continue;
        const auto z = static_cast<std::size_t>(c.zone - 1);
        delivered += thermal.heating_efficiency[z] * sim.state().zone_powers[z] * 1000.0 /
                     static_cast<double>(layout.coils_per_zone) * (overlap / c.length()) * dt;
      }
    }
    sim.temperature_update(dt);
  }
  const double gained = enthalpy() - h0;
  const double rel = std::abs(gained - delivered) / delivered;
  return {delivered > 0.0 && rel <= 1e-9,
          "10000 steps, gained " + fmt(gained, 10) + " J vs delivered " + fmt(delivered, 10) + " J, rel " + fmt(rel)};
}

// CDF-difference arithmetic and histogram soundness.
Outcome criterion7(const std::vector<const Run*>& runs) {
  ErrorHistogram h(1.0);
  for (int i = 0; i < 10; ++i) h.record(-4.5);
  for (int i = 0; i < 85; ++i) h.record(0.5);
  for (int i = 0; i < 5; ++i) h.record(5.5);
  const bool arithmetic = h.cdf_at(5.0) == 0.95 && h.cdf_at(-4.0) == 0.10 && h.prob_between(-4.0, 5.0) == 0.85;
  std::size_t checked = 0;
  std::string why;
  for (const Run* r : runs) {
    for (const auto& [name, f] : r->stats.fields()) {
      if (f.histogram.total() == 0) continue;
      if (!histogram_sound(f.histogram, why)) {
        return {false, name + ": " + why};
      }
      ++checked;
    }
  }
  return {arithmetic && checked > 0, "prob_between(-4,5) = " + fmt(h.prob_between(-4.0, 5.0), 15) + "; " +
                                         std::to_string(checked) + " histograms monotone and normalised"};
}

// Holding-mode kinematics.
Outcome criterion8(const Run& clean) {
  const double speed = 10.0;
  const double reversal = 10.0;
  const double dt = 0.1;
  FurnaceSim sim(FurnaceLayout::standard(), ThermalParams::uniform(5, 0.75, 0.8),
                 std::vector<BarPlacement>{{BarSpec{2000.0, 100.0}, 6000.0, std::nullopt}},
                 HoldingMode{speed, reversal, +1}, std::vector<double>(5, 0.0), HistoryOptions{false, false});
  const double h0 = sim.state().bars.front().head_pos;
  double worst = 0.0;
  const int steps = static_cast<int>(std::lround(2.0 * reversal / dt));
  for (int k = 1; k <= steps; ++k) {
    sim.movement_update(dt);
    const double t = k * dt;
    const double leg = std::fmod(t, 2.0 * reversal);
    const double expected = leg <= reversal ? speed * leg : speed * (2.0 * reversal - leg);
    worst = std::max(worst, std::abs(sim.state().bars.front().head_pos - h0 - expected));
  }
  const double net = std::abs(sim.state().bars.front().head_pos - h0);

  // Assembled holding snapshots: speed sign follows the true direction.
  std::map<double, double> truth_head;
  for (const auto& t : clean.emission.truth) {
    if (t.head) truth_head[t.ts] = *t.head;
  }
  std::size_t backward = 0;
  std::size_t holding = 0;
  std::size_t mismatched = 0;
  for (const auto& s : clean.snapshots) {
    if (!s.holding) continue;
    ++holding;
    auto it = truth_head.find(s.ts);
    if (it == truth_head.end() || std::next(it) == truth_head.end()) continue;
    const double moved = std::next(it)->second - it->second;
    if (s.speed < 0.0) ++backward;
    if ((moved < 0.0) != (s.speed < 0.0)) ++mismatched;
  }
  const bool pass = worst <= 1e-9 && net <= 1e-9 && holding > 0 && backward > 0 && mismatched == 0;
  return {pass, "triangle deviation " + fmt(worst) + " mm, net " + fmt(net) + " mm; " + std::to_string(backward) +
                    "/" + std::to_string(holding) + " holding snapshots backward, " + std::to_string(mismatched) +
                    " with wrong speed sign"};
}

// Telemetry loss on an entering bar.
Outcome criterion9(const std::vector<Run>& lossy) {
  std::size_t judged_total = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::size_t dropped = 0;
  std::size_t stale = 0;
  std::size_t long_pairs = 0;
  bool errors = false;
  for (const auto& r : lossy) {
    judged_total += judged(r);
    failed += r.summary.oracle.failed;
    skipped += r.summary.oracle.skipped;
    dropped += r.emission.dropped;
    stale += r.stale_positions;
    errors = errors || r.summary.io_error.has_value() || r.summary.oracle.warm_up_only();
    for (const auto& v : r.verdicts) long_pairs += v.ts2 - v.ts1 > 1.5 ? 1 : 0;
  }
  std::string reasons;
  for (const auto& r : lossy) {
    for (const auto& [reason, n] : r.summary.oracle.skip_reasons) {
      reasons += " " + std::string(to_string(reason)) + "=" + std::to_string(n);
    }
  }
  const bool pass = !errors && judged_total > 0 && failed == 0 && dropped > 0;
  return {pass, std::to_string(lossy.size()) + " seeds, " + std::to_string(dropped) + " records dropped, " +
                    std::to_string(judged_total - failed) + "/" + std::to_string(judged_total) + " pass, " +
                    std::to_string(skipped) + " skipped" + (reasons.empty() ? "" : " (" + reasons.substr(1) + ")") +
                    ", " + std::to_string(long_pairs) + " multi-second pairs, " + std::to_string(stale) +
                    " stale positions"};
}

// File replay throughput.
Outcome criterion10() {
  LineConfig line = load_line_config(kConfigs / "line.json");
  line.scenario.periods.temp = 0.1;
  const fs::path path = fs::temp_directory_path() / "twintest_throughput.jsonl";
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    PlantEmulator(line.furnace, line.scenario, {}, 1).run([&](const TelemetryRecord& r) {
      out << render_record(r) << '\n';
    });
  }
  const auto t0 = Clock::now();
  const TagSchema schema(line.furnace.layout);
  FileReplaySource source(path.string(), schema);
  SnapshotAssembler assembler(line.furnace.layout);
  StreamOracle oracle(line.furnace, OracleConfig{});
  VerdictStats stats;
  auto summary = run_stream(source, assembler, oracle, [&](const Verdict& v) { stats.add(v); });
  const double seconds = seconds_since(t0);
  fs::remove(path);
  const bool pass = summary.records >= 100000 && seconds <= 10.0 && summary.parse_errors == 0 &&
                    summary.oracle.verdicts > 0;
  return {pass, std::to_string(summary.records) + " records, " + std::to_string(summary.oracle.verdicts) +
                    " verdicts in " + fmt(seconds, 3) + " s (" +
                    fmt(static_cast<double>(summary.records) / seconds, 3) + " records/s)"};
}

}  // namespace

int main() {
  try {
    const LineConfig line = load_line_config(kConfigs / "line.json");
    const LineConfig entering = load_line_config(kConfigs / "entering.json");
    const auto faults = [](const char* name) { return load_faults(kConfigs / "faults" / name); };
    const std::uint64_t seed = 1;

    const Run clean = run_scenario(line, {}, seed);
    const Run biased = run_scenario(line, faults("sensor_bias.json"), seed);
    const Run stepped = run_scenario(line, faults("power_step.json"), seed);
    const Run conducting = run_scenario(line, faults("conduction.json"), seed);
    std::vector<Run> lossy;
    for (std::uint64_t s = 1; s <= 4; ++s) lossy.push_back(run_scenario(entering, faults("lossy.json"), s));

    std::vector<const Run*> all{&clean, &biased, &stepped, &conducting};
    for (const auto& r : lossy) all.push_back(&r);

    const std::vector<std::pair<int, Outcome>> results{
        {1, criterion1(clean)},
        {2, criterion2(biased)},
        {3, criterion3(clean, stepped)},
        {4, criterion4(clean, conducting)},
        {5, criterion5()},
        {6, criterion6()},
        {7, criterion7(all)},
        {8, criterion8(clean)},
        {9, criterion9(lossy)},
        {10, criterion10()},
    };
    int failures = 0;
    for (const auto& [n, o] : results) {
      std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
      failures += o.pass ? 0 : 1;
    }
    std::fflush(stdout);
    return failures == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 2;
  }
}
