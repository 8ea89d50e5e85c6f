#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>

#include "twintest/furnace.hpp"
#include "twintest/snapshot.hpp"
#include "twintest/telemetry.hpp"
#include "twintest/verdict.hpp"

namespace twintest {

/// How the DT is initialised for each snapshot pair.
enum class SeedPolicy {
  /// Every pair starts from the interpolated sensor profile of Dataset1.
  kInterpolate,
  /// The first pair is seeded by interpolation; later pairs reuse the DT's
  /// own bar temperatures from the previous pair, re-synchronised to
  /// Dataset1's position, powers and motion. Skipped pairs are bridged by
  /// running the DT across them; it is re-seeded by interpolation only when
  /// that fails or its head drifts beyond the position tolerance.
  kCarryForward,
};

std::string_view to_string(SeedPolicy policy);
std::optional<SeedPolicy> parse_seed_policy(std::string_view text);

struct OracleConfig {
  double temp_tolerance = 5.0;       // degC
  double position_tolerance = 2.0;   // mm
  double min_speed = 0.5;            // mm/s
  double max_gap = 30.0;             // s
  double dt_step = 0.1;              // s
  SeedPolicy seed_policy = SeedPolicy::kCarryForward;

  void validate() const;
};

/// Simulation time for a pair from the head displacement and Dataset1's
/// speed, or the reason the pair cannot be simulated.
std::variant<double, SkipReason> simulation_time(const Snapshot& snap1, const Snapshot& snap2,
                                                 const OracleConfig& config);

/// Seeds a fresh DT from `snap1` by interpolation, runs it for the
/// simulation time and compares it with `snap2`.
Verdict evaluate_pair(const Snapshot& snap1, const Snapshot& snap2, const FurnaceConfig& furnace,
                      const OracleConfig& config);

/// Runs an already seeded DT for the pair and fills the verdict. The DT is
/// left at its final state.
Verdict evaluate_seeded(FurnaceSim& dt, const Snapshot& snap1, const Snapshot& snap2,
                        double t_simulation, const OracleConfig& config);

struct OracleSummary {
  std::size_t snapshots = 0;
  std::size_t verdicts = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::size_t cold_seeds = 0;
  std::map<SkipReason, std::size_t> skip_reasons;

  double pass_rate() const {
    const auto judged = passed + failed;
    return judged == 0 ? 0.0 : static_cast<double>(passed) / static_cast<double>(judged);
  }
  bool warm_up_only() const { return snapshots <= 1; }
};

/// Dataset1/Dataset2 rotation over a snapshot sequence.
class StreamOracle {
 public:
  StreamOracle(FurnaceConfig furnace, OracleConfig config);

  /// Feeds the next completed snapshot; returns a verdict once a pair exists.
  std::optional<Verdict> push(const Snapshot& snap);

  const OracleSummary& summary() const { return summary_; }
  const FurnaceConfig& furnace() const { return furnace_; }
  const OracleConfig& config() const { return config_; }

 private:
  std::optional<FurnaceSim> seed_pair(const Snapshot& snap1, Verdict& verdict);
  void bridge_to(const Snapshot& snap1);
  void forget();

  FurnaceConfig furnace_;
  OracleConfig config_;
  std::optional<Snapshot> dataset1_;
  std::optional<FurnaceSim> memory_;  // DT left by the last evaluated pair
  std::optional<Snapshot> memory_snap_;  // the snapshot memory_ stands at
  OracleSummary summary_;
};

struct StreamSummary {
  OracleSummary oracle;
  std::size_t records = 0;
  std::size_t parse_errors = 0;
  std::size_t rejected_snapshots = 0;
  std::optional<std::string> io_error;
};

using VerdictSink = std::function<void(const Verdict&)>;

/// Pulls records until end of stream, assembling snapshots and forwarding
/// every verdict to `sink`. I/O errors end the stream with a partial summary.
StreamSummary run_stream(RecordSource& source, SnapshotAssembler& assembler, StreamOracle& oracle,
                         const VerdictSink& sink);

}  // namespace twintest
