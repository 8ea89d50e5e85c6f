// twintest: simulate, emit, test and report for the induction furnace twin.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "twintest/config.hpp"
#include "twintest/emulator.hpp"
#include "twintest/error.hpp"
#include "twintest/oracle.hpp"
#include "twintest/snapshot.hpp"
#include "twintest/stats.hpp"
#include "twintest/telemetry.hpp"
#include "twintest/verdict.hpp"

namespace fs = std::filesystem;
using namespace twintest;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::string oracle_config;
  std::string source;
  std::string out;
  std::string faults;
  std::string serve;
  std::string log;
  std::uint64_t seed = 1;
  std::optional<double> duration;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

// Replaces the file in one rename so readers never see a partial summary.
void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    auto out = open_out(tmp);
    out << text << '\n';
  }
  fs::rename(tmp, path);
}

AnalysisConfig analysis_config(const Options& o) {
  return o.oracle_config.empty() ? AnalysisConfig{} : load_analysis_config(o.oracle_config);
}

int cmd_simulate(const Options& o) {
  const LineConfig line = load_line_config(o.config);
  const double duration = o.duration.value_or(60.0);
  if (!(duration > 0.0)) throw Error(ErrorCode::kInvalidParameter, "--duration must be positive");
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);

  FurnaceSim sim = line.furnace.make_sim(HistoryOptions{false, false});
  auto sensors = open_out(dir / "sensors.csv");
  auto exits = open_out(dir / "exits.csv");
  sensors << "time";
  for (const auto& s : sim.layout().sensors) sensors << ',' << s.id.name();
  sensors << '\n';
  exits << "time,head_temp\n";

  const auto steps = static_cast<std::size_t>(std::llround(duration / line.furnace.dt));
  for (std::size_t k = 0; k < steps; ++k) {
    for (const auto& e : sim.advance(line.furnace.dt)) {
      exits << format_number(e.time) << ',' << format_number(e.head_temp) << '\n';
    }
    sensors << format_number(sim.state().clock);
    for (double v : sim.state().sensor_values) sensors << ',' << format_number(v);
    sensors << '\n';
  }
  std::cerr << "simulated " << steps << " steps, " << sim.state().exit_log.size() << " bar exits\n";
  return kExitOk;
}

std::uint16_t parse_serve_port(const std::string& text) {
  if (!text.starts_with("tcp:")) throw Error(ErrorCode::kConfigError, "--serve expects tcp:<port>");
  try {
    const int port = std::stoi(text.substr(4));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    return static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfigError, "bad port in --serve " + text);
  }
}

int cmd_emit(const Options& o) {
  LineConfig line = load_line_config(o.config);
  if (o.duration) {
    // A shortened run drops the events it no longer reaches.
    line.scenario.duration = *o.duration;
    std::erase_if(line.scenario.timeline, [&](const TimelineEvent& ev) { return ev.at > *o.duration; });
  }
  const FaultSpec faults = o.faults.empty() ? FaultSpec{} : load_faults(o.faults);
  const PlantEmulator plant(line.furnace, line.scenario, faults, o.seed);

  EmissionResult result;
  if (!o.serve.empty()) {
    LineServer server(parse_serve_port(o.serve));
    std::cerr << "serving on port " << server.port() << ", waiting for a client\n";
    server.accept_client();
    result = plant.run([&](const TelemetryRecord& r) { server.write_line(render_record(r)); });
    server.close_client();
  } else if (o.out.empty() || o.out == "-") {
    result = plant.run([&](const TelemetryRecord& r) { std::cout << render_record(r) << '\n'; });
    std::cout.flush();
  } else {
    auto out = open_out(o.out);
    result = plant.run([&](const TelemetryRecord& r) { out << render_record(r) << '\n'; });
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "write failed on " + o.out);
  }
  std::cerr << "emitted " << result.emitted << " records (" << result.dropped << " dropped) over "
            << result.ticks << " steps\n";
  return kExitOk;
}

std::string test_summary(const VerdictStats& stats, const StreamSummary& s, const SnapshotAssembler& asm_) {
  auto j = nlohmann::ordered_json::parse(summary_json(stats));
  nlohmann::ordered_json stream;
  stream["records"] = s.records;
  stream["parse_errors"] = s.parse_errors;
  stream["snapshots"] = s.oracle.snapshots;
  stream["rejected_snapshots"] = asm_.rejected_count();
  stream["stale_positions"] = asm_.stale_positions();
  stream["verdicts"] = s.oracle.verdicts;
  stream["cold_seeds"] = s.oracle.cold_seeds;
  nlohmann::ordered_json reasons = nlohmann::ordered_json::object();
  for (const auto& [reason, n] : s.oracle.skip_reasons) reasons[std::string(to_string(reason))] = n;
  stream["skip_reasons"] = std::move(reasons);
  stream["warm_up_only"] = s.oracle.warm_up_only();
  if (s.io_error) stream["io_error"] = *s.io_error;
  j["stream"] = std::move(stream);
  return j.dump(2);
}

int cmd_test(const Options& o) {
  const LineConfig line = load_line_config(o.config);
  const AnalysisConfig analysis = analysis_config(o);
  if (o.source.empty()) throw Error(ErrorCode::kConfigError, "--source is required");
  const TagSchema schema(line.furnace.layout);
  auto source = open_source(SourceSpec::parse(o.source), schema);

  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  auto log = open_out(dir / "verdicts.jsonl");
  const fs::path summary_path = dir / "summary.json";

  SnapshotAssembler assembler(line.furnace.layout, analysis.pair_window);
  StreamOracle oracle(line.furnace, analysis.oracle);
  VerdictStats stats(analysis.temp_bin_width, analysis.position_bin_width);

  StreamSummary live;
  auto last_flush = std::chrono::steady_clock::now();
  auto publish = [&] {
    live.oracle = oracle.summary();
    live.parse_errors = source->parse_errors();
    log.flush();
    write_atomic(summary_path, test_summary(stats, live, assembler));
    last_flush = std::chrono::steady_clock::now();
  };

  const StreamSummary summary = run_stream(*source, assembler, oracle, [&](const Verdict& v) {
    log << render_verdict(v) << '\n';
    stats.add(v);
    if (std::chrono::steady_clock::now() - last_flush > std::chrono::seconds(1)) publish();
  });
  live = summary;
  publish();
  if (!log) throw Error(ErrorCode::kIoError, "write failed on verdict log");

  for (const auto& f : source->failures()) {
    std::cerr << "line " << f.line << ": " << f.message << '\n';
  }
  const auto& os = summary.oracle;
  std::cerr << summary.records << " records, " << os.snapshots << " snapshots, " << os.verdicts
            << " verdicts: " << os.passed << " passed, " << os.failed << " failed, " << os.skipped
            << " skipped\n";
  if (os.warm_up_only()) std::cerr << "warm-up only: fewer than two snapshots\n";
  for (const auto& [name, f] : stats.fields()) {
    if (f.failed > 0) std::cerr << "  " << name << " failed " << f.failed << " times\n";
  }
  if (summary.io_error) {
    std::cerr << "error: " << *summary.io_error << '\n';
    return kExitConfig;
  }
  return os.failed > 0 ? kExitFailed : kExitOk;
}

int cmd_report(const Options& o) {
  const AnalysisConfig analysis = analysis_config(o);
  std::ifstream in(o.log, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + o.log);
  VerdictStats stats(analysis.temp_bin_width, analysis.position_bin_width);
  std::string line;
  std::size_t n = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      stats.add(parse_verdict(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedLine, o.log + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kMalformedLine, "verdict log " + o.log + " is empty");

  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  for (const auto& [name, f] : stats.fields()) {
    auto csv = open_out(dir / (name + ".csv"));
    write_histogram_csv(csv, f.histogram);
    if (name != kPositionField) {
      std::cout << name << " prob_between(-4,5) = " << format_number(f.histogram.prob_between(-4.0, 5.0))
                << '\n';
    }
  }
  write_atomic(dir / "summary.json", summary_json(stats));
  std::cerr << n << " verdicts, " << stats.fields().size() << " fields\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital twin test harness for a continuous induction furnace line"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "Run the twin alone and log sensors and exits");
  simulate->add_option("--config", o.config, "Line config (JSON)")->required();
  simulate->add_option("--duration", o.duration, "Seconds to simulate (default 60)");
  simulate->add_option("--out", o.out, "Output directory for sensors.csv and exits.csv");

  auto* emit = app.add_subcommand("emit", "Run the plant emulator and write telemetry");
  emit->add_option("--config", o.config, "Line config with scenario (JSON)")->required();
  emit->add_option("--faults", o.faults, "Fault injection file (JSON)");
  emit->add_option("--seed", o.seed, "Random seed for noise and loss");
  emit->add_option("--duration", o.duration, "Override the scenario duration (s)");
  auto* emit_out = emit->add_option("--out", o.out, "Telemetry file, '-' for stdout");
  emit->add_option("--serve", o.serve, "Serve telemetry to one client on tcp:<port>")->excludes(emit_out);

  auto* test = app.add_subcommand("test", "Test the twin against a telemetry source");
  test->add_option("--config", o.config, "Line config (JSON)")->required();
  test->add_option("--oracle-config", o.oracle_config, "Oracle tolerances (JSON)");
  test->add_option("--source", o.source, "file:<path> | tcp:<host:port> | paced:<path>:<factor>")->required();
  test->add_option("--out", o.out, "Output directory for verdicts.jsonl and summary.json");

  auto* report = app.add_subcommand("report", "Error distributions from a verdict log");
  report->add_option("log", o.log, "Verdict log (verdicts.jsonl)")->required();
  report->add_option("--oracle-config", o.oracle_config, "Histogram bin widths (JSON)");
  report->add_option("--out", o.out, "Output directory for CSVs and summary.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(o);
    if (emit->parsed()) return cmd_emit(o);
    if (test->parsed()) return cmd_test(o);
    return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
