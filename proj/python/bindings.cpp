// Python module `twintest`: configuration loading, the plant emulator, the
// snapshot assembler, the oracle and error statistics.

#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "twintest/config.hpp"
#include "twintest/emulator.hpp"
#include "twintest/error.hpp"
#include "twintest/oracle.hpp"
#include "twintest/snapshot.hpp"
#include "twintest/stats.hpp"
#include "twintest/telemetry.hpp"
#include "twintest/verdict.hpp"

namespace py = pybind11;
using namespace twintest;

namespace {

/// Records from wire lines held in memory.
class LineListSource : public RecordSource {
 public:
  LineListSource(const std::vector<std::string>& lines, TagSchema schema)
      : lines_(lines), schema_(std::move(schema)) {}

  std::optional<TelemetryRecord> next() override {
    while (pos_ < lines_.size()) {
      if (auto r = accept_line(lines_[pos_++], schema_)) return r;
    }
    return std::nullopt;
  }

 private:
  const std::vector<std::string>& lines_;
  TagSchema schema_;
  std::size_t pos_ = 0;
};

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

py::dict oracle_summary_dict(const StreamSummary& s) {
  py::dict d;
  d["records"] = s.records;
  d["parse_errors"] = s.parse_errors;
  d["rejected_snapshots"] = s.rejected_snapshots;
  d["snapshots"] = s.oracle.snapshots;
  d["verdicts"] = s.oracle.verdicts;
  d["passed"] = s.oracle.passed;
  d["failed"] = s.oracle.failed;
  d["skipped"] = s.oracle.skipped;
  d["cold_seeds"] = s.oracle.cold_seeds;
  d["pass_rate"] = s.oracle.pass_rate();
  py::dict reasons;
  for (const auto& [reason, n] : s.oracle.skip_reasons) reasons[py::str(std::string(to_string(reason)))] = n;
  d["skip_reasons"] = reasons;
  d["io_error"] = s.io_error ? py::object(py::str(*s.io_error)) : py::object(py::none());
  return d;
}

py::tuple run_pipeline(RecordSource& source, const LineConfig& line, const AnalysisConfig& analysis) {
  SnapshotAssembler assembler(line.furnace.layout, analysis.pair_window);
  StreamOracle oracle(line.furnace, analysis.oracle);
  VerdictStats stats(analysis.temp_bin_width, analysis.position_bin_width);
  std::vector<Verdict> verdicts;
  const StreamSummary summary = run_stream(source, assembler, oracle, [&](const Verdict& v) {
    verdicts.push_back(v);
    stats.add(v);
  });
  py::dict d = oracle_summary_dict(summary);
  d["stale_positions"] = assembler.stale_positions();
  d["stats"] = json_loads(summary_json(stats));
  return py::make_tuple(verdicts, d);
}

std::vector<TelemetryRecord> parse_lines(const std::vector<std::string>& lines, const LineConfig& line) {
  LineListSource source(lines, TagSchema(line.furnace.layout));
  std::vector<TelemetryRecord> out;
  while (auto r = source.next()) out.push_back(*r);
  return out;
}

}  // namespace

PYBIND11_MODULE(twintest, m) {
  m.doc() = "Digital twin testing for an induction bar-heating line";

  static py::exception<Error> error_type(m, "TwintestError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      exc.attr("code") = py::str(std::string(to_string(e.code())));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<LineConfig>(m, "LineConfig")
      .def_property_readonly("zones", [](const LineConfig& c) { return c.furnace.layout.zones; })
      .def_property_readonly("sensors",
                             [](const LineConfig& c) {
                               std::vector<std::string> ids;
                               for (const auto& s : c.furnace.layout.sensors) ids.push_back(s.id.name());
                               return ids;
                             })
      .def_property_readonly("powers", [](const LineConfig& c) { return c.furnace.powers; })
      .def_property_readonly("dt", [](const LineConfig& c) { return c.furnace.dt; })
      .def_property("duration", [](const LineConfig& c) { return c.scenario.duration; },
                    [](LineConfig& c, double d) {
                      c.scenario.duration = d;
                      std::erase_if(c.scenario.timeline, [&](const TimelineEvent& ev) { return ev.at > d; });
                    })
      .def_property_readonly("start_ts", [](const LineConfig& c) { return c.scenario.start_ts; });
  m.def("load_line_config", [](const std::string& path) { return load_line_config(path); }, py::arg("path"));
  m.def("parse_line_config", [](const std::string& text) { return parse_line_config(text); }, py::arg("text"));

  py::class_<AnalysisConfig>(m, "AnalysisConfig")
      .def(py::init<>())
      .def_property_readonly("temp_tolerance", [](const AnalysisConfig& c) { return c.oracle.temp_tolerance; })
      .def_property_readonly("position_tolerance",
                             [](const AnalysisConfig& c) { return c.oracle.position_tolerance; })
      .def_property_readonly("max_gap", [](const AnalysisConfig& c) { return c.oracle.max_gap; })
      .def_property_readonly("seed_policy",
                             [](const AnalysisConfig& c) { return std::string(to_string(c.oracle.seed_policy)); })
      .def_readonly("temp_bin_width", &AnalysisConfig::temp_bin_width)
      .def_readonly("position_bin_width", &AnalysisConfig::position_bin_width)
      .def_readonly("pair_window", &AnalysisConfig::pair_window);
  m.def("load_analysis_config", [](const std::string& path) { return load_analysis_config(path); },
        py::arg("path"));
  m.def("parse_analysis_config", [](const std::string& text) { return parse_analysis_config(text); },
        py::arg("text"));

  py::class_<FaultSpec>(m, "FaultSpec")
      .def(py::init<>())
      .def("__len__", [](const FaultSpec& f) { return f.injections.size(); });
  m.def("load_faults", [](const std::string& path) { return load_faults(path); }, py::arg("path"));
  m.def("parse_faults", [](const std::string& text) { return parse_faults(text); }, py::arg("text"));

  py::class_<TelemetryRecord>(m, "TelemetryRecord")
      .def_readonly("ts", &TelemetryRecord::ts)
      .def_property_readonly("tag", [](const TelemetryRecord& r) { return render_tag(r.tag); })
      .def_readonly("value", &TelemetryRecord::value)
      .def("__str__", &render_record);
  m.def("parse_record",
        [](const std::string& text, const LineConfig& line) {
          return parse_record(text, TagSchema(line.furnace.layout));
        },
        py::arg("line"), py::arg("config"));
  m.def("render_record", &render_record, py::arg("record"));

  m.def(
      "simulate",
      [](const LineConfig& line, double duration) {
        FurnaceSim sim = line.furnace.make_sim(HistoryOptions{false, false});
        const auto steps = static_cast<std::size_t>(std::llround(duration / line.furnace.dt));
        std::vector<double> times;
        std::vector<std::vector<double>> sensors;
        for (std::size_t i = 0; i < steps; ++i) {
          sim.advance(line.furnace.dt);
          times.push_back(sim.state().clock);
          sensors.push_back(sim.state().sensor_values);
        }
        return py::make_tuple(times, sensors);
      },
      py::arg("config"), py::arg("duration"),
      "Runs the DT from the configured state; returns (times, sensor rows).");

  m.def(
      "emit",
      [](const LineConfig& line, const FaultSpec& faults, std::uint64_t seed) {
        const PlantEmulator plant(line.furnace, line.scenario, faults, seed);
        std::vector<std::string> lines;
        const EmissionResult result = plant.run([&](const TelemetryRecord& r) { lines.push_back(render_record(r)); });
        py::dict stats;
        stats["emitted"] = result.emitted;
        stats["dropped"] = result.dropped;
        stats["ticks"] = result.ticks;
        return py::make_tuple(lines, stats);
      },
      py::arg("config"), py::arg("faults") = FaultSpec{}, py::arg("seed") = 0,
      "Runs the plant emulator; returns (wire lines, counts).");

  py::class_<Snapshot>(m, "Snapshot")
      .def(py::init<>())
      .def_readwrite("powers", &Snapshot::powers)
      .def_readwrite("temps", &Snapshot::temps)
      .def_readwrite("temp_ts", &Snapshot::temp_ts)
      .def_readwrite("back", &Snapshot::back)
      .def_readwrite("head", &Snapshot::head)
      .def_readwrite("speed", &Snapshot::speed)
      .def_readwrite("holding", &Snapshot::holding)
      .def_readwrite("ts", &Snapshot::ts)
      .def("__str__", &render_snapshot)
      .def(py::self == py::self);
  m.def("parse_snapshot", [](const std::string& text) { return parse_snapshot(text); }, py::arg("line"));
  m.def(
      "assemble",
      [](const std::vector<std::string>& lines, const LineConfig& line, double pair_window) {
        SnapshotAssembler assembler(line.furnace.layout, pair_window);
        std::vector<Snapshot> out;
        for (const auto& r : parse_lines(lines, line)) {
          if (auto s = assembler.ingest(r)) out.push_back(*s);
        }
        return out;
      },
      py::arg("lines"), py::arg("config"), py::arg("pair_window") = 0.5);

  py::class_<Verdict>(m, "Verdict")
      .def_readonly("ts1", &Verdict::ts1)
      .def_readonly("ts2", &Verdict::ts2)
      .def_readonly("t_simulation", &Verdict::t_simulation)
      .def_readonly("position_error", &Verdict::position_error)
      .def_property_readonly("sensor_errors",
                             [](const Verdict& v) {
                               std::map<std::string, double> out;
                               for (const auto& [id, e] : v.sensor_errors) out[sensor_field(id)] = e;
                               return out;
                             })
      .def_readonly("passed", &Verdict::passed)
      .def_readonly("failing_fields", &Verdict::failing_fields)
      .def_property_readonly("skipped",
                             [](const Verdict& v) -> std::optional<std::string> {
                               if (!v.skipped) return std::nullopt;
                               return std::string(to_string(*v.skipped));
                             })
      .def("__str__", &render_verdict);
  m.def("parse_verdict", [](const std::string& text) { return parse_verdict(text); }, py::arg("line"));

  m.def(
      "simulation_time",
      [](const Snapshot& a, const Snapshot& b, const AnalysisConfig& analysis) -> py::object {
        const auto t = twintest::simulation_time(a, b, analysis.oracle);
        if (const auto* d = std::get_if<double>(&t)) return py::float_(*d);
        return py::str(std::string(to_string(std::get<SkipReason>(t))));
      },
      py::arg("snap1"), py::arg("snap2"), py::arg("analysis") = AnalysisConfig{},
      "Seconds to simulate for the pair, or the skip reason as a string.");
  m.def(
      "evaluate_pair",
      [](const Snapshot& a, const Snapshot& b, const LineConfig& line, const AnalysisConfig& analysis) {
        return twintest::evaluate_pair(a, b, line.furnace, analysis.oracle);
      },
      py::arg("snap1"), py::arg("snap2"), py::arg("config"), py::arg("analysis") = AnalysisConfig{});

  m.def(
      "run_test",
      [](const std::vector<std::string>& lines, const LineConfig& line, const AnalysisConfig& analysis) {
        LineListSource source(lines, TagSchema(line.furnace.layout));
        return run_pipeline(source, line, analysis);
      },
      py::arg("lines"), py::arg("config"), py::arg("analysis") = AnalysisConfig{},
      "Assembles, pairs and judges wire lines; returns (verdicts, summary).");
  m.def(
      "run_test_source",
      [](const std::string& spec, const LineConfig& line, const AnalysisConfig& analysis) {
        auto source = open_source(SourceSpec::parse(spec), TagSchema(line.furnace.layout));
        return run_pipeline(*source, line, analysis);
      },
      py::arg("source"), py::arg("config"), py::arg("analysis") = AnalysisConfig{},
      "Like run_test, reading from file:<path>, paced:<path>:<factor> or tcp:<host:port>.");

  py::class_<ErrorHistogram>(m, "ErrorHistogram")
      .def(py::init<double, double>(), py::arg("bin_width") = 0.5, py::arg("origin") = 0.0)
      .def("record", &ErrorHistogram::record, py::arg("error"))
      .def("record_all",
           [](ErrorHistogram& h, const std::vector<double>& values) {
             for (double v : values) h.record(v);
           })
      .def("merge", &ErrorHistogram::merge, py::arg("other"))
      .def("bin_index", &ErrorHistogram::bin_index)
      .def("pdf", &ErrorHistogram::pdf)
      .def("cdf_at", &ErrorHistogram::cdf_at)
      .def("prob_between", &ErrorHistogram::prob_between, py::arg("a"), py::arg("b"))
      .def("quantile", &ErrorHistogram::quantile)
      .def_property_readonly("bin_width", &ErrorHistogram::bin_width)
      .def_property_readonly("origin", &ErrorHistogram::origin)
      .def_property_readonly("total", &ErrorHistogram::total)
      .def_property_readonly("counts", &ErrorHistogram::counts)
      .def_property_readonly("mean", &ErrorHistogram::mean)
      .def_property_readonly("variance", &ErrorHistogram::variance)
      .def_property_readonly("stddev", &ErrorHistogram::stddev)
      .def_property_readonly("min", &ErrorHistogram::min)
      .def_property_readonly("max", &ErrorHistogram::max);
}
