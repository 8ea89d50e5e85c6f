#include "twintest/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "twintest/error.hpp"

namespace twintest {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); }

void allow_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) bad(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (auto key : keys) known = known || key == k;
    if (!known) bad("unknown key '" + k + "' in " + where);
  }
}

double number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) bad("'" + key + "' must be a number");
  return j[key].get<double>();
}

double required_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) bad("missing '" + key + "' in " + where);
  return number(j, key, 0.0);
}

int integer(const json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) bad("'" + key + "' must be an integer");
  return j[key].get<int>();
}

std::vector<double> numbers(const json& j, const std::string& what) {
  if (!j.is_array()) bad(what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) bad(what + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

SensorId sensor_id(const json& j) {
  if (!j.is_string()) bad("sensor id must be a string like \"z2.s2\"");
  auto id = SensorId::parse(j.get<std::string>());
  if (!id) bad("bad sensor id '" + j.get<std::string>() + "'");
  return *id;
}

FurnaceLayout parse_layout(const json& j) {
  if (j.contains("coils")) {
    allow_keys(j, "furnace", {"zones", "coils_per_zone", "coils", "sensors", "line_end", "ambient_temp"});
    FurnaceLayout layout;
    layout.zones = integer(j, "zones", 0);
    layout.coils_per_zone = integer(j, "coils_per_zone", 0);
    for (const auto& c : j.at("coils")) {
      allow_keys(c, "coil", {"zone", "index", "start", "end"});
      layout.coils.push_back({integer(c, "zone", 0), integer(c, "index", 0), required_number(c, "start", "coil"),
                              required_number(c, "end", "coil")});
    }
    if (j.contains("sensors")) {
      for (const auto& s : j.at("sensors")) {
        allow_keys(s, "sensor", {"id", "position"});
        if (!s.contains("id")) bad("missing 'id' in sensor");
        layout.sensors.push_back({sensor_id(s["id"]), required_number(s, "position", "sensor")});
      }
    }
    layout.line_end = required_number(j, "line_end", "furnace");
    layout.ambient_temp = number(j, "ambient_temp", 25.0);
    layout.validate();
    return layout;
  }
  allow_keys(j, "furnace", {"zones", "coils_per_zone", "coil_length", "coil_gap", "zone_gap", "origin",
                            "exit_length", "ambient_temp"});
  return FurnaceLayout::regular(integer(j, "zones", 5), integer(j, "coils_per_zone", 4),
                                number(j, "coil_length", 400.0), number(j, "coil_gap", 150.0),
                                number(j, "zone_gap", 300.0), number(j, "origin", 0.0),
                                number(j, "exit_length", 550.0), number(j, "ambient_temp", 25.0));
}

ThermalParams parse_thermal(const json& j, int zones) {
  allow_keys(j, "thermal", {"heating_efficiency", "emissivity"});
  ThermalParams t = ThermalParams::uniform(zones, 0.75, number(j, "emissivity", 0.8));
  if (j.contains("heating_efficiency")) {
    const auto& eta = j["heating_efficiency"];
    if (eta.is_number()) {
      t.heating_efficiency.assign(static_cast<std::size_t>(zones), eta.get<double>());
    } else {
      t.heating_efficiency = numbers(eta, "heating_efficiency");
    }
  }
  t.validate(zones);
  return t;
}

BarPlacement parse_bar(const json& j) {
  allow_keys(j, "bar", {"length", "diameter", "density", "mass", "specific_heat", "segment_resolution",
                        "head_pos", "initial_temp"});
  const double length = required_number(j, "length", "bar");
  const double diameter = required_number(j, "diameter", "bar");
  const double cp = number(j, "specific_heat", 490.0);
  const double res = number(j, "segment_resolution", 10.0);
  BarPlacement p;
  if (j.contains("mass")) {
    if (j.contains("density")) bad("give either 'mass' or 'density' for a bar, not both");
    p.spec = BarSpec::from_mass(length, diameter, number(j, "mass", 0.0), cp, res);
  } else {
    p.spec = BarSpec{length, diameter, number(j, "density", 7850.0), cp, res};
  }
  p.spec.validate();
  p.head_pos = required_number(j, "head_pos", "bar");
  if (j.contains("initial_temp")) p.initial_temp = number(j, "initial_temp", 0.0);
  return p;
}

OperatingMode parse_mode(const json& j, double default_reversal) {
  allow_keys(j, "mode", {"type", "speed", "reversal_interval", "initial_direction"});
  const std::string type = j.value("type", std::string("normal"));
  OperatingMode mode;
  if (type == "normal") {
    if (j.contains("reversal_interval") || j.contains("initial_direction")) {
      bad("normal mode takes only 'speed'");
    }
    mode = NormalMode{required_number(j, "speed", "mode")};
  } else if (type == "holding") {
    mode = HoldingMode{required_number(j, "speed", "mode"), number(j, "reversal_interval", default_reversal),
                       integer(j, "initial_direction", 1)};
  } else {
    bad("mode type must be \"normal\" or \"holding\"");
  }
  validate_mode(mode);
  return mode;
}

EmitSchedule parse_scenario(const json& j, const FurnaceConfig& furnace) {
  allow_keys(j, "scenario", {"duration", "start_ts", "periods", "timeline", "publish_on_change"});
  EmitSchedule s;
  s.duration = number(j, "duration", s.duration);
  s.start_ts = number(j, "start_ts", s.start_ts);
  if (j.contains("publish_on_change")) {
    if (!j["publish_on_change"].is_boolean()) bad("'publish_on_change' must be true or false");
    s.publish_on_change = j["publish_on_change"].get<bool>();
  }
  if (j.contains("periods")) {
    const auto& p = j["periods"];
    allow_keys(p, "periods", {"position", "temp", "power", "speed", "holding"});
    s.periods.position = number(p, "position", s.periods.position);
    s.periods.temp = number(p, "temp", s.periods.temp);
    s.periods.power = number(p, "power", s.periods.power);
    s.periods.speed = number(p, "speed", s.periods.speed);
    s.periods.holding = number(p, "holding", s.periods.holding);
  }
  if (j.contains("timeline")) {
    if (!j["timeline"].is_array()) bad("'timeline' must be an array");
    for (const auto& e : j["timeline"]) {
      allow_keys(e, "timeline event", {"at", "mode", "powers", "insert_bar"});
      TimelineEvent ev;
      ev.at = required_number(e, "at", "timeline event");
      if (e.contains("mode")) ev.mode = parse_mode(e["mode"], furnace.holding_reversal_interval);
      if (e.contains("powers")) ev.powers = numbers(e["powers"], "powers");
      if (e.contains("insert_bar")) ev.insert_bar = parse_bar(e["insert_bar"]);
      s.timeline.push_back(std::move(ev));
    }
  }
  return s;
}

FaultInjection parse_fault(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) bad("each fault needs a string 'type'");
  const std::string type = j["type"].get<std::string>();
  if (type == "sensor_bias") {
    allow_keys(j, type, {"type", "sensor", "offset"});
    if (!j.contains("sensor")) bad("sensor_bias needs 'sensor'");
    return fault::SensorBias{sensor_id(j["sensor"]), required_number(j, "offset", type)};
  }
  if (type == "power_step") {
    allow_keys(j, type, {"type", "zone", "from", "to", "at"});
    if (!j.contains("zone")) bad("power_step needs 'zone'");
    return fault::PowerStep{integer(j, "zone", 0), required_number(j, "from", type), required_number(j, "to", type),
                            required_number(j, "at", type)};
  }
  if (type == "axial_conduction") {
    allow_keys(j, type, {"type", "diffusivity"});
    return fault::AxialConduction{required_number(j, "diffusivity", type)};
  }
  if (type == "noise") {
    allow_keys(j, type, {"type", "sigma"});
    return fault::MeasurementNoise{required_number(j, "sigma", type)};
  }
  if (type == "telemetry_loss") {
    allow_keys(j, type, {"type", "drop_prob"});
    return fault::TelemetryLoss{required_number(j, "drop_prob", type)};
  }
  if (type == "update_jitter") {
    allow_keys(j, type, {"type", "tag", "period", "phase"});
    if (!j.contains("tag") || !j["tag"].is_string()) bad("update_jitter needs a string 'tag'");
    return fault::UpdateJitter{j["tag"].get<std::string>(), required_number(j, "period", type),
                               number(j, "phase", 0.0)};
  }
  bad("unknown fault type '" + type + "'");
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("invalid JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    bad(std::string("bad config value: ") + e.what());
  }
}

}  // namespace

LineConfig parse_line_config(std::string_view json_text) {
  const json j = parse_json(json_text);
  return guarded([&] {
    allow_keys(j, "line config", {"furnace", "thermal", "bars", "dt", "mode", "powers",
                                  "holding_reversal_interval", "scenario"});
    LineConfig cfg;
    auto& f = cfg.furnace;
    if (j.contains("furnace")) f.layout = parse_layout(j["furnace"]);
    f.thermal = parse_thermal(j.value("thermal", json::object()), f.layout.zones);
    if (!j.contains("bars") || !j["bars"].is_array() || j["bars"].empty()) bad("'bars' must list at least one bar");
    for (const auto& b : j["bars"]) f.bars.push_back(parse_bar(b));
    f.dt = number(j, "dt", f.dt);
    f.holding_reversal_interval = number(j, "holding_reversal_interval", f.holding_reversal_interval);
    if (j.contains("mode")) f.mode = parse_mode(j["mode"], f.holding_reversal_interval);
    f.powers = j.contains("powers") ? numbers(j["powers"], "powers")
                                    : std::vector<double>(static_cast<std::size_t>(f.layout.zones), 0.0);
    f.validate();
    if (j.contains("scenario")) cfg.scenario = parse_scenario(j["scenario"], f);
    return cfg;
  });
}

LineConfig load_line_config(const std::filesystem::path& path) { return parse_line_config(read_file(path)); }

AnalysisConfig parse_analysis_config(std::string_view json_text) {
  const json j = parse_json(json_text);
  return guarded([&] {
    allow_keys(j, "oracle config", {"temp_tolerance", "position_tolerance", "min_speed", "max_gap", "dt_step",
                                    "seed_policy", "temp_bin_width", "position_bin_width", "pair_window"});
    AnalysisConfig cfg;
    auto& o = cfg.oracle;
    o.temp_tolerance = number(j, "temp_tolerance", o.temp_tolerance);
    o.position_tolerance = number(j, "position_tolerance", o.position_tolerance);
    o.min_speed = number(j, "min_speed", o.min_speed);
    o.max_gap = number(j, "max_gap", o.max_gap);
    o.dt_step = number(j, "dt_step", o.dt_step);
    if (j.contains("seed_policy")) {
      auto p = j["seed_policy"].is_string() ? parse_seed_policy(j["seed_policy"].get<std::string>()) : std::nullopt;
      if (!p) bad("seed_policy must be \"interpolate\" or \"carry-forward\"");
      o.seed_policy = *p;
    }
    cfg.temp_bin_width = number(j, "temp_bin_width", cfg.temp_bin_width);
    cfg.position_bin_width = number(j, "position_bin_width", cfg.position_bin_width);
    cfg.pair_window = number(j, "pair_window", cfg.pair_window);
    o.validate();
    if (!(cfg.temp_bin_width > 0.0) || !(cfg.position_bin_width > 0.0)) {
      throw Error(ErrorCode::kInvalidParameter, "histogram bin widths must be positive");
    }
    if (!(cfg.pair_window >= 0.0)) throw Error(ErrorCode::kInvalidParameter, "pair_window must be >= 0");
    return cfg;
  });
}

AnalysisConfig load_analysis_config(const std::filesystem::path& path) {
  return parse_analysis_config(read_file(path));
}

FaultSpec parse_faults(std::string_view json_text) {
  const json j = parse_json(json_text);
  return guarded([&] {
    const json* list = &j;
    if (j.is_object()) {
      allow_keys(j, "fault file", {"faults"});
      if (!j.contains("faults")) bad("fault file needs a 'faults' array");
      list = &j["faults"];
    }
    if (!list->is_array()) bad("faults must be an array");
    FaultSpec spec;
    for (const auto& f : *list) spec.injections.push_back(parse_fault(f));
    return spec;
  });
}

FaultSpec load_faults(const std::filesystem::path& path) { return parse_faults(read_file(path)); }

}  // namespace twintest
