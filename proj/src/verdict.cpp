#include "twintest/verdict.hpp"

#include <cmath>

#include "json.hpp"
#include "twintest/error.hpp"

namespace twintest {

std::string_view to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::kMotionInconsistent:
      return "motion-inconsistent";
    case SkipReason::kGapTooLarge:
      return "gap-too-large";
    case SkipReason::kSeedFailed:
      return "seed-failed";
    case SkipReason::kTrackLost:
      return "track-lost";
  }
  return "unknown";
}

std::optional<SkipReason> parse_skip_reason(std::string_view text) {
  for (auto r : {SkipReason::kMotionInconsistent, SkipReason::kGapTooLarge, SkipReason::kSeedFailed,
                 SkipReason::kTrackLost}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

std::string sensor_field(SensorId id) { return "temp." + id.name(); }

std::string render_verdict(const Verdict& v) {
  nlohmann::ordered_json j;
  j["ts1"] = v.ts1;
  j["ts2"] = v.ts2;
  if (v.skipped) {
    j["t_sim"] = nullptr;
    j["pos_err"] = nullptr;
  } else {
    j["t_sim"] = v.t_simulation;
    j["pos_err"] = v.position_error;
    for (const auto& [id, err] : v.sensor_errors) j["err." + sensor_field(id)] = err;
  }
  j["passed"] = v.passed;
  j["failing"] = v.failing_fields;
  if (v.skipped) {
    j["skipped"] = std::string(to_string(*v.skipped));
    if (!v.skip_detail.empty()) j["skip_detail"] = v.skip_detail;
  } else {
    j["skipped"] = nullptr;
  }
  return j.dump();
}

Verdict parse_verdict(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line.begin(), line.end());
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::kMalformedLine, "verdict line is not a valid object");
  }
  if (!j.is_object()) throw Error(ErrorCode::kMalformedLine, "verdict line is not an object");
  try {
    Verdict v;
    v.ts1 = j.at("ts1").get<double>();
    v.ts2 = j.at("ts2").get<double>();
    v.passed = j.at("passed").get<bool>();
    v.failing_fields = j.at("failing").get<std::vector<std::string>>();
    const auto& skipped = j.at("skipped");
    if (!skipped.is_null()) {
      auto reason = parse_skip_reason(skipped.get<std::string>());
      if (!reason) throw Error(ErrorCode::kMalformedLine, "unknown skip reason");
      v.skipped = reason;
      v.skip_detail = j.value("skip_detail", std::string{});
      return v;
    }
    v.t_simulation = j.at("t_sim").get<double>();
    v.position_error = j.at("pos_err").get<double>();
    for (const auto& [key, value] : j.items()) {
      constexpr std::string_view prefix = "err.temp.";
      if (!std::string_view(key).starts_with(prefix)) continue;
      auto id = SensorId::parse(std::string_view(key).substr(prefix.size()));
      if (!id) throw Error(ErrorCode::kMalformedLine, "bad error key '" + key + "'");
      v.sensor_errors[*id] = value.get<double>();
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, std::string("verdict field missing or mistyped: ") + e.what());
  }
}

}  // namespace twintest
