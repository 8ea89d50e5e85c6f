#pragma once

#include <filesystem>
#include <string_view>

#include "twintest/emulator.hpp"
#include "twintest/furnace.hpp"
#include "twintest/oracle.hpp"

namespace twintest {

/// A line description: the DT configuration plus the scenario the plant
/// emulator plays on it.
struct LineConfig {
  FurnaceConfig furnace;
  EmitSchedule scenario;
};

struct AnalysisConfig {
  OracleConfig oracle;
  double temp_bin_width = 0.5;      // degC
  double position_bin_width = 0.1;  // mm
  double pair_window = 0.5;         // s, max head/back timestamp spread
};

// Every loader throws Error(kConfigError) on syntax errors, unknown keys or
// wrong types, and the module's own codes on out-of-range values.
LineConfig parse_line_config(std::string_view json_text);
LineConfig load_line_config(const std::filesystem::path& path);

AnalysisConfig parse_analysis_config(std::string_view json_text);
AnalysisConfig load_analysis_config(const std::filesystem::path& path);

FaultSpec parse_faults(std::string_view json_text);
FaultSpec load_faults(const std::filesystem::path& path);

}  // namespace twintest
