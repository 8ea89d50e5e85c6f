#pragma once

#include <span>
#include <vector>

#include "twintest/furnace.hpp"
#include "twintest/snapshot.hpp"

namespace twintest {

/// Distance from the front bar's head to the rearmost tail of a configured
/// bar train.
double train_length(std::span<const BarPlacement> train);

/// Piecewise-linear profile through the sensor readings, evaluated at line
/// coordinate `x`. Outside the furnace span the ambient temperature applies;
/// between the furnace edge and the outermost sensor the nearest reading does.
double interpolate_sensor_profile(const FurnaceLayout& layout, std::span<const double> temps,
                                  double x);

/// Mode implied by a snapshot's speed and holding flag.
OperatingMode mode_from_snapshot(const Snapshot& snap, double reversal_interval);

/// Builds a DT initialised from a snapshot: bars placed behind the snapshot
/// head, powers and mode from the snapshot, segment temperatures from the
/// interpolated sensor profile.
/// Throws kIncompleteSnapshot or kInconsistentPositions.
FurnaceSim seed_from_snapshot(const FurnaceLayout& layout, const ThermalParams& thermal,
                              std::span<const BarPlacement> train, const Snapshot& snap,
                              double reversal_interval, double position_tolerance,
                              HistoryOptions history = {});

}  // namespace twintest
