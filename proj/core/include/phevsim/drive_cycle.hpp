#pragma once

#include <string>
#include <vector>

namespace phevsim {

/// Reference speed schedule, sampled at 1 Hz.
struct DriveCycle {
    std::string name;
    std::vector<double> t;      // s, strictly increasing from 0
    std::vector<double> v_ref;  // m/s, >= 0

    double duration() const { return t.empty() ? 0.0 : t.back(); }
    /// Trapezoidal distance over the schedule, in miles.
    double distance_miles() const;
    /// Linear interpolation of the reference speed; clamps outside the span.
    double speed_at(double time) const;

    /// Throws InvalidInput on non-monotonic time or negative speed.
    void validate() const;
};

/// Parses a 2-column CSV (seconds, mph). Skips a non-numeric header row.
/// Throws InvalidInput naming the offending line.
DriveCycle parse_drive_cycle(const std::string& csv_text, const std::string& name);

/// Concatenates cycles back to back, shifting time so the result is one
/// continuous schedule.
DriveCycle stitch_cycles(const std::vector<DriveCycle>& cycles, const std::string& name);

}  // namespace phevsim
