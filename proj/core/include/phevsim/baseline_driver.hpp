#pragma once

#include <optional>
#include <vector>

#include "phevsim/corridor.hpp"

namespace phevsim {

/// Simplified three-regime psycho-physical car-following parameters
/// (free / following / emergency).
struct DriverParams {
    double ax = 2.0;          // m, standstill distance
    double bx_add = 2.0;      // dimensionless
    double bx_mult = 3.0;     // dimensionless, following threshold factor
    double desired_speed = units::mph_to_mps(40.0);  // m/s
    double max_accel = 1.5;   // m/s^2
    double max_decel = 3.0;   // m/s^2 (magnitude)
    double tau = 0.5;         // s, reaction smoothing
    double yield_approach_speed = units::mph_to_mps(10.0);  // m/s, at the yield line
    double yield_approach_decel = 1.5;  // m/s^2, comfort braking on the approach
};

/// Car-following acceleration. Free flow approaches desired_speed first
/// order; following regime brakes toward the desired gap bx = ax +
/// bx_add*sqrt(v); emergency regime brakes at max_decel below ax.
/// Output is clamped to [-max_decel, max_accel].
double car_following_accel(const VehicleState& follower, const VehicleState* leader,
                           const DriverParams& params);

/// Predicted occupancy of a conflict zone by one priority-stream vehicle.
struct ZoneOccupancy {
    int vehicle_id = 0;
    double entry_time = 0.0;  // s from now
    double exit_time = 0.0;   // s from now
};

enum class YieldDecision { Go, Stop };

/// Gap-acceptance yield rule for the non-priority stream: Go iff no
/// priority-stream vehicle is predicted inside the conflict zone within the
/// next gap_acceptance seconds. Empty occupancy means Go.
YieldDecision yield_decision(const std::vector<ZoneOccupancy>& conflict_occupancy,
                             double gap_acceptance);

/// Target speed for a vehicle given its zone context: the zone speed limit
/// inside a conflict zone, the route desired speed otherwise. Baseline
/// drivers do not anticipate, so deceleration starts only at the zone entry.
double reduced_speed_response(const ZoneContext& context, const Corridor& corridor,
                              double route_desired_speed);

}  // namespace phevsim
