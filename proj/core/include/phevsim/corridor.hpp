#pragma once

#include <string>
#include <vector>

#include "phevsim/units.hpp"

namespace phevsim {

enum class ZoneKind { Merge, SpeedReductionZone, Roundabout };

const char* to_string(ZoneKind k);

enum class Route { Main, Highway, SRZSide, RoundaboutSide };

const char* to_string(Route r);

/// One conflict zone and the control zone immediately upstream of it.
/// `cz_entry_pos` is the control-zone entry; the conflict zone itself spans
/// [cz_entry_pos + control_zone_length, cz_entry_pos + control_zone_length +
/// zone_length], all measured along the main route.
struct ConflictZoneSpec {
    ZoneKind kind = ZoneKind::Merge;
    double cz_entry_pos = 0.0;           // m, control zone entry
    double control_zone_length = 100.0;  // m (L_z)
    double zone_length = 30.0;           // m; SRZ 125, crossing length otherwise
    double zone_speed_limit = units::mph_to_mps(40.0);  // m/s
    Route side_route = Route::Highway;
    double side_feeder_length = 0.0;  // m; 0 uses the corridor default

    double conflict_entry_pos() const { return cz_entry_pos + control_zone_length; }
    double conflict_exit_pos() const { return conflict_entry_pos() + zone_length; }
};

/// Main-route geometry and global motion limits.
struct Corridor {
    double total_length = 1500.0;  // m
    std::vector<ConflictZoneSpec> zones;
    double v_min = 1.0;                              // m/s
    double v_max = units::mph_to_mps(40.0);          // m/s
    double u_min = -3.0;                             // m/s^2
    double u_max = 1.5;                              // m/s^2
    double side_route_length = 300.0;                // m, feeder segments

    /// Throws OverlappingZones / ZoneOutOfBounds / BadLimits naming the
    /// offending zone.
    void validate() const;
};

/// Corridor matching the studied network: 1500 m main route with a merge,
/// a speed reduction zone and a roundabout, each behind a 250 m control zone.
Corridor default_corridor();

struct ZoneContext {
    enum class Kind { Free, ControlZone, ConflictZone };
    Kind kind = Kind::Free;
    int zone_index = -1;  // valid when kind != Free

    bool operator==(const ZoneContext&) const = default;
};

/// Parses a corridor from its JSON config text and validates it.
Corridor build_corridor(const std::string& config_text);

/// Maps a main-route position to its zone context. Boundaries resolve to the
/// downstream (entered) context.
ZoneContext locate(const Corridor& corridor, double p);

struct SafetyParams {
    double gamma = 2.0;  // m, standstill distance
    double rho = 1.2;    // s, minimum time gap
};

/// Minimum safe gap gamma + rho * v. Throws NegativeSpeed for v < 0.
double min_safe_gap(const SafetyParams& params, double v);

/// Kinematic state of one vehicle, tracked along its own route.
struct VehicleState {
    int id = 0;
    Route route = Route::Main;
    double p = 0.0;  // m along route
    double v = 0.0;  // m/s
    double u = 0.0;  // m/s^2
    ZoneContext zone_context;
};

}  // namespace phevsim
