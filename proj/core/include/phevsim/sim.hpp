#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phevsim/baseline_driver.hpp"
#include "phevsim/corridor.hpp"
#include "phevsim/drive_cycle.hpp"
#include "phevsim/metrics.hpp"
#include "phevsim/pareto.hpp"
#include "phevsim/powertrain.hpp"

namespace phevsim {

enum class TrafficLevel { Low, Medium, High };
enum class ControllerCase { Baseline, VDOnly, PTOnly, VDPlusPT };

const char* to_string(TrafficLevel level);
const char* to_string(ControllerCase c);

/// Demand per route in vehicles per hour. Level labels follow the source
/// network's table verbatim, where the "Low" column carries the highest
/// flows (see README).
struct RouteFlows {
    double main = 0.0;
    double highway = 0.0;
    double srz_side = 0.0;
    double roundabout_side = 0.0;

    double for_route(Route r) const;
};

RouteFlows flows_for(TrafficLevel level);

struct ScenarioConfig {
    Corridor corridor;
    RouteFlows flows = flows_for(TrafficLevel::Low);
    ControllerCase controller_case = ControllerCase::Baseline;
    double dt = 0.1;          // s
    double duration = 600.0;  // s
    std::uint64_t seed = 1;
    DriverParams driver;
    SafetyParams safety;
    VehicleParams vehicle;
    Driveline driveline;
    double initial_soc = 0.5;
    double kwh_per_gallon = constants::kKwhPerGallonEquivalent;
    double gap_acceptance = 3.0;  // s
    double trace_period = 1.0;    // s between speed-trace samples; 0 disables

    ScenarioConfig() : corridor(default_corridor()) {}

    /// Throws InvalidInput on dt outside (0, 0.5], negative flows, or
    /// non-positive duration.
    void validate() const;
};

struct Arrival {
    Route route = Route::Main;
    double time = 0.0;          // s
    double driver_noise = 1.0;  // multiplicative bx_add heterogeneity
    double speed_factor = 1.0;  // multiplicative desired-speed heterogeneity
};

/// Seeded per-route Poisson arrival schedule; arrivals on the same route are
/// never closer than the speed-dependent safe headway at the route's desired
/// speed. Sorted by (time, route).
std::vector<Arrival> spawn_traffic(const RouteFlows& flows, double duration, std::uint64_t seed,
                                   const SafetyParams& safety = {},
                                   const DriverParams& driver = {});

struct TracePoint {
    double t = 0.0;
    double p = 0.0;
    double v = 0.0;
};

struct VehicleRecord {
    int id = 0;
    Route route = Route::Main;
    double spawn_time = 0.0;
    double exit_time = 0.0;
    double travel_time = 0.0;
    double distance_miles = 0.0;
    double fuel_gallons = 0.0;
    double net_battery_kwh = 0.0;
    double mpge = 0.0;
    int stop_count = 0;        // entries into v < 0.5 m/s
    bool vd_fallback = false;  // any zone served by the baseline fallback
    std::vector<TracePoint> trace;
};

struct SimResult {
    std::vector<VehicleRecord> records;  // finished trips only
    std::size_t unfinished = 0;
    std::size_t rear_end_violations = 0;     // gap < gamma + rho*v events
    std::size_t co_occupancy_violations = 0;  // cross-stream conflict overlap
    std::size_t infeasible_assignments = 0;
    bool aggregates_empty = true;
    MetricsSummary mpge_summary;
    double mean_travel_time = 0.0;

    // config echo
    ControllerCase controller_case = ControllerCase::Baseline;
    RouteFlows flows;
    double dt = 0.0;
    double duration = 0.0;
    std::uint64_t seed = 0;

    std::string to_json() const;     // aggregates + config echo
    std::string records_csv() const;
    std::string traces_csv() const;
};

/// Runs one deterministic scenario. The Pareto table is required (and its
/// fingerprint must match the maps) for the PT controller cases; throws
/// ParetoTableMissing otherwise.
SimResult run_scenario(const ScenarioConfig& config, const PowertrainMaps& maps,
                       const ParetoTable* table = nullptr);

struct PiGains {
    double kp = 0.8;   // 1/s
    double ki = 0.05;  // 1/s^2
};

struct CycleTraceResult {
    double mpge = 0.0;
    double rms_error_mps = 0.0;
    double distance_miles = 0.0;
    double fuel_gallons = 0.0;
    double net_battery_kwh = 0.0;
    double min_soc = 0.0;
    double max_soc = 0.0;
    std::vector<std::pair<double, double>> soc_trace;  // (t, soc) at 1 Hz
};

/// Traces a reference cycle with a feedforward + PI speed-tracking driver and
/// the quasi-static powertrain. use_pareto selects the table split over the
/// rule-based split. Throws TrackingDiverged when the RMS speed error
/// exceeds 1 m/s and ZeroConsumption on an all-zero cycle.
CycleTraceResult trace_drive_cycle(const DriveCycle& cycle, bool use_pareto,
                                   const PowertrainMaps& maps, const ParetoTable* table,
                                   const VehicleParams& vehicle = {},
                                   const Driveline& driveline = {}, double initial_soc = 0.5,
                                   double dt = 0.1,
                                   double kwh_per_gallon = constants::kKwhPerGallonEquivalent,
                                   const PiGains& gains = {});

}  // namespace phevsim
