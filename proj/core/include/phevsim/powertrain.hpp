#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phevsim/units.hpp"

namespace phevsim {

// Documented model constants.
namespace constants {
inline constexpr double kGravity = 9.81;            // m/s^2
inline constexpr double kAirDensity = 1.225;        // kg/m^3
inline constexpr double kFuelLHV = 43.4e6;          // J/kg, gasoline lower heating value
inline constexpr double kFuelKgPerGallon = 2.813;   // 0.743 kg/L * 3.785411784 L/gal
inline constexpr double kGallonCO2Factor = 8.887e-3;
inline constexpr double kKwhCO2Factor = 7.44e-4;
/// kWh treated as equivalent to one gallon under the CO2 factors (~11.944).
inline constexpr double kKwhPerGallonEquivalent = kGallonCO2Factor / kKwhCO2Factor;
/// EPA energy-equivalence alternative, selectable in config.
inline constexpr double kKwhPerGallonEpa = 33.7;
}  // namespace constants

struct VehicleParams {
    double mass = 3616.0 * units::kLbToKg + 75.0;  // kg, curb weight + driver allowance
    double rolling_coeff = 0.010;
    double frontal_area = 56.1 * units::kInToM * 60.0 * units::kInToM;  // m^2
    double drag_coeff = 0.32;
    double traction_efficiency = 0.96;
    double traction_torque_loss_factor = 0.95;
    double max_brake_force = 12000.0;  // N
    double wheel_radius = 0.3382;      // m, from tire 225/60 R16
};

struct Driveline {
    std::array<double, 6> gear_ratios = {3.50, 2.77, 1.85, 1.02, 1.02, 0.84};
    std::array<double, 6> gear_efficiencies = {0.98, 0.98, 0.98, 0.98, 0.98, 0.98};
    std::array<double, 6> gear_inertias = {0.0023, 0.0009, 0.0023, 0.0009, 0.0023, 0.0009};
    double final_drive_ratio = 3.75;
    double final_drive_efficiency = 0.966;
};

/// Efficiency values on a speed x torque lattice with bilinear lookup.
struct EfficiencyGrid {
    std::vector<double> speeds;   // rpm, ascending
    std::vector<double> torques;  // N*m, ascending
    std::vector<double> values;   // row-major, [speed][torque]

    double at(double speed_rpm, double torque) const;  // bilinear; throws OutsideEnvelope
    double& cell(std::size_t i, std::size_t j) { return values[i * torques.size() + j]; }
    double cell(std::size_t i, std::size_t j) const { return values[i * torques.size() + j]; }

    std::string to_csv() const;
    static EfficiencyGrid from_csv(const std::string& text);
};

/// Engine and motor efficiency maps plus actuator limits.
struct PowertrainMaps {
    EfficiencyGrid engine;  // torque axis 0..engine_max_torque
    EfficiencyGrid motor;   // torque axis 0..motor_max_torque (|T| for generation)

    double engine_speed_min = 1000.0;   // rpm
    double engine_speed_max = 5500.0;   // rpm
    double engine_max_torque = 250.0;   // N*m
    double engine_max_power = 110e3;    // W
    double engine_peak_band_lo = 1750.0;
    double engine_peak_band_hi = 4000.0;
    double engine_inertia = 0.15;       // kg*m^2

    double motor_speed_max = 6000.0;    // rpm
    double motor_max_torque = 300.0;    // N*m
    double generator_max_torque = 300.0;  // N*m magnitude
    double motor_max_power = 100e3;     // W
    double motor_inertia = 0.1;         // kg*m^2

    /// Max engine torque at a shaft speed (peak band plateau, power cap).
    double engine_torque_limit(double speed_rpm) const;
    /// Max motor torque magnitude at a shaft speed (base torque, power cap).
    double motor_torque_limit(double speed_rpm) const;
    bool engine_can_run(double speed_rpm) const;
};

/// Content hash over both grids and the limit set; used to pin a Pareto
/// table to the maps it was built from.
std::uint64_t maps_fingerprint(const PowertrainMaps& maps);

struct MapSpec {
    double speed_step = 100.0;   // rpm
    double torque_step = 10.0;   // N*m
    double engine_speed_min = 1000.0;
    double engine_speed_max = 5500.0;
    double engine_max_torque = 250.0;
    double motor_speed_max = 6000.0;
    double motor_max_torque = 300.0;
    double engine_peak_efficiency = 0.35;
    double motor_peak_efficiency = 0.95;
};

/// Synthetic engine/motor maps: Willans-style engine surface peaking at 35%
/// in the mid speed band and 60-80% load region, motor plateau near 95%
/// falling off toward the envelope corners.
PowertrainMaps synthesize_default_maps(const MapSpec& spec = {});

struct Battery {
    double capacity_kwh = 8.8;
    int cells_per_module = 12;
    int modules = 8;
    double v_cell_max = 4.2;
    double v_cell_min = 2.1;
    double max_power = 75e3;  // W
    double soc = 0.5;
    double soc_ref = 0.5;     // hold-band reference (initial SOC)
    double hold_band = 0.02;
    bool last_step_clamped = false;

    double capacity_joules() const { return capacity_kwh * 3.6e6; }
};

enum class Mode { EV, ChargeBattery, HoldBattery, Hybrid };

struct WheelLoad {
    double wheel_torque = 0.0;  // N*m at the wheels
    double wheel_speed = 0.0;   // rad/s
};

/// Road load from the longitudinal force balance. Rolling resistance is
/// zeroed below 0.1 m/s.
WheelLoad road_load(double v, double a, const VehicleParams& params);

/// Deterministic shift schedule: highest gear keeping shaft speed in the
/// engine window and the torque demand within combined engine+motor limits,
/// with 1.5 mph downshift hysteresis.
int gear_select(double v, double wheel_torque, const Driveline& driveline,
                const PowertrainMaps& maps, const VehicleParams& params,
                std::optional<int> prev_gear = std::nullopt);

/// Shaft torque that the engine+motor must produce for a wheel torque in a
/// given gear (driveline losses applied directionally).
double shaft_torque_for_wheel(double wheel_torque, int gear, const Driveline& driveline);
/// Shaft speed (rpm) for a vehicle speed in a given gear.
double shaft_speed_rpm(double v, int gear, const Driveline& driveline,
                       const VehicleParams& params);

/// Fuel mass flow (g/s) from the efficiency map; zero torque means a
/// decoupled engine and zero flow.
double engine_fuel_rate(double speed_rpm, double torque, const PowertrainMaps& maps);

/// Electrical power at the battery terminals (positive = discharge).
double motor_electrical_power(double speed_rpm, double torque, const PowertrainMaps& maps);

/// Integrates SOC one step; clamping to [0,1] sets last_step_clamped.
Battery battery_step(const Battery& batt, double electrical_power, double dt);

/// Miles per gallon of gasoline equivalent via the CO2-equivalence factors.
/// Only net discharge counts as consumption.
double mpge(double distance_miles, double fuel_gallons, double net_battery_kwh,
            double kwh_per_gallon = constants::kKwhPerGallonEquivalent);

struct TorqueSplit {
    double engine = 0.0;
    double motor = 0.0;
};

/// Rule-based factory-like split. Propulsion torque balance holds exactly:
/// engine + motor == demand (hold-band charge torque rides on the engine
/// side with the same negative torque on the motor side).
TorqueSplit baseline_split(Mode mode, double speed_rpm, double demand_torque,
                           const Battery& batt, const PowertrainMaps& maps);

}  // namespace phevsim
