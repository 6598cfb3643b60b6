#include "phevsim/powertrain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phevsim/errors.hpp"

namespace phevsim {

namespace {

std::size_t lower_cell(const std::vector<double>& axis, double x) {
    // Index of the cell whose [axis[i], axis[i+1]] interval contains x.
    const auto it = std::upper_bound(axis.begin(), axis.end(), x);
    std::size_t i = static_cast<std::size_t>(it - axis.begin());
    if (i > 0) --i;
    if (i + 1 >= axis.size()) i = axis.size() - 2;
    return i;
}

}  // namespace

double EfficiencyGrid::at(double speed_rpm, double torque) const {
    if (speeds.size() < 2 || torques.size() < 2)
        throw BadSpec("efficiency grid needs at least 2x2 points");
    const double eps = 1e-9;
    if (speed_rpm < speeds.front() - eps || speed_rpm > speeds.back() + eps ||
        torque < torques.front() - eps || torque > torques.back() + eps)
        throw OutsideEnvelope("map query outside lattice");
    const std::size_t i = lower_cell(speeds, speed_rpm);
    const std::size_t j = lower_cell(torques, torque);
    const double tx = std::clamp((speed_rpm - speeds[i]) / (speeds[i + 1] - speeds[i]), 0.0, 1.0);
    const double ty = std::clamp((torque - torques[j]) / (torques[j + 1] - torques[j]), 0.0, 1.0);
    const double v00 = cell(i, j), v01 = cell(i, j + 1);
    const double v10 = cell(i + 1, j), v11 = cell(i + 1, j + 1);
    return (1 - tx) * ((1 - ty) * v00 + ty * v01) + tx * ((1 - ty) * v10 + ty * v11);
}

std::string EfficiencyGrid::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "speed_rpm";
    for (double t : torques) os << ',' << t;
    os << '\n';
    for (std::size_t i = 0; i < speeds.size(); ++i) {
        os << speeds[i];
        for (std::size_t j = 0; j < torques.size(); ++j) os << ',' << cell(i, j);
        os << '\n';
    }
    return os.str();
}

EfficiencyGrid EfficiencyGrid::from_csv(const std::string& text) {
    EfficiencyGrid g;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw InvalidInput("empty efficiency grid CSV");
    {
        std::istringstream hs(line);
        std::string tok;
        std::getline(hs, tok, ',');  // header label
        while (std::getline(hs, tok, ',')) g.torques.push_back(std::stod(tok));
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::getline(ls, tok, ',');
        g.speeds.push_back(std::stod(tok));
        std::size_t n = 0;
        while (std::getline(ls, tok, ',')) {
            g.values.push_back(std::stod(tok));
            ++n;
        }
        if (n != g.torques.size()) throw InvalidInput("ragged efficiency grid CSV row");
    }
    if (g.speeds.size() < 2 || g.torques.size() < 2)
        throw InvalidInput("efficiency grid CSV too small");
    return g;
}

double PowertrainMaps::engine_torque_limit(double speed_rpm) const {
    if (!engine_can_run(speed_rpm)) return 0.0;
    double limit = engine_max_torque;
    if (speed_rpm < engine_peak_band_lo) {
        const double f = (speed_rpm - engine_speed_min) / (engine_peak_band_lo - engine_speed_min);
        limit = engine_max_torque * (0.6 + 0.4 * f);
    }
    const double omega = units::rpm_to_radps(speed_rpm);
    if (omega > 0.0) limit = std::min(limit, engine_max_power / omega);
    return limit;
}

double PowertrainMaps::motor_torque_limit(double speed_rpm) const {
    if (speed_rpm < 0.0 || speed_rpm > motor_speed_max) return 0.0;
    double limit = motor_max_torque;
    const double omega = units::rpm_to_radps(speed_rpm);
    if (omega > 1e-9) limit = std::min(limit, motor_max_power / omega);
    return limit;
}

bool PowertrainMaps::engine_can_run(double speed_rpm) const {
    return speed_rpm >= engine_speed_min && speed_rpm <= engine_speed_max;
}

std::uint64_t maps_fingerprint(const PowertrainMaps& maps) {
    // FNV-1a over a canonical serialization.
    std::ostringstream os;
    os.precision(12);
    os << maps.engine.to_csv() << '|' << maps.motor.to_csv() << '|' << maps.engine_speed_min << ','
       << maps.engine_speed_max << ',' << maps.engine_max_torque << ',' << maps.engine_max_power
       << ',' << maps.motor_speed_max << ',' << maps.motor_max_torque << ','
       << maps.generator_max_torque << ',' << maps.motor_max_power;
    const std::string s = os.str();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

PowertrainMaps synthesize_default_maps(const MapSpec& spec) {
    if (spec.speed_step <= 0.0 || spec.torque_step <= 0.0) throw BadSpec("non-positive grid step");
    if (spec.engine_speed_max <= spec.engine_speed_min) throw BadSpec("inverted engine speed range");
    if (spec.engine_max_torque <= 0.0 || spec.engine_max_torque > 250.0)
        throw BadSpec("engine torque outside table limits");
    if (spec.motor_max_torque <= 0.0 || spec.motor_max_torque > 300.0)
        throw BadSpec("motor torque outside table limits");
    if ((spec.engine_speed_max - spec.engine_speed_min) < spec.speed_step ||
        spec.engine_max_torque < spec.torque_step || spec.motor_max_torque < spec.torque_step ||
        spec.motor_speed_max < spec.speed_step)
        throw BadSpec("degenerate grid request");

    PowertrainMaps maps;
    maps.engine_speed_min = spec.engine_speed_min;
    maps.engine_speed_max = spec.engine_speed_max;
    maps.engine_max_torque = spec.engine_max_torque;
    maps.motor_speed_max = spec.motor_speed_max;
    maps.motor_max_torque = spec.motor_max_torque;
    maps.generator_max_torque = spec.motor_max_torque;

    const auto axis = [](double lo, double hi, double step) {
        std::vector<double> xs;
        for (double x = lo; x < hi + step * 0.5; x += step) xs.push_back(std::min(x, hi));
        if (xs.back() < hi) xs.push_back(hi);
        return xs;
    };

    maps.engine.speeds = axis(spec.engine_speed_min, spec.engine_speed_max, spec.speed_step);
    maps.engine.torques = axis(0.0, spec.engine_max_torque, spec.torque_step);
    maps.engine.values.resize(maps.engine.speeds.size() * maps.engine.torques.size());
    for (std::size_t i = 0; i < maps.engine.speeds.size(); ++i) {
        const double n = maps.engine.speeds[i];
        const double t_cap = std::max(1.0, maps.engine_torque_limit(n));
        double h = 1.0;
        if (n < maps.engine_peak_band_lo) {
            const double x = (maps.engine_peak_band_lo - n) /
                             (maps.engine_peak_band_lo - spec.engine_speed_min);
            h = 1.0 - 0.30 * x * x;
        } else if (n > maps.engine_peak_band_hi) {
            const double x = (n - maps.engine_peak_band_hi) /
                             (spec.engine_speed_max - maps.engine_peak_band_hi);
            h = 1.0 - 0.25 * x * x;
        }
        for (std::size_t j = 0; j < maps.engine.torques.size(); ++j) {
            const double load = std::clamp(maps.engine.torques[j] / t_cap, 0.0, 1.0);
            double g;
            if (load < 0.7)
                g = 1.0 - 1.5 * (0.7 - load) * (0.7 - load);
            else
                g = 1.0 - 1.0 * (load - 0.7) * (load - 0.7);
            maps.engine.cell(i, j) = std::max(0.05, spec.engine_peak_efficiency * g * h);
        }
    }

    maps.motor.speeds = axis(0.0, spec.motor_speed_max, spec.speed_step);
    maps.motor.torques = axis(0.0, spec.motor_max_torque, spec.torque_step);
    maps.motor.values.resize(maps.motor.speeds.size() * maps.motor.torques.size());
    for (std::size_t i = 0; i < maps.motor.speeds.size(); ++i) {
        const double sn = maps.motor.speeds[i] / spec.motor_speed_max;
        for (std::size_t j = 0; j < maps.motor.torques.size(); ++j) {
            const double ln = maps.motor.torques[j] / spec.motor_max_torque;
            const double p = std::max(0.0, (ln - 0.7) / 0.3);
            const double q = std::max(0.0, (sn - 0.7) / 0.3);
            maps.motor.cell(i, j) = spec.motor_peak_efficiency - 0.15 * p * q;
        }
    }
    return maps;
}

WheelLoad road_load(double v, double a, const VehicleParams& params) {
    if (v < 0.0) throw NegativeSpeed("road_load: v < 0");
    double force = params.mass * a +
                   0.5 * constants::kAirDensity * params.drag_coeff * params.frontal_area * v * v;
    if (v >= 0.1) force += params.mass * constants::kGravity * params.rolling_coeff;
    WheelLoad out;
    out.wheel_speed = v / params.wheel_radius;
    if (force > 0.0)
        out.wheel_torque = force * params.wheel_radius / params.traction_efficiency;
    else
        out.wheel_torque = force * params.wheel_radius * params.traction_efficiency;
    return out;
}

double shaft_speed_rpm(double v, int gear, const Driveline& driveline,
                       const VehicleParams& params) {
    const double wheel_omega = v / params.wheel_radius;
    const double ratio = driveline.gear_ratios.at(gear) * driveline.final_drive_ratio;
    return units::radps_to_rpm(wheel_omega * ratio);
}

double shaft_torque_for_wheel(double wheel_torque, int gear, const Driveline& driveline) {
    const double ratio = driveline.gear_ratios.at(gear) * driveline.final_drive_ratio;
    const double eff = driveline.gear_efficiencies.at(gear) * driveline.final_drive_efficiency;
    if (wheel_torque >= 0.0) return wheel_torque / (ratio * eff);
    return wheel_torque * eff / ratio;  // overrun: losses reduce what reaches the shaft
}

namespace {

bool gear_feasible(double v, double wheel_torque, int gear, const Driveline& dl,
                   const PowertrainMaps& maps, const VehicleParams& vp, double rpm_floor) {
    const double rpm = shaft_speed_rpm(v, gear, dl, vp);
    if (rpm > maps.engine_speed_max) return false;
    if (rpm < rpm_floor && gear != 0) return false;  // gear 1 allowed below the window (EV launch)
    const double t_shaft = shaft_torque_for_wheel(wheel_torque, gear, dl);
    const double capability = maps.engine_torque_limit(rpm) + maps.motor_torque_limit(rpm);
    return t_shaft <= capability;
}

}  // namespace

int gear_select(double v, double wheel_torque, const Driveline& driveline,
                const PowertrainMaps& maps, const VehicleParams& params,
                std::optional<int> prev_gear) {
    if (v < 0.0) throw NegativeSpeed("gear_select: v < 0");
    const double rpm_floor = maps.engine_speed_min;
    std::optional<int> ideal;
    for (int g = 5; g >= 0; --g) {
        if (gear_feasible(v, std::max(0.0, wheel_torque), g, driveline, maps, params, rpm_floor)) {
            ideal = g;
            break;
        }
    }
    if (!ideal) throw NoFeasibleGear("torque demand exceeds all-gear capability");

    // Downshift hysteresis of 1.5 mph.
    if (prev_gear && *ideal < *prev_gear) {
        const double v_hyst = v + units::mph_to_mps(1.5);
        for (int g = 5; g >= 0; --g) {
            if (gear_feasible(v_hyst, std::max(0.0, wheel_torque), g, driveline, maps, params,
                              rpm_floor)) {
                if (g >= *prev_gear &&
                    gear_feasible(v, std::max(0.0, wheel_torque), *prev_gear, driveline, maps,
                                  params, 0.0))
                    return *prev_gear;
                break;
            }
        }
    }
    return *ideal;
}

double engine_fuel_rate(double speed_rpm, double torque, const PowertrainMaps& maps) {
    if (torque < 0.0) throw OutsideEnvelope("engine torque must be non-negative");
    if (torque == 0.0) return 0.0;  // decoupled engine
    if (!maps.engine_can_run(speed_rpm) || torque > maps.engine_torque_limit(speed_rpm) + 1e-9)
        throw OutsideEnvelope("engine operating point outside envelope");
    const double eta = maps.engine.at(speed_rpm, torque);
    const double power = torque * units::rpm_to_radps(speed_rpm);
    return power / (eta * constants::kFuelLHV) * 1000.0;  // g/s
}

double motor_electrical_power(double speed_rpm, double torque, const PowertrainMaps& maps) {
    if (torque == 0.0) return 0.0;
    const double limit =
        torque > 0.0 ? maps.motor_torque_limit(speed_rpm)
                     : std::min(maps.generator_max_torque, maps.motor_torque_limit(speed_rpm));
    if (std::abs(torque) > limit + 1e-9)
        throw OutsideEnvelope("motor operating point outside envelope");
    const double eta = maps.motor.at(speed_rpm, std::abs(torque));
    const double p_mech = torque * units::rpm_to_radps(speed_rpm);
    return p_mech > 0.0 ? p_mech / eta : p_mech * eta;
}

Battery battery_step(const Battery& batt, double electrical_power, double dt) {
    if (std::abs(electrical_power) > batt.max_power + 1e-9)
        throw PowerLimitExceeded("battery power request above pack limit");
    Battery out = batt;
    double soc = batt.soc - electrical_power * dt / batt.capacity_joules();
    out.last_step_clamped = soc < 0.0 || soc > 1.0;
    out.soc = std::clamp(soc, 0.0, 1.0);
    return out;
}

double mpge(double distance_miles, double fuel_gallons, double net_battery_kwh,
            double kwh_per_gallon) {
    if (fuel_gallons < 0.0) throw InvalidInput("mpge: fuel must be non-negative");
    const double battery_gallons = std::max(0.0, net_battery_kwh) / kwh_per_gallon;
    const double gallons_equivalent = fuel_gallons + battery_gallons;
    if (gallons_equivalent <= 0.0) throw ZeroConsumption("no fuel or battery consumption");
    if (distance_miles <= 0.0) throw InvalidInput("mpge: distance must be positive");
    return distance_miles / gallons_equivalent;
}

TorqueSplit baseline_split(Mode mode, double speed_rpm, double demand_torque, const Battery& batt,
                           const PowertrainMaps& maps) {
    const double t_eng_max = maps.engine_torque_limit(speed_rpm);
    const double t_mot_max = maps.motor_torque_limit(speed_rpm);
    if (demand_torque > t_eng_max + t_mot_max + 1e-9)
        throw DemandExceedsCapability("torque demand above combined capability");
    if (demand_torque < 0.0) throw DemandExceedsCapability("baseline_split expects T >= 0");

    const bool engine_on = maps.engine_can_run(speed_rpm);
    TorqueSplit split;
    switch (mode) {
        case Mode::EV:
            split = {0.0, demand_torque};
            break;
        case Mode::ChargeBattery: {
            if (!engine_on) {
                split = {0.0, demand_torque};
                break;
            }
            double charge = 0.0;
            if (batt.soc < batt.soc_ref + batt.hold_band) {
                const double omega = units::rpm_to_radps(speed_rpm);
                const double p_cap = omega > 1e-6 ? batt.max_power / omega : 0.0;
                charge = std::min({t_eng_max - demand_torque, maps.generator_max_torque, p_cap});
                charge = std::max(0.0, charge);
            }
            split = {demand_torque + charge, -charge};
            break;
        }
        case Mode::HoldBattery: {
            if (!engine_on) {
                split = {0.0, demand_torque};
                break;
            }
            const double t_eng = std::min(demand_torque, t_eng_max);
            double t_mot = demand_torque - t_eng;
            // Steer SOC back toward the hold band.
            const double err = batt.soc - batt.soc_ref;
            if (err < -batt.hold_band && t_mot <= 0.0) {
                const double omega = units::rpm_to_radps(speed_rpm);
                const double p_cap = omega > 1e-6 ? batt.max_power / omega : 0.0;
                double charge = std::min({t_eng_max - t_eng, maps.generator_max_torque, p_cap,
                                          0.25 * t_eng_max});
                charge = std::max(0.0, charge);
                split = {t_eng + charge, t_mot - charge};
            } else if (err > batt.hold_band) {
                const double assist = std::min(t_eng, std::min(t_mot_max - t_mot, 0.5 * t_eng));
                split = {t_eng - assist, t_mot + assist};
            } else {
                split = {t_eng, t_mot};
            }
            break;
        }
        case Mode::Hybrid: {
            if (!engine_on) {
                split = {0.0, demand_torque};
                break;
            }
            const double threshold = 0.5 * t_eng_max;
            if (demand_torque > threshold) {
                const double t_eng = std::min(demand_torque, t_eng_max);
                split = {t_eng, demand_torque - t_eng};
            } else {
                split = {0.0, demand_torque};
            }
            break;
        }
    }
    if (split.motor > t_mot_max + 1e-9) {
        // Push overflow back onto the engine.
        const double overflow = split.motor - t_mot_max;
        split.motor = t_mot_max;
        split.engine += overflow;
    }
    return split;
}

}  // namespace phevsim
