#include "phevsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>

#include <json.hpp>

#include "phevsim/errors.hpp"
#include "phevsim/vd_controller.hpp"

namespace phevsim {

const char* to_string(TrafficLevel level) {
    switch (level) {
        case TrafficLevel::Low: return "low";
        case TrafficLevel::Medium: return "medium";
        case TrafficLevel::High: return "high";
    }
    return "?";
}

const char* to_string(ControllerCase c) {
    switch (c) {
        case ControllerCase::Baseline: return "baseline";
        case ControllerCase::VDOnly: return "vd";
        case ControllerCase::PTOnly: return "pt";
        case ControllerCase::VDPlusPT: return "vdpt";
    }
    return "?";
}

double RouteFlows::for_route(Route r) const {
    switch (r) {
        case Route::Main: return main;
        case Route::Highway: return highway;
        case Route::SRZSide: return srz_side;
        case Route::RoundaboutSide: return roundabout_side;
    }
    return 0.0;
}

RouteFlows flows_for(TrafficLevel level) {
    // Values follow the source traffic-volume table verbatim; note the "Low"
    // column carries the highest flows.
    switch (level) {
        case TrafficLevel::Low: return {500.0, 800.0, 1400.0, 700.0};
        case TrafficLevel::Medium: return {400.0, 600.0, 1100.0, 550.0};
        case TrafficLevel::High: return {300.0, 400.0, 800.0, 400.0};
    }
    return {};
}

void ScenarioConfig::validate() const {
    if (dt <= 0.0 || dt > 0.5) throw InvalidInput("dt must lie in (0, 0.5]");
    if (duration <= 0.0) throw InvalidInput("duration must be positive");
    if (flows.main < 0.0 || flows.highway < 0.0 || flows.srz_side < 0.0 ||
        flows.roundabout_side < 0.0)
        throw InvalidInput("traffic flows must be non-negative");
    corridor.validate();
}

std::vector<Arrival> spawn_traffic(const RouteFlows& flows, double duration, std::uint64_t seed,
                                   const SafetyParams& safety, const DriverParams& driver) {
    if (duration <= 0.0) return {};
    const Route routes[] = {Route::Main, Route::Highway, Route::SRZSide, Route::RoundaboutSide};
    const double v_d = std::max(driver.desired_speed, 1.0);
    const double min_headway = 1.2 * (safety.gamma + safety.rho * v_d) / v_d;

    std::vector<Arrival> out;
    for (std::size_t ri = 0; ri < 4; ++ri) {
        const double vph = flows.for_route(routes[ri]);
        if (vph < 0.0) throw InvalidInput("negative traffic flow");
        if (vph == 0.0) continue;
        std::mt19937_64 rng(seed * 4u + ri);
        std::exponential_distribution<double> gap(vph / 3600.0);
        std::uniform_real_distribution<double> noise(0.9, 1.1);
        std::uniform_real_distribution<double> speed_noise(0.85, 1.15);
        double t = gap(rng);
        double prev = -1e9;
        while (t < duration) {
            const double when = std::max(t, prev + min_headway);
            if (when >= duration) break;
            out.push_back(Arrival{routes[ri], when, noise(rng), speed_noise(rng)});
            prev = when;
            t = when + gap(rng);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Arrival& a, const Arrival& b) {
        if (a.time != b.time) return a.time < b.time;
        return static_cast<int>(a.route) < static_cast<int>(b.route);
    });
    return out;
}

namespace {

// ---------------------------------------------------------------------------
// Quasi-static powertrain bookkeeping shared by the corridor simulation and
// the drive-cycle tracer.

struct PtState {
    Battery batt;
    double fuel_g = 0.0;
    std::optional<int> gear;
};

// Largest motor torque magnitude (same sign as `torque`) whose electrical
// power stays inside the battery limit.
double limit_motor_torque_by_power(const PowertrainMaps& maps, double rpm, double torque,
                                   double p_max) {
    if (torque == 0.0) return 0.0;
    const double p = motor_electrical_power(rpm, torque, maps);
    if (std::abs(p) <= p_max) return torque;
    double lo = 0.0, hi = std::abs(torque);
    for (int i = 0; i < 48; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double pm = mid > 0.0
                              ? std::abs(motor_electrical_power(rpm, std::copysign(mid, torque),
                                                                maps))
                              : 0.0;
        if (pm <= p_max) lo = mid;
        else hi = mid;
    }
    return std::copysign(lo, torque);
}

void energy_step(PtState& st, double v, double a, double dt, const PowertrainMaps& maps,
                 const ParetoTable* table, bool use_pareto, const VehicleParams& vehicle,
                 const Driveline& driveline, Mode mode) {
    const WheelLoad wl = road_load(v, a, vehicle);
    const double p_budget = 0.999 * st.batt.max_power;

    int gear = 0;
    double p_elec = 0.0;
    double fuel_rate = 0.0;

    if (wl.wheel_torque >= 0.0) {
        try {
            gear = gear_select(v, wl.wheel_torque, driveline, maps, vehicle, st.gear);
        } catch (const NoFeasibleGear&) {
            gear = gear_select(v, 0.0, driveline, maps, vehicle, st.gear);
        }
        const double rpm = shaft_speed_rpm(v, gear, driveline, vehicle);
        const double ecap = maps.engine_can_run(rpm) ? maps.engine_torque_limit(rpm) : 0.0;
        const double mcap = maps.motor_torque_limit(rpm);
        double demand = std::min(shaft_torque_for_wheel(wl.wheel_torque, gear, driveline),
                                 ecap + mcap);

        TorqueSplit split;
        bool have_split = false;
        if (use_pareto && table) {
            try {
                split = table->lookup(rpm, demand);
                have_split = true;
            } catch (const ModelError&) {
                have_split = false;
            }
            if (have_split) {
                // Repair bucket-vs-actual-speed envelope mismatches.
                if (split.engine > ecap) {
                    split.motor += split.engine - ecap;
                    split.engine = ecap;
                }
                if (split.motor > mcap) {
                    const double spill = split.motor - mcap;
                    split.motor = mcap;
                    split.engine = std::min(split.engine + spill, ecap);
                }
                if (split.engine < 0.0) split.engine = 0.0;
            }
        }
        if (!have_split) split = baseline_split(mode, rpm, demand, st.batt, maps);

        p_elec = split.motor != 0.0 ? motor_electrical_power(rpm, split.motor, maps) : 0.0;
        if (p_elec > p_budget) {
            const double t_ok = limit_motor_torque_by_power(maps, rpm, split.motor, p_budget);
            split.engine = std::min(split.engine + (split.motor - t_ok), ecap);
            split.motor = t_ok;
            p_elec = split.motor != 0.0 ? motor_electrical_power(rpm, split.motor, maps) : 0.0;
        } else if (p_elec < -p_budget) {
            const double t_ok = limit_motor_torque_by_power(maps, rpm, split.motor, p_budget);
            split.motor = t_ok;
            split.engine = std::min(std::max(demand - t_ok, 0.0), ecap);
            p_elec = split.motor != 0.0 ? motor_electrical_power(rpm, split.motor, maps) : 0.0;
        }
        if (p_elec < 0.0 && st.batt.soc >= 0.9999) {
            split.engine = std::min(demand, ecap);
            split.motor = std::max(demand - split.engine, 0.0);
            p_elec = split.motor != 0.0 ? motor_electrical_power(rpm, split.motor, maps) : 0.0;
        }
        fuel_rate = split.engine > 0.0 ? engine_fuel_rate(rpm, split.engine, maps) : 0.0;
    } else {
        // Braking: regenerate up to the generator and battery limits, burn
        // the remainder in the friction brakes. Engine decoupled.
        gear = gear_select(v, 0.0, driveline, maps, vehicle, st.gear);
        const double rpm = shaft_speed_rpm(v, gear, driveline, vehicle);
        const double demand = shaft_torque_for_wheel(wl.wheel_torque, gear, driveline);
        const double gen_cap = std::min(maps.generator_max_torque, maps.motor_torque_limit(rpm));
        double t_mot = std::max(demand, -gen_cap);
        // Charge-sustaining ceiling: no regeneration above the hold band.
        if (st.batt.soc >= st.batt.soc_ref + st.batt.hold_band) t_mot = 0.0;
        t_mot = limit_motor_torque_by_power(maps, rpm, t_mot, p_budget);
        p_elec = t_mot != 0.0 ? motor_electrical_power(rpm, t_mot, maps) : 0.0;
    }

    st.batt = battery_step(st.batt, p_elec, dt);
    st.fuel_g += fuel_rate * dt;
    st.gear = gear;
}

// ---------------------------------------------------------------------------
// Corridor simulation internals.

constexpr double kStopSpeed = 0.5;  // m/s, stop-event threshold

struct SideGeometry {
    double cz_entry = 0.0;
    double conflict_entry = 0.0;
    double conflict_exit = 0.0;
    double route_end = 0.0;
};

SideGeometry side_geometry(const Corridor& corridor, const ConflictZoneSpec& zone) {
    SideGeometry g;
    g.conflict_entry =
        zone.side_feeder_length > 0.0 ? zone.side_feeder_length : corridor.side_route_length;
    g.cz_entry = std::max(10.0, g.conflict_entry - zone.control_zone_length);
    g.conflict_exit = g.conflict_entry + zone.zone_length;
    // Departure leg: trips end back at cruise speed so per-vehicle energy
    // accounting is not dominated by the terminal kinetic-energy state.
    g.route_end = g.conflict_exit + 200.0;
    return g;
}

int zone_for_side_route(const Corridor& corridor, Route route) {
    for (std::size_t z = 0; z < corridor.zones.size(); ++z)
        if (corridor.zones[z].side_route == route) return static_cast<int>(z);
    return -1;
}

struct SimVehicle {
    int id = 0;
    Route route = Route::Main;
    double p = 0.0;
    double v = 0.0;
    double u = 0.0;
    double spawn_time = 0.0;
    double bx_noise = 1.0;
    double speed_factor = 1.0;
    PtState energy;
    double initial_soc = 0.5;

    int stop_count = 0;
    bool below_stop = false;
    bool vd_fallback_any = false;
    std::vector<TracePoint> trace;
    double next_trace = 0.0;

    // VD bookkeeping for the active zone (registered, not yet past exit)
    int active_zone = -1;
    bool has_traj = false;
    CubicTrajectory traj;
    double tz = 0.0;
    double v_tz = 0.0;
    bool fallback_zone = false;
    bool released = false;  // fallback vehicle cleared to cross
};

// Largest terminal speed reachable at the assigned entry time. The minimum
// distance of a brake / dwell / accelerate profile ending at vf is monotone
// increasing in vf; invert it against the available distance. Returns 0 when
// even the slowest crossing overshoots the entry line.
double achievable_crossing_speed(double v0, double dist, double T, const Limits& lim,
                                 double v_target) {
    if (T <= 0.0) return 0.0;
    const double au = lim.u_max, ad = -lim.u_min;
    const auto min_dist = [&](double vf) -> double {
        double w = (au * v0 + ad * vf - T * au * ad) / (au + ad);
        double dwell = 0.0;
        if (w < lim.v_min) {
            w = lim.v_min;
            dwell = T - (v0 - w) / ad - (vf - w) / au;
        }
        if (w > std::min(v0, vf) || dwell < 0.0) return 0.0;  // no dip forced
        return (v0 * v0 - w * w) / (2.0 * ad) + w * dwell + (vf * vf - w * w) / (2.0 * au);
    };
    if (min_dist(v_target) <= dist) return v_target;
    double lo = lim.v_min, hi = v_target;
    if (min_dist(lo) > dist) return 0.0;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (min_dist(mid) <= dist ? lo : hi) = mid;
    }
    return std::max(lim.v_min, 0.97 * lo);
}

// Appends a constant-speed conflict-zone crossing to a control-zone
// trajectory so followers can be verified past the leader's entry time.
CubicTrajectory extend_through_zone(const CubicTrajectory& traj, double v_cross,
                                    double zone_length) {
    std::vector<Arc> arcs = traj.arcs();
    Arc a;
    a.t_start = traj.t_end();
    a.t_end = a.t_start + zone_length / std::max(v_cross, 0.5);
    a.kind = ArcKind::Unconstrained;
    a.a = 0.0;
    a.b = 0.0;
    a.c = v_cross;
    a.d = traj.evaluate(traj.t_end()).p;
    arcs.push_back(a);
    return CubicTrajectory(std::move(arcs));
}

struct Engine {
    const ScenarioConfig& cfg;
    const PowertrainMaps& maps;
    const ParetoTable* table;
    bool vd_active;
    bool pt_active;

    std::vector<SimVehicle> fleet;          // stable storage, never reordered
    std::vector<std::vector<int>> by_route;  // front-to-back fleet indices
    std::vector<ZoneQueue> queues;
    SimResult result;

    Engine(const ScenarioConfig& c, const PowertrainMaps& m, const ParetoTable* t)
        : cfg(c), maps(m), table(t) {
        vd_active = cfg.controller_case == ControllerCase::VDOnly ||
                    cfg.controller_case == ControllerCase::VDPlusPT;
        pt_active = cfg.controller_case == ControllerCase::PTOnly ||
                    cfg.controller_case == ControllerCase::VDPlusPT;
        by_route.resize(4);
        const int n = static_cast<int>(cfg.corridor.zones.size());
        for (int z = 0; z < n; ++z) queues.emplace_back(z);
        // Separate queues for side routes that do not share the conflict
        // area with the main stream (their own speed-reduction stretch).
        for (int z = 0; z < n; ++z) queues.emplace_back(n + z);
    }

    SimVehicle& veh(int idx) { return fleet[static_cast<std::size_t>(idx)]; }

    bool shares_conflict(int zone_idx) const {
        return cfg.corridor.zones[static_cast<std::size_t>(zone_idx)].kind !=
               ZoneKind::SpeedReductionZone;
    }

    int queue_id(Route route, int zone_idx) const {
        if (route == Route::Main || shares_conflict(zone_idx)) return zone_idx;
        return static_cast<int>(cfg.corridor.zones.size()) + zone_idx;
    }

    // Geometry of zone `z` in the coordinates of `route` (negative entries
    // mean the zone does not exist on that route).
    bool zone_bounds(Route route, int z, double& cz_entry, double& c_entry,
                     double& c_exit) const {
        const auto& zone = cfg.corridor.zones[static_cast<std::size_t>(z)];
        if (route == Route::Main) {
            cz_entry = zone.cz_entry_pos;
            c_entry = zone.conflict_entry_pos();
            c_exit = zone.conflict_exit_pos();
            return true;
        }
        if (zone.side_route != route) return false;
        const SideGeometry g = side_geometry(cfg.corridor, zone);
        cz_entry = g.cz_entry;
        c_entry = g.conflict_entry;
        c_exit = g.conflict_exit;
        return true;
    }

    double route_end(Route route) const {
        if (route == Route::Main) return cfg.corridor.total_length;
        const int z = zone_for_side_route(cfg.corridor, route);
        if (z < 0) return cfg.corridor.side_route_length;
        return side_geometry(cfg.corridor, cfg.corridor.zones[static_cast<std::size_t>(z)])
            .route_end;
    }

    ZoneContext context_for(Route route, double p) const {
        if (route == Route::Main) return locate(cfg.corridor, p);
        const int z = zone_for_side_route(cfg.corridor, route);
        ZoneContext ctx;
        if (z < 0) return ctx;
        double cz, ce, cx;
        zone_bounds(route, z, cz, ce, cx);
        if (p >= cz && p < ce) ctx = {ZoneContext::Kind::ControlZone, z};
        else if (p >= ce && p < cx) ctx = {ZoneContext::Kind::ConflictZone, z};
        return ctx;
    }

    double crossing_speed(int zone_idx) const {
        return std::min(cfg.corridor.zones[static_cast<std::size_t>(zone_idx)].zone_speed_limit,
                        cfg.corridor.v_max);
    }

    bool conflict_occupied_by_other_stream(int zone_idx, Route route,
                                           const std::vector<double>& old_p) const {
        for (std::size_t r = 0; r < 4; ++r) {
            const Route rr = static_cast<Route>(r);
            if (rr == route) continue;
            double cz, ce, cx;
            if (!zone_bounds(rr, zone_idx, cz, ce, cx)) continue;
            if (rr != Route::Main && !shares_conflict(zone_idx)) continue;
            for (int idx : by_route[r]) {
                const double p = old_p[static_cast<std::size_t>(idx)];
                if (p >= ce && p < cx) return true;
            }
        }
        return false;
    }

    // Same check against committed (current) positions, for the sequential
    // entry gate: earlier-processed routes have already moved this step.
    bool conflict_occupied_live(int zone_idx, Route route) const {
        for (std::size_t r = 0; r < 4; ++r) {
            const Route rr = static_cast<Route>(r);
            if (rr == route) continue;
            double cz, ce, cx;
            if (!zone_bounds(rr, zone_idx, cz, ce, cx)) continue;
            if (rr != Route::Main && !shares_conflict(zone_idx)) continue;
            for (int idx : by_route[r]) {
                const double p = fleet[static_cast<std::size_t>(idx)].p;
                if (p >= ce && p < cx) return true;
            }
        }
        return false;
    }

    // Predicted conflict-zone occupancy of the priority (main) stream, for
    // the baseline gap-acceptance rule.
    std::vector<ZoneOccupancy> main_occupancy(int zone_idx, const std::vector<double>& old_p,
                                              const std::vector<double>& old_v) const {
        std::vector<ZoneOccupancy> occ;
        double cz, ce, cx;
        zone_bounds(Route::Main, zone_idx, cz, ce, cx);
        for (int idx : by_route[0]) {
            const double p = old_p[static_cast<std::size_t>(idx)];
            const double v = std::max(old_v[static_cast<std::size_t>(idx)], 0.5);
            if (p >= cx) continue;
            // A main-street vehicle stalled short of the box is itself
            // waiting (for this stream to clear); it is not approaching.
            if (p < ce && old_v[static_cast<std::size_t>(idx)] < 1.0) continue;
            const double entry = p >= ce ? 0.0 : (ce - p) / v;
            const double exit = (cx - p) / v;
            if (entry > 3.0 * cfg.gap_acceptance) continue;
            occ.push_back(ZoneOccupancy{fleet[static_cast<std::size_t>(idx)].id, entry, exit});
        }
        return occ;
    }

    const SimVehicle* fleet_by_id(int id) const {
        for (const auto& v : fleet)
            if (v.id == id) return &v;
        return nullptr;
    }

    // Nearest same-route predecessor in the queue that is still following its
    // own planned trajectory.
    const SimVehicle* same_route_planned_pred(const ZoneQueue& q, const SimVehicle& me) const {
        const auto& entries = q.entries();
        std::size_t my_pos = entries.size();
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].vehicle_id == me.id) my_pos = i;
        for (std::size_t i = my_pos; i-- > 0;) {
            const SimVehicle* cand = fleet_by_id(entries[i].vehicle_id);
            if (cand && cand->route == me.route && cand->has_traj && !cand->fallback_zone)
                return cand;
        }
        return nullptr;
    }

    // Registers the vehicle in its zone queue, assigns a conflict-zone entry
    // time and solves the control-zone trajectory, bumping the entry time
    // when the solve is infeasible or violates the rear-end constraint
    // against the planned predecessor.
    void assign_and_solve(SimVehicle& me, int zone_idx, double t_now) {
        const auto& zone = cfg.corridor.zones[static_cast<std::size_t>(zone_idx)];
        ZoneQueue& q = queues[static_cast<std::size_t>(queue_id(me.route, zone_idx))];
        const Limits limits{cfg.corridor.u_min, cfg.corridor.u_max,
                            std::min(cfg.corridor.v_min, std::max(me.v, 0.1)),
                            std::max(cfg.corridor.v_max, me.v)};
        const double v_target = crossing_speed(zone_idx);
        const double v0 = std::max(me.v, cfg.corridor.v_min);

        q.register_vehicle(me.id, t_now, v0);
        double tz = q.assign_entry_time(me.id, zone, cfg.safety, limits, v_target);

        // Cross-stream clearance / same-stream crossing headway floor.
        if (const QueueEntry* pred = q.predecessor_of(me.id); pred && pred->tz) {
            const SimVehicle* pv = fleet_by_id(pred->vehicle_id);
            double req;
            if (pv && pv->route != me.route) {
                // A side-stream predecessor held at the line re-starts its
                // crossing well below the nominal speed; budget for that.
                const double pvx = (pv->route == Route::Main ? 1.0 : 0.45) * pred->v_at_tz;
                req = *pred->tz + 1.15 * zone.zone_length / std::max(pvx, 0.5);
            } else {
                req = *pred->tz +
                      1.1 * (cfg.safety.gamma + cfg.safety.rho * v_target) / v_target;
            }
            if (req > tz) {
                q.update_assignment(me.id, req);
                tz = req;
            }
        }

        double cz, ce, cx;
        zone_bounds(me.route, zone_idx, cz, ce, cx);
        me.active_zone = zone_idx;
        me.v_tz = v_target;
        me.fallback_zone = false;
        me.released = false;
        me.has_traj = false;

        BoundaryConditions bc;
        bc.t0 = t_now;
        bc.p0 = me.p;
        bc.v0 = std::max(me.v, 0.1);
        bc.pf = ce;

        for (int attempt = 0; attempt < 12; ++attempt) {
            bc.tf = tz;
            // A delayed vehicle cannot both dawdle and cross at the nominal
            // speed; pin the fastest achievable terminal speed instead. While
            // the planned predecessor is still inside the conflict area, do
            // not plan to cross faster than it does.
            double vf =
                achievable_crossing_speed(bc.v0, ce - me.p, tz - t_now, limits, v_target);
            const SimVehicle* leader = same_route_planned_pred(q, me);
            if (leader &&
                tz < leader->tz + zone.zone_length / std::max(leader->v_tz, 0.5))
                vf = std::min(vf, leader->v_tz);
            if (vf < limits.v_min) break;  // later entry times only overshoot more
            bc.terminal_speed = vf;
            CubicTrajectory candidate;
            try {
                candidate = piece_arcs(bc, limits);
            } catch (const ModelError&) {
                if (attempt < 6) {
                    tz += 0.5;
                    q.update_assignment(me.id, tz);
                    continue;
                }
                break;
            }
            if (leader) {
                const CubicTrajectory lead_ext =
                    extend_through_zone(leader->traj, leader->v_tz, zone.zone_length);
                if (t_now < lead_ext.t_end()) {
                    const RearEndReport rpt =
                        verify_rear_end(lead_ext, candidate, cfg.safety, 0.05);
                    if (!rpt.ok()) {
                        tz += 0.25;
                        q.update_assignment(me.id, tz);
                        continue;
                    }
                }
            }
            me.traj = candidate;
            me.tz = tz;
            me.v_tz = vf;
            me.has_traj = true;
            q.set_crossing_speed(me.id, vf);
            return;
        }
        me.fallback_zone = true;
        me.vd_fallback_any = true;
        me.tz = tz;
        ++result.infeasible_assignments;
    }

    // Side-route vehicles at shared conflicts keep baseline driving but
    // receive an assigned entry time; they time their arrival at the entry
    // line instead of judging gaps themselves.
    void assign_side_slot(SimVehicle& me, int zone_idx, double t_now) {
        const auto& zone = cfg.corridor.zones[static_cast<std::size_t>(zone_idx)];
        ZoneQueue& q = queues[static_cast<std::size_t>(queue_id(me.route, zone_idx))];
        const Limits limits{cfg.corridor.u_min, cfg.corridor.u_max, cfg.corridor.v_min,
                            std::max(cfg.corridor.v_max, me.v)};
        const double v0 = std::max(me.v, cfg.corridor.v_min);
        const double v_cross = crossing_speed(zone_idx);

        q.register_vehicle(me.id, t_now, v0);
        double cz_s, ce_s, cx_s;
        zone_bounds(me.route, zone_idx, cz_s, ce_s, cx_s);
        // Entry-time bounds are computed over the actual remaining approach,
        // which for side routes is longer than the nominal control zone.
        ConflictZoneSpec approach = zone;
        approach.control_zone_length = std::max(ce_s - me.p, 1.0);
        double tz = q.assign_entry_time(me.id, approach, cfg.safety, limits, v_cross);
        if (const QueueEntry* pred = q.predecessor_of(me.id); pred && pred->tz) {
            const SimVehicle* pv = fleet_by_id(pred->vehicle_id);
            double req;
            if (pv && pv->route != me.route) {
                // A side-stream predecessor held at the line re-starts its
                // crossing well below the nominal speed; budget for that.
                const double pvx = (pv->route == Route::Main ? 1.0 : 0.45) * pred->v_at_tz;
                req = *pred->tz + 1.15 * zone.zone_length / std::max(pvx, 0.5);
            } else {
                req = *pred->tz + 1.1 * (cfg.safety.gamma + cfg.safety.rho * v_cross) / v_cross;
            }
            if (req > tz) {
                q.update_assignment(me.id, req);
                tz = req;
            }
        }
        me.active_zone = zone_idx;
        me.tz = tz;
        me.v_tz = v_cross;
        me.has_traj = false;
        me.fallback_zone = false;
        me.released = false;
    }
};

struct PlannedMove {
    double p = 0.0;
    double v = 0.0;
    double u = 0.0;
};

}  // namespace

SimResult run_scenario(const ScenarioConfig& config, const PowertrainMaps& maps,
                       const ParetoTable* table) {
    config.validate();
    const bool pt_case = config.controller_case == ControllerCase::PTOnly ||
                         config.controller_case == ControllerCase::VDPlusPT;
    if (pt_case) {
        if (!table) throw ParetoTableMissing("PT controller case requires a Pareto table");
        if (table->fingerprint() != maps_fingerprint(maps))
            throw ParetoTableMissing("Pareto table fingerprint does not match the active maps");
    }

    Engine eng(config, maps, table);
    SimResult& result = eng.result;
    result.controller_case = config.controller_case;
    result.flows = config.flows;
    result.dt = config.dt;
    result.duration = config.duration;
    result.seed = config.seed;

    const std::vector<Arrival> arrivals =
        spawn_traffic(config.flows, config.duration, config.seed, config.safety, config.driver);
    std::size_t next_arrival = 0;
    std::vector<Arrival> pending[4];

    const double dt = config.dt;
    const int steps = static_cast<int>(std::ceil(config.duration / dt));
    std::vector<double> travel_times;
    std::vector<double> mpges;

    const auto finalize = [&](SimVehicle& v, double t_exit) {
        VehicleRecord rec;
        rec.id = v.id;
        rec.route = v.route;
        rec.spawn_time = v.spawn_time;
        rec.exit_time = t_exit;
        rec.travel_time = t_exit - v.spawn_time;
        rec.distance_miles = units::m_to_miles(v.p);
        rec.fuel_gallons = v.energy.fuel_g / 1000.0 / constants::kFuelKgPerGallon;
        rec.net_battery_kwh = (v.initial_soc - v.energy.batt.soc) * v.energy.batt.capacity_kwh;
        try {
            rec.mpge = mpge(rec.distance_miles, rec.fuel_gallons, rec.net_battery_kwh,
                            config.kwh_per_gallon);
        } catch (const ModelError&) {
            rec.mpge = 0.0;
        }
        rec.stop_count = v.stop_count;
        rec.vd_fallback = v.vd_fallback_any;
        rec.trace = std::move(v.trace);
        travel_times.push_back(rec.travel_time);
        if (rec.mpge > 0.0) mpges.push_back(rec.mpge);
        result.records.push_back(std::move(rec));
    };

    int next_id = 1;
    std::vector<double> old_p, old_v;

    for (int step = 0; step < steps; ++step) {
        const double t = step * dt;
        const double t_next = t + dt;

        // --- spawn due arrivals (delayed when the entry is blocked) ---
        while (next_arrival < arrivals.size() && arrivals[next_arrival].time <= t) {
            const Arrival& a = arrivals[next_arrival++];
            pending[static_cast<int>(a.route)].push_back(a);
        }
        for (int r = 0; r < 4; ++r) {
            auto& queue_in = pending[r];
            while (!queue_in.empty()) {
                const Arrival& a = queue_in.front();
                double gap = 1e18;
                double lead_v = config.driver.desired_speed;
                if (!eng.by_route[r].empty()) {
                    const SimVehicle& back = eng.veh(eng.by_route[r].back());
                    gap = back.p;
                    lead_v = back.v;
                }
                const double sf = eng.vd_active ? 1.0 : a.speed_factor;
                // Trips start at cruise, as if arriving from an upstream
                // link; an arrival waits at the entry until the gap admits
                // full speed so per-trip energy is not dominated by an
                // artificial standing start.
                const double v_spawn = config.driver.desired_speed * sf;
                const double brake_ok = std::sqrt(2.0 * config.driver.max_decel *
                                                  std::max(0.0, gap - config.safety.gamma));
                if (v_spawn > brake_ok) break;
                if (gap < 1.2 * (config.safety.gamma + config.safety.rho * v_spawn)) break;
                (void)lead_v;
                SimVehicle v;
                v.id = next_id++;
                v.route = static_cast<Route>(r);
                v.p = 0.0;
                v.v = v_spawn;
                v.spawn_time = t;
                v.bx_noise = a.driver_noise;
                v.speed_factor = a.speed_factor;
                v.energy.batt.soc = config.initial_soc;
                v.energy.batt.soc_ref = config.initial_soc;
                v.initial_soc = config.initial_soc;
                v.next_trace = t;
                eng.fleet.push_back(std::move(v));
                eng.by_route[r].push_back(static_cast<int>(eng.fleet.size()) - 1);
                queue_in.erase(queue_in.begin());
            }
        }

        // --- snapshot old states (synchronous update) ---
        old_p.assign(eng.fleet.size(), 0.0);
        old_v.assign(eng.fleet.size(), 0.0);
        for (std::size_t i = 0; i < eng.fleet.size(); ++i) {
            old_p[i] = eng.fleet[i].p;
            old_v[i] = eng.fleet[i].v;
        }

        // --- phase A: plan moves from old states ---
        std::vector<PlannedMove> moves(eng.fleet.size());
        for (int r = 0; r < 4; ++r) {
            const auto& order = eng.by_route[r];
            for (std::size_t k = 0; k < order.size(); ++k) {
                const int idx = order[k];
                SimVehicle& me = eng.veh(idx);
                if (me.id < 0) continue;  // finished
                const double p0 = old_p[static_cast<std::size_t>(idx)];
                const double v0 = old_v[static_cast<std::size_t>(idx)];
                PlannedMove mv;

                const int lead_idx = k > 0 ? order[k - 1] : -1;

                if (eng.vd_active && me.has_traj && !me.fallback_zone) {
                    // Follow the assigned trajectory exactly; constant-speed
                    // crossing of the conflict area after tz.
                    double cz, ce, cx;
                    eng.zone_bounds(me.route, me.active_zone, cz, ce, cx);
                    if (t_next <= me.tz) {
                        const TrajectorySample s = me.traj.evaluate(t_next);
                        mv.p = s.p;
                        mv.v = s.v;
                        mv.u = s.u;
                    } else {
                        mv.v = me.v_tz;
                        mv.p = ce + me.v_tz * (t_next - me.tz);
                        mv.u = 0.0;
                    }
                    // Last-resort supervisors: never follow a plan into the
                    // predecessor's bumper, and never enter an occupied box.
                    if (lead_idx >= 0) {
                        const SimVehicle& lv = eng.veh(lead_idx);
                        const double gap = old_p[static_cast<std::size_t>(lead_idx)] - p0;
                        if (gap < config.safety.gamma) {
                            me.fallback_zone = true;
                            me.vd_fallback_any = true;
                            me.has_traj = false;
                            const double vn = std::max(0.0, v0 - config.driver.max_decel * dt);
                            mv = {p0 + vn * dt, vn, -config.driver.max_decel};
                        } else if ((lv.fallback_zone &&
                                    gap < 2.0 * (config.safety.gamma +
                                                 config.safety.rho * v0)) ||
                                   (!lv.has_traj && t >= me.tz &&
                                    old_v[static_cast<std::size_t>(lead_idx)] < v0 - 0.3 &&
                                    gap < 1.4 * (config.safety.gamma +
                                                 config.safety.rho * v0))) {
                            // The plan was verified against the leader's own
                            // plan; drop to gap-governed following when the
                            // leader abandoned its plan, or when it has left
                            // the zone slower than this vehicle's crossing
                            // speed.
                            me.fallback_zone = true;
                            me.vd_fallback_any = true;
                            me.has_traj = false;
                            const double vn = std::max(0.0, v0 - 1.5 * dt);
                            mv = {p0 + vn * dt, vn, -1.5};
                        }
                    }
                    if (me.has_traj && p0 < ce && mv.p >= ce &&
                        eng.shares_conflict(me.active_zone) &&
                        eng.conflict_occupied_by_other_stream(me.active_zone, me.route,
                                                              old_p)) {
                        me.fallback_zone = true;
                        me.vd_fallback_any = true;
                        me.has_traj = false;
                        const double vn = std::max(0.0, v0 - config.driver.max_decel * dt);
                        mv = {p0 + vn * dt, vn, -config.driver.max_decel};
                    }
                    moves[static_cast<std::size_t>(idx)] = mv;
                    continue;
                }

                // Baseline control (optionally with the connected-gap
                // governor in VD cases).
                const ZoneContext ctx = eng.context_for(me.route, p0);
                DriverParams dp = config.driver;
                dp.bx_add *= me.bx_noise;
                // Desired-speed heterogeneity models human preference; in
                // the velocity-smoothing cases the corridor-wide speed
                // advisory harmonizes every connected vehicle's target.
                if (!eng.vd_active) dp.desired_speed *= me.speed_factor;
                if (ctx.kind == ZoneContext::Kind::ConflictZone)
                    dp.desired_speed =
                        std::min(dp.desired_speed,
                                 config.corridor.zones[static_cast<std::size_t>(ctx.zone_index)]
                                     .zone_speed_limit);

                VehicleState self;
                self.id = me.id;
                self.route = me.route;
                self.p = p0;
                self.v = v0;

                std::optional<VehicleState> virtual_leader;
                double pace_speed = -1.0;  // advisory slot-pacing target
                const int side_zone = zone_for_side_route(config.corridor, me.route);
                const bool shares =
                    side_zone >= 0 && eng.shares_conflict(side_zone) && me.route != Route::Main;

                if (shares) {
                    double cz, ce, cx;
                    eng.zone_bounds(me.route, side_zone, cz, ce, cx);
                    if (p0 >= cz && p0 < ce) {
                        const double dist = ce - p0;
                        const bool committed =
                            v0 > 1.0 &&
                            v0 * v0 / (2.0 * config.driver.max_decel) > dist - dp.ax;
                        bool must_stop = false;
                        if (!eng.vd_active) {
                            // Drivers approach a yield line slowly enough to
                            // judge (or hit) their crossing gap, whether or
                            // not they end up stopping.
                            const double caution = std::sqrt(
                                dp.yield_approach_speed * dp.yield_approach_speed +
                                2.0 * dp.yield_approach_decel * std::max(0.0, dist));
                            dp.desired_speed = std::min(dp.desired_speed, caution);
                            if (dist < 60.0) {
                                const auto occ = eng.main_occupancy(side_zone, old_p, old_v);
                                must_stop =
                                    yield_decision(occ, config.gap_acceptance) ==
                                    YieldDecision::Stop;
                            }
                        } else if (me.active_zone >= 0) {
                            // Assigned slot: pace the approach to reach the
                            // line at tz rolling at the crossing speed, and
                            // hold only when the natural motion would still
                            // arrive early or the box is occupied near the
                            // line.
                            const double vc = me.v_tz;
                            const double T = me.tz - t;
                            const double a = dp.max_accel;
                            const double eta =
                                t + (std::sqrt(v0 * v0 + 2.0 * a * dist) - v0) / a;
                            must_stop = eta < me.tz - 1e-9;
                            if (must_stop && T > 1e-9) {
                                // Cruise speed w such that cruising then
                                // accelerating to vc covers dist in exactly T.
                                const auto covered = [&](double w) {
                                    const double ta =
                                        std::min(T, std::max(0.0, (vc - w) / a));
                                    return w * (T - ta) + 0.5 * (w + vc) * ta;
                                };
                                if (covered(0.0) < dist) {
                                    double lo = 0.0, hi = vc;
                                    for (int it = 0; it < 30; ++it) {
                                        const double mid = 0.5 * (lo + hi);
                                        (covered(mid) < dist ? lo : hi) = mid;
                                    }
                                    pace_speed = hi;
                                    must_stop = false;
                                }
                            }
                            if (!must_stop && dist < 25.0 &&
                                eng.conflict_occupied_by_other_stream(me.active_zone,
                                                                      me.route, old_p))
                                must_stop = true;
                        }
                        if (!committed && must_stop) {
                            VehicleState stopline;
                            stopline.p = ce + dp.ax;
                            stopline.v = 0.0;
                            virtual_leader = stopline;
                        }
                    }
                } else if (!eng.vd_active && me.route == Route::Main) {
                    // Collision avoidance at shared conflict areas: the
                    // priority stream still cannot drive into a box a
                    // side-stream vehicle currently occupies.
                    for (std::size_t z = 0; z < config.corridor.zones.size(); ++z) {
                        if (!eng.shares_conflict(static_cast<int>(z))) continue;
                        double cz, ce, cx;
                        eng.zone_bounds(Route::Main, static_cast<int>(z), cz, ce, cx);
                        if (p0 >= ce || p0 < cz) continue;
                        if (eng.conflict_occupied_by_other_stream(static_cast<int>(z),
                                                                  Route::Main, old_p)) {
                            VehicleState stopline;
                            stopline.p = ce + dp.ax;
                            stopline.v = 0.0;
                            virtual_leader = stopline;
                        }
                        break;
                    }
                } else if (eng.vd_active && me.active_zone >= 0 && me.fallback_zone) {
                    // Fallback vehicles hold at the conflict entry until
                    // their slot and a clear zone; the clear check repeats
                    // every step up to the line.
                    double cz, ce, cx;
                    eng.zone_bounds(me.route, me.active_zone, cz, ce, cx);
                    if (p0 < ce) {
                        const bool clear = !eng.conflict_occupied_by_other_stream(
                            me.active_zone, me.route, old_p);
                        if (t >= me.tz && clear) {
                            me.released = true;
                        } else {
                            me.released = false;
                            VehicleState stopline;
                            stopline.p = ce + dp.ax;
                            stopline.v = 0.0;
                            virtual_leader = stopline;
                        }
                    }
                }

                VehicleState leader_state;
                const VehicleState* leader = nullptr;
                if (lead_idx >= 0) {
                    leader_state.p = old_p[static_cast<std::size_t>(lead_idx)];
                    leader_state.v = old_v[static_cast<std::size_t>(lead_idx)];
                    leader = &leader_state;
                }
                if (virtual_leader && (!leader || virtual_leader->p < leader->p))
                    leader = &*virtual_leader;

                double u;
                if (leader && leader->p < self.p) {
                    u = -dp.max_decel;  // overlap guard
                } else {
                    u = car_following_accel(self, leader, dp);
                }
                if (pace_speed >= 0.0) {
                    // Advisory pacing brakes at comfort level only; hard
                    // braking stays reserved for leaders and stop lines.
                    DriverParams dpp = dp;
                    dpp.desired_speed = std::min(dp.desired_speed, pace_speed);
                    const double u_pace =
                        std::max(car_following_accel(self, nullptr, dpp), -1.0);
                    u = std::min(u, u_pace);
                }
                if (eng.vd_active && me.route == Route::Main && leader) {
                    const double gap = leader->p - self.p;
                    // Regulate toward a gap 60% above the safe distance: a
                    // leader panic-stopping at a hold line from ~10 m/s
                    // needs that much slack for the follower to stay clear
                    // of the bound throughout the stop.
                    const double delta =
                        1.6 * (config.safety.gamma + config.safety.rho * v0);
                    const double u_gov =
                        (leader->v - v0 + 0.5 * (gap - delta)) / config.safety.rho;
                    u = std::min(u, u_gov);
                    if (gap < 1.05 * (config.safety.gamma + config.safety.rho * v0))
                        u = -dp.max_decel;
                    u = std::clamp(u, -dp.max_decel, dp.max_accel);
                }
                mv.v = std::max(0.0, v0 + u * dt);
                mv.p = p0 + mv.v * dt;
                mv.u = u;
                moves[static_cast<std::size_t>(idx)] = mv;
            }
        }

        // --- phase B: commit, register control-zone entries, energy, exits ---
        for (int r = 0; r < 4; ++r) {
            auto& order = eng.by_route[r];
            for (std::size_t k = 0; k < order.size(); ++k) {
                const int idx = order[k];
                SimVehicle& me = eng.veh(idx);
                if (me.id < 0) continue;
                const double p_old = old_p[static_cast<std::size_t>(idx)];
                const double v_old = old_v[static_cast<std::size_t>(idx)];
                const PlannedMove& mv = moves[static_cast<std::size_t>(idx)];
                me.p = mv.p;
                me.v = mv.v;
                me.u = mv.u;

                // Sequential entry gate (VD cases): a move may not carry a
                // vehicle into a shared box the other stream occupies. Routes
                // commit in a fixed order, so at most one stream can claim an
                // empty box per step and the exclusion is airtight.
                if (eng.vd_active) {
                    for (std::size_t z = 0; z < config.corridor.zones.size(); ++z) {
                        if (!eng.shares_conflict(static_cast<int>(z))) continue;
                        double cz, ce, cx;
                        if (!eng.zone_bounds(me.route, static_cast<int>(z), cz, ce, cx))
                            continue;
                        if (!(p_old < ce && me.p >= ce)) continue;
                        if (eng.conflict_occupied_live(static_cast<int>(z), me.route)) {
                            me.p = std::max(p_old, ce - 0.01);
                            // Keep kinematics consistent with the clamped
                            // position so followers see a true hard stop.
                            me.v = (me.p - p_old) / dt;
                            me.u = (me.v - v_old) / dt;
                            if (me.has_traj) {
                                me.has_traj = false;
                                me.fallback_zone = true;
                                me.vd_fallback_any = true;
                                me.released = false;
                            }
                        }
                        break;
                    }
                }

                // Control-zone entry registration (VD cases). Main-route
                // vehicles solve full trajectories; side-route vehicles at
                // shared conflicts only receive an entry time.
                if (eng.vd_active && me.active_zone < 0) {
                    for (std::size_t z = 0; z < config.corridor.zones.size(); ++z) {
                        double cz, ce, cx;
                        if (!eng.zone_bounds(me.route, static_cast<int>(z), cz, ce, cx))
                            continue;
                        if (p_old < cz && me.p >= cz && me.p < ce) {
                            if (me.route == Route::Main)
                                eng.assign_and_solve(me, static_cast<int>(z), t_next);
                            else if (eng.shares_conflict(static_cast<int>(z)))
                                eng.assign_side_slot(me, static_cast<int>(z), t_next);
                            break;
                        }
                    }
                }
                // Conflict-zone exit: release the queue slot.
                if (me.active_zone >= 0) {
                    double cz, ce, cx;
                    eng.zone_bounds(me.route, me.active_zone, cz, ce, cx);
                    if (me.p >= cx) {
                        eng.queues[static_cast<std::size_t>(
                                       eng.queue_id(me.route, me.active_zone))]
                            .remove(me.id);
                        me.active_zone = -1;
                        me.has_traj = false;
                        me.fallback_zone = false;
                        me.released = false;
                    }
                }

                // Energy bookkeeping at the committed kinematics.
                const double a = (me.v - v_old) / dt;
                energy_step(me.energy, me.v, a, dt, maps, table,
                            eng.pt_active && me.route == Route::Main, config.vehicle,
                            config.driveline, Mode::HoldBattery);

                // Stop events and trace sampling.
                if (me.v < kStopSpeed && !me.below_stop) {
                    ++me.stop_count;
                    me.below_stop = true;
                } else if (me.v >= kStopSpeed) {
                    me.below_stop = false;
                }
                if (config.trace_period > 0.0 && t_next >= me.next_trace - 1e-9) {
                    me.trace.push_back(TracePoint{t_next, me.p, me.v});
                    me.next_trace += config.trace_period;
                }

                // Route completion.
                if (me.p >= eng.route_end(me.route)) {
                    if (me.active_zone >= 0) {
                        eng.queues[static_cast<std::size_t>(
                                       eng.queue_id(me.route, me.active_zone))]
                            .remove(me.id);
                        me.active_zone = -1;
                    }
                    finalize(me, t_next);
                    me.id = -1;  // tombstone
                    order.erase(order.begin() + static_cast<std::ptrdiff_t>(k));
                    --k;
                }
            }
        }

        // --- monitoring ---
        // Rear-end safety distance is the controlled (main) stream's
        // constraint; side streams follow the human car-following model.
        {
            const auto& order = eng.by_route[0];
            for (std::size_t k = 1; k < order.size(); ++k) {
                const SimVehicle& lead = eng.veh(order[k - 1]);
                const SimVehicle& foll = eng.veh(order[k]);
                const double gap = lead.p - foll.p;
                if (gap < config.safety.gamma + config.safety.rho * foll.v - 1e-9) {
                    ++result.rear_end_violations;
                    if (std::getenv("PHEVSIM_DEBUG_REAR"))
                        std::fprintf(stderr,
                                     "rear t=%.1f lead=%d(p=%.1f v=%.2f traj=%d fb=%d) "
                                     "foll=%d(p=%.1f v=%.2f traj=%d fb=%d) gap=%.2f\n",
                                     t, lead.id, lead.p, lead.v, (int)lead.has_traj,
                                     (int)lead.fallback_zone, foll.id, foll.p, foll.v,
                                     (int)foll.has_traj, (int)foll.fallback_zone, gap);
                }
            }
        }
        for (std::size_t z = 0; z < config.corridor.zones.size(); ++z) {
            if (!eng.shares_conflict(static_cast<int>(z))) continue;
            bool main_in = false, side_in = false;
            for (int r = 0; r < 4; ++r) {
                double cz, ce, cx;
                if (!eng.zone_bounds(static_cast<Route>(r), static_cast<int>(z), cz, ce, cx))
                    continue;
                for (int idx : eng.by_route[r]) {
                    const SimVehicle& v = eng.veh(idx);
                    if (v.p >= ce && v.p < cx) (r == 0 ? main_in : side_in) = true;
                }
            }
            if (main_in && side_in) ++result.co_occupancy_violations;
        }
    }

    for (const auto& order : eng.by_route) result.unfinished += order.size();

    if (!mpges.empty()) {
        result.mpge_summary = collect_metrics(mpges, 1.0);
        result.aggregates_empty = false;
    }
    if (!travel_times.empty()) {
        double s = 0.0;
        for (double x : travel_times) s += x;
        result.mean_travel_time = s / static_cast<double>(travel_times.size());
    }
    return result;
}

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

}  // namespace

std::string SimResult::to_json() const {
    nlohmann::ordered_json j;
    j["controller_case"] = to_string(controller_case);
    j["flows"] = {{"main", flows.main},
                  {"highway", flows.highway},
                  {"srz_side", flows.srz_side},
                  {"roundabout_side", flows.roundabout_side}};
    j["dt"] = dt;
    j["duration"] = duration;
    j["seed"] = seed;
    j["vehicles_finished"] = records.size();
    j["vehicles_unfinished"] = unfinished;
    j["rear_end_violations"] = rear_end_violations;
    j["co_occupancy_violations"] = co_occupancy_violations;
    j["infeasible_assignments"] = infeasible_assignments;
    j["mean_travel_time_s"] = mean_travel_time;
    j["aggregates_empty"] = aggregates_empty;
    if (!aggregates_empty) {
        j["mpge"]["mean"] = mpge_summary.mean;
        j["mpge"]["stddev"] = mpge_summary.stddev;
        if (mpge_summary.skewness) j["mpge"]["skewness"] = *mpge_summary.skewness;
        nlohmann::ordered_json bins = nlohmann::ordered_json::array();
        for (const auto& b : mpge_summary.histogram)
            bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}});
        j["mpge"]["histogram"] = bins;
    }
    return j.dump(2) + "\n";
}

std::string SimResult::records_csv() const {
    std::ostringstream os;
    os << "id,route,spawn_time,exit_time,travel_time,distance_miles,fuel_gallons,"
          "net_battery_kwh,mpge,stop_count,vd_fallback\n";
    for (const auto& r : records) {
        os << r.id << ',' << phevsim::to_string(r.route) << ',' << fmt(r.spawn_time) << ','
           << fmt(r.exit_time) << ',' << fmt(r.travel_time) << ',' << fmt(r.distance_miles)
           << ',' << fmt(r.fuel_gallons) << ',' << fmt(r.net_battery_kwh) << ',' << fmt(r.mpge)
           << ',' << r.stop_count << ',' << (r.vd_fallback ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string SimResult::traces_csv() const {
    std::ostringstream os;
    os << "id,t,p,v\n";
    for (const auto& r : records)
        for (const auto& s : r.trace)
            os << r.id << ',' << fmt(s.t) << ',' << fmt(s.p) << ',' << fmt(s.v) << '\n';
    return os.str();
}

CycleTraceResult trace_drive_cycle(const DriveCycle& cycle, bool use_pareto,
                                   const PowertrainMaps& maps, const ParetoTable* table,
                                   const VehicleParams& vehicle, const Driveline& driveline,
                                   double initial_soc, double dt, double kwh_per_gallon,
                                   const PiGains& gains) {
    cycle.validate();
    if (use_pareto) {
        if (!table) throw ParetoTableMissing("Pareto trace requires a table");
        if (table->fingerprint() != maps_fingerprint(maps))
            throw ParetoTableMissing("Pareto table fingerprint does not match the active maps");
    }

    PtState st;
    st.batt.soc = initial_soc;
    st.batt.soc_ref = initial_soc;

    CycleTraceResult out;
    out.min_soc = out.max_soc = initial_soc;
    out.soc_trace.emplace_back(0.0, initial_soc);

    double v = cycle.speed_at(0.0);
    double integ = 0.0;
    double err_sq = 0.0;
    double dist = 0.0;
    std::size_t n_err = 0;
    double next_soc_sample = 1.0;

    const double u_lo = -3.0, u_hi = 1.5;
    const double T = cycle.duration();
    for (double t = 0.0; t + 0.5 * dt < T; t += dt) {
        const double e = cycle.speed_at(t) - v;
        err_sq += e * e;
        ++n_err;

        const double u_ff = (cycle.speed_at(t + dt) - cycle.speed_at(t)) / dt;
        double u = u_ff + gains.kp * e + gains.ki * integ;
        const double u_clamped = std::clamp(u, u_lo, u_hi);
        if (u == u_clamped) integ += e * dt;  // anti-windup
        u = u_clamped;

        const double v_new = std::max(0.0, v + u * dt);
        const double a = (v_new - v) / dt;
        v = v_new;
        dist += v * dt;

        energy_step(st, v, a, dt, maps, table, use_pareto, vehicle, driveline,
                    Mode::HoldBattery);
        out.min_soc = std::min(out.min_soc, st.batt.soc);
        out.max_soc = std::max(out.max_soc, st.batt.soc);
        if (t + dt >= next_soc_sample - 1e-9) {
            out.soc_trace.emplace_back(t + dt, st.batt.soc);
            next_soc_sample += 1.0;
        }
    }

    out.rms_error_mps = n_err ? std::sqrt(err_sq / static_cast<double>(n_err)) : 0.0;
    if (out.rms_error_mps > 1.0)
        throw TrackingDiverged("speed-tracking RMS error above 1 m/s");
    out.distance_miles = units::m_to_miles(dist);
    out.fuel_gallons = st.fuel_g / 1000.0 / constants::kFuelKgPerGallon;
    out.net_battery_kwh = (initial_soc - st.batt.soc) * st.batt.capacity_kwh;
    out.mpge = mpge(out.distance_miles, out.fuel_gallons, out.net_battery_kwh, kwh_per_gallon);
    return out;
}

}  // namespace phevsim
