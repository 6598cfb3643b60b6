#include "phevsim/baseline_driver.hpp"

#include <algorithm>
#include <cmath>

#include "phevsim/errors.hpp"

namespace phevsim {

double car_following_accel(const VehicleState& follower, const VehicleState* leader,
                           const DriverParams& params) {
    const auto clamp_u = [&](double u) {
        return std::clamp(u, -params.max_decel, params.max_accel);
    };
    const double free_flow = (params.desired_speed - follower.v) / params.tau;

    if (!leader) return clamp_u(free_flow);
    if (leader->p < follower.p)
        throw LeaderBehindFollower("leader behind follower in car_following_accel");

    const double gap = leader->p - follower.p;
    if (gap < params.ax) return -params.max_decel;

    const double bx = params.ax + params.bx_add * std::sqrt(std::max(0.0, follower.v));
    const double dv = leader->v - follower.v;

    double u;
    if (gap > params.bx_mult * bx) {
        u = free_flow;
    } else {
        // Following regime: track the leader speed while steering the gap
        // toward bx.
        u = 1.0 * dv + 0.25 * (gap - bx);
        u = std::min(u, free_flow);
    }
    // Closing-speed cap in every regime: never exceed the constant
    // deceleration that zeroes the approach speed at the standstill
    // distance, so a stopped leader is always reachable without contact.
    if (dv < 0.0) {
        const double u_required = -(dv * dv) / (2.0 * (gap - params.ax));
        u = std::min(u, u_required);
    }
    return clamp_u(u);
}

YieldDecision yield_decision(const std::vector<ZoneOccupancy>& conflict_occupancy,
                             double gap_acceptance) {
    for (const auto& occ : conflict_occupancy) {
        const bool inside_window = occ.entry_time < gap_acceptance && occ.exit_time > 0.0;
        if (inside_window) return YieldDecision::Stop;
    }
    return YieldDecision::Go;
}

double reduced_speed_response(const ZoneContext& context, const Corridor& corridor,
                              double route_desired_speed) {
    if (context.kind == ZoneContext::Kind::ConflictZone)
        return corridor.zones.at(context.zone_index).zone_speed_limit;
    return route_desired_speed;
}

}  // namespace phevsim
