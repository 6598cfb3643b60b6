#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phevsim/corridor.hpp"

namespace phevsim {

/// Motion limits the trajectory solver must respect.
struct Limits {
    double u_min = -3.0;
    double u_max = 1.5;
    double v_min = 1.0;
    double v_max = units::mph_to_mps(40.0);
};

/// Boundary conditions for one control-zone crossing. Terminal speed is
/// either pinned or left free, in which case the solver applies the
/// transversality condition u(tf) = 0.
struct BoundaryConditions {
    double t0 = 0.0;
    double p0 = 0.0;
    double v0 = 0.0;
    double tf = 0.0;
    double pf = 0.0;
    std::optional<double> terminal_speed;  // nullopt = free
};

enum class ArcKind { Unconstrained, VmaxArc, VminArc, UmaxArc, UminArc };

const char* to_string(ArcKind k);

/// One polynomial piece. With s = t - t_start:
///   u(s) = a*s + b
///   v(s) = a*s^2/2 + b*s + c
///   p(s) = a*s^3/6 + b*s^2/2 + c*s + d
/// Constrained arcs hold the pinned quantity constant (a = 0 on control
/// arcs, a = b = 0 on speed arcs).
struct Arc {
    double t_start = 0.0;
    double t_end = 0.0;
    ArcKind kind = ArcKind::Unconstrained;
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

struct TrajectorySample {
    double p = 0.0;
    double v = 0.0;
    double u = 0.0;
};

/// Piecewise-cubic optimal trajectory over [t0, tz]. Arcs tile the span with
/// p and v continuous at junctions.
class CubicTrajectory {
public:
    CubicTrajectory() = default;
    explicit CubicTrajectory(std::vector<Arc> arcs);

    double t_start() const { return arcs_.front().t_start; }
    double t_end() const { return arcs_.back().t_end; }

    /// Piecewise-polynomial evaluation; throws TimeOutOfRange outside span.
    TrajectorySample evaluate(double t) const;

    /// Control effort integral over the whole span.
    double cost() const;

    const std::vector<Arc>& arcs() const { return arcs_; }

private:
    std::vector<Arc> arcs_;
};

/// Solves the single unconstrained arc through the boundary conditions via
/// the 4x4 linear boundary system. Throws SingularSystem when tf - t0 is
/// below 1e-6 s.
CubicTrajectory solve_unconstrained(const BoundaryConditions& bc);

/// Solves the constrained problem: starts from the unconstrained arc and
/// pieces in constant-speed / constant-acceleration arcs until no state or
/// control bound is violated. Throws Infeasible when the bang-profile
/// reachability pre-check fails, NoConvergence when junction root-finding
/// does not settle.
CubicTrajectory piece_arcs(const BoundaryConditions& bc, const Limits& limits);

TrajectorySample evaluate(const CubicTrajectory& traj, double t);

struct RearEndReport {
    double min_margin = 0.0;                      // min over samples of s(t) - delta(t)
    std::optional<double> first_violation_time;   // set when min_margin < 0
    bool ok() const { return !first_violation_time.has_value(); }
};

/// Samples leader/follower over their common time span at step dt and checks
/// the rear-end gap against the speed-dependent safe distance.
RearEndReport verify_rear_end(const CubicTrajectory& leader, const CubicTrajectory& follower,
                              const SafetyParams& safety, double dt);

/// CSV time series "t,p,v,u" at the given sample step (span end included).
std::string to_csv(const CubicTrajectory& traj, double step);

struct QueueEntry {
    int vehicle_id = 0;
    double t0z = 0.0;             // control-zone entry time
    double v0 = 0.0;              // speed at control-zone entry
    std::optional<double> tz;     // assigned conflict-zone entry time
    double v_at_tz = 0.0;         // planned speed when entering the conflict zone
};

/// FIFO queue of vehicles inside one control zone. Arrival order fixes the
/// crossing sequence; assigned entry times are non-decreasing in queue order.
class ZoneQueue {
public:
    explicit ZoneQueue(int zone_index) : zone_index_(zone_index) {}

    int zone_index() const { return zone_index_; }

    /// Appends the vehicle; throws OutOfOrderArrival when t0z precedes the
    /// last arrival. Returns the queue position (0-based).
    int register_vehicle(int vehicle_id, double t0z, double v0);

    /// Entry-time assignment from the FIFO headway rule. The headway term is
    /// dropped for the queue head. terminal_speed is the planned speed at tz
    /// (recorded for the successor's headway term).
    double assign_entry_time(int vehicle_id, const ConflictZoneSpec& zone,
                             const SafetyParams& safety, const Limits& limits,
                             double terminal_speed);

    /// Pushes an already assigned tz later (never earlier).
    void update_assignment(int vehicle_id, double new_tz);

    /// Revises the recorded crossing speed, e.g. after the trajectory solver
    /// settles on a slower achievable terminal speed for a delayed vehicle.
    void set_crossing_speed(int vehicle_id, double v_at_tz);

    void remove(int vehicle_id);

    const QueueEntry* find(int vehicle_id) const;
    const QueueEntry* predecessor_of(int vehicle_id) const;
    const std::vector<QueueEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    QueueEntry* find_mutable(int vehicle_id);

    int zone_index_;
    std::vector<QueueEntry> entries_;
};

}  // namespace phevsim
