#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phevsim/powertrain.hpp"

namespace phevsim {

/// Discretization of the offline torque-split problem.
struct ParetoGridSpec {
    double torque_step = 10.0;   // N*m
    double speed_step = 100.0;   // rpm
    double alpha_step = 0.05;
    double alpha = 0.5;          // scalarization persisted per cell
    double demand_min = 0.0;
    double demand_max = 550.0;   // engine 250 + motor 300
    double speed_min = 0.0;      // rpm
    double speed_max = 6000.0;   // rpm

    void validate(const PowertrainMaps& maps) const;  // throws BadSpec
};

struct ParetoEntry {
    double t_eng = 0.0;
    double t_mot = 0.0;
    double objective = 0.0;
    bool feasible = false;
};

/// Precomputed optimal engine/motor split indexed by shaft speed and demand
/// torque buckets. Pinned to the maps it was built from via fingerprint.
class ParetoTable {
public:
    ParetoTable() = default;
    ParetoTable(ParetoGridSpec spec, std::uint64_t fingerprint, std::vector<double> speeds,
                std::vector<double> demands, std::vector<ParetoEntry> entries);

    const ParetoGridSpec& spec() const { return spec_; }
    std::uint64_t fingerprint() const { return fingerprint_; }
    const std::vector<double>& speeds() const { return speeds_; }
    const std::vector<double>& demands() const { return demands_; }
    const ParetoEntry& entry(std::size_t speed_idx, std::size_t demand_idx) const;
    std::size_t cell_count() const { return entries_.size(); }
    std::size_t infeasible_count() const;

    /// Nearest-cell lookup with the split ratio rescaled so the returned
    /// torques sum to the exact demand. Throws OutOfRange / InfeasibleCell.
    TorqueSplit lookup(double speed_rpm, double demand_torque) const;

    std::string serialize() const;
    static ParetoTable deserialize(const std::string& text);

private:
    ParetoGridSpec spec_;
    std::uint64_t fingerprint_ = 0;
    std::vector<double> speeds_;
    std::vector<double> demands_;
    std::vector<ParetoEntry> entries_;  // row-major [speed][demand]
};

/// Solves the scalarized split problem on every grid cell. Deterministic:
/// ties break toward the lowest engine torque. Cells whose demand exceeds
/// the combined capability at that speed are marked infeasible.
ParetoTable build_pareto_table(const PowertrainMaps& maps, const ParetoGridSpec& spec = {});

struct SplitCandidate {
    double t_eng = 0.0;
    double t_mot = 0.0;
    double objective = 0.0;
};

/// Exhaustive scan of all splits summing to the demand at the given torque
/// granularity; argmax of alpha*eta_eng + (1-alpha)*eta_mot with an off
/// component counting as lossless. Lowest-engine-torque tie-break.
SplitCandidate brute_force_split(const PowertrainMaps& maps, double speed_rpm, double demand,
                                 double alpha, double granularity = 1.0);

/// Free-function form of ParetoTable::lookup.
TorqueSplit lookup_split(const ParetoTable& table, double speed_rpm, double demand_torque);

struct ParetoFrontPoint {
    double alpha = 0.0;
    double t_eng = 0.0;
    double t_mot = 0.0;
    double engine_eff = 0.0;
    double motor_eff = 0.0;
};

/// Alpha sweep for one (speed, demand) cell; the raw material for
/// Pareto-front plots.
std::vector<ParetoFrontPoint> alpha_sweep(const PowertrainMaps& maps, double speed_rpm,
                                          double demand, const ParetoGridSpec& spec = {});

}  // namespace phevsim
