#include "phevsim/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phevsim/errors.hpp"

namespace phevsim {

namespace {

std::vector<double> make_axis(double lo, double hi, double step) {
    std::vector<double> xs;
    for (double x = lo; x < hi + 0.5 * step; x += step) xs.push_back(std::min(x, hi));
    if (xs.back() < hi) xs.push_back(hi);
    return xs;
}

// Scalarized objective for one split; an off component (zero torque)
// contributes no inefficiency and counts as 1.
double split_objective(const PowertrainMaps& maps, double speed_rpm, double t_eng, double t_mot,
                       double alpha) {
    const double f1 = t_eng > 0.0 ? maps.engine.at(std::clamp(speed_rpm, maps.engine_speed_min,
                                                              maps.engine_speed_max),
                                                   t_eng)
                                  : 1.0;
    const double f2 = t_mot > 0.0 ? maps.motor.at(std::min(speed_rpm, maps.motor_speed_max),
                                                  t_mot)
                                  : 1.0;
    return alpha * f1 + (1.0 - alpha) * f2;
}

}  // namespace

void ParetoGridSpec::validate(const PowertrainMaps& maps) const {
    if (torque_step <= 0.0 || speed_step <= 0.0 || alpha_step <= 0.0)
        throw BadSpec("pareto grid steps must be positive");
    if (alpha < 0.0 || alpha > 1.0) throw BadSpec("alpha outside [0,1]");
    if (demand_max <= demand_min || speed_max <= speed_min)
        throw BadSpec("pareto grid ranges inverted");
    if (demand_max > maps.engine_max_torque + maps.motor_max_torque + 1e-9)
        throw BadSpec("demand range exceeds combined actuator limits");
    if (speed_max > std::max(maps.engine_speed_max, maps.motor_speed_max) + 1e-9)
        throw BadSpec("speed range exceeds maps envelope");
}

ParetoTable::ParetoTable(ParetoGridSpec spec, std::uint64_t fingerprint,
                         std::vector<double> speeds, std::vector<double> demands,
                         std::vector<ParetoEntry> entries)
    : spec_(spec),
      fingerprint_(fingerprint),
      speeds_(std::move(speeds)),
      demands_(std::move(demands)),
      entries_(std::move(entries)) {
    if (entries_.size() != speeds_.size() * demands_.size())
        throw InvalidInput("pareto table shape mismatch");
}

const ParetoEntry& ParetoTable::entry(std::size_t speed_idx, std::size_t demand_idx) const {
    return entries_.at(speed_idx * demands_.size() + demand_idx);
}

std::size_t ParetoTable::infeasible_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(),
                      [](const ParetoEntry& e) { return !e.feasible; }));
}

namespace {

std::size_t nearest_index(const std::vector<double>& axis, double x) {
    const auto it = std::lower_bound(axis.begin(), axis.end(), x);
    if (it == axis.begin()) return 0;
    if (it == axis.end()) return axis.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - axis.begin());
    return (x - axis[hi - 1] <= axis[hi] - x) ? hi - 1 : hi;
}

}  // namespace

TorqueSplit ParetoTable::lookup(double speed_rpm, double demand_torque) const {
    const double half_s = 0.5 * spec_.speed_step, half_t = 0.5 * spec_.torque_step;
    if (speed_rpm < speeds_.front() - half_s || speed_rpm > speeds_.back() + half_s ||
        demand_torque < demands_.front() - half_t || demand_torque > demands_.back() + half_t)
        throw OutOfRange("pareto lookup outside table ranges");
    const std::size_t i = nearest_index(speeds_, speed_rpm);
    const std::size_t j = nearest_index(demands_, demand_torque);
    const ParetoEntry& e = entry(i, j);
    if (!e.feasible) throw InfeasibleCell("pareto cell marked infeasible");
    const double bucket = demands_[j];
    if (bucket <= 0.0) return {0.0, demand_torque};
    const double ratio = e.t_eng / bucket;
    const double t_eng = ratio * demand_torque;
    return {t_eng, demand_torque - t_eng};
}

std::string ParetoTable::serialize() const {
    std::ostringstream os;
    os.precision(12);
    os << "phevsim-pareto-table,v1\n";
    os << "fingerprint," << std::hex << fingerprint_ << std::dec << '\n';
    os << "alpha," << spec_.alpha << '\n';
    os << "alpha_step," << spec_.alpha_step << '\n';
    os << "torque_step," << spec_.torque_step << '\n';
    os << "speed_step," << spec_.speed_step << '\n';
    os << "demand_min," << spec_.demand_min << '\n';
    os << "demand_max," << spec_.demand_max << '\n';
    os << "speed_min," << spec_.speed_min << '\n';
    os << "speed_max," << spec_.speed_max << '\n';
    os << "speed,demand,t_eng,t_mot,objective,feasible\n";
    for (std::size_t i = 0; i < speeds_.size(); ++i)
        for (std::size_t j = 0; j < demands_.size(); ++j) {
            const ParetoEntry& e = entry(i, j);
            os << speeds_[i] << ',' << demands_[j] << ',' << e.t_eng << ',' << e.t_mot << ','
               << e.objective << ',' << (e.feasible ? 1 : 0) << '\n';
        }
    return os.str();
}

ParetoTable ParetoTable::deserialize(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "phevsim-pareto-table,v1")
        throw InvalidInput("not a pareto table file (bad magic)");
    ParetoGridSpec spec;
    std::uint64_t fingerprint = 0;
    const auto read_kv = [&](const std::string& key) -> std::string {
        if (!std::getline(is, line)) throw InvalidInput("truncated pareto table header");
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.substr(0, comma) != key)
            throw InvalidInput("pareto table header: expected " + key);
        return line.substr(comma + 1);
    };
    fingerprint = std::stoull(read_kv("fingerprint"), nullptr, 16);
    spec.alpha = std::stod(read_kv("alpha"));
    spec.alpha_step = std::stod(read_kv("alpha_step"));
    spec.torque_step = std::stod(read_kv("torque_step"));
    spec.speed_step = std::stod(read_kv("speed_step"));
    spec.demand_min = std::stod(read_kv("demand_min"));
    spec.demand_max = std::stod(read_kv("demand_max"));
    spec.speed_min = std::stod(read_kv("speed_min"));
    spec.speed_max = std::stod(read_kv("speed_max"));
    if (!std::getline(is, line)) throw InvalidInput("truncated pareto table");

    std::vector<double> speeds, demands;
    std::vector<ParetoEntry> entries;
    double last_speed = -1.0;
    bool first_row = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        double vals[5];
        for (int k = 0; k < 5; ++k) {
            if (!std::getline(ls, tok, ',')) throw InvalidInput("short pareto table row");
            vals[k] = std::stod(tok);
        }
        if (!std::getline(ls, tok, ',')) throw InvalidInput("short pareto table row");
        const bool feasible = tok == "1";
        if (first_row || vals[0] != last_speed) {
            speeds.push_back(vals[0]);
            last_speed = vals[0];
            first_row = false;
        }
        if (speeds.size() == 1) demands.push_back(vals[1]);
        entries.push_back(ParetoEntry{vals[2], vals[3], vals[4], feasible});
    }
    return ParetoTable(spec, fingerprint, std::move(speeds), std::move(demands),
                       std::move(entries));
}

SplitCandidate brute_force_split(const PowertrainMaps& maps, double speed_rpm, double demand,
                                 double alpha, double granularity) {
    if (granularity <= 0.0) throw BadSpec("granularity must be positive");
    if (alpha < 0.0 || alpha > 1.0) throw BadSpec("alpha outside [0,1]");
    const double eng_cap = maps.engine_torque_limit(speed_rpm);
    const double mot_cap = maps.motor_torque_limit(speed_rpm);
    if (demand > eng_cap + mot_cap + 1e-9)
        throw EmptyFeasibleSet("demand above combined capability at this speed");
    if (demand <= 0.0) return {0.0, 0.0, split_objective(maps, speed_rpm, 0.0, 0.0, alpha)};

    SplitCandidate best;
    bool found = false;
    const int n = static_cast<int>(std::floor(std::min(demand, eng_cap) / granularity + 1e-9));
    for (int k = 0; k <= n; ++k) {
        const double t_eng = k * granularity;
        const double t_mot = demand - t_eng;
        if (t_mot < -1e-9 || t_mot > mot_cap + 1e-9) continue;
        if (t_eng > 0.0 && !maps.engine_can_run(speed_rpm)) continue;
        const double obj = split_objective(maps, speed_rpm, t_eng, std::max(0.0, t_mot), alpha);
        if (!found || obj > best.objective + 1e-15) {
            best = {t_eng, std::max(0.0, t_mot), obj};
            found = true;
        }
    }
    if (!found) throw EmptyFeasibleSet("no feasible split at this granularity");
    return best;
}

ParetoTable build_pareto_table(const PowertrainMaps& maps, const ParetoGridSpec& spec) {
    spec.validate(maps);
    const auto speeds = make_axis(spec.speed_min, spec.speed_max, spec.speed_step);
    const auto demands = make_axis(spec.demand_min, spec.demand_max, spec.torque_step);
    std::vector<ParetoEntry> entries(speeds.size() * demands.size());
    for (std::size_t i = 0; i < speeds.size(); ++i) {
        for (std::size_t j = 0; j < demands.size(); ++j) {
            ParetoEntry& e = entries[i * demands.size() + j];
            try {
                const auto best =
                    brute_force_split(maps, speeds[i], demands[j], spec.alpha, spec.torque_step);
                e = ParetoEntry{best.t_eng, best.t_mot, best.objective, true};
            } catch (const EmptyFeasibleSet&) {
                e = ParetoEntry{};  // infeasible cell
            }
        }
    }
    return ParetoTable(spec, maps_fingerprint(maps), speeds, demands, std::move(entries));
}

TorqueSplit lookup_split(const ParetoTable& table, double speed_rpm, double demand_torque) {
    return table.lookup(speed_rpm, demand_torque);
}

std::vector<ParetoFrontPoint> alpha_sweep(const PowertrainMaps& maps, double speed_rpm,
                                          double demand, const ParetoGridSpec& spec) {
    std::vector<ParetoFrontPoint> out;
    for (double alpha = 0.0; alpha <= 1.0 + 1e-9; alpha += spec.alpha_step) {
        const double a = std::min(alpha, 1.0);
        const auto best = brute_force_split(maps, speed_rpm, demand, a, spec.torque_step);
        ParetoFrontPoint pt;
        pt.alpha = a;
        pt.t_eng = best.t_eng;
        pt.t_mot = best.t_mot;
        pt.engine_eff = best.t_eng > 0.0
                            ? maps.engine.at(std::clamp(speed_rpm, maps.engine_speed_min,
                                                        maps.engine_speed_max),
                                             best.t_eng)
                            : 1.0;
        pt.motor_eff =
            best.t_mot > 0.0 ? maps.motor.at(std::min(speed_rpm, maps.motor_speed_max), best.t_mot)
                             : 1.0;
        out.push_back(pt);
        if (a >= 1.0) break;
    }
    return out;
}

}  // namespace phevsim
