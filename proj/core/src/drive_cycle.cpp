#include "phevsim/drive_cycle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phevsim/errors.hpp"
#include "phevsim/units.hpp"

namespace phevsim {

double DriveCycle::distance_miles() const {
    double meters = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i)
        meters += 0.5 * (v_ref[i - 1] + v_ref[i]) * (t[i] - t[i - 1]);
    return meters / units::kMileToMeter;
}

double DriveCycle::speed_at(double time) const {
    if (t.empty()) return 0.0;
    if (time <= t.front()) return v_ref.front();
    if (time >= t.back()) return v_ref.back();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
    return v_ref[i - 1] + w * (v_ref[i] - v_ref[i - 1]);
}

void DriveCycle::validate() const {
    if (t.size() != v_ref.size()) throw InvalidInput("cycle time/speed length mismatch");
    if (t.empty()) return;
    if (t.front() != 0.0) throw InvalidInput("cycle must start at t = 0");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] <= t[i - 1]) throw InvalidInput("cycle time not strictly increasing");
    for (double v : v_ref)
        if (v < 0.0) throw InvalidInput("negative reference speed in cycle");
}

DriveCycle parse_drive_cycle(const std::string& csv_text, const std::string& name) {
    DriveCycle cycle;
    cycle.name = name;
    std::istringstream is(csv_text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::istringstream ls(line);
        std::string a, b;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',')) {
            throw InvalidInput("cycle CSV line " + std::to_string(line_no) +
                               ": expected two columns");
        }
        char* end = nullptr;
        const double tv = std::strtod(a.c_str(), &end);
        if (end == a.c_str()) {
            if (line_no == 1) continue;  // header row
            throw InvalidInput("cycle CSV line " + std::to_string(line_no) +
                               ": non-numeric time");
        }
        const double mph = std::strtod(b.c_str(), &end);
        if (end == b.c_str())
            throw InvalidInput("cycle CSV line " + std::to_string(line_no) +
                               ": non-numeric speed");
        cycle.t.push_back(tv);
        cycle.v_ref.push_back(units::mph_to_mps(mph));
    }
    cycle.validate();
    return cycle;
}

DriveCycle stitch_cycles(const std::vector<DriveCycle>& cycles, const std::string& name) {
    DriveCycle out;
    out.name = name;
    double offset = 0.0;
    for (const auto& c : cycles) {
        c.validate();
        for (std::size_t i = 0; i < c.t.size(); ++i) {
            // Drop the duplicate t=0 sample of every cycle after the first.
            if (!out.t.empty() && c.t[i] + offset <= out.t.back()) continue;
            out.t.push_back(c.t[i] + offset);
            out.v_ref.push_back(c.v_ref[i]);
        }
        offset += c.duration() + 1.0;
    }
    out.validate();
    return out;
}

}  // namespace phevsim
