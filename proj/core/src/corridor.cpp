#include "phevsim/corridor.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "phevsim/errors.hpp"

namespace phevsim {

const char* to_string(ZoneKind k) {
    switch (k) {
        case ZoneKind::Merge: return "merge";
        case ZoneKind::SpeedReductionZone: return "srz";
        case ZoneKind::Roundabout: return "roundabout";
    }
    return "?";
}

const char* to_string(Route r) {
    switch (r) {
        case Route::Main: return "main";
        case Route::Highway: return "highway";
        case Route::SRZSide: return "srz_side";
        case Route::RoundaboutSide: return "roundabout_side";
    }
    return "?";
}

void Corridor::validate() const {
    if (!(u_min < 0.0 && 0.0 < u_max))
        throw BadLimits("accel bounds must satisfy u_min < 0 < u_max");
    if (!(0.0 <= v_min && v_min < v_max))
        throw BadLimits("speed limits must satisfy 0 <= v_min < v_max");
    if (zones.empty()) throw BadLimits("zone list is empty");
    for (std::size_t i = 0; i < zones.size(); ++i) {
        const auto& z = zones[i];
        const std::string name = "zone " + std::to_string(i + 1) + " (" + to_string(z.kind) + ")";
        if (z.control_zone_length <= 0.0 || z.zone_length <= 0.0)
            throw BadLimits(name + ": zone lengths must be positive");
        if (z.zone_speed_limit > v_max)
            throw BadLimits(name + ": zone speed limit above corridor v_max");
        if (z.cz_entry_pos < 0.0 || z.conflict_exit_pos() > total_length)
            throw ZoneOutOfBounds(name + ": extends outside [0, total_length]");
        if (i > 0) {
            const auto& prev = zones[i - 1];
            if (z.cz_entry_pos < prev.cz_entry_pos)
                throw OverlappingZones(name + ": zones not sorted by entry position");
            if (z.cz_entry_pos < prev.conflict_exit_pos())
                throw OverlappingZones(name + ": overlaps upstream zone");
        }
    }
}

Corridor default_corridor() {
    Corridor c;
    c.total_length = 1500.0;
    c.v_min = 1.0;
    c.v_max = units::mph_to_mps(40.0);
    c.u_min = -3.0;
    c.u_max = 1.5;
    c.zones = {
        {ZoneKind::Merge, 50.0, 250.0, 15.0, units::mph_to_mps(40.0), Route::Highway, 300.0},
        {ZoneKind::SpeedReductionZone, 450.0, 250.0, 125.0, units::mph_to_mps(18.6),
         Route::SRZSide, 800.0},
        {ZoneKind::Roundabout, 850.0, 250.0, 15.0, units::mph_to_mps(25.0),
         Route::RoundaboutSide, 500.0},
    };
    c.validate();
    return c;
}

namespace {

ZoneKind parse_kind(const std::string& s) {
    if (s == "merge") return ZoneKind::Merge;
    if (s == "srz") return ZoneKind::SpeedReductionZone;
    if (s == "roundabout") return ZoneKind::Roundabout;
    throw InvalidInput("unknown zone kind: " + s);
}

Route parse_route(const std::string& s) {
    if (s == "main") return Route::Main;
    if (s == "highway") return Route::Highway;
    if (s == "srz_side") return Route::SRZSide;
    if (s == "roundabout_side") return Route::RoundaboutSide;
    throw InvalidInput("unknown route: " + s);
}

}  // namespace

Corridor build_corridor(const std::string& config_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(config_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(std::string("corridor config parse error: ") + e.what());
    }
    Corridor c;
    try {
        c.total_length = j.value("total_length", c.total_length);
        c.v_min = j.value("v_min", c.v_min);
        c.v_max = j.value("v_max", c.v_max);
        c.u_min = j.value("u_min", c.u_min);
        c.u_max = j.value("u_max", c.u_max);
        c.side_route_length = j.value("side_route_length", c.side_route_length);
        c.zones.clear();
        for (const auto& zj : j.at("zones")) {
            ConflictZoneSpec z;
            z.kind = parse_kind(zj.at("kind").get<std::string>());
            z.cz_entry_pos = zj.at("cz_entry_pos").get<double>();
            z.control_zone_length = zj.value("control_zone_length", z.control_zone_length);
            z.zone_length = zj.value("zone_length", z.zone_length);
            z.zone_speed_limit = zj.at("zone_speed_limit").get<double>();
            if (zj.contains("side_route"))
                z.side_route = parse_route(zj.at("side_route").get<std::string>());
            z.side_feeder_length = zj.value("side_feeder_length", z.side_feeder_length);
            c.zones.push_back(z);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("corridor config: ") + e.what());
    }
    c.validate();
    return c;
}

ZoneContext locate(const Corridor& corridor, double p) {
    if (p < 0.0 || p > corridor.total_length)
        throw PositionOutOfRange("position " + std::to_string(p) + " outside corridor");
    for (std::size_t i = 0; i < corridor.zones.size(); ++i) {
        const auto& z = corridor.zones[i];
        if (p < z.cz_entry_pos) break;
        if (p < z.conflict_entry_pos())
            return {ZoneContext::Kind::ControlZone, static_cast<int>(i)};
        if (p < z.conflict_exit_pos())
            return {ZoneContext::Kind::ConflictZone, static_cast<int>(i)};
    }
    return {ZoneContext::Kind::Free, -1};
}

double min_safe_gap(const SafetyParams& params, double v) {
    if (v < 0.0) throw NegativeSpeed("min_safe_gap: v < 0");
    return params.gamma + params.rho * v;
}

}  // namespace phevsim
