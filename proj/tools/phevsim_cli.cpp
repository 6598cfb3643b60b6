// Command-line front end: builds Pareto split tables, runs corridor scenario
// matrices, and traces drive cycles through the quasi-static powertrain.
//
// Exit codes: 0 success, 2 missing input file, 3 invalid input,
// 4 runtime model error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phevsim/drive_cycle.hpp"
#include "phevsim/errors.hpp"
#include "phevsim/pareto.hpp"
#include "phevsim/powertrain.hpp"
#include "phevsim/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMissingInput = 2;
constexpr int kExitInvalidInput = 3;
constexpr int kExitModelError = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::ios_base::failure("cannot write " + path.string());
}

phevsim::MapSpec parse_map_spec(const std::string& text) {
    const json j = json::parse(text);
    phevsim::MapSpec spec;
    const auto get = [&](const char* key, double& field) {
        if (j.contains(key)) field = j.at(key).get<double>();
    };
    get("speed_step", spec.speed_step);
    get("torque_step", spec.torque_step);
    get("engine_speed_min", spec.engine_speed_min);
    get("engine_speed_max", spec.engine_speed_max);
    get("engine_max_torque", spec.engine_max_torque);
    get("motor_speed_max", spec.motor_speed_max);
    get("motor_max_torque", spec.motor_max_torque);
    get("engine_peak_efficiency", spec.engine_peak_efficiency);
    get("motor_peak_efficiency", spec.motor_peak_efficiency);
    return spec;
}

phevsim::PowertrainMaps load_maps(const std::string& maps_path) {
    if (maps_path.empty()) return phevsim::synthesize_default_maps();
    if (!fs::exists(maps_path)) throw std::ios_base::failure("maps not found: " + maps_path);
    return phevsim::synthesize_default_maps(parse_map_spec(read_file(maps_path)));
}

std::optional<phevsim::TrafficLevel> level_from(const std::string& s) {
    if (s == "low") return phevsim::TrafficLevel::Low;
    if (s == "medium") return phevsim::TrafficLevel::Medium;
    if (s == "high") return phevsim::TrafficLevel::High;
    return std::nullopt;
}

std::optional<phevsim::ControllerCase> case_from(const std::string& s) {
    if (s == "baseline") return phevsim::ControllerCase::Baseline;
    if (s == "vd") return phevsim::ControllerCase::VDOnly;
    if (s == "pt") return phevsim::ControllerCase::PTOnly;
    if (s == "vdpt") return phevsim::ControllerCase::VDPlusPT;
    return std::nullopt;
}

std::string default_out_dir() {
    if (const char* env = std::getenv("PHEVSIM_OUT_DIR")) return env;
    return ".";
}

int cmd_build_table(const std::string& maps_path, const std::string& out_path,
                    const phevsim::ParetoGridSpec& grid) {
    const phevsim::PowertrainMaps maps = load_maps(maps_path);
    const phevsim::ParetoTable table = phevsim::build_pareto_table(maps, grid);
    write_file(out_path, table.serialize());
    std::cout << "cells: " << table.cell_count()
              << "\ninfeasible: " << table.infeasible_count() << "\nwritten: " << out_path
              << "\n";
    return kExitOk;
}

struct RunKey {
    phevsim::TrafficLevel level;
    phevsim::ControllerCase ctrl;
    std::uint64_t seed;

    std::string str() const {
        std::ostringstream os;
        os << phevsim::to_string(level) << '-' << phevsim::to_string(ctrl) << '-' << seed;
        return os.str();
    }
};

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::string& maps_path, const std::string& table_path,
                 const std::string& only_level, const std::string& only_case,
                 std::optional<std::uint64_t> only_seed, std::optional<double> dt_override) {
    json cfg = json::object();
    if (!config_path.empty()) {
        if (!fs::exists(config_path))
            throw std::ios_base::failure("config not found: " + config_path);
        cfg = json::parse(read_file(config_path));
    }

    std::vector<phevsim::TrafficLevel> levels;
    for (const auto& s : cfg.value("levels", std::vector<std::string>{"low"})) {
        const auto lv = level_from(s);
        if (!lv) throw phevsim::InvalidInput("unknown traffic level: " + s);
        levels.push_back(*lv);
    }
    std::vector<phevsim::ControllerCase> cases;
    for (const auto& s : cfg.value("cases", std::vector<std::string>{"baseline"})) {
        const auto cc = case_from(s);
        if (!cc) throw phevsim::InvalidInput("unknown controller case: " + s);
        cases.push_back(*cc);
    }
    std::vector<std::uint64_t> seeds = cfg.value("seeds", std::vector<std::uint64_t>{1});

    if (!only_level.empty()) {
        const auto lv = level_from(only_level);
        if (!lv) throw phevsim::InvalidInput("unknown traffic level: " + only_level);
        levels = {*lv};
    }
    if (!only_case.empty()) {
        const auto cc = case_from(only_case);
        if (!cc) throw phevsim::InvalidInput("unknown controller case: " + only_case);
        cases = {*cc};
    }
    if (only_seed) seeds = {*only_seed};
    if (levels.empty() || cases.empty() || seeds.empty())
        throw phevsim::InvalidInput("empty run matrix");

    const phevsim::PowertrainMaps maps = load_maps(maps_path);
    std::optional<phevsim::ParetoTable> table;
    const bool needs_pt =
        std::any_of(cases.begin(), cases.end(), [](phevsim::ControllerCase c) {
            return c == phevsim::ControllerCase::PTOnly ||
                   c == phevsim::ControllerCase::VDPlusPT;
        });
    if (!table_path.empty()) {
        if (!fs::exists(table_path))
            throw std::ios_base::failure("table not found: " + table_path);
        table = phevsim::ParetoTable::deserialize(read_file(table_path));
        if (table->fingerprint() != phevsim::maps_fingerprint(maps))
            throw phevsim::ParetoTableMissing(
                "table fingerprint does not match the active maps");
    } else if (needs_pt) {
        std::cout << "no --table given; building the Pareto table in memory\n";
        table = phevsim::build_pareto_table(maps);
    }

    phevsim::ScenarioConfig base;
    base.duration = cfg.value("duration", 600.0);
    base.dt = dt_override.value_or(cfg.value("dt", 0.1));
    base.initial_soc = cfg.value("initial_soc", 0.5);
    base.kwh_per_gallon = cfg.value("kwh_per_gallon",
                                    phevsim::constants::kKwhPerGallonEquivalent);
    base.trace_period = cfg.value("trace_period", 1.0);

    // mean MPGe keyed (level, case), averaged over seeds
    std::map<std::pair<int, int>, std::vector<double>> means;

    for (const auto level : levels)
        for (const auto ctrl : cases)
            for (const auto seed : seeds) {
                phevsim::ScenarioConfig sc = base;
                sc.flows = phevsim::flows_for(level);
                sc.controller_case = ctrl;
                sc.seed = seed;
                const phevsim::SimResult res = phevsim::run_scenario(
                    sc, maps, table ? &*table : nullptr);
                const RunKey key{level, ctrl, seed};
                write_file(fs::path(out_dir) / (key.str() + ".json"), res.to_json());
                write_file(fs::path(out_dir) / (key.str() + ".csv"), res.records_csv());
                write_file(fs::path(out_dir) / (key.str() + "-traces.csv"),
                           res.traces_csv());
                if (!res.aggregates_empty)
                    means[{static_cast<int>(level), static_cast<int>(ctrl)}].push_back(
                        res.mpge_summary.mean);
                std::cout << key.str() << ": finished " << res.records.size()
                          << " vehicles, mean MPGe "
                          << (res.aggregates_empty ? 0.0 : res.mpge_summary.mean) << "\n";
            }

    // Summary: mean MPGe improvement (%) per case versus Baseline, per level.
    std::ostringstream summary;
    summary << "level,case,mean_mpge,improvement_vs_baseline_pct\n";
    for (const auto level : levels) {
        const auto base_it = means.find({static_cast<int>(level),
                                         static_cast<int>(phevsim::ControllerCase::Baseline)});
        double base_mean = 0.0;
        if (base_it != means.end() && !base_it->second.empty()) {
            for (double m : base_it->second) base_mean += m;
            base_mean /= static_cast<double>(base_it->second.size());
        }
        for (const auto ctrl : cases) {
            const auto it = means.find({static_cast<int>(level), static_cast<int>(ctrl)});
            if (it == means.end() || it->second.empty()) continue;
            double mean = 0.0;
            for (double m : it->second) mean += m;
            mean /= static_cast<double>(it->second.size());
            summary << phevsim::to_string(level) << ',' << phevsim::to_string(ctrl) << ','
                    << mean << ',';
            if (base_mean > 0.0) summary << 100.0 * (mean - base_mean) / base_mean;
            summary << '\n';
        }
    }
    write_file(fs::path(out_dir) / "summary.csv", summary.str());
    std::cout << "summary: " << (fs::path(out_dir) / "summary.csv").string() << "\n";
    return kExitOk;
}

int cmd_trace(const std::string& cycle_path, const std::string& pt_case,
              const std::string& maps_path, const std::string& table_path,
              const std::string& out_path, std::optional<double> dt_override) {
    if (!fs::exists(cycle_path)) throw std::ios_base::failure("cycle not found: " + cycle_path);
    const phevsim::DriveCycle cycle =
        phevsim::parse_drive_cycle(read_file(cycle_path), fs::path(cycle_path).stem().string());

    const phevsim::PowertrainMaps maps = load_maps(maps_path);
    std::optional<phevsim::ParetoTable> table;
    if (!table_path.empty()) {
        if (!fs::exists(table_path))
            throw std::ios_base::failure("table not found: " + table_path);
        table = phevsim::ParetoTable::deserialize(read_file(table_path));
    }

    std::vector<bool> variants;
    if (pt_case == "baseline") variants = {false};
    else if (pt_case == "pt") variants = {true};
    else if (pt_case == "both" || pt_case.empty()) variants = {false, true};
    else throw phevsim::InvalidInput("unknown powertrain case: " + pt_case);

    const double dt = dt_override.value_or(0.1);
    std::ostringstream out;
    out << "case,mpge,rms_error_mph,distance_miles,fuel_gallons,net_battery_kwh,min_soc,"
           "max_soc\n";
    std::ostringstream soc_out;
    soc_out << "case,t,soc\n";
    for (const bool use_pareto : variants) {
        if (use_pareto && !table) table = phevsim::build_pareto_table(maps);
        const phevsim::CycleTraceResult res = phevsim::trace_drive_cycle(
            cycle, use_pareto, maps, table ? &*table : nullptr, {}, {}, 0.5, dt);
        const char* name = use_pareto ? "pt" : "baseline";
        out << name << ',' << res.mpge << ',' << phevsim::units::mps_to_mph(res.rms_error_mps)
            << ',' << res.distance_miles << ',' << res.fuel_gallons << ','
            << res.net_battery_kwh << ',' << res.min_soc << ',' << res.max_soc << '\n';
        for (const auto& [t, soc] : res.soc_trace)
            soc_out << name << ',' << t << ',' << soc << '\n';
        std::cout << cycle.name << ' ' << name << ": MPGe " << res.mpge << ", tracking RMS "
                  << phevsim::units::mps_to_mph(res.rms_error_mps) << " mph\n";
    }
    write_file(out_path, out.str());
    const fs::path soc_path = fs::path(out_path).replace_extension(".soc.csv");
    write_file(soc_path, soc_out.str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Corridor traffic and PHEV energy-control simulator"};
    app.set_version_flag("--version", std::string("phevsim 0.1.0"));

    std::string maps_path, table_path, config_path, cycle_path, pt_case;
    std::string out = default_out_dir();
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::string traffic, ctrl_case;
    phevsim::ParetoGridSpec grid;

    auto* build = app.add_subcommand("build-table", "Build and store a Pareto split table");
    build->add_option("--maps", maps_path, "Maps spec JSON (defaults to built-in maps)");
    build->add_option("--out", out, "Output table path");
    build->add_option("--alpha", grid.alpha, "Scalarization weight");
    build->add_option("--torque-step", grid.torque_step, "Demand grid step (N*m)");
    build->add_option("--speed-step", grid.speed_step, "Speed grid step (rpm)");

    auto* sim = app.add_subcommand("simulate", "Run a scenario matrix");
    sim->add_option("--config", config_path, "Matrix config JSON");
    sim->add_option("--out", out, "Output directory");
    sim->add_option("--maps", maps_path, "Maps spec JSON");
    sim->add_option("--table", table_path, "Pareto table file");
    sim->add_option("--seed", seed, "Restrict matrix to one seed");
    sim->add_option("--dt", dt, "Timestep override (s)");
    sim->add_option("--traffic", traffic, "Restrict to one level: low|medium|high");
    sim->add_option("--case", ctrl_case, "Restrict to one case: baseline|vd|pt|vdpt");

    auto* trace = app.add_subcommand("trace", "Trace a drive cycle");
    trace->add_option("--cycle", cycle_path, "Drive cycle CSV (seconds, mph)")->required();
    trace->add_option("--case", pt_case, "baseline|pt|both (default both)");
    trace->add_option("--maps", maps_path, "Maps spec JSON");
    trace->add_option("--table", table_path, "Pareto table file");
    trace->add_option("--out", out, "Output CSV path");
    trace->add_option("--dt", dt, "Timestep override (s)");

    app.require_subcommand(1);
    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            const std::string out_path =
                out == default_out_dir() && fs::is_directory(out)
                    ? (fs::path(out) / "pareto-table.csv").string()
                    : out;
            return cmd_build_table(maps_path, out_path, grid);
        }
        if (sim->parsed())
            return cmd_simulate(config_path, out, maps_path, table_path, traffic, ctrl_case,
                                seed, dt);
        if (trace->parsed()) {
            const std::string out_path = fs::is_directory(out)
                                             ? (fs::path(out) / "trace.csv").string()
                                             : out;
            return cmd_trace(cycle_path, pt_case, maps_path, table_path, out_path, dt);
        }
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingInput;
    } catch (const phevsim::InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const phevsim::ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitModelError;
    }
    return kExitOk;
}
