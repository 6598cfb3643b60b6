#include <doctest.h>

#include <cmath>
#include <random>

#include "phevsim/errors.hpp"
#include "phevsim/pareto.hpp"

using namespace phevsim;

namespace {

const PowertrainMaps& default_maps() {
    static const PowertrainMaps maps = synthesize_default_maps();
    return maps;
}

const ParetoTable& default_table() {
    static const ParetoTable table = build_pareto_table(default_maps());
    return table;
}

}  // namespace

TEST_CASE("grid spec validation rejects steps outside the maps envelope") {
    ParetoGridSpec spec;
    spec.demand_max = 900.0;  // beyond engine 250 + motor 300
    CHECK_THROWS_AS(spec.validate(default_maps()), BadSpec);
    ParetoGridSpec negative;
    negative.torque_step = -1.0;
    CHECK_THROWS_AS(negative.validate(default_maps()), BadSpec);
}

TEST_CASE("zero demand maps to the zero split everywhere") {
    const ParetoTable& table = default_table();
    for (std::size_t i = 0; i < table.speeds().size(); i += 7) {
        const ParetoEntry& e = table.entry(i, 0);
        CHECK(e.t_eng == doctest::Approx(0.0));
        CHECK(e.t_mot == doctest::Approx(0.0));
    }
}

TEST_CASE("table entries agree with the exhaustive split oracle on random cells") {
    const ParetoTable& table = default_table();
    const ParetoGridSpec& spec = table.spec();
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<std::size_t> si(0, table.speeds().size() - 1);
    std::uniform_int_distribution<std::size_t> di(0, table.demands().size() - 1);
    for (int k = 0; k < 10; ++k) {
        const std::size_t i = si(rng), j = di(rng);
        const ParetoEntry& e = table.entry(i, j);
        if (!e.feasible) continue;
        const SplitCandidate oracle = brute_force_split(
            default_maps(), table.speeds()[i], table.demands()[j], spec.alpha, spec.torque_step);
        CHECK(e.t_eng == doctest::Approx(oracle.t_eng).epsilon(1e-12));
        CHECK(e.t_mot == doctest::Approx(oracle.t_mot).epsilon(1e-12));
        CHECK(e.objective == doctest::Approx(oracle.objective).epsilon(1e-12));
    }
}

TEST_CASE("motor-exclusivity: demand within the motor envelope never runs the engine") {
    const ParetoTable& table = default_table();
    for (std::size_t i = 0; i < table.speeds().size(); ++i) {
        if (table.speeds()[i] > default_maps().motor_speed_max) continue;
        for (std::size_t j = 0; j < table.demands().size(); ++j) {
            const double demand = table.demands()[j];
            if (demand > default_maps().motor_torque_limit(table.speeds()[i])) continue;
            const ParetoEntry& e = table.entry(i, j);
            if (!e.feasible) continue;
            CHECK(e.t_eng == doctest::Approx(0.0));
        }
    }
}

TEST_CASE("scalarization extremes park the weighted actuator (off counts lossless)") {
    // alpha = 0 weighs only motor efficiency, and an off motor counts as 1,
    // so the whole demand lands on the engine; alpha = 1 mirrors that.
    const SplitCandidate engine_all = brute_force_split(default_maps(), 2000.0, 150.0, 0.0);
    CHECK(engine_all.t_eng == doctest::Approx(150.0));
    CHECK(engine_all.t_mot == doctest::Approx(0.0));
    CHECK(engine_all.objective == doctest::Approx(1.0));
    const SplitCandidate motor_all = brute_force_split(default_maps(), 2000.0, 150.0, 1.0);
    CHECK(motor_all.t_eng == doctest::Approx(0.0));
    CHECK(motor_all.t_mot == doctest::Approx(150.0));
    CHECK(motor_all.objective == doctest::Approx(1.0));

    CHECK_THROWS_AS(brute_force_split(default_maps(), 2000.0, 5000.0, 0.5), EmptyFeasibleSet);
}

TEST_CASE("lookup rescales the bucket ratio to the exact demand") {
    const ParetoTable& table = default_table();

    SUBCASE("on-grid query returns the stored entry") {
        const TorqueSplit s = lookup_split(table, 2000.0, 100.0);
        CHECK(s.engine + s.motor == doctest::Approx(100.0).epsilon(1e-12));
        CHECK(s.engine == doctest::Approx(0.0));  // motor envelope
    }
    SUBCASE("demand between buckets keeps the nearest bucket's ratio") {
        const TorqueSplit bucket = lookup_split(table, 3000.0, 400.0);
        const TorqueSplit between = lookup_split(table, 3000.0, 404.0);
        CHECK(between.engine + between.motor == doctest::Approx(404.0).epsilon(1e-12));
        const double ratio_bucket = bucket.engine / (bucket.engine + bucket.motor);
        const double ratio_between = between.engine / (between.engine + between.motor);
        CHECK(ratio_between == doctest::Approx(ratio_bucket).epsilon(1e-12));
    }
    SUBCASE("rescaling exactness across random queries") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> demand(0.0, 500.0), speed(0.0, 5500.0);
        for (int i = 0; i < 300; ++i) {
            const double d = demand(rng);
            try {
                const TorqueSplit s = lookup_split(table, speed(rng), d);
                CHECK(std::abs(s.engine + s.motor - d) <= 1e-12 * std::max(1.0, d));
            } catch (const ModelError&) {
                // infeasible or out-of-envelope cell; acceptable for random probes
            }
        }
    }
    SUBCASE("out-of-range demand is rejected") {
        CHECK_THROWS_AS(lookup_split(table, 2000.0, 600.0), OutOfRange);
    }
}

TEST_CASE("table construction is deterministic and round-trips through serialization") {
    const ParetoTable rebuilt = build_pareto_table(default_maps());
    CHECK(default_table().serialize() == rebuilt.serialize());

    const ParetoTable back = ParetoTable::deserialize(default_table().serialize());
    CHECK(back.fingerprint() == default_table().fingerprint());
    CHECK(back.serialize() == default_table().serialize());
    CHECK(back.cell_count() == default_table().cell_count());
}

TEST_CASE("alpha sweep spans the front for one cell") {
    const auto front = alpha_sweep(default_maps(), 2500.0, 350.0);
    REQUIRE(!front.empty());
    for (const auto& pt : front) {
        CHECK(pt.t_eng + pt.t_mot == doctest::Approx(350.0).epsilon(1e-9));
        CHECK(pt.alpha >= 0.0);
        CHECK(pt.alpha <= 1.0);
    }
}
