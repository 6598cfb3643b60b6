#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "phevsim/drive_cycle.hpp"
#include "phevsim/errors.hpp"

using namespace phevsim;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const std::string kDataDir = PHEVSIM_DATA_DIR;

}  // namespace

TEST_CASE("parser accepts a header row and mph values") {
    const DriveCycle c = parse_drive_cycle("seconds,mph\n0,0\n1,30\n2,60\n", "toy");
    REQUIRE(c.t.size() == 3);
    const double v30 = 30.0 * 0.44704;  // exact mph conversion
    CHECK(c.v_ref[1] == doctest::Approx(v30).epsilon(1e-12));
    CHECK(c.duration() == doctest::Approx(2.0));
    CHECK(c.speed_at(0.5) == doctest::Approx(0.5 * v30).epsilon(1e-12));
    CHECK(c.speed_at(-1.0) == doctest::Approx(0.0));        // clamp
    CHECK(c.speed_at(99.0) == doctest::Approx(2.0 * v30));  // clamp
}

TEST_CASE("parser reports the offending line") {
    try {
        parse_drive_cycle("0,0\n1,banana\n", "bad");
        FAIL("expected InvalidInput");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_drive_cycle("0,0\n1,-5\n", "neg"), InvalidInput);
    CHECK_THROWS_AS(parse_drive_cycle("0,0\n0,5\n", "nonmono"), InvalidInput);
}

TEST_CASE("stitching shifts time into one continuous schedule") {
    const DriveCycle a = parse_drive_cycle("0,0\n1,10\n2,0\n", "a");
    const DriveCycle b = parse_drive_cycle("0,0\n1,20\n", "b");
    const DriveCycle combined = stitch_cycles({a, b}, "ab");
    combined.validate();
    CHECK(combined.duration() > a.duration());
    CHECK(combined.distance_miles() ==
          doctest::Approx(a.distance_miles() + b.distance_miles()).epsilon(1e-9));
    for (std::size_t i = 1; i < combined.t.size(); ++i) CHECK(combined.t[i] > combined.t[i - 1]);
}

TEST_CASE("bundled standard schedules stitch to the studied combined distance") {
    const DriveCycle udds = parse_drive_cycle(read_file(kDataDir + "/udds.csv"), "udds");
    const DriveCycle hwfet = parse_drive_cycle(read_file(kDataDir + "/hwfet.csv"), "hwfet");
    const DriveCycle us06 = parse_drive_cycle(read_file(kDataDir + "/us06.csv"), "us06");
    udds.validate();
    hwfet.validate();
    us06.validate();
    const DriveCycle combined = stitch_cycles({udds, hwfet, us06}, "combined");
    CHECK(combined.distance_miles() == doctest::Approx(25.72).epsilon(0.005));
}
