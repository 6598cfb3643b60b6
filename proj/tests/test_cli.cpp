#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = PHEVSIM_CLI_PATH;
const std::string kDataDir = PHEVSIM_DATA_DIR;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("help and version exit cleanly") {
    CHECK(run("--help") == 0);
    CHECK(run("--version") == 0);
    CHECK(run("simulate --help") == 0);
}

TEST_CASE("build-table writes a deterministic fingerprinted table") {
    TempDir dir("phevsim-cli-table");
    const fs::path table = dir.path / "table.csv";
    const fs::path table2 = dir.path / "table2.csv";
    // Coarse grid keeps the test fast; determinism is grid-independent.
    const std::string grid = " --torque-step 50 --speed-step 500";
    REQUIRE(run("build-table --out " + table.string() + grid) == 0);
    REQUIRE(run("build-table --out " + table2.string() + grid) == 0);
    CHECK(read_file(table) == read_file(table2));

    CHECK(run("build-table --maps /nonexistent/maps.json --out " + table.string()) == 2);
}

TEST_CASE("simulate runs a matrix and reruns byte-identically") {
    TempDir dir("phevsim-cli-sim");
    const fs::path cfg = dir.path / "cfg.json";
    {
        std::ofstream out(cfg);
        out << R"({"levels": ["high"], "cases": ["baseline", "vd"],
                   "seeds": [1], "duration": 120.0})";
    }
    const fs::path out1 = dir.path / "runs1";
    const fs::path out2 = dir.path / "runs2";
    REQUIRE(run("simulate --config " + cfg.string() + " --out " + out1.string()) == 0);
    REQUIRE(run("simulate --config " + cfg.string() + " --out " + out2.string()) == 0);

    for (const char* name :
         {"high-baseline-1.json", "high-baseline-1.csv", "high-vd-1.json", "high-vd-1.csv",
          "high-vd-1-traces.csv", "summary.csv"}) {
        CAPTURE(name);
        REQUIRE(fs::exists(out1 / name));
        CHECK(read_file(out1 / name) == read_file(out2 / name));
    }
    // Baseline improvement over itself is reported as zero.
    const std::string summary = read_file(out1 / "summary.csv");
    CHECK(summary.find("high,baseline,") != std::string::npos);
    CHECK(summary.find(",0\n") != std::string::npos);

    CHECK(run("simulate --config /nonexistent/cfg.json") == 2);
    {
        std::ofstream out(dir.path / "bad.json");
        out << R"({"levels": ["rushhour"]})";
    }
    CHECK(run("simulate --config " + (dir.path / "bad.json").string()) == 3);
}

TEST_CASE("trace reports both powertrain cases for a standard schedule") {
    TempDir dir("phevsim-cli-trace");
    const fs::path out = dir.path / "trace.csv";
    REQUIRE(run("trace --cycle " + kDataDir + "/hwfet.csv --out " + out.string()) == 0);
    const std::string report = read_file(out);
    CHECK(report.find("baseline,") != std::string::npos);
    CHECK(report.find("pt,") != std::string::npos);
    CHECK(fs::exists(dir.path / "trace.soc.csv"));

    double base_mpge = 0.0, pt_mpge = 0.0;
    std::istringstream lines(report);
    std::string line;
    while (std::getline(lines, line)) {
        std::istringstream cells(line);
        std::string name, mpge;
        std::getline(cells, name, ',');
        std::getline(cells, mpge, ',');
        if (name == "baseline") base_mpge = std::stod(mpge);
        if (name == "pt") pt_mpge = std::stod(mpge);
    }
    CHECK(pt_mpge > base_mpge);

    CHECK(run("trace --cycle /nonexistent.csv --out " + out.string()) == 2);
    {
        std::ofstream bad(dir.path / "bad.csv");
        bad << "0,0\n1,banana\n";
    }
    CHECK(run("trace --cycle " + (dir.path / "bad.csv").string() + " --out " + out.string()) ==
          3);
}
