#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sunimodal/cli.hpp"

using namespace sunimodal;
namespace fs = std::filesystem;

static const char* kQuad2 = R"({"family":"quadratic","params":[2.0]})";
static const char* kQuad19 = R"({"family":"quadratic","params":[1.9]})";
static const char* kQuad18 = R"({"family":"quadratic","params":[1.8]})";
static const char* kQuad12 = R"({"family":"quadratic","params":[1.2]})";

static fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("sunimodal_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

static std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

static nlohmann::json manifest(const fs::path& dir)
{
    return nlohmann::json::parse(slurp(dir / "manifest.json"));
}

static RunConfig config(const std::string& cmd, const std::string& map, const fs::path& out)
{
    RunConfig c;
    c.command = cmd;
    c.map = map;
    c.out = out.string();
    return c;
}

TEST_CASE("argument parsing")
{
    int code = -1;
    const char* ok[] = {"sunimodal", "renorm", "--map", "m.json", "--depth", "5", "--mesh", "0.1", "--seed", "7"};
    auto c = parse_args(10, ok, code);
    REQUIRE(c);
    CHECK(code == 0);
    CHECK(c->command == "renorm");
    CHECK(c->map == "m.json");
    CHECK(c->depth == 5);
    CHECK(c->mesh == doctest::Approx(0.1));
    CHECK_FALSE(c->grid);
    CHECK(c->seed == 7u);

    const char* bad[] = {"sunimodal", "frobnicate"};
    CHECK_FALSE(parse_args(2, bad, code));
    CHECK(code == 1);
    const char* bad_num[] = {"sunimodal", "kneading", "--depth", "x"};
    CHECK_FALSE(parse_args(4, bad_num, code));
    CHECK(code == 1);
    CHECK(commands().size() == 8);
}

TEST_CASE("kneading of the Chebyshev map")
{
    auto out = scratch("kneading");
    auto c = config("kneading", kQuad2, out);
    c.depth = 5;
    RunResult r = run(c);
    CHECK(r.status == 0);
    std::string text = slurp(out / "kneading.txt");
    CHECK(text.find("R L L L L\n") != std::string::npos);
    CHECK(manifest(out)["results"]["sequence"] == "R L L L L");
}

TEST_CASE("map specs load from files")
{
    auto out = scratch("specfile");
    fs::create_directories(out);
    std::ofstream(out / "map.json") << kQuad2;
    auto c = config("kneading", (out / "map.json").string(), out);
    c.depth = 3;
    CHECK(run(c).status == 0);
    CHECK(slurp(out / "kneading.txt").find("R L L\n") != std::string::npos);
}

TEST_CASE("self-conjugacy through the driver")
{
    auto out = scratch("selfconj");
    auto c = config("conjugacy", kQuad19, out);
    c.map2 = kQuad19;
    c.depth = 2;
    c.mesh = 0.05;
    c.grid = 500;
    RunResult r = run(c);
    REQUIRE(r.status == 0);
    auto m = manifest(out);
    CHECK(m["status"] == 0);
    CHECK(m["results"]["sup_distance"].get<double>() < 1e-9);
    CHECK(fs::exists(out / "conjugacy.csv"));
    CHECK(fs::exists(out / "diagnostics.json"));
}

TEST_CASE("kneading mismatch is a finding, not an error")
{
    auto out = scratch("mismatch");
    auto c = config("conjugacy", kQuad19, out);
    c.map2 = kQuad18;
    RunResult r = run(c);
    CHECK(r.status == 2);
    CHECK(r.finding.find("not conjugate at depth") != std::string::npos);
    CHECK(manifest(out)["finding"] == r.finding);
}

TEST_CASE("errors exit with status 1")
{
    auto out = scratch("errors");
    RunResult r = run(config("kneading", R"({"family":"quadratic",)", out));
    CHECK(r.status == 1);
    CHECK(r.finding.find("line 1, column") != std::string::npos);

    CHECK(run(config("kneading", R"({"family":"nope","params":[]})", out)).status == 1);
    CHECK(run(config("kneading", "", out)).status == 1);
    CHECK(run(config("kneading", (out / "missing.json").string(), out)).status == 1);
    auto c = config("renorm", kQuad12, out);
    c.depth = 0;
    CHECK(run(c).status == 1);
    CHECK(manifest(out)["status"] == 1);
}

TEST_CASE("every data file names the command and the config hash")
{
    auto out = scratch("headers");
    for (const char* cmd : {"kneading", "induce", "ce-check", "renorm", "qsnorm"}) {
        auto c = config(cmd, kQuad19, out / cmd);
        if (std::string(cmd) == "qsnorm") c.grid = 16;
        RunResult r = run(c);
        REQUIRE(r.status == 0);
        REQUIRE_FALSE(r.files.empty());
        std::string line = "# sunimodal " + std::string(cmd) + " config " + config_hash(c) + "\n";
        for (auto& f : r.files) CHECK(slurp(out / cmd / f).rfind(line, 0) == 0);
        CHECK(manifest(out / cmd)["config_hash"] == config_hash(c));
        CHECK(manifest(out / cmd)["seed"] == 1);
    }
}

TEST_CASE("config hash")
{
    auto a = config("renorm", kQuad12, "x"), b = config("renorm", kQuad12, "y");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.seed = 2;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.depth = 3;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.map = R"({"family": "quadratic", "params": [1.2]})";
    CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("reruns are byte-identical")
{
    for (const char* cmd : {"renorm", "staircase", "qc-field", "conjugacy"}) {
        auto spec = std::string(cmd) == "renorm" || std::string(cmd) == "staircase" ? kQuad12 : kQuad19;
        std::vector<RunResult> rs;
        auto d1 = scratch(std::string("det1_") + cmd), d2 = scratch(std::string("det2_") + cmd);
        for (auto& d : {d1, d2}) {
            auto c = config(cmd, spec, d);
            if (std::string(cmd) == "conjugacy") {
                c.map2 = spec;
                c.depth = 1;
                c.mesh = 0.2;
                c.grid = 100;
            }
            if (std::string(cmd) == "qc-field") c.grid = 9;
            rs.push_back(run(c));
            REQUIRE(rs.back().status == 0);
        }
        REQUIRE(rs[0].files == rs[1].files);
        for (auto& f : rs[0].files) CHECK(slurp(d1 / f) == slurp(d2 / f));
        auto m1 = manifest(d1), m2 = manifest(d2);
        m1.erase("timestamp");
        m2.erase("timestamp");
        CHECK(m1 == m2);
    }
}

TEST_CASE("staircase command")
{
    auto out = scratch("staircase");
    auto c = config("staircase", kQuad12, out);
    c.map2 = R"({"family":"conjugated","params":[1.2,0.2]})";
    RunResult r = run(c);
    REQUIRE(r.status == 0);
    auto m = manifest(out);
    CHECK(m["results"]["period"] == 2);
    CHECK(m["results"]["inner_steps"] == 40);
    CHECK(m["results"]["equivariance_defect"].get<double>() < 1e-6);
    CHECK(fs::exists(out / "staircase_equivalence.csv"));
    CHECK(run(config("staircase", kQuad2, scratch("staircase2"))).status == 2);
}
