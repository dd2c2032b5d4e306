#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

int cli(const std::string& args) {
    const std::string cmd = std::string(SPIKECTL_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("spikectl_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::size_t lines(const fs::path& p) {
    const auto text = slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST(Cli, StaircaseRunWritesIdenticalFilesTwice) {
    const auto dir = scratch("run");
    ASSERT_EQ(cli("run --experiment staircase --seed 42 --out " + (dir / "a").string()), 0);
    ASSERT_EQ(cli("run --experiment staircase --seed 42 --out " + (dir / "b").string()), 0);
    for (const char* f : {"raster.csv", "imu.csv", "summary.json", "config.json"}) {
        EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
    const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
    EXPECT_EQ(summary.at("seed").get<int>(), 42);
    EXPECT_EQ(summary.at("steps").size(), 9u);
    fs::remove_all(dir);
}

TEST(Cli, SeedOverridesConfig) {
    const auto dir = scratch("seed");
    {
        std::ofstream cfg(dir.string() + ".json");
        cfg << R"({"seed": 5, "experiment": {"kind": "staircase", "goal_schedule": [2], "step_ms": 2000}})";
    }
    ASSERT_EQ(cli("run --config " + dir.string() + ".json --seed 8 --out " + dir.string()), 0);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(summary.at("seed").get<int>(), 8);
    EXPECT_EQ(summary.at("steps").size(), 1u);
    fs::remove_all(dir);
    fs::remove(dir.string() + ".json");
}

TEST(Cli, CharacterizeWritesOneRowPerNeuron) {
    const auto dir = scratch("char");
    ASSERT_EQ(cli("characterize --out " + dir.string()), 0);
    EXPECT_EQ(lines(dir / "rate_profile.csv"), 257u);  // header + 256 neurons
    EXPECT_EQ(lines(dir / "rate_profile_sorted.csv"), 257u);
    fs::remove_all(dir);
}

TEST(Cli, AuditWritesWiringDocument) {
    const auto dir = scratch("audit");
    ASSERT_EQ(cli("audit --out " + dir.string()), 0);
    const auto doc = nlohmann::json::parse(slurp(dir / "wiring.json"));
    EXPECT_TRUE(doc.at("audit").at("ok").get<bool>());
    fs::remove_all(dir);
}

TEST(Cli, FailuresExitNonzero) {
    EXPECT_NE(cli("run --experiment sprint --out " + scratch("bad").string()), 0);
    EXPECT_NE(cli("run --config /nonexistent.json --out " + scratch("bad").string()), 0);
    EXPECT_NE(cli("run --experiment staircase --out /dev/null/out"), 0);
    EXPECT_NE(cli("frobnicate"), 0);
    EXPECT_EQ(cli("version"), 0);
    fs::remove_all(scratch("bad"));
}
