// Drives the ropetrack executable end to end on a reduced-resolution scene.
#include "ropetrack/io.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ropetrack;
using ropetrack::testing::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

Run run_cli(const std::string& args, const std::filesystem::path& log) {
    const std::string cmd = std::string(ROPETRACK_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        tmp_ = new TempDir("ropetrack_cli");
        io::save_scene(*tmp_ / "scene.json", ropetrack::testing::small_preset_scene(0.5));
        const auto r = run_cli("simulate --scene " + (*tmp_ / "scene.json").string() +
                                   " --script drag --seed 1 --out " + (*tmp_ / "data").string(),
                               *tmp_ / "simulate.log");
        ASSERT_EQ(r.code, 0) << r.output;
    }
    static void TearDownTestSuite() {
        delete tmp_;
        tmp_ = nullptr;
    }
    static TempDir* tmp_;
};

TempDir* CliPipeline::tmp_ = nullptr;

}  // namespace

TEST_F(CliPipeline, SimulateWritesDataset) {
    const auto data = *tmp_ / "data";
    EXPECT_TRUE(std::filesystem::exists(data / "scene.json"));
    EXPECT_TRUE(std::filesystem::exists(data / "truth.csv"));
    EXPECT_TRUE(std::filesystem::exists(data / "run_manifest.json"));
    const auto d = io::load_dataset(data);
    EXPECT_EQ(d.steps(), 31u);
    EXPECT_EQ(d.cameras.size(), 3u);
}

TEST_F(CliPipeline, TrackThenEval) {
    const auto data = (*tmp_ / "data").string();
    const auto traj = (*tmp_ / "traj").string();
    const auto base = (*tmp_ / "base").string();
    auto r = run_cli("track --data " + data + " --out " + traj, *tmp_ / "track.log");
    ASSERT_EQ(r.code, 0) << r.output;
    r = run_cli("track --prediction-only --data " + data + " --out " + base, *tmp_ / "base.log");
    ASSERT_EQ(r.code, 0) << r.output;
    const auto report = (*tmp_ / "report.csv").string();
    r = run_cli("eval --data " + data + " --traj " + traj + " --baseline " + base + " --out " + report,
                *tmp_ / "eval.log");
    ASSERT_EQ(r.code, 0) << r.output;
    const auto summary = nlohmann::json::parse(slurp(report + ".summary.json"));
    EXPECT_EQ(summary.at("steps").get<int>(), 31);
    EXPECT_TRUE(summary.contains("error_ratio"));

    // An impossible threshold turns a successful run into exit code 2.
    r = run_cli("eval --data " + data + " --traj " + traj + " --out " + report +
                    " --max-tip-error 1e-9",
                *tmp_ / "eval_fail.log");
    EXPECT_EQ(r.code, 2) << r.output;
}

TEST_F(CliPipeline, TrackIsDeterministic) {
    const auto data = (*tmp_ / "data").string();
    for (const char* name : {"a", "b"}) {
        const auto r = run_cli("track --data " + data + " --out " + (*tmp_ / name).string(),
                               *tmp_ / (std::string(name) + ".log"));
        ASSERT_EQ(r.code, 0) << r.output;
    }
    const auto a = slurp(*tmp_ / "a" / "estimates.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(*tmp_ / "b" / "estimates.csv"));
}

TEST_F(CliPipeline, RenderWritesOneImagePerCamera) {
    const auto r = run_cli("render --data " + (*tmp_ / "data").string() + " --step 5 --out " +
                               (*tmp_ / "view.png").string(),
                           *tmp_ / "render.log");
    ASSERT_EQ(r.code, 0) << r.output;
    for (int k = 0; k < 3; ++k)
        EXPECT_TRUE(std::filesystem::exists(*tmp_ / ("view_cam" + std::to_string(k) + ".png")));
}

TEST(Cli, GradcheckSeedSeven) {
    TempDir tmp;
    const auto r = run_cli("gradcheck --seed 7", tmp / "gc.log");
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("PASS"), std::string::npos) << r.output;
}

TEST(Cli, InvalidInputExitsOne) {
    TempDir tmp;
    EXPECT_EQ(run_cli("track --data " + (tmp / "missing").string() + " --out x", tmp / "a.log").code, 1);
    EXPECT_EQ(run_cli("frobnicate", tmp / "b.log").code, 1);
    EXPECT_EQ(run_cli("simulate --script nosuch --out " + (tmp / "d").string(), tmp / "c.log").code, 1);
    std::filesystem::create_directories(tmp / "empty");
    EXPECT_EQ(run_cli("track --data " + (tmp / "empty").string() + " --out " + (tmp / "o").string(),
                      tmp / "e.log").code,
              1);
}
