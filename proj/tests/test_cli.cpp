#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "scenehgn/serialize.hpp"
#include "scenehgn/synth.hpp"

namespace fs = std::filesystem;
using namespace scenehgn;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  const std::string cmd = std::string(SCENEHGN_CLI) + " --quiet " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("scenehgn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string at(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("detect").code, 2);
  EXPECT_EQ(cli("metrics a b --orientation-formula sideways").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(Cli, MissingAndMalformedInputsExitTwo) {
  EXPECT_EQ(cli("detect " + at("missing.json")).code, 2);
  write_text_file(at("bad.json"), "{ not json");
  EXPECT_EQ(cli("detect " + at("bad.json")).code, 2);
}

TEST_F(Cli, InvalidSceneExitsOne) {
  SceneHierarchy s = gen_corpus(1, 160)[0].scene;
  s.objects.front().placement.scale.x() = -1.0;
  write_text_file(at("invalid.json"), serialize_scene(s));
  EXPECT_EQ(cli("energy " + at("invalid.json")).code, 1);
}

TEST_F(Cli, SynthDetectRenderPipeline) {
  ASSERT_EQ(cli("--seed 7 synth -n 3 -o " + at("corpus")).code, 0);
  const std::string scene = at("corpus/scene_0000.json");
  ASSERT_TRUE(fs::exists(scene));
  ASSERT_TRUE(fs::exists(at("corpus/ground_truth.json")));

  const CliRun detected = cli("detect " + scene + " --explain " + at("explain.json"));
  ASSERT_EQ(detected.code, 0);
  const SceneHierarchy planted = load_scene(scene);
  EXPECT_EQ(deserialize_scene(detected.out).edges, planted.edges);
  EXPECT_TRUE(parse_json(read_text_file(at("explain.json"))).contains("hyper"));

  ASSERT_EQ(cli("render " + scene + " -o " + at("scene.svg")).code, 0);
  EXPECT_EQ(read_text_file(at("scene.svg")).rfind("<svg", 0), 0u);

  const CliRun energy = cli("energy " + scene);
  ASSERT_EQ(energy.code, 0);
  EXPECT_LE(parse_json(energy.out)["total"].get<double>(), 1e-20);
}

TEST_F(Cli, SynthIsSeeded) {
  ASSERT_EQ(cli("--seed 3 synth -n 2 -o " + at("a")).code, 0);
  ASSERT_EQ(cli("--seed 3 synth -n 2 -o " + at("b")).code, 0);
  EXPECT_EQ(read_text_file(at("a/scene_0001.json")), read_text_file(at("b/scene_0001.json")));
}

TEST_F(Cli, OptimizeAndMetrics) {
  ASSERT_EQ(cli("synth -n 2 --sigma-pos 0.05 --sigma-yaw 0.05 -o " + at("noisy")).code, 0);
  const CliRun opt = cli("optimize " + at("noisy/scene_0000.json") + " --trace " + at("trace.csv"));
  ASSERT_EQ(opt.code, 0);
  EXPECT_NO_THROW(deserialize_scene(opt.out));
  EXPECT_EQ(read_text_file(at("trace.csv")).rfind("iteration,", 0), 0u);

  const CliRun m = cli("metrics " + at("noisy") + " " + at("noisy") + " --pair dining_chair,dining_table");
  ASSERT_EQ(m.code, 0);
  const Json report = parse_json(m.out);
  EXPECT_EQ(report["o1"].get<double>(), 0.0);
  EXPECT_EQ(report["heatmaps"][0]["count_a"], report["heatmaps"][0]["count_b"]);
  EXPECT_EQ(cli("metrics " + at("noisy") + " " + at("noisy") + " --pair dining_chair,unicorn").code, 1);
}

TEST_F(Cli, FloorCodecRoundTrip) {
  ASSERT_EQ(cli("synth -n 1 -o " + at("c")).code, 0);
  ASSERT_EQ(cli("floor encode " + at("c/scene_0000.json") + " -o " + at("floor.txt")).code, 0);
  const CliRun decoded = cli("floor decode " + at("floor.txt"));
  ASSERT_EQ(decoded.code, 0);
  const Json j = parse_json(decoded.out);
  EXPECT_EQ(j["ring"].size(), 596u);
  EXPECT_EQ(j["polygon"].size(), load_scene(at("c/scene_0000.json")).floor.size());
}
