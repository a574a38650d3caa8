#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>

#include <json.hpp>

#include "test_util.hpp"

namespace {

using nlohmann::json;
using testutil::TempDir;

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const char* bin = std::getenv("SFMSEG_BIN");
  if (bin == nullptr) {
    ADD_FAILURE() << "SFMSEG_BIN is not set";
    return {};
  }
  const std::string cmd = std::string(bin) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  RunResult result;
  if (pipe == nullptr) {
    ADD_FAILURE() << "popen failed";
    return result;
  }
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) {
    result.output += buf;
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

const char* kSceneSpec =
    "num_buildings = 3\n"
    "points_per_building = 40\n"
    "num_frames = 8\n"
    "num_sequences = 2\n"
    "keypoint_noise_sigma = 0.5\n"
    "track_dropout = 0.1\n"
    "rng_seed = 9\n";

void make_scene_dir(const std::filesystem::path& dir) {
  testutil::write_file(dir / "scene.spec", kSceneSpec);
  const auto r =
      run_cli("synth --spec " + (dir / "scene.spec").string() + " --out " +
              (dir / "scene").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
}

}  // namespace

TEST(CliTest, SynthAssociateEvaluateFlow) {
  TempDir dir;
  make_scene_dir(dir.path());
  const auto scene = dir.path() / "scene";

  const auto assoc = run_cli("associate --model " + (scene / "model").string() +
                             " --detections " + (scene / "detections.json").string() +
                             " --out " + (dir.path() / "out").string() + " --json");
  ASSERT_EQ(assoc.exit_code, 0) << assoc.output;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "result.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "cloud.ply"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "tracks.json"));
  const json summary = json::parse(assoc.output);
  EXPECT_EQ(summary["instances"].get<int>(), 3);

  const auto eval = run_cli(
      "evaluate --predictions " + (dir.path() / "out" / "result.json").string() +
      " --detections " + (scene / "detections.json").string() + " --gt " +
      (scene / "gt.csv").string() + " --json");
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  const json report = json::parse(eval.output);
  EXPECT_GT(report["mean_adjusted_coverage"].get<double>(), 0.95);
}

TEST(CliTest, MissingInputFailsWithPathInMessage) {
  TempDir dir;
  const auto r = run_cli("associate --model " + (dir.path() / "nope").string() +
                         " --detections " + (dir.path() / "d.json").string() +
                         " --out " + (dir.path() / "out").string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("nope"), std::string::npos);
}

TEST(CliTest, EmptyInputsSucceed) {
  TempDir dir;
  testutil::write_file(dir.path() / "model" / "images.txt", "# empty\n");
  testutil::write_file(dir.path() / "model" / "points3D.txt", "# empty\n");
  testutil::write_file(dir.path() / "dets.json", R"({"images": []})");
  const auto r = run_cli("associate --model " + (dir.path() / "model").string() +
                         " --detections " + (dir.path() / "dets.json").string() +
                         " --out " + (dir.path() / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  std::ifstream in(dir.path() / "out" / "result.json");
  const json doc = json::parse(in);
  EXPECT_TRUE(doc["instances"].empty());
  EXPECT_TRUE(doc["point_labels"].empty());
}

TEST(CliTest, AssociateIsByteDeterministicAcrossRunsAndThreads) {
  TempDir dir;
  make_scene_dir(dir.path());
  const auto scene = dir.path() / "scene";
  const std::string base = "associate --model " + (scene / "model").string() +
                           " --detections " + (scene / "detections.json").string();

  ASSERT_EQ(run_cli(base + " --threads 1 --out " + (dir.path() / "a").string()).exit_code, 0);
  ASSERT_EQ(run_cli(base + " --threads 1 --out " + (dir.path() / "b").string()).exit_code, 0);
  ASSERT_EQ(run_cli(base + " --threads 4 --out " + (dir.path() / "c").string()).exit_code, 0);

  for (const char* name : {"result.json", "cloud.ply", "tracks.json"}) {
    const auto a = testutil::read_file(dir.path() / "a" / name);
    EXPECT_EQ(a, testutil::read_file(dir.path() / "b" / name)) << name;
    EXPECT_EQ(a, testutil::read_file(dir.path() / "c" / name)) << name;
    EXPECT_FALSE(a.empty());
  }
}

TEST(CliTest, BaselineSingleFrameMakesOneTrackPerMask) {
  TempDir dir;
  testutil::write_file(
      dir.path() / "dets.json",
      R"({"images": [{"name": "f0.png", "width": 8, "height": 1, "masks": [
            {"label": "b", "score": 0.9, "rle": [0, 2, 6]},
            {"label": "b", "score": 0.9, "rle": [3, 2, 3]},
            {"label": "b", "score": 0.9, "rle": [6, 2]}]}]})");
  testutil::write_file(dir.path() / "order.txt", "f0.png\n");
  const auto r = run_cli("baseline --detections " + (dir.path() / "dets.json").string() +
                         " --order " + (dir.path() / "order.txt").string() +
                         " --out " + (dir.path() / "out").string() + " --json");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const json summary = json::parse(r.output);
  EXPECT_EQ(summary["tracks"].get<int>(), 3);
}

TEST(CliTest, BaselineTracksStayWithinOneSequence) {
  TempDir dir;
  make_scene_dir(dir.path());
  const auto scene = dir.path() / "scene";
  const auto r = run_cli("baseline --detections " + (scene / "detections.json").string() +
                         " --order " + (scene / "order.txt").string() + " --out " +
                         (dir.path() / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;

  std::ifstream tin(scene / "truth.json");
  const json truth = json::parse(tin);
  std::map<std::string, int> seq_of;
  for (std::size_t s = 0; s < truth["sequences"].size(); ++s) {
    for (const auto& name : truth["sequences"][s]) {
      seq_of[name.get<std::string>()] = static_cast<int>(s);
    }
  }

  std::ifstream rin(dir.path() / "out" / "result.json");
  const json doc = json::parse(rin);
  ASSERT_FALSE(doc["instances"].empty());
  for (const auto& inst : doc["instances"]) {
    std::set<int> seqs;
    for (const auto& m : inst["masks"]) {
      seqs.insert(seq_of.at(m[0].get<std::string>()));
    }
    EXPECT_EQ(seqs.size(), 1u) << "track crosses sequences";
  }
}

TEST(CliTest, SynthIsByteDeterministic) {
  TempDir dir;
  testutil::write_file(dir.path() / "scene.spec", kSceneSpec);
  ASSERT_EQ(run_cli("synth --spec " + (dir.path() / "scene.spec").string() +
                    " --out " + (dir.path() / "s1").string()).exit_code, 0);
  ASSERT_EQ(run_cli("synth --spec " + (dir.path() / "scene.spec").string() +
                    " --out " + (dir.path() / "s2").string()).exit_code, 0);
  for (const char* rel :
       {"model/images.txt", "model/points3D.txt", "detections.json", "gt.csv",
        "truth.json", "order.txt"}) {
    EXPECT_EQ(testutil::read_file(dir.path() / "s1" / rel),
              testutil::read_file(dir.path() / "s2" / rel))
        << rel;
  }
}

TEST(CliTest, SynthRejectsDegenerateSpec) {
  TempDir dir;
  testutil::write_file(dir.path() / "scene.spec", "num_buildings = 0\n");
  const auto r = run_cli("synth --spec " + (dir.path() / "scene.spec").string() +
                         " --out " + (dir.path() / "out").string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("num_buildings"), std::string::npos);
}

TEST(CliTest, ConfigFileSuppliesDefaultsAndFlagsOverride) {
  TempDir dir;
  make_scene_dir(dir.path());
  const auto scene = dir.path() / "scene";
  testutil::write_file(dir.path() / "run.cfg", "tau-j=0.25\ntau-m=0.12\n");

  const auto r = run_cli("associate --config " + (dir.path() / "run.cfg").string() +
                         " --model " + (scene / "model").string() +
                         " --detections " + (scene / "detections.json").string() +
                         " --out " + (dir.path() / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  std::ifstream in(dir.path() / "out" / "result.json");
  const json doc = json::parse(in);
  EXPECT_DOUBLE_EQ(doc["meta"]["tau_j"].get<double>(), 0.25);
  EXPECT_DOUBLE_EQ(doc["meta"]["tau_m"].get<double>(), 0.12);

  const auto r2 = run_cli("associate --config " + (dir.path() / "run.cfg").string() +
                          " --tau-j 0.18 --model " + (scene / "model").string() +
                          " --detections " + (scene / "detections.json").string() +
                          " --out " + (dir.path() / "out2").string());
  ASSERT_EQ(r2.exit_code, 0) << r2.output;
  std::ifstream in2(dir.path() / "out2" / "result.json");
  const json doc2 = json::parse(in2);
  EXPECT_DOUBLE_EQ(doc2["meta"]["tau_j"].get<double>(), 0.18);
}

TEST(CliTest, OutOfRangeThresholdWarnsButRuns) {
  TempDir dir;
  make_scene_dir(dir.path());
  const auto scene = dir.path() / "scene";
  const auto r = run_cli("associate --tau-j 0.45 --model " + (scene / "model").string() +
                         " --detections " + (scene / "detections.json").string() +
                         " --out " + (dir.path() / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("recommended range"), std::string::npos);
}
