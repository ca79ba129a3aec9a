#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <votepose/model_io.hpp>

#include "test_util.hpp"

using namespace votepose;
using test_util::TempDir;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp_or_empty(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

/// Runs the installed CLI with the given argument string, capturing both
/// streams. The binary path arrives through the VOTEPOSE_CLI environment
/// variable set by the build.
RunResult run_cli(const TempDir& dir, const std::string& args) {
  const char* bin = std::getenv("VOTEPOSE_CLI");
  REQUIRE(bin != nullptr);
  const auto out_path = dir.file("cli_stdout.txt");
  const auto err_path = dir.file("cli_stderr.txt");
  const std::string cmd = "\"" + std::string(bin) + "\" " + args + " > \"" +
                          out_path.string() + "\" 2> \"" + err_path.string() +
                          "\"";
  const int status = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.out = slurp_or_empty(out_path);
  res.err = slurp_or_empty(err_path);
  return res;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string cube_ply_text() {
  std::string s =
      "ply\nformat ascii 1.0\nelement vertex 125\n"
      "property float x\nproperty float y\nproperty float z\nend_header\n";
  const ObjectModel model = test_util::cube_model(1);
  for (const Vec3& p : model.points) {
    s += format_double(p.x) + " " + format_double(p.y) + " " +
         format_double(p.z) + "\n";
  }
  return s;
}

/// Registry directory, scene config with two well-separated instances,
/// and the small config files the subcommands take.
struct CliFixture {
  TempDir dir;
  std::filesystem::path registry_dir;

  CliFixture() {
    registry_dir = dir.file("registry");
    std::filesystem::create_directory(registry_dir);
    write_text(registry_dir / "cube.ply", cube_ply_text());
    write_text(registry_dir / "registry.json",
               R"({"version":1,"models":[{"class_id":1,"ply":"cube.ply",)"
               R"("keypoint_method":"fps","m":8}]})");
    write_text(dir.file("scene.json"),
               R"({"rng_seed":7,"points_per_instance":200,"instances":[)"
               R"({"class_id":1,"pose":[1,0,0,0,1,0,0,0,1,0.3,0,0]},)"
               R"({"class_id":1,"pose":[1,0,0,0,1,0,0,0,1,-0.3,0,0]}]})");
    write_text(dir.file("noise.json"), R"({"offset_sigma":0.002})");
  }

  std::string reg() const { return "\"" + registry_dir.string() + "\""; }
  std::string path(const std::string& name) const {
    return "\"" + dir.file(name).string() + "\"";
  }
};

}  // namespace

TEST_CASE("cli reports its version and rejects bad usage") {
  TempDir dir;
  RunResult res = run_cli(dir, "--version");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("votepose") != std::string::npos);

  res = run_cli(dir, "");
  REQUIRE(res.exit_code == 2);

  res = run_cli(dir, "frobnicate");
  REQUIRE(res.exit_code == 2);

  res = run_cli(dir, "keypoints");  // missing required --model
  REQUIRE(res.exit_code == 2);
}

TEST_CASE("cli keypoints selects and saves") {
  CliFixture fx;
  RunResult res = run_cli(
      fx.dir, "keypoints --model \"" + (fx.registry_dir / "cube.ply").string() +
                  "\" --method fps --m 8 --class-id 1 --out " +
                  fx.path("kps.json"));
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("keypoints: 8") != std::string::npos);
  const KeypointFile file = load_keypoints(fx.dir.file("kps.json"));
  REQUIRE(file.class_id == 1);
  REQUIRE(file.method == "fps");
  REQUIRE(file.keypoints.size() == 8);

  // fps with zero keypoints is a usage error
  res = run_cli(fx.dir,
                "keypoints --model \"" +
                    (fx.registry_dir / "cube.ply").string() + "\" --m 0");
  REQUIRE(res.exit_code == 2);

  // --m is meaningless for bbox8 and earns a warning
  res = run_cli(fx.dir,
                "keypoints --model \"" +
                    (fx.registry_dir / "cube.ply").string() +
                    "\" --method bbox8 --m 5");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.err.find("ignored") != std::string::npos);
  REQUIRE(res.out.find("keypoints: 9") != std::string::npos);
}

TEST_CASE("cli simulate, estimate and evaluate round trip") {
  CliFixture fx;

  RunResult res = run_cli(
      fx.dir, "simulate --registry " + fx.reg() + " --config " +
                  fx.path("scene.json") + " --out " + fx.path("scene.txt") +
                  " --prediction " + fx.path("pred.json"));
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("400 points") != std::string::npos);

  const Scene scene = load_scene(fx.dir.file("scene.txt"));
  REQUIRE(scene.points.size() == 400);
  REQUIRE(scene.instances.size() == 2);

  // binary prediction format carries the same bits
  res = run_cli(fx.dir, "simulate --registry " + fx.reg() + " --config " +
                            fx.path("scene.json") + " --out " +
                            fx.path("scene2.txt") + " --prediction " +
                            fx.path("pred.bin") +
                            " --prediction-format binary");
  REQUIRE(res.exit_code == 0);
  const Prediction pj = load_prediction(fx.dir.file("pred.json"));
  const Prediction pb = load_prediction(fx.dir.file("pred.bin"));
  REQUIRE(pj.kp_offsets == pb.kp_offsets);
  REQUIRE(pj.class_scores == pb.class_scores);

  res = run_cli(fx.dir, "estimate --registry " + fx.reg() + " --scene " +
                            fx.path("scene.txt") + " --prediction " +
                            fx.path("pred.json") + " --out " +
                            fx.path("est.csv"));
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("clusters: 2 (2 fitted, 0 failed)") !=
          std::string::npos);
  REQUIRE(res.out.find("max rotation error") != std::string::npos);
  const auto est_rows = load_estimates(fx.dir.file("est.csv"));
  REQUIRE(est_rows.size() == 2);
  REQUIRE_FALSE(est_rows[0].result.failed);
  REQUIRE_FALSE(est_rows[1].result.failed);

  res = run_cli(fx.dir, "evaluate --registry " + fx.reg() + " --scene " +
                            fx.path("scene.txt") + " --prediction " +
                            fx.path("pred.json") + " --out " +
                            fx.path("results.csv") + " --curve " +
                            fx.path("curve.csv"));
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("ADD AUC") != std::string::npos);
  const auto records = load_results(fx.dir.file("results.csv"));
  REQUIRE(records.size() == 2);
  for (const EvalRecord& r : records) {
    REQUIRE(r.add < 0.002);  // sigma 0 scene, oracle prediction
  }
  const std::string curve = read_file(fx.dir.file("curve.csv"));
  REQUIRE(curve.rfind("threshold,accuracy\n", 0) == 0);
  REQUIRE(curve.find("auc,") != std::string::npos);
}

TEST_CASE("cli sweep occlusion is reproducible across runs and threads") {
  CliFixture fx;
  write_text(fx.dir.file("sweep.json"),
             R"({"mode":"occlusion","trials":2,"fractions":[0,0.4],)"
             R"("noise":{"offset_sigma":0.003},"scene":{"rng_seed":11,)"
             R"("points_per_instance":150,"instances":[{"class_id":1,)"
             R"("pose":[1,0,0,0,1,0,0,0,1,0,0,0]}]}})");

  RunResult res =
      run_cli(fx.dir, "sweep --registry " + fx.reg() + " --config " +
                          fx.path("sweep.json") + " --out " +
                          fx.path("sweep1.csv") + " --threads 1");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("occlusion 0:") != std::string::npos);

  res = run_cli(fx.dir, "sweep --registry " + fx.reg() + " --config " +
                            fx.path("sweep.json") + " --out " +
                            fx.path("sweep2.csv") + " --threads 2");
  REQUIRE(res.exit_code == 0);

  const std::string csv1 = read_file(fx.dir.file("sweep1.csv"));
  const std::string csv2 = read_file(fx.dir.file("sweep2.csv"));
  REQUIRE(csv1 == csv2);
  REQUIRE(csv1.rfind("fraction,trials,acc_2cm,mean_add,mean_adds\n", 0) == 0);
}

TEST_CASE("cli sweep ablation writes one row per method") {
  CliFixture fx;
  write_text(fx.dir.file("abl.json"),
             R"({"mode":"ablation","methods":["fps8","bbox8"],"trials":2,)"
             R"("points_per_instance":150,"rng_seed":3,)"
             R"("noise":{"offset_sigma":0.004,"distance_scaled":true}})");
  const RunResult res =
      run_cli(fx.dir, "sweep --registry " + fx.reg() + " --config " +
                          fx.path("abl.json") + " --out " +
                          fx.path("abl.csv") + " --threads 1");
  REQUIRE(res.exit_code == 0);
  const std::string csv = read_file(fx.dir.file("abl.csv"));
  REQUIRE(csv.rfind("method,trials,mean_add,acc_2cm\n", 0) == 0);
  REQUIRE(csv.find("\nfps8,") != std::string::npos);
  REQUIRE(csv.find("\nbbox8,") != std::string::npos);
}

TEST_CASE("cli surfaces data errors as exit code 1") {
  CliFixture fx;
  write_text(fx.dir.file("broken.txt"), "votepose-scene 1\nframe nope\n");
  write_text(fx.dir.file("pred.json"), "{}");
  RunResult res = run_cli(fx.dir, "estimate --registry " + fx.reg() +
                                      " --scene " + fx.path("broken.txt") +
                                      " --prediction " + fx.path("pred.json"));
  REQUIRE(res.exit_code == 1);
  REQUIRE(res.err.find("error:") != std::string::npos);

  // two scenes, one prediction
  write_text(fx.dir.file("s1.txt"), "x");
  res = run_cli(fx.dir, "evaluate --registry " + fx.reg() + " --scene " +
                            fx.path("broken.txt") + " --scene " +
                            fx.path("s1.txt") + " --prediction " +
                            fx.path("pred.json"));
  REQUIRE(res.exit_code == 1);
}
