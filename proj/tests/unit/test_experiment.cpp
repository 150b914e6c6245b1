#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "mclip/experiment.hpp"

using namespace mclip;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mclip_exp_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.scene.kind = SceneKind::triangle_toy;
  c.solver = SolverKind::langevin;
  c.solver_overrides = {{"n_particles", 40}, {"max_inner_iters", 200}};
  c.repetitions = 2;
  c.ransac.n_trials = 2000;
  c.ransac.max_keep = 200;
  c.cache_dir = (out / "cache").string();
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const Json j = Json::parse(R"({
    "scene": {"kind": "two_lines", "spacing": 1.5, "noise_sigma": 0.01},
    "solver": "stein",
    "solver_config": {"n_particles": 10, "noise_scale": "standard_sqrt2"},
    "sigma": 0.3, "epsilon": 0.5, "metrics": ["w1"], "repetitions": 3,
    "ransac": {"n_trials": 50}, "grid": {"step_size": [0.001, 0.01]},
    "seed": 9, "jobs": 2
  })");
  const auto c = config_from_json(j);
  CHECK(c.scene.kind == SceneKind::two_lines);
  CHECK(c.scene.spacing == 1.5);
  CHECK(c.solver == SolverKind::stein);
  const auto sc = c.solver_config();
  CHECK(sc.n_particles == 10);
  CHECK(sc.step_size == 0.001);
  CHECK(sc.noise_scale == NoiseScale::standard_sqrt2);
  CHECK(sc.seed == 9);
  CHECK(c.affinity.sigma == 0.3);
  CHECK(c.ransac.n_trials == 50);
  CHECK(c.grid.step_size.size() == 2);
  CHECK_NOTHROW(c.validate());

  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"bogus": 1})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"solver": "magic"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"solver_config": {"n_particles": 0}})"))
                      .validate(),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"repetitions": 0})")).validate(),
                  ConfigError);

  ExperimentConfig o;
  apply_solver_override(o, "step_size=0.5");
  CHECK(o.solver_config().step_size == 0.5);
  CHECK_THROWS_AS(apply_solver_override(o, "nope=1"), ConfigError);
  CHECK_THROWS_AS(apply_solver_override(o, "step_size"), ConfigError);
}

TEST_CASE("histograms") {
  PoseDistribution d;
  d.add(Pose::from_yaw(0.0, Eigen::Vector3d(0.05, 0, 0)), 2);
  d.add(Pose::from_yaw(std::numbers::pi / 4, Eigen::Vector3d(0.31, 0, 0)), 3);
  const auto hs = pose_histograms(d, 0.1, 5.0);
  REQUIRE(hs.size() == 4);
  CHECK(hs[3].axis == "yaw");
  CHECK(hs[3].counts.size() == 72);
  CHECK(hs[3].edges.front() == -180.0);
  CHECK(hs[3].edges.back() == 180.0);
  CHECK(hs[3].counts[36] == 2);
  CHECK(hs[3].counts[45] == 3);
  std::size_t total = 0;
  for (auto c : hs[0].counts) total += c;
  CHECK(total == 5);
  CHECK(to_csv(hs[0]).rfind("bin_lo,bin_hi,count\n", 0) == 0);
}

TEST_CASE("cmd_run writes the declared outputs and is deterministic") {
  const fs::path a = temp_dir("run_a"), b = temp_dir("run_b");
  std::ostringstream out;
  auto ca = small_config(a);
  CHECK(cmd_run(ca, out) == exit_code::ok);
  for (const char* f : {"report.json", "timing.json", "distribution.json",
                        "distribution.csv", "hist_x.csv", "hist_y.csv",
                        "hist_z.csv", "hist_yaw.csv", "cliques.json", "reference.json"}) {
    CHECK(fs::exists(a / f));
  }
  const Json report = read_json(a / "report.json");
  CHECK(report["repetitions"].size() == 2);
  CHECK(report["metrics_summary"].size() == 6);
  CHECK(report["repetitions"][0]["run"]["particles"].size() == 40);

  auto cb = small_config(b);
  cb.jobs = 3;
  CHECK(cmd_run(cb, out) == exit_code::ok);
  CHECK(read_text(a / "report.json") == read_text(b / "report.json"));
  CHECK(read_text(a / "distribution.csv") == read_text(b / "distribution.csv"));
}

TEST_CASE("oracle_bk run on the triangle toy") {
  const fs::path dir = temp_dir("oracle_run");
  auto c = small_config(dir);
  c.solver = SolverKind::oracle_bk;
  c.repetitions = 1;
  c.compare_reference = false;
  std::ostringstream out;
  CHECK(cmd_run(c, out) == exit_code::ok);
  const auto cl = cliques_from_json(read_json(dir / "cliques.json"));
  REQUIRE(cl.size() == 2);
  CHECK(cl[0].indices == std::vector<std::size_t>{0, 4, 8});
  CHECK(cl[1].indices == std::vector<std::size_t>{0, 5, 7});

  CHECK(cmd_oracle(c, out) == exit_code::ok);
  CHECK(read_json(dir / "cliques.json").size() > 2);
}

TEST_CASE("missing scene file gives an i/o exit code naming the path") {
  ExperimentConfig c;
  c.scene.kind = SceneKind::from_file;
  c.scene.path = "/no/such/scene.json";
  std::ostringstream out, err;
  const int code = guarded([&] { return cmd_run(c, out); }, err);
  CHECK(code == exit_code::io);
  CHECK(err.str().find("/no/such/scene.json") != std::string::npos);
}

TEST_CASE("compare: file against itself and singleton distance") {
  const fs::path dir = temp_dir("compare");
  PoseDistribution a, b;
  a.add(Pose::identity());
  b.add(Pose::from_yaw(0, Eigen::Vector3d(1, 0, 0)));
  write_json(dir / "a.json", to_json(a));
  write_text(dir / "b.csv", to_csv(b));
  std::ostringstream out;
  CHECK(cmd_compare(dir / "a.json", dir / "a.json", {"mmd", "ed", "w1"}, std::nullopt,
                    dir, out) == 0);
  for (const auto& r : read_json(dir / "metrics.json")) CHECK(r["value"].get<double>() == 0.0);
  CHECK(cmd_compare(dir / "a.json", dir / "b.csv", {"w1"}, std::nullopt, dir, out) == 0);
  const Json m = read_json(dir / "metrics.json");
  CHECK(m[0]["value"].get<double>() == doctest::Approx(1.0));
  CHECK(out.str().find("100.0000") != std::string::npos);

  PoseDistribution empty;
  write_text(dir / "e.csv", to_csv(empty));
  std::ostringstream err;
  CHECK(guarded([&] { return cmd_compare(dir / "e.csv", dir / "a.json", {"w1"},
                                         std::nullopt, dir, out); },
                err) == exit_code::empty_distribution);
}

TEST_CASE("ablate: 2x2 grid gives 4 rows per repetition and tolerates failures") {
  const fs::path dir = temp_dir("ablate");
  auto c = small_config(dir);
  c.solver = SolverKind::stein;
  c.repetitions = 1;
  c.solver_overrides = {{"n_particles", 20}};
  c.grid.step_size = {0.001, -1.0};
  c.grid.kernel_bandwidth = {0.005, 0.5};
  std::ostringstream out;
  CHECK(cmd_ablate(c, out) == exit_code::ok);
  std::istringstream csv(read_text(dir / "ablation.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.find("kernel_bandwidth") != std::string::npos);
  int rows = 0, failed = 0;
  while (std::getline(csv, line)) {
    ++rows;
    if (line.find("failed") != std::string::npos) ++failed;
  }
  CHECK(rows == 4);
  CHECK(failed == 2);
}

TEST_CASE("gen-scene then run from files") {
  const fs::path dir = temp_dir("gen");
  ExperimentConfig g;
  g.scene.kind = SceneKind::circle;
  g.scene.applied_pose = Pose::from_yaw(0.2, Eigen::Vector3d(1, 0, 0));
  g.out_dir = dir.string();
  std::ostringstream out;
  CHECK(cmd_gen_scene(g, out) == 0);
  CHECK(fs::exists(dir / "source.json"));
  CHECK(fs::exists(dir / "target.scene.json"));

  ExperimentConfig c = small_config(dir / "run");
  c.source_path = (dir / "source.json").string();
  c.target_path = (dir / "target.json").string();
  const Problem p = build_problem(c);
  CHECK(p.scene.true_pose.yaw() == doctest::Approx(0.2));
  CHECK(p.affinity.size() == 64);
}
