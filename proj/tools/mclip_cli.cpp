// mclip: scenes -> affinity -> particle solvers -> pose distributions -> metrics.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mclip/experiment.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;

  std::optional<std::string> scene;
  std::optional<std::string> scene_file;
  std::optional<std::string> source;
  std::optional<std::string> target;
  std::optional<double> noise;
  std::optional<std::size_t> points;
  std::optional<double> radius;
  std::optional<std::string> solver;
  std::optional<double> sigma;
  std::optional<double> epsilon;
  std::optional<std::size_t> repetitions;
  std::optional<std::string> cache_dir;
  std::optional<std::size_t> ransac_trials;
  std::vector<std::string> overrides;
  std::vector<std::string> metrics;
  std::optional<double> mmd_bandwidth;
  bool no_reference = false;
  std::vector<std::size_t> grid_particles;
  std::vector<double> grid_step;
  std::vector<double> grid_bandwidth;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
  cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
}

void add_scene(CLI::App* cmd, Flags& f) {
  cmd->add_option("--scene", f.scene,
                  "circle | two_lines | repeated_clusters | triangle_toy");
  cmd->add_option("--scene-file", f.scene_file, "PointSet JSON used as the source");
  cmd->add_option("--source", f.source, "source PointSet JSON");
  cmd->add_option("--target", f.target, "target PointSet JSON");
  cmd->add_option("--noise", f.noise, "per-coordinate noise sigma (m)");
  cmd->add_option("--points", f.points, "circle point count");
  cmd->add_option("--radius", f.radius, "circle radius (m)");
  cmd->add_option("--sigma", f.sigma, "affinity sigma");
  cmd->add_option("--epsilon", f.epsilon, "affinity epsilon");
}

void add_solver(CLI::App* cmd, Flags& f) {
  cmd->add_option("--solver", f.solver,
                  "baseline | stein | langevin | oracle_bk | ransac_ref");
  cmd->add_option("--set", f.overrides,
                  "solver field override key=value (repeatable)");
  cmd->add_option("--repetitions", f.repetitions, "repetitions");
  cmd->add_option("--metrics", f.metrics, "subset of mmd ed w1");
  cmd->add_option("--mmd-bandwidth", f.mmd_bandwidth,
                  "MMD kernel bandwidth (default: median heuristic)");
  cmd->add_flag("--no-reference", f.no_reference,
                "skip the RANSAC reference and metrics");
  cmd->add_option("--cache-dir", f.cache_dir, "reference cache ('' disables)");
  cmd->add_option("--ransac-trials", f.ransac_trials, "RANSAC trials");
}

mclip::ExperimentConfig resolve(const Flags& f) {
  mclip::ExperimentConfig c;
  if (!f.config_path.empty()) {
    mclip::Json j;
    try {
      j = mclip::read_json(f.config_path);
    } catch (const mclip::FormatError& e) {
      throw mclip::ConfigError(e.what());
    }
    c = mclip::config_from_json(j, c);
  }
  if (f.seed) c.seed = *f.seed;
  if (f.out_dir) c.out_dir = *f.out_dir;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.scene) c.scene.kind = mclip::scene_kind_from_string(*f.scene);
  if (f.scene_file) {
    c.scene.kind = mclip::SceneKind::from_file;
    c.scene.path = *f.scene_file;
  }
  if (f.source) c.source_path = *f.source;
  if (f.target) c.target_path = *f.target;
  if (f.noise) c.scene.noise_sigma = *f.noise;
  if (f.points) c.scene.n_points = *f.points;
  if (f.radius) c.scene.radius = *f.radius;
  if (f.solver) c.solver = mclip::solver_kind_from_string(*f.solver);
  if (f.sigma) c.affinity.sigma = *f.sigma;
  if (f.epsilon) c.affinity.epsilon = *f.epsilon;
  if (f.repetitions) c.repetitions = *f.repetitions;
  if (f.cache_dir) c.cache_dir = *f.cache_dir;
  if (f.ransac_trials) c.ransac.n_trials = *f.ransac_trials;
  for (const auto& o : f.overrides) mclip::apply_solver_override(c, o);
  if (!f.metrics.empty()) c.metrics = f.metrics;
  if (f.mmd_bandwidth) c.mmd_bandwidth = *f.mmd_bandwidth;
  if (f.no_reference) c.compare_reference = false;
  if (!f.grid_particles.empty()) c.grid.n_particles = f.grid_particles;
  if (!f.grid_step.empty()) c.grid.step_size = f.grid_step;
  if (!f.grid_bandwidth.empty()) c.grid.kernel_bandwidth = f.grid_bandwidth;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-hypothesis data association with particle CLIPPER solvers"};
  app.require_subcommand(1);
  Flags f;

  auto* run = app.add_subcommand("run", "run a solver on a scene and report");
  add_common(run, f);
  add_scene(run, f);
  add_solver(run, f);

  auto* ablate = app.add_subcommand("ablate", "sweep a parameter grid");
  add_common(ablate, f);
  add_scene(ablate, f);
  add_solver(ablate, f);
  ablate->add_option("--grid-particles", f.grid_particles, "n_particles values");
  ablate->add_option("--grid-step", f.grid_step, "step_size values");
  ablate->add_option("--grid-bandwidth", f.grid_bandwidth,
                     "kernel_bandwidth values");

  auto* gen = app.add_subcommand("gen-scene", "write a scene pair and sidecar");
  add_common(gen, f);
  add_scene(gen, f);

  auto* oracle = app.add_subcommand("oracle", "enumerate maximal cliques");
  add_common(oracle, f);
  add_scene(oracle, f);
  std::optional<std::size_t> cap;
  oracle->add_option("--cap", cap, "largest graph to enumerate");

  auto* compare = app.add_subcommand("compare", "metrics between two distributions");
  add_common(compare, f);
  std::string dist_a, dist_b;
  compare->add_option("a", dist_a, "first distribution (.json or .csv)")->required();
  compare->add_option("b", dist_b, "second distribution (.json or .csv)")->required();
  compare->add_option("--metrics", f.metrics, "subset of mmd ed w1");
  compare->add_option("--mmd-bandwidth", f.mmd_bandwidth, "MMD kernel bandwidth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mclip::exit_code::config;
  }

  return mclip::guarded(
      [&]() -> int {
        if (*compare) {
          mclip::ExperimentConfig c = resolve(f);
          return mclip::cmd_compare(dist_a, dist_b, c.metrics, c.mmd_bandwidth,
                                    c.out_dir, std::cout);
        }
        mclip::ExperimentConfig c = resolve(f);
        if (*run) return mclip::cmd_run(c, std::cout);
        if (*ablate) return mclip::cmd_ablate(c, std::cout);
        if (*gen) return mclip::cmd_gen_scene(c, std::cout);
        if (cap) c.oracle_cap = *cap;
        return mclip::cmd_oracle(c, std::cout);
      },
      std::cerr);
}
