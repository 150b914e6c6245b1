#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mclip/association.hpp"
#include "mclip/io.hpp"
#include "mclip/metrics.hpp"
#include "mclip/registration.hpp"
#include "mclip/scenes.hpp"
#include "mclip/solvers.hpp"

namespace mclip {

enum class SolverKind { baseline, stein, langevin, oracle_bk, ransac_ref };

std::string to_string(SolverKind k);
SolverKind solver_kind_from_string(const std::string& s);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int io = 3;
inline constexpr int solver = 4;
inline constexpr int empty_distribution = 5;
}  // namespace exit_code

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyDistribution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AblationGrid {
  std::vector<std::size_t> n_particles;
  std::vector<double> step_size;
  std::vector<double> kernel_bandwidth;
};

struct ExperimentConfig {
  SceneSpec scene;
  /// When both are set they replace the generated scene; the target's
  /// sidecar (if any) supplies the true pose.
  std::string source_path;
  std::string target_path;

  SolverKind solver = SolverKind::langevin;
  /// Field overrides applied on top of the chosen solver's defaults.
  Json solver_overrides = Json::object();
  AffinityOptions affinity;
  std::vector<std::string> metrics{"mmd", "ed", "w1"};
  std::optional<double> mmd_bandwidth;
  bool compare_reference = true;
  RansacOptions ransac;
  std::string cache_dir = ".mclip_cache";  ///< empty disables caching

  std::size_t repetitions = 10;
  std::size_t oracle_cap = 64;
  std::size_t min_clique_size = 3;
  double yaw_bin_deg = 5.0;
  double axis_bin_m = 0.1;
  AblationGrid grid;

  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;

  SolverConfig solver_config() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Reads config fields from a JSON object; unknown keys throw ConfigError.
ExperimentConfig config_from_json(const Json& j,
                                  ExperimentConfig base = ExperimentConfig{});
Json to_json(const ExperimentConfig& c);
/// Applies one "key=value" SolverConfig override.
void apply_solver_override(ExperimentConfig& c, const std::string& assignment);

struct Problem {
  Scene scene;
  AffinityMatrix affinity;
};

Problem build_problem(const ExperimentConfig& c);

/// Outcome of one solver invocation turned into poses.
struct Trial {
  std::vector<Clique> cliques;
  PoseDistribution distribution;
  std::optional<RunReport> report;
  std::vector<std::string> warnings;
  double wall_time_s = 0.0;
};

/// Runs the configured solver once with the given seed.
Trial run_trial(const ExperimentConfig& c, const Problem& p,
                const SolverConfig& solver_cfg);

/// RANSAC reference for the problem, loaded from or stored to the cache.
PoseDistribution reference_distribution(const ExperimentConfig& c,
                                        const Problem& p);

struct Histogram {
  std::string axis;
  std::vector<double> edges;  ///< size = counts.size() + 1
  std::vector<std::size_t> counts;
};

/// Multiplicity-weighted histograms of x, y, z (bin width axis_bin_m, edges
/// snapped to multiples of it) and yaw in degrees over [-180, 180].
std::vector<Histogram> pose_histograms(const PoseDistribution& d,
                                       double axis_bin_m, double yaw_bin_deg);
std::string to_csv(const Histogram& h);

int cmd_run(const ExperimentConfig& c, std::ostream& out);
int cmd_compare(const std::filesystem::path& a, const std::filesystem::path& b,
                const std::vector<std::string>& metrics,
                std::optional<double> mmd_bandwidth,
                const std::filesystem::path& out_dir, std::ostream& out);
int cmd_ablate(const ExperimentConfig& c, std::ostream& out);
int cmd_gen_scene(const ExperimentConfig& c, std::ostream& out);
int cmd_oracle(const ExperimentConfig& c, std::ostream& out);

/// Runs fn, mapping exceptions to exit codes and printing diagnostics to err.
int guarded(const std::function<int()>& fn, std::ostream& err);

}  // namespace mclip
