#include "mclip/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "mclip/clique_oracle.hpp"
#include "mclip/parallel.hpp"
#include "mclip/random.hpp"

namespace mclip {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kReferenceStream = 0x7265666572656e63ULL;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename T>
T get_as(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

NoiseScale noise_scale_from_string(const std::string& s) {
  if (s == "paper_2sqrt") return NoiseScale::paper_2sqrt;
  if (s == "standard_sqrt2") return NoiseScale::standard_sqrt2;
  throw ConfigError("noise_scale must be paper_2sqrt or standard_sqrt2");
}

std::string to_string(NoiseScale s) {
  return s == NoiseScale::paper_2sqrt ? "paper_2sqrt" : "standard_sqrt2";
}

void apply_solver_field(SolverConfig& cfg, const std::string& key,
                        const Json& v) {
  if (key == "n_particles") {
    cfg.n_particles = get_as<std::size_t>(v, key);
  } else if (key == "max_inner_iters") {
    cfg.max_inner_iters = get_as<std::size_t>(v, key);
  } else if (key == "step_size") {
    cfg.step_size = get_as<double>(v, key);
  } else if (key == "update_step") {
    cfg.update_step = get_as<double>(v, key);
  } else if (key == "adagrad_decay") {
    cfg.adagrad_decay = get_as<double>(v, key);
  } else if (key == "adagrad_epsilon") {
    cfg.adagrad_epsilon = get_as<double>(v, key);
  } else if (key == "kernel_bandwidth") {
    cfg.kernel_bandwidth = get_as<double>(v, key);
  } else if (key == "noise_scale") {
    cfg.noise_scale = noise_scale_from_string(get_as<std::string>(v, key));
  } else if (key == "noise_through_adagrad") {
    cfg.noise_through_adagrad = get_as<bool>(v, key);
  } else if (key == "split_stage_budget") {
    cfg.split_stage_budget = get_as<bool>(v, key);
  } else {
    throw ConfigError("unknown solver_config field '" + key + "'");
  }
}

SceneSpec scene_from_json(const Json& j, SceneSpec s) {
  if (j.is_string()) {
    s.kind = SceneKind::from_file;
    s.path = j.get<std::string>();
    return s;
  }
  if (!j.is_object()) throw ConfigError("scene must be an object or a path");
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") {
      try {
        s.kind = scene_kind_from_string(get_as<std::string>(v, key));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "radius") {
      s.radius = get_as<double>(v, key);
    } else if (key == "n_points") {
      s.n_points = get_as<std::size_t>(v, key);
    } else if (key == "points_per_line") {
      s.points_per_line = get_as<std::size_t>(v, key);
    } else if (key == "spacing") {
      s.spacing = get_as<double>(v, key);
    } else if (key == "line_separation") {
      s.line_separation = get_as<double>(v, key);
    } else if (key == "stations_per_pod") {
      s.stations_per_pod = get_as<std::size_t>(v, key);
    } else if (key == "pods") {
      s.pods = get_as<std::size_t>(v, key);
    } else if (key == "station_pitch") {
      s.station_pitch = get_as<double>(v, key);
    } else if (key == "pod_gap") {
      s.pod_gap = get_as<double>(v, key);
    } else if (key == "cluster_template") {
      s.cluster_template.clear();
      for (const auto& p : v) {
        const auto xyz = get_as<std::vector<double>>(p, key);
        if (xyz.size() != 3) throw ConfigError("cluster_template points need 3 values");
        s.cluster_template.emplace_back(xyz[0], xyz[1], xyz[2]);
      }
    } else if (key == "path") {
      s.path = get_as<std::string>(v, key);
    } else if (key == "noise_sigma") {
      s.noise_sigma = get_as<double>(v, key);
    } else if (key == "applied_pose") {
      try {
        s.applied_pose = pose_from_json(v);
      } catch (const FormatError& e) {
        throw ConfigError(std::string("applied_pose: ") + e.what());
      }
    } else if (key == "seed") {
      s.seed = get_as<std::uint64_t>(v, key);
    } else {
      throw ConfigError("unknown scene field '" + key + "'");
    }
  }
  return s;
}

Json scene_to_json(const SceneSpec& s) {
  Json j = {{"kind", to_string(s.kind)},
            {"noise_sigma", s.noise_sigma},
            {"seed", s.seed}};
  switch (s.kind) {
    case SceneKind::circle:
      j["radius"] = s.radius;
      j["n_points"] = s.n_points;
      break;
    case SceneKind::two_lines:
      j["points_per_line"] = s.points_per_line;
      j["spacing"] = s.spacing;
      j["line_separation"] = s.line_separation;
      break;
    case SceneKind::repeated_clusters: {
      j["stations_per_pod"] = s.stations_per_pod;
      j["pods"] = s.pods;
      j["station_pitch"] = s.station_pitch;
      j["pod_gap"] = s.pod_gap;
      Json t = Json::array();
      for (const auto& p : s.cluster_template) t.push_back({p.x(), p.y(), p.z()});
      j["cluster_template"] = t;
      break;
    }
    case SceneKind::triangle_toy:
      break;
    case SceneKind::from_file:
      j["path"] = s.path;
      break;
  }
  if (s.applied_pose) j["applied_pose"] = to_json(*s.applied_pose);
  return j;
}

RansacOptions ransac_from_json(const Json& j, RansacOptions r) {
  if (!j.is_object()) throw ConfigError("ransac must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "n_trials") {
      r.n_trials = get_as<std::size_t>(v, key);
    } else if (key == "max_keep") {
      r.max_keep = get_as<std::size_t>(v, key);
    } else if (key == "inlier_dist") {
      r.inlier_dist = get_as<double>(v, key);
    } else if (key == "min_inlier_frac") {
      r.min_inlier_frac = get_as<double>(v, key);
    } else if (key == "icp_max_iters") {
      r.icp_max_iters = get_as<std::size_t>(v, key);
    } else if (key == "icp_corr_dist") {
      r.icp_corr_dist = get_as<double>(v, key);
    } else if (key == "merge_tol") {
      r.merge_tol = get_as<double>(v, key);
    } else {
      throw ConfigError("unknown ransac field '" + key + "'");
    }
  }
  return r;
}

Json ransac_to_json(const RansacOptions& r) {
  return {{"n_trials", r.n_trials},         {"max_keep", r.max_keep},
          {"inlier_dist", r.inlier_dist},   {"min_inlier_frac", r.min_inlier_frac},
          {"icp_max_iters", r.icp_max_iters}, {"icp_corr_dist", r.icp_corr_dist},
          {"merge_tol", r.merge_tol}};
}

Json solver_config_to_json(const SolverConfig& c) {
  return {{"n_particles", c.n_particles},
          {"max_inner_iters", c.max_inner_iters},
          {"step_size", c.step_size},
          {"update_step", c.update_step},
          {"adagrad_decay", c.adagrad_decay},
          {"adagrad_epsilon", c.adagrad_epsilon},
          {"kernel_bandwidth", c.kernel_bandwidth},
          {"noise_scale", to_string(c.noise_scale)},
          {"noise_through_adagrad", c.noise_through_adagrad},
          {"split_stage_budget", c.split_stage_budget}};
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string reference_key(const ExperimentConfig& c, const Problem& p) {
  Json k = {{"source", hex(hash_points(p.scene.S))},
            {"target", hex(hash_points(p.scene.T))},
            {"ransac", ransac_to_json(c.ransac)},
            {"seed", derive_seed(c.seed, kReferenceStream)}};
  return hex(fnv1a(k.dump()));
}

struct Stat {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

Stat mean_std(const std::vector<double>& v) {
  Stat s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::string scaled(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v * 100.0;
  return os.str();
}

void print_metrics(const std::vector<MetricRecord>& records, std::ostream& out) {
  out << "metric     component  value (x1e2)\n";
  for (const auto& r : records) {
    out << std::left << std::setw(11) << r.metric << std::setw(11)
        << r.component << scaled(r.value) << "\n";
  }
}

std::vector<Clique> distinct(std::vector<Clique> cliques) {
  std::sort(cliques.begin(), cliques.end());
  cliques.erase(std::unique(cliques.begin(), cliques.end()), cliques.end());
  return cliques;
}

void write_distribution(const fs::path& dir, const std::string& stem,
                        const PoseDistribution& d) {
  write_json(dir / (stem + ".json"), to_json(d));
  write_text(dir / (stem + ".csv"), to_csv(d));
}

Json histogram_meta(const ExperimentConfig& c) {
  return {{"yaw", {{"unit", "deg"}, {"bin_width", c.yaw_bin_deg},
                   {"lo", -180.0}, {"hi", 180.0}}},
          {"x", {{"unit", "m"}, {"bin_width", c.axis_bin_m}}},
          {"y", {{"unit", "m"}, {"bin_width", c.axis_bin_m}}},
          {"z", {{"unit", "m"}, {"bin_width", c.axis_bin_m}}},
          {"weighting", "multiplicity"},
          {"edges", "declared per row in hist_<axis>.csv"}};
}

}  // namespace

std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::baseline: return "baseline";
    case SolverKind::stein: return "stein";
    case SolverKind::langevin: return "langevin";
    case SolverKind::oracle_bk: return "oracle_bk";
    case SolverKind::ransac_ref: return "ransac_ref";
  }
  return "unknown";
}

SolverKind solver_kind_from_string(const std::string& s) {
  for (auto k : {SolverKind::baseline, SolverKind::stein, SolverKind::langevin,
                 SolverKind::oracle_bk, SolverKind::ransac_ref}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown solver '" + s + "'");
}

SolverConfig ExperimentConfig::solver_config() const {
  SolverConfig cfg = solver == SolverKind::stein      ? SolverConfig::stein()
                     : solver == SolverKind::baseline ? SolverConfig::baseline()
                                                      : SolverConfig::langevin();
  for (const auto& [key, v] : solver_overrides.items()) {
    apply_solver_field(cfg, key, v);
  }
  cfg.seed = seed;
  cfg.jobs = jobs;
  return cfg;
}

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(affinity.sigma > 0.0) || !(affinity.epsilon > 0.0)) {
    throw ConfigError("sigma and epsilon must be > 0");
  }
  if (mmd_bandwidth && !(*mmd_bandwidth > 0.0)) {
    throw ConfigError("mmd_bandwidth must be > 0");
  }
  for (const auto& m : metrics) {
    if (m != "mmd" && m != "ed" && m != "w1") {
      throw ConfigError("unknown metric '" + m + "'");
    }
  }
  if (!(yaw_bin_deg > 0.0) || !(axis_bin_m > 0.0)) {
    throw ConfigError("histogram bin widths must be > 0");
  }
  if (source_path.empty() != target_path.empty()) {
    throw ConfigError("source and target must be given together");
  }
  for (const auto& p : {source_path, target_path}) {
    if (!p.empty() && !fs::exists(p)) {
      throw IoError("scene file '" + p + "' does not exist");
    }
  }
  if (source_path.empty()) {
    try {
      scene.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("scene: ") + e.what());
    }
    if (scene.kind == SceneKind::from_file && !fs::exists(scene.path)) {
      throw IoError("scene file '" + scene.path + "' does not exist");
    }
  }
  try {
    solver_config().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("solver_config: ") + e.what());
  }
  for (auto n : grid.n_particles) {
    if (n == 0) throw ConfigError("grid n_particles must be >= 1");
  }
}

ExperimentConfig config_from_json(const Json& j, ExperimentConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "scene") {
      c.scene = scene_from_json(v, c.scene);
    } else if (key == "source") {
      c.source_path = get_as<std::string>(v, key);
    } else if (key == "target") {
      c.target_path = get_as<std::string>(v, key);
    } else if (key == "solver") {
      c.solver = solver_kind_from_string(get_as<std::string>(v, key));
    } else if (key == "solver_config") {
      if (!v.is_object()) throw ConfigError("solver_config must be an object");
      for (const auto& [k2, v2] : v.items()) c.solver_overrides[k2] = v2;
    } else if (key == "sigma") {
      c.affinity.sigma = get_as<double>(v, key);
    } else if (key == "epsilon") {
      c.affinity.epsilon = get_as<double>(v, key);
    } else if (key == "exclusive_endpoints") {
      c.affinity.exclusive_endpoints = get_as<bool>(v, key);
    } else if (key == "metrics") {
      c.metrics = get_as<std::vector<std::string>>(v, key);
    } else if (key == "mmd_bandwidth") {
      if (v.is_null()) {
        c.mmd_bandwidth.reset();
      } else {
        c.mmd_bandwidth = get_as<double>(v, key);
      }
    } else if (key == "compare_reference") {
      c.compare_reference = get_as<bool>(v, key);
    } else if (key == "ransac") {
      c.ransac = ransac_from_json(v, c.ransac);
    } else if (key == "cache_dir") {
      c.cache_dir = get_as<std::string>(v, key);
    } else if (key == "repetitions") {
      c.repetitions = get_as<std::size_t>(v, key);
    } else if (key == "oracle_cap") {
      c.oracle_cap = get_as<std::size_t>(v, key);
    } else if (key == "min_clique_size") {
      c.min_clique_size = get_as<std::size_t>(v, key);
    } else if (key == "yaw_bin_deg") {
      c.yaw_bin_deg = get_as<double>(v, key);
    } else if (key == "axis_bin_m") {
      c.axis_bin_m = get_as<double>(v, key);
    } else if (key == "grid") {
      if (!v.is_object()) throw ConfigError("grid must be an object");
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "n_particles") {
          c.grid.n_particles = get_as<std::vector<std::size_t>>(v2, k2);
        } else if (k2 == "step_size") {
          c.grid.step_size = get_as<std::vector<double>>(v2, k2);
        } else if (k2 == "kernel_bandwidth") {
          c.grid.kernel_bandwidth = get_as<std::vector<double>>(v2, k2);
        } else {
          throw ConfigError("unknown grid field '" + k2 + "'");
        }
      }
    } else if (key == "out_dir") {
      c.out_dir = get_as<std::string>(v, key);
    } else if (key == "seed") {
      c.seed = get_as<std::uint64_t>(v, key);
    } else if (key == "jobs") {
      c.jobs = get_as<int>(v, key);
    } else {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }
  return c;
}

// out_dir, cache_dir and jobs are left out: none of them changes results.
Json to_json(const ExperimentConfig& c) {
  Json j = {{"solver", to_string(c.solver)},
            {"solver_config", solver_config_to_json(c.solver_config())},
            {"sigma", c.affinity.sigma},
            {"epsilon", c.affinity.epsilon},
            {"exclusive_endpoints", c.affinity.exclusive_endpoints},
            {"metrics", c.metrics},
            {"compare_reference", c.compare_reference},
            {"ransac", ransac_to_json(c.ransac)},
            {"repetitions", c.repetitions},
            {"oracle_cap", c.oracle_cap},
            {"min_clique_size", c.min_clique_size},
            {"yaw_bin_deg", c.yaw_bin_deg},
            {"axis_bin_m", c.axis_bin_m},
            {"seed", c.seed}};
  if (c.source_path.empty()) {
    j["scene"] = scene_to_json(c.scene);
  } else {
    j["source"] = c.source_path;
    j["target"] = c.target_path;
  }
  j["mmd_bandwidth"] = c.mmd_bandwidth ? Json(*c.mmd_bandwidth) : Json(nullptr);
  if (!c.grid.n_particles.empty() || !c.grid.step_size.empty() ||
      !c.grid.kernel_bandwidth.empty()) {
    j["grid"] = {{"n_particles", c.grid.n_particles},
                 {"step_size", c.grid.step_size},
                 {"kernel_bandwidth", c.grid.kernel_bandwidth}};
  }
  return j;
}

void apply_solver_override(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("solver override must look like key=value, got '" +
                      assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  SolverConfig probe;
  apply_solver_field(probe, key, value);
  c.solver_overrides[key] = value;
}

Problem build_problem(const ExperimentConfig& c) {
  Scene scene;
  if (!c.source_path.empty()) {
    scene.S = read_point_set(c.source_path);
    scene.T = read_point_set(c.target_path);
    scene.symmetry_group = {Pose::identity()};
    if (auto side = read_scene_sidecar_if_present(c.target_path)) {
      scene.true_pose = side->true_pose;
      scene.symmetry_group = side->symmetry_group;
    }
  } else {
    SceneSpec spec = c.scene;
    spec.seed = derive_seed(c.seed, spec.seed);
    scene = generate(spec);
  }
  if (scene.S.empty() || scene.T.empty()) {
    throw ConfigError("scene point sets must be nonempty");
  }
  AffinityMatrix m = build_affinity(
      scene.S, scene.T, all_pairs_candidates(scene.S, scene.T), c.affinity);
  return Problem{std::move(scene), std::move(m)};
}

Trial run_trial(const ExperimentConfig& c, const Problem& p,
                const SolverConfig& solver_cfg) {
  Trial t;
  const auto t0 = Clock::now();
  try {
    switch (c.solver) {
      case SolverKind::baseline:
      case SolverKind::stein:
      case SolverKind::langevin: {
        SolverResult r =
            c.solver == SolverKind::stein      ? run_stein_clipper(p.affinity, solver_cfg)
            : c.solver == SolverKind::baseline ? run_baseline_clipper(p.affinity, solver_cfg)
                                               : run_langevin_clipper(p.affinity, solver_cfg);
        t.cliques = std::move(r.cliques);
        t.warnings = r.report.warnings;
        t.report = std::move(r.report);
        break;
      }
      case SolverKind::oracle_bk: {
        for (auto& cl : enumerate_maximal_cliques(binarize(p.affinity),
                                                  c.oracle_cap)) {
          if (cl.indices.size() >= c.min_clique_size) t.cliques.push_back(std::move(cl));
        }
        break;
      }
      case SolverKind::ransac_ref: {
        RansacOptions opt = c.ransac;
        opt.seed = solver_cfg.seed;
        opt.jobs = solver_cfg.jobs;
        RansacResult r =
            ransac_reference_distribution(p.scene.S, p.scene.T, opt);
        t.distribution = std::move(r.distribution);
        t.warnings = std::move(r.warnings);
        break;
      }
    }
    if (c.solver != SolverKind::ransac_ref) {
      t.distribution = cliques_to_distribution(
          t.cliques, p.affinity, p.scene.S, p.scene.T, c.ransac.merge_tol);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw SolverFailure(to_string(c.solver) + " failed: " + e.what());
  }
  t.wall_time_s = seconds_since(t0);
  return t;
}

PoseDistribution reference_distribution(const ExperimentConfig& c,
                                        const Problem& p) {
  fs::path cache_file;
  if (!c.cache_dir.empty()) {
    cache_file = fs::path(c.cache_dir) / ("ref_" + reference_key(c, p) + ".json");
    if (fs::exists(cache_file)) {
      try {
        return read_pose_distribution(cache_file);
      } catch (const std::exception&) {
        // unreadable cache entry: regenerate below
      }
    }
  }
  RansacOptions opt = c.ransac;
  opt.seed = derive_seed(c.seed, kReferenceStream);
  opt.jobs = c.jobs;
  PoseDistribution ref =
      ransac_reference_distribution(p.scene.S, p.scene.T, opt).distribution;
  if (!cache_file.empty() && !ref.empty()) {
    const fs::path tmp = cache_file.string() + ".tmp";
    write_json(tmp, to_json(ref));
    std::error_code ec;
    fs::rename(tmp, cache_file, ec);
  }
  return ref;
}

std::vector<Histogram> pose_histograms(const PoseDistribution& d,
                                       double axis_bin_m, double yaw_bin_deg) {
  std::vector<Histogram> out;
  const auto fill = [&d](Histogram& h, auto value) {
    const double lo = h.edges.front();
    const std::size_t nb = h.counts.size();
    const double w = h.edges[1] - h.edges[0];
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double v = value(d.samples[i]);
      auto b = static_cast<long>(std::floor((v - lo) / w));
      b = std::clamp<long>(b, 0, static_cast<long>(nb) - 1);
      h.counts[static_cast<std::size_t>(b)] += d.multiplicities[i];
    }
  };
  for (int axis = 0; axis < 3; ++axis) {
    Histogram h;
    h.axis = std::string(1, "xyz"[axis]);
    double vmin = 0.0, vmax = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double v = d.samples[i].translation(axis);
      vmin = i == 0 ? v : std::min(vmin, v);
      vmax = i == 0 ? v : std::max(vmax, v);
    }
    const long lo = static_cast<long>(std::floor(vmin / axis_bin_m));
    long hi = static_cast<long>(std::ceil(vmax / axis_bin_m));
    if (hi <= lo) hi = lo + 1;
    for (long k = lo; k <= hi; ++k) {
      h.edges.push_back(static_cast<double>(k) * axis_bin_m);
    }
    h.counts.assign(h.edges.size() - 1, 0);
    fill(h, [axis](const Pose& p) { return p.translation(axis); });
    out.push_back(std::move(h));
  }
  Histogram yaw;
  yaw.axis = "yaw";
  const auto nb = static_cast<std::size_t>(std::ceil(360.0 / yaw_bin_deg - 1e-9));
  for (std::size_t k = 0; k <= nb; ++k) {
    yaw.edges.push_back(
        std::min(180.0, -180.0 + static_cast<double>(k) * yaw_bin_deg));
  }
  yaw.counts.assign(nb, 0);
  fill(yaw, [](const Pose& p) { return p.yaw() * 180.0 / std::numbers::pi; });
  out.push_back(std::move(yaw));
  return out;
}

std::string to_csv(const Histogram& h) {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    os << format_number(h.edges[i]) << ',' << format_number(h.edges[i + 1])
       << ',' << h.counts[i] << '\n';
  }
  return os.str();
}

int cmd_run(const ExperimentConfig& c, std::ostream& out) {
  c.validate();
  const fs::path dir(c.out_dir);
  const Problem p = build_problem(c);
  const SolverConfig base = c.solver_config();

  const std::size_t reps = c.repetitions;
  std::vector<Trial> trials(reps);
  const int inner_jobs = reps > 1 ? 1 : c.jobs;
  parallel_for(reps, reps > 1 ? c.jobs : 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      SolverConfig cfg = base;
      cfg.seed = derive_seed(c.seed, r);
      cfg.jobs = inner_jobs;
      trials[r] = run_trial(c, p, cfg);
    }
  });

  Json warnings = Json::array();
  std::optional<PoseDistribution> reference;
  double reference_time = 0.0;
  if (c.compare_reference && c.solver != SolverKind::ransac_ref) {
    const auto t0 = Clock::now();
    reference = reference_distribution(c, p);
    reference_time = seconds_since(t0);
    if (reference->empty()) {
      warnings.push_back("reference distribution is empty; metrics skipped");
      reference.reset();
    }
  }

  Json rep_json = Json::array();
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  std::vector<std::pair<std::string, std::string>> order;
  std::size_t nonempty = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    const Trial& t = trials[r];
    Json jr = {{"index", r},
               {"seed", derive_seed(c.seed, r)},
               {"distinct_cliques", distinct(t.cliques).size()},
               {"distribution_size", t.distribution.size()},
               {"distribution_total", t.distribution.total()},
               {"warnings", t.warnings}};
    if (t.report) jr["run"] = to_json(*t.report, false);
    if (!t.distribution.empty()) {
      ++nonempty;
      if (reference) {
        const auto recs = compare_distributions(t.distribution, *reference,
                                                c.metrics, c.mmd_bandwidth);
        for (const auto& m : recs) {
          const auto key = std::make_pair(m.metric, m.component);
          if (!values.contains(key)) order.push_back(key);
          values[key].push_back(m.value);
        }
        jr["metrics"] = to_json(recs);
      }
    }
    rep_json.push_back(std::move(jr));
  }

  Json summary = Json::array();
  for (const auto& key : order) {
    const Stat s = mean_std(values[key]);
    summary.push_back({{"metric", key.first},
                       {"component", key.second},
                       {"mean", s.mean},
                       {"std", s.std},
                       {"n", s.n}});
  }

  Json report = {
      {"command", "run"},
      {"config", to_json(c)},
      {"scene",
       {{"source_size", p.scene.S.size()},
        {"target_size", p.scene.T.size()},
        {"associations", p.affinity.size()},
        {"true_pose", to_json(p.scene.true_pose)}}},
      {"reference",
       reference ? Json{{"size", reference->size()},
                        {"total", reference->total()},
                        {"cache_key", reference_key(c, p)}}
                 : Json(nullptr)},
      {"repetitions", rep_json},
      {"metrics_summary", summary},
      {"metric_scale_note", "values are raw; human-readable output is x1e2"},
      {"histograms", histogram_meta(c)},
      {"warnings", warnings}};
  write_json(dir / "report.json", report);

  Json timing = {{"reference_s", reference_time}, {"repetitions_s", Json::array()}};
  for (const auto& t : trials) timing["repetitions_s"].push_back(t.wall_time_s);
  write_json(dir / "timing.json", timing);

  const Trial& first = trials.front();
  write_json(dir / "cliques.json", to_json(distinct(first.cliques)));
  if (reference) write_distribution(dir, "reference", *reference);

  out << to_string(c.solver) << " on " << p.affinity.size()
      << " associations, " << reps << " repetition(s)\n";
  for (const auto& w : warnings) out << "warning: " << w.get<std::string>() << "\n";
  if (nonempty == 0) {
    throw EmptyDistribution("every repetition produced an empty pose distribution");
  }
  if (!first.distribution.empty()) {
    write_distribution(dir, "distribution", first.distribution);
    for (const auto& h :
         pose_histograms(first.distribution, c.axis_bin_m, c.yaw_bin_deg)) {
      write_text(dir / ("hist_" + h.axis + ".csv"), to_csv(h));
    }
  }
  out << "repetition 0: " << first.distribution.size() << " distinct poses, "
      << first.distribution.total() << " total multiplicity\n";
  if (!summary.empty()) {
    out << "metric     component  mean +- std (x1e2)\n";
    for (const auto& s : summary) {
      out << std::left << std::setw(11) << s["metric"].get<std::string>()
          << std::setw(11) << s["component"].get<std::string>()
          << scaled(s["mean"].get<double>()) << " +- "
          << scaled(s["std"].get<double>()) << "\n";
    }
  }
  out << "wrote " << (dir / "report.json").string() << "\n";
  return exit_code::ok;
}

int cmd_compare(const fs::path& a, const fs::path& b,
                const std::vector<std::string>& metrics,
                std::optional<double> mmd_bandwidth, const fs::path& out_dir,
                std::ostream& out) {
  const PoseDistribution da = read_pose_distribution(a);
  const PoseDistribution db = read_pose_distribution(b);
  if (da.empty() || db.empty()) {
    throw EmptyDistribution("cannot compare an empty pose distribution");
  }
  std::vector<MetricRecord> recs;
  try {
    recs = compare_distributions(da, db, metrics, mmd_bandwidth);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  print_metrics(recs, out);
  write_json(out_dir / "metrics.json", to_json(recs));
  return exit_code::ok;
}

int cmd_ablate(const ExperimentConfig& c, std::ostream& out) {
  c.validate();
  const fs::path dir(c.out_dir);
  const Problem p = build_problem(c);
  const SolverConfig base = c.solver_config();

  struct Cell {
    std::size_t n_particles;
    double step_size;
    double kernel_bandwidth;
  };
  const auto or_default = [](auto grid, auto value) {
    return grid.empty() ? decltype(grid){value} : grid;
  };
  std::vector<Cell> cells;
  for (auto np : or_default(c.grid.n_particles, base.n_particles)) {
    for (auto st : or_default(c.grid.step_size, base.step_size)) {
      for (auto kb : or_default(c.grid.kernel_bandwidth, base.kernel_bandwidth)) {
        cells.push_back({np, st, kb});
      }
    }
  }

  std::optional<PoseDistribution> reference;
  if (c.compare_reference && c.solver != SolverKind::ransac_ref) {
    reference = reference_distribution(c, p);
    if (reference->empty()) reference.reset();
  }

  struct Row {
    std::string status = "ok";
    std::size_t poses = 0;
    std::vector<MetricRecord> metrics;
    double runtime = 0.0;
  };
  const std::size_t reps = c.repetitions;
  std::vector<Row> rows(cells.size() * reps);
  parallel_for(rows.size(), c.jobs, [&](std::size_t b, std::size_t e) {
    for (std::size_t job = b; job < e; ++job) {
      const Cell& cell = cells[job / reps];
      const std::size_t rep = job % reps;
      Row& row = rows[job];
      SolverConfig cfg = base;
      cfg.n_particles = cell.n_particles;
      cfg.step_size = cell.step_size;
      cfg.kernel_bandwidth = cell.kernel_bandwidth;
      cfg.seed = derive_seed(c.seed, rep);
      cfg.jobs = 1;
      const auto t0 = Clock::now();
      try {
        cfg.validate();
        Trial t = run_trial(c, p, cfg);
        row.poses = t.distribution.size();
        if (t.distribution.empty()) {
          row.status = "failed:empty_distribution";
        } else if (reference) {
          row.metrics = compare_distributions(t.distribution, *reference,
                                              c.metrics, c.mmd_bandwidth);
        }
      } catch (const std::exception& ex) {
        row.status = std::string("failed:") + ex.what();
        std::replace(row.status.begin(), row.status.end(), ',', ';');
        std::replace(row.status.begin(), row.status.end(), '\n', ' ');
      }
      row.runtime = seconds_since(t0);
    }
  });

  std::vector<std::string> columns;
  for (const auto& m : c.metrics) {
    columns.push_back(m + "_trans");
    columns.push_back(m + "_rot");
  }
  std::ostringstream csv;
  csv << "cell,rep,seed,n_particles,step_size,kernel_bandwidth,status,n_poses";
  for (const auto& col : columns) csv << ',' << col;
  csv << ",runtime_s\n";
  Json jrows = Json::array();
  std::size_t failed = 0;
  for (std::size_t job = 0; job < rows.size(); ++job) {
    const Cell& cell = cells[job / reps];
    const Row& row = rows[job];
    if (row.status != "ok") ++failed;
    csv << job / reps << ',' << job % reps << ','
        << derive_seed(c.seed, job % reps) << ',' << cell.n_particles << ','
        << format_number(cell.step_size) << ','
        << format_number(cell.kernel_bandwidth) << ',' << row.status
        << ',' << row.poses;
    for (std::size_t k = 0; k < columns.size(); ++k) {
      csv << ',';
      if (k < row.metrics.size()) csv << format_number(row.metrics[k].value);
    }
    csv << ',' << format_number(row.runtime) << '\n';
    jrows.push_back({{"cell", job / reps},
                     {"rep", job % reps},
                     {"n_particles", cell.n_particles},
                     {"step_size", cell.step_size},
                     {"kernel_bandwidth", cell.kernel_bandwidth},
                     {"status", row.status},
                     {"n_poses", row.poses},
                     {"metrics", to_json(row.metrics)}});
  }
  write_text(dir / "ablation.csv", csv.str());
  write_json(dir / "report.json", {{"command", "ablate"},
                                   {"config", to_json(c)},
                                   {"cells", cells.size()},
                                   {"rows", jrows}});
  out << cells.size() << " grid cell(s) x " << reps << " repetition(s): "
      << rows.size() - failed << " ok, " << failed << " failed\n";
  out << "wrote " << (dir / "ablation.csv").string() << "\n";
  return exit_code::ok;
}

int cmd_gen_scene(const ExperimentConfig& c, std::ostream& out) {
  c.validate();
  const fs::path dir(c.out_dir);
  const Problem p = build_problem(c);
  write_point_set(dir / "source.json", p.scene.S);
  write_point_set(dir / "target.json", p.scene.T);
  write_json(sidecar_path(dir / "target.json"),
             to_json(SceneSidecar{p.scene.true_pose, p.scene.symmetry_group}));
  out << "scene with " << p.scene.S.size() << " points and "
      << p.scene.symmetry_group.size() << " symmetry maps written to "
      << dir.string() << "\n";
  return exit_code::ok;
}

int cmd_oracle(const ExperimentConfig& c, std::ostream& out) {
  c.validate();
  const fs::path dir(c.out_dir);
  const Problem p = build_problem(c);
  std::vector<Clique> cliques;
  try {
    cliques = enumerate_maximal_cliques(binarize(p.affinity), c.oracle_cap);
  } catch (const CliqueCapExceeded& e) {
    throw SolverFailure(e.what());
  }
  write_json(dir / "cliques.json", to_json(cliques));
  std::size_t largest = 0;
  for (const auto& cl : cliques) largest = std::max(largest, cl.indices.size());
  out << cliques.size() << " maximal cliques (largest " << largest
      << ") written to " << (dir / "cliques.json").string() << "\n";
  return exit_code::ok;
}

int guarded(const std::function<int()>& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::config;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return exit_code::io;
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << "\n";
    return exit_code::io;
  } catch (const SolverFailure& e) {
    err << "solver error: " << e.what() << "\n";
    return exit_code::solver;
  } catch (const EmptyDistribution& e) {
    err << "empty distribution: " << e.what() << "\n";
    return exit_code::empty_distribution;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return exit_code::config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::failure;
  }
}

}  // namespace mclip
