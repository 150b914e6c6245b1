#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mclip/association.hpp"
#include "mclip/metrics.hpp"
#include "mclip/registration.hpp"
#include "mclip/solvers.hpp"

namespace mclip {

using Json = nlohmann::json;

/// A file could not be opened, read or written. The message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Content did not match the expected schema.
class FormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Json to_json(const PointSet& s);
PointSet point_set_from_json(const Json& j);

/// {"quaternion": [w, x, y, z], "translation": [x, y, z]}
Json to_json(const Pose& p);
Pose pose_from_json(const Json& j);

/// [{"quaternion", "translation", "multiplicity"}, ...]
Json to_json(const PoseDistribution& d);
PoseDistribution pose_distribution_from_json(const Json& j);

/// Header qw,qx,qy,qz,tx,ty,tz,mult then one row per sample.
/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

std::string to_csv(const PoseDistribution& d);
PoseDistribution pose_distribution_from_csv(const std::string& text);

/// [{"indices": [...], "omega_hat": k}, ...]
Json to_json(const std::vector<Clique>& cliques);
std::vector<Clique> cliques_from_json(const Json& j);

/// Per-particle cliques, ω̂, objective, iterations and reinit counts. Wall
/// time only when include_timing is set.
Json to_json(const RunReport& r, bool include_timing = true);

Json to_json(const std::vector<MetricRecord>& records);

struct SceneSidecar {
  Pose true_pose;
  std::vector<Pose> symmetry_group;
};

Json to_json(const SceneSidecar& s);
SceneSidecar scene_sidecar_from_json(const Json& j);

/// "<dir>/<stem>.scene.json" next to a scene file "<dir>/<stem>.json".
std::filesystem::path sidecar_path(const std::filesystem::path& scene_file);

// File helpers. Reads throw IoError for unreadable paths and FormatError for
// bad content; writes create parent directories.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

PointSet read_point_set(const std::filesystem::path& path);
void write_point_set(const std::filesystem::path& path, const PointSet& s);
/// Picks JSON or CSV by extension.
PoseDistribution read_pose_distribution(const std::filesystem::path& path);
std::optional<SceneSidecar> read_scene_sidecar_if_present(
    const std::filesystem::path& scene_file);

}  // namespace mclip
