#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mclip/association.hpp"
#include "mclip/registration.hpp"

namespace mclip {

enum class SceneKind { circle, two_lines, repeated_clusters, triangle_toy, from_file };

std::string to_string(SceneKind k);
/// Throws std::invalid_argument for unknown names.
SceneKind scene_kind_from_string(const std::string& s);

struct SceneSpec {
  SceneKind kind = SceneKind::circle;

  // circle
  double radius = 5.0;
  std::size_t n_points = 8;

  // two_lines: points at x = k·spacing on y = 0 and y = line_separation
  std::size_t points_per_line = 6;
  double spacing = 2.0;
  double line_separation = 3.3;

  // repeated_clusters: template copies placed in U-shaped pods
  std::vector<Eigen::Vector3d> cluster_template;  ///< empty = built-in 4-point template
  std::size_t stations_per_pod = 6;
  std::size_t pods = 2;
  double station_pitch = 2.5;
  double pod_gap = 4.0;

  // from_file
  std::string path;

  double noise_sigma = 0.0;
  /// T = applied_pose ∘ S. nullopt picks the kind's default (identity,
  /// except for triangle_toy).
  std::optional<Pose> applied_pose;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct Scene {
  PointSet S;
  PointSet T;
  Pose true_pose;
  /// Rigid maps G with G∘S overlapping S on at least 3 non-collinear
  /// points. Full self-maps first, partial-overlap maps after.
  std::vector<Pose> symmetry_group;
};

Scene generate(const SceneSpec& spec);

/// Ordered sub-list of points; frame_id preserved. Throws std::out_of_range.
PointSet subset(const PointSet& s, const std::vector<std::size_t>& indices);

/// Index pairs (i, j) with ‖G·S_i − S_j‖ <= tol.
std::vector<std::pair<std::size_t, std::size_t>> matched_indices(
    const PointSet& s, const Pose& g, double tol = 1e-9);

/// Stable 64-bit FNV-1a hash of the point coordinates.
std::uint64_t hash_points(const PointSet& s);

}  // namespace mclip
