#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "mclip/association.hpp"
#include "mclip/solvers.hpp"

namespace mclip {

/// Rigid transform p ↦ R·p + t.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_yaw(double yaw_rad,
                       const Eigen::Vector3d& t = Eigen::Vector3d::Zero());
  static Pose from_axis_angle(const Eigen::Vector3d& axis, double angle_rad,
                              const Eigen::Vector3d& t = Eigen::Vector3d::Zero());
  /// Normalizes q before conversion.
  static Pose from_quaternion(const Eigen::Quaterniond& q,
                              const Eigen::Vector3d& t);

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  /// (a * b)(p) = a(b(p))
  Pose operator*(const Pose& other) const;
  Pose inverse() const;

  /// Rotation about +z, atan2(R10, R00), in radians.
  double yaw() const;
  Eigen::Quaterniond quaternion() const;
  /// RᵀR = I and det R = 1 within tol.
  bool is_valid(double tol = 1e-9) const;
};

/// ‖R₁ − R₂‖_F
double chordal_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

/// Multiset of poses with positive integer multiplicities.
struct PoseDistribution {
  std::vector<Pose> samples;
  std::vector<std::size_t> multiplicities;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t total() const;
  void add(const Pose& p, std::size_t multiplicity = 1);
  /// Adds `p`, or bumps the multiplicity of the first sample within
  /// `tol` in both translation and chordal rotation distance.
  void merge(const Pose& p, std::size_t multiplicity, double tol);
  /// Throws std::invalid_argument on length mismatch or zero multiplicity.
  void validate() const;
};

class UnderdeterminedFit : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateGeometry : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using PointPair = std::pair<Eigen::Vector3d, Eigen::Vector3d>;

/// argmin over (R, t) of Σ‖R·s + t − t'‖² for pairs (s, t'). Proper rotation
/// (det +1) always. Throws UnderdeterminedFit for fewer than 3 pairs and
/// DegenerateGeometry for coincident or collinear sources.
Pose fit_rigid_transform(std::span<const PointPair> pairs);

/// Pose from the (s, t) coordinates of a clique's associations; nullopt for
/// fewer than 3 members or degenerate geometry.
std::optional<Pose> clique_to_pose(const Clique& c, const AffinityMatrix& m,
                                   const PointSet& S, const PointSet& T);

struct IcpResult {
  Pose pose;
  bool no_overlap = false;
  bool converged = false;
  std::size_t iterations = 0;
  /// Mean nearest-neighbor distance of the correspondences at each iterate.
  std::vector<double> mean_residuals;
};

/// Point-to-point ICP with brute-force nearest neighbors inside corr_dist.
/// Stops when ‖ΔR‖_F + ‖Δt‖ < tol or after max_iters refits.
IcpResult icp_refine(const PointSet& S, const PointSet& T, const Pose& init,
                     std::size_t max_iters, double corr_dist,
                     double tol = 1e-6);

struct RansacOptions {
  std::size_t n_trials = 100000;
  std::size_t max_keep = 5000;
  double inlier_dist = 0.2;
  double min_inlier_frac = 0.5;
  std::size_t icp_max_iters = 50;
  /// <= 0 means "use inlier_dist".
  double icp_corr_dist = 0.0;
  double merge_tol = 1e-6;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct RansacResult {
  PoseDistribution distribution;
  std::size_t accepted = 0;  ///< proposals that passed verification
  std::size_t kept = 0;      ///< first-accepted proposals refined (<= max_keep)
  std::vector<std::string> warnings;
};

/// Congruent-triangle RANSAC: each trial draws 3 non-collinear points of S
/// and 3 of T, requires pairwise distances to agree within inlier_dist,
/// fits a pose and accepts it when at least min_inlier_frac of S lands
/// within inlier_dist of T. The first max_keep accepted proposals (in trial
/// order) are ICP-refined and merged into a distribution.
RansacResult ransac_reference_distribution(const PointSet& S, const PointSet& T,
                                           const RansacOptions& options);

/// Poses of all non-degenerate cliques; identical cliques and poses within
/// merge_tol aggregate into multiplicities.
PoseDistribution cliques_to_distribution(const std::vector<Clique>& cliques,
                                         const AffinityMatrix& m,
                                         const PointSet& S, const PointSet& T,
                                         double merge_tol = 1e-6);

}  // namespace mclip
