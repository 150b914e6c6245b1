#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mclip {

/// Ordered list of 3D points (meters) expressed in a named frame.
struct PointSet {
  std::vector<Eigen::Vector3d> points;
  std::string frame_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Eigen::Vector3d& operator[](std::size_t i) const { return points[i]; }
};

/// Throws std::invalid_argument when any coordinate is NaN or infinite.
void validate(const PointSet& set);

/// Putative correspondence between point `s_index` of the first set and
/// point `t_index` of the second set.
struct Association {
  std::size_t s_index = 0;
  std::size_t t_index = 0;

  friend bool operator==(const Association&, const Association&) = default;
};

/// All |S|·|T| associations, s-major then t.
std::vector<Association> all_pairs_candidates(const PointSet& S,
                                              const PointSet& T);

/// | ‖s_i − s_j‖ − ‖t_i − t_j‖ |, the violation of pairwise distance
/// preservation between two associations.
double consistency_distance(const Association& a_i, const Association& a_j,
                            const PointSet& S, const PointSet& T);

struct AffinityOptions {
  double sigma = 0.4;
  double epsilon = 0.6;
  /// Candidates that share an endpoint are mutually exclusive (entry 0).
  bool exclusive_endpoints = true;
};

/// Geometric-consistency affinity M between candidate associations together
/// with its inconsistency mask C.
///
/// Invariants: M is symmetric with unit diagonal and entries in [0, 1]; for
/// i != j, C(i,j) = 1 exactly when M(i,j) = 0; the diagonal of C is 0.
/// Immutable after construction.
class AffinityMatrix {
 public:
  /// Wraps an explicit matrix (e.g. a binary consistency graph plus the
  /// identity). The diagonal is forced to 1 and the mask derived from zeros.
  /// Throws std::invalid_argument if `m` is not square, not symmetric within
  /// 1e-12, or has entries outside [0, 1].
  static AffinityMatrix from_matrix(Eigen::MatrixXd m,
                                    std::vector<Association> candidates = {});

  const Eigen::MatrixXd& m() const { return m_; }
  const Eigen::MatrixXd& mask() const { return mask_; }
  const std::vector<Association>& candidates() const { return candidates_; }
  double sigma() const { return sigma_; }
  double epsilon() const { return epsilon_; }
  std::size_t size() const { return static_cast<std::size_t>(m_.rows()); }

 private:
  friend AffinityMatrix build_affinity(const PointSet&, const PointSet&,
                                       const std::vector<Association>&,
                                       const AffinityOptions&);
  AffinityMatrix() = default;
  void derive_mask();

  Eigen::MatrixXd m_;
  Eigen::MatrixXd mask_;
  std::vector<Association> candidates_;
  double sigma_ = 0.0;
  double epsilon_ = 0.0;
};

AffinityMatrix build_affinity(const PointSet& S, const PointSet& T,
                              const std::vector<Association>& candidates,
                              const AffinityOptions& options = {});

inline AffinityMatrix build_affinity(const PointSet& S, const PointSet& T,
                                     const std::vector<Association>& candidates,
                                     double sigma, double epsilon) {
  return build_affinity(S, T, candidates,
                        AffinityOptions{sigma, epsilon, true});
}

/// M_d = M − d·C. Holds a reference to its base, which must outlive it.
class PenalizedAffinity {
 public:
  PenalizedAffinity(const AffinityMatrix& base, double d);

  const AffinityMatrix& base() const { return *base_; }
  double d() const { return d_; }
  const Eigen::MatrixXd& m_d() const { return m_d_; }
  std::size_t size() const { return base_->size(); }

 private:
  const AffinityMatrix* base_;
  double d_;
  Eigen::MatrixXd m_d_;
};

/// Throws std::invalid_argument for negative `d`.
PenalizedAffinity penalize(const AffinityMatrix& base, double d);

}  // namespace mclip
