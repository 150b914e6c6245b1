#include "mclip/registration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/SVD>

#include "mclip/parallel.hpp"
#include "mclip/random.hpp"

namespace mclip {

Pose Pose::from_yaw(double yaw_rad, const Eigen::Vector3d& t) {
  return from_axis_angle(Eigen::Vector3d::UnitZ(), yaw_rad, t);
}

Pose Pose::from_axis_angle(const Eigen::Vector3d& axis, double angle_rad,
                           const Eigen::Vector3d& t) {
  Pose p;
  p.rotation = Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
  p.translation = t;
  return p;
}

Pose Pose::from_quaternion(const Eigen::Quaterniond& q,
                           const Eigen::Vector3d& t) {
  Pose p;
  p.rotation = q.normalized().toRotationMatrix();
  p.translation = t;
  return p;
}

Pose Pose::operator*(const Pose& other) const {
  Pose p;
  p.rotation = rotation * other.rotation;
  p.translation = rotation * other.translation + translation;
  return p;
}

Pose Pose::inverse() const {
  Pose p;
  p.rotation = rotation.transpose();
  p.translation = -(p.rotation * translation);
  return p;
}

double Pose::yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

Eigen::Quaterniond Pose::quaternion() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  // Canonical hemisphere so serialization is deterministic.
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

bool Pose::is_valid(double tol) const {
  const double ortho =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  return rotation.allFinite() && translation.allFinite() && ortho <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol;
}

double chordal_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return (a - b).norm();
}

std::size_t PoseDistribution::total() const {
  std::size_t sum = 0;
  for (auto m : multiplicities) sum += m;
  return sum;
}

void PoseDistribution::add(const Pose& p, std::size_t multiplicity) {
  if (multiplicity == 0) throw std::invalid_argument("multiplicity must be >= 1");
  samples.push_back(p);
  multiplicities.push_back(multiplicity);
}

void PoseDistribution::merge(const Pose& p, std::size_t multiplicity,
                             double tol) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if ((samples[i].translation - p.translation).norm() <= tol &&
        chordal_distance(samples[i].rotation, p.rotation) <= tol) {
      multiplicities[i] += multiplicity;
      return;
    }
  }
  add(p, multiplicity);
}

void PoseDistribution::validate() const {
  if (samples.size() != multiplicities.size()) {
    throw std::invalid_argument("samples and multiplicities differ in length");
  }
  for (auto m : multiplicities) {
    if (m == 0) throw std::invalid_argument("multiplicity must be >= 1");
  }
}

Pose fit_rigid_transform(std::span<const PointPair> pairs) {
  if (pairs.size() < 3) {
    throw UnderdeterminedFit("rigid fit needs at least 3 point pairs");
  }
  const auto k = static_cast<Eigen::Index>(pairs.size());
  Eigen::Matrix3Xd src(3, k);
  Eigen::Matrix3Xd dst(3, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    src.col(i) = pairs[static_cast<std::size_t>(i)].first;
    dst.col(i) = pairs[static_cast<std::size_t>(i)].second;
  }
  if (!src.allFinite() || !dst.allFinite()) {
    throw std::invalid_argument("non-finite coordinate in rigid fit");
  }

  const Eigen::Matrix3Xd centered = src.colwise() - src.rowwise().mean();
  const Eigen::Vector3d sv =
      Eigen::JacobiSVD<Eigen::Matrix3Xd>(centered).singularValues();
  const double scale = std::max(1.0, src.cwiseAbs().maxCoeff());
  if (sv(0) <= 1e-12 * scale || sv(1) <= 1e-9 * sv(0)) {
    throw DegenerateGeometry("source points are coincident or collinear");
  }

  const Eigen::Matrix4d h = Eigen::umeyama(src, dst, false);
  Pose p;
  p.rotation = h.topLeftCorner<3, 3>();
  p.translation = h.topRightCorner<3, 1>();
  return p;
}

std::optional<Pose> clique_to_pose(const Clique& c, const AffinityMatrix& m,
                                   const PointSet& S, const PointSet& T) {
  if (c.indices.size() < 3) return std::nullopt;
  const auto& cand = m.candidates();
  std::vector<PointPair> pairs;
  pairs.reserve(c.indices.size());
  for (auto idx : c.indices) {
    if (idx >= cand.size()) throw std::out_of_range("clique index out of range");
    pairs.emplace_back(S[cand[idx].s_index], T[cand[idx].t_index]);
  }
  try {
    return fit_rigid_transform(pairs);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

namespace {

struct Nearest {
  std::size_t index = 0;
  double distance = std::numeric_limits<double>::infinity();
};

Nearest nearest(const PointSet& T, const Eigen::Vector3d& p) {
  Nearest best;
  for (std::size_t j = 0; j < T.size(); ++j) {
    const double d = (T[j] - p).squaredNorm();
    if (d < best.distance) best = {j, d};
  }
  best.distance = std::sqrt(best.distance);
  return best;
}

double pose_delta(const Pose& a, const Pose& b) {
  return chordal_distance(a.rotation, b.rotation) +
         (a.translation - b.translation).norm();
}

}  // namespace

IcpResult icp_refine(const PointSet& S, const PointSet& T, const Pose& init,
                     std::size_t max_iters, double corr_dist, double tol) {
  if (!(corr_dist > 0.0)) throw std::invalid_argument("corr_dist must be > 0");
  IcpResult out;
  out.pose = init;
  std::vector<PointPair> pairs;
  for (std::size_t it = 0; it < max_iters; ++it) {
    pairs.clear();
    double residual = 0.0;
    for (const auto& s : S.points) {
      const Nearest nn = nearest(T, out.pose * s);
      if (nn.distance <= corr_dist) {
        pairs.emplace_back(s, T[nn.index]);
        residual += nn.distance;
      }
    }
    if (pairs.empty()) {
      if (it == 0) out.no_overlap = true;
      break;
    }
    out.mean_residuals.push_back(residual / static_cast<double>(pairs.size()));
    Pose next;
    try {
      next = fit_rigid_transform(pairs);
    } catch (const std::invalid_argument&) {
      break;
    }
    const double delta = pose_delta(next, out.pose);
    out.pose = next;
    ++out.iterations;
    if (delta < tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

namespace {

bool collinear(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
               const Eigen::Vector3d& c) {
  const double area = (b - a).cross(c - a).norm();
  const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(),
                                 (c - b).squaredNorm()});
  return area <= 1e-9 * std::max(scale, 1e-300);
}

std::array<std::size_t, 3> draw_triple(std::size_t n, SplitMix64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::array<std::size_t, 3> idx{};
  idx[0] = pick(rng);
  do idx[1] = pick(rng); while (idx[1] == idx[0]);
  do idx[2] = pick(rng); while (idx[2] == idx[0] || idx[2] == idx[1]);
  return idx;
}

}  // namespace

RansacResult ransac_reference_distribution(const PointSet& S, const PointSet& T,
                                           const RansacOptions& options) {
  if (S.size() < 3 || T.size() < 3) {
    throw std::invalid_argument("RANSAC needs at least 3 points in each set");
  }
  if (!(options.inlier_dist > 0.0)) {
    throw std::invalid_argument("inlier_dist must be > 0");
  }
  const double corr =
      options.icp_corr_dist > 0.0 ? options.icp_corr_dist : options.inlier_dist;
  const auto min_inliers = static_cast<std::size_t>(
      std::ceil(options.min_inlier_frac * static_cast<double>(S.size()) - 1e-12));

  // Phase 1: hypothesize and verify, trial-indexed streams.
  std::vector<std::vector<std::pair<std::size_t, Pose>>> per_chunk;
  const int workers = std::max(options.jobs, 1);
  per_chunk.resize(static_cast<std::size_t>(workers));
  const std::size_t chunk =
      (options.n_trials + static_cast<std::size_t>(workers) - 1) /
      static_cast<std::size_t>(workers);
  parallel_for(static_cast<std::size_t>(workers), workers,
               [&](std::size_t wb, std::size_t we) {
    for (std::size_t w = wb; w < we; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(options.n_trials, begin + chunk);
      auto& found = per_chunk[w];
      for (std::size_t trial = begin; trial < end; ++trial) {
        SplitMix64 rng(derive_seed(options.seed, trial));
        const auto si = draw_triple(S.size(), rng);
        const auto ti = draw_triple(T.size(), rng);
        if (collinear(S[si[0]], S[si[1]], S[si[2]])) continue;
        bool congruent = true;
        for (int a = 0; a < 3 && congruent; ++a) {
          const int b = (a + 1) % 3;
          const double ds = (S[si[a]] - S[si[b]]).norm();
          const double dt = (T[ti[a]] - T[ti[b]]).norm();
          congruent = std::abs(ds - dt) <= options.inlier_dist;
        }
        if (!congruent) continue;
        const std::array<PointPair, 3> pairs{PointPair{S[si[0]], T[ti[0]]},
                                             PointPair{S[si[1]], T[ti[1]]},
                                             PointPair{S[si[2]], T[ti[2]]}};
        Pose pose;
        try {
          pose = fit_rigid_transform(pairs);
        } catch (const std::invalid_argument&) {
          continue;
        }
        std::size_t inliers = 0;
        for (const auto& s : S.points) {
          if (nearest(T, pose * s).distance <= options.inlier_dist) ++inliers;
        }
        if (inliers >= min_inliers) found.emplace_back(trial, pose);
      }
    }
  });

  std::vector<std::pair<std::size_t, Pose>> accepted;
  for (auto& f : per_chunk) {
    accepted.insert(accepted.end(), f.begin(), f.end());
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  RansacResult out;
  out.accepted = accepted.size();
  if (accepted.size() > options.max_keep) accepted.resize(options.max_keep);
  out.kept = accepted.size();

  // Phase 2: ICP refinement, then merge in trial order.
  std::vector<Pose> refined(accepted.size());
  parallel_for(accepted.size(), options.jobs, [&](std::size_t b, std::size_t e) {
    for (auto i = b; i < e; ++i) {
      refined[i] =
          icp_refine(S, T, accepted[i].second, options.icp_max_iters, corr).pose;
    }
  });
  for (const auto& p : refined) out.distribution.merge(p, 1, options.merge_tol);

  if (out.distribution.empty()) {
    out.warnings.push_back("no RANSAC proposal was accepted in " +
                           std::to_string(options.n_trials) + " trials");
  }
  return out;
}

PoseDistribution cliques_to_distribution(const std::vector<Clique>& cliques,
                                         const AffinityMatrix& m,
                                         const PointSet& S, const PointSet& T,
                                         double merge_tol) {
  // Distinct cliques in order of first appearance.
  std::map<std::vector<std::size_t>, std::size_t> slot;
  std::vector<const Clique*> distinct;
  std::vector<std::size_t> counts;
  for (const auto& c : cliques) {
    auto [it, inserted] = slot.try_emplace(c.indices, distinct.size());
    if (inserted) {
      distinct.push_back(&c);
      counts.push_back(0);
    }
    ++counts[it->second];
  }
  PoseDistribution out;
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    if (auto pose = clique_to_pose(*distinct[i], m, S, T)) {
      out.merge(*pose, counts[i], merge_tol);
    }
  }
  return out;
}

}  // namespace mclip
