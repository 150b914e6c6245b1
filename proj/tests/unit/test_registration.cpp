#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mclip/registration.hpp"
#include "mclip/scenes.hpp"
#include "test_util.hpp"

using namespace mclip;

namespace {

constexpr double kPi = std::numbers::pi;

Pose random_pose(std::mt19937_64& rng) {
  return Pose::from_axis_angle(testutil::random_vector(rng, 3).normalized(),
                               std::uniform_real_distribution<double>(-3, 3)(rng),
                               testutil::random_vector(rng, 3) * 5.0);
}

double residual(const Pose& p, const std::vector<PointPair>& pairs) {
  double r = 0;
  for (const auto& [s, t] : pairs) r += (p * s - t).squaredNorm();
  return r;
}

double wrap_deg(double deg) {
  double d = std::fmod(deg, 45.0);
  if (d < 0) d += 45.0;
  return std::min(d, 45.0 - d);
}

Scene circle_scene() {
  SceneSpec spec;
  spec.kind = SceneKind::circle;
  return generate(spec);
}

}  // namespace

TEST_CASE("pose algebra") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const Eigen::Vector3d p = testutil::random_vector(rng, 3);
    CHECK(((a * b) * p - a * (b * p)).norm() < 1e-12);
    CHECK((a.inverse() * (a * p) - p).norm() < 1e-12);
    CHECK(a.is_valid());
    const Eigen::Quaterniond q = a.quaternion();
    CHECK(q.w() >= 0.0);
    const Pose back = Pose::from_quaternion(q, a.translation);
    CHECK(chordal_distance(back.rotation, a.rotation) < 1e-12);
  }
  CHECK(Pose::from_yaw(kPi / 4).yaw() == doctest::Approx(kPi / 4));
  CHECK(chordal_distance(Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity()) == 0);
  Pose bad;
  bad.rotation(0, 0) = -1;
  CHECK_FALSE(bad.is_valid());
}

TEST_CASE("fit_rigid_transform recovers known poses") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Pose truth = random_pose(rng);
    std::vector<PointPair> pairs;
    const int k = 3 + trial % 6;
    for (int i = 0; i < k; ++i) {
      const Eigen::Vector3d s = testutil::random_vector(rng, 3) * 3.0;
      pairs.emplace_back(s, truth * s);
    }
    const Pose fit = fit_rigid_transform(pairs);
    CHECK(fit.is_valid());
    CHECK(chordal_distance(fit.rotation, truth.rotation) < 1e-9);
    CHECK((fit.translation - truth.translation).norm() < 1e-9);
  }
}

TEST_CASE("fit_rigid_transform is least-squares optimal under noise") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose truth = random_pose(rng);
    std::vector<PointPair> pairs;
    for (int i = 0; i < 10; ++i) {
      const Eigen::Vector3d s = testutil::random_vector(rng, 3) * 3.0;
      Eigen::Vector3d t = truth * s;
      for (int c = 0; c < 3; ++c) t(c) += noise(rng);
      pairs.emplace_back(s, t);
    }
    const Pose fit = fit_rigid_transform(pairs);
    const double best = residual(fit, pairs);
    CHECK(best <= residual(truth, pairs) + 1e-12);
    for (int k = 0; k < 10; ++k) {
      const Pose nudge = Pose::from_axis_angle(
          testutil::random_vector(rng, 3).normalized(), 1e-3,
          testutil::random_vector(rng, 3) * 1e-3);
      CHECK(best <= residual(nudge * fit, pairs) + 1e-12);
    }
  }
}

TEST_CASE("fit_rigid_transform never returns a reflection") {
  // Planar sources mirrored in z have an optimal reflection; a proper
  // rotation must come back anyway.
  std::vector<PointPair> pairs{{{0, 0, 0}, {0, 0, 0}},
                               {{1, 0, 0}, {1, 0, 0}},
                               {{0, 1, 0}, {0, -1, 0}},
                               {{1, 1, 0}, {1, -1, 0}}};
  const Pose p = fit_rigid_transform(pairs);
  CHECK(p.rotation.determinant() == doctest::Approx(1.0));
}

TEST_CASE("fit_rigid_transform errors") {
  std::vector<PointPair> two{{{0, 0, 0}, {0, 0, 0}}, {{1, 0, 0}, {1, 0, 0}}};
  CHECK_THROWS_AS(fit_rigid_transform(two), UnderdeterminedFit);
  std::vector<PointPair> line{{{0, 0, 0}, {0, 0, 0}},
                              {{1, 0, 0}, {1, 0, 0}},
                              {{2, 0, 0}, {2, 0, 0}}};
  CHECK_THROWS_AS(fit_rigid_transform(line), DegenerateGeometry);
  std::vector<PointPair> same(3, PointPair{{1, 1, 1}, {0, 0, 0}});
  CHECK_THROWS_AS(fit_rigid_transform(same), DegenerateGeometry);
}

TEST_CASE("clique_to_pose on the circle") {
  const Scene sc = circle_scene();
  const auto m = build_affinity(sc.S, sc.T, all_pairs_candidates(sc.S, sc.T));
  Clique c;
  for (std::size_t i = 0; i < 8; ++i) c.indices.push_back(i * 8 + (i + 1) % 8);
  std::sort(c.indices.begin(), c.indices.end());
  c.omega_hat = 8;
  const auto pose = clique_to_pose(c, m, sc.S, sc.T);
  REQUIRE(pose);
  CHECK(pose->yaw() * 180 / kPi == doctest::Approx(45.0).epsilon(1e-9));
  CHECK(std::abs(pose->yaw() * 180 / kPi - 45.0) < 1e-6);

  Clique small{{0, 9}, 2};
  CHECK_FALSE(clique_to_pose(small, m, sc.S, sc.T).has_value());
}

TEST_CASE("ICP converges back from a perturbed start") {
  const Scene sc = circle_scene();
  const Pose init = Pose::from_axis_angle(Eigen::Vector3d(0.3, -0.2, 1).normalized(),
                                          0.01, Eigen::Vector3d(0.03, -0.04, 0.0));
  const auto r = icp_refine(sc.S, sc.T, init, 100, 1.0);
  CHECK(r.converged);
  CHECK_FALSE(r.no_overlap);
  bool matched = false;
  for (const auto& g : sc.symmetry_group) {
    if (chordal_distance(g.rotation, r.pose.rotation) < 1e-6 &&
        (g.translation - r.pose.translation).norm() < 1e-6) {
      matched = true;
    }
  }
  CHECK(matched);
  CHECK(r.mean_residuals.front() >= r.mean_residuals.back());

  const auto far = icp_refine(sc.S, sc.T,
                              Pose::from_yaw(0, Eigen::Vector3d(100, 0, 0)), 10, 1.0);
  CHECK(far.no_overlap);
}

TEST_CASE("RANSAC reference on the circle concentrates at multiples of 45 deg") {
  const Scene sc = circle_scene();
  RansacOptions opt;
  opt.n_trials = 20000;
  opt.max_keep = 500;
  opt.seed = 3;
  const auto r = ransac_reference_distribution(sc.S, sc.T, opt);
  REQUIRE_FALSE(r.distribution.empty());
  std::size_t inside = 0;
  for (std::size_t i = 0; i < r.distribution.size(); ++i) {
    if (wrap_deg(r.distribution.samples[i].yaw() * 180 / kPi) <= 2.0) {
      inside += r.distribution.multiplicities[i];
    }
  }
  CHECK(static_cast<double>(inside) >= 0.99 * static_cast<double>(r.distribution.total()));
  CHECK(r.kept == std::min(r.accepted, opt.max_keep));

  opt.jobs = 3;
  const auto r2 = ransac_reference_distribution(sc.S, sc.T, opt);
  CHECK(r2.distribution.size() == r.distribution.size());
  CHECK(r2.distribution.multiplicities == r.distribution.multiplicities);
  for (std::size_t i = 0; i < r.distribution.size(); ++i) {
    CHECK(r2.distribution.samples[i].rotation == r.distribution.samples[i].rotation);
    CHECK(r2.distribution.samples[i].translation == r.distribution.samples[i].translation);
  }
}

TEST_CASE("RANSAC with no congruent triangles warns") {
  PointSet s, t;
  s.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  t.points = {{0, 0, 0}, {10, 0, 0}, {0, 7, 0}};
  RansacOptions opt;
  opt.n_trials = 200;
  const auto r = ransac_reference_distribution(s, t, opt);
  CHECK(r.distribution.empty());
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("PoseDistribution merge and validate") {
  PoseDistribution d;
  d.merge(Pose::from_yaw(0.1), 2, 1e-6);
  d.merge(Pose::from_yaw(0.1 + 1e-9), 3, 1e-6);
  d.merge(Pose::from_yaw(0.2), 1, 1e-6);
  CHECK(d.size() == 2);
  CHECK(d.multiplicities[0] == 5);
  CHECK(d.total() == 6);
  d.multiplicities.push_back(1);
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  PoseDistribution z;
  CHECK_THROWS_AS(z.add(Pose::identity(), 0), std::invalid_argument);
  z.samples.push_back(Pose::identity());
  z.multiplicities.push_back(0);
  CHECK_THROWS_AS(z.validate(), std::invalid_argument);
}

TEST_CASE("cliques_to_distribution aggregates") {
  const Scene sc = circle_scene();
  const auto m = build_affinity(sc.S, sc.T, all_pairs_candidates(sc.S, sc.T));
  Clique id;
  for (std::size_t i = 0; i < 8; ++i) id.indices.push_back(i * 8 + i);
  id.omega_hat = 8;
  Clique part{{0, 9, 18}, 3};
  Clique tiny{{0}, 1};
  const auto d = cliques_to_distribution({id, part, id, tiny}, m, sc.S, sc.T);
  // id twice and its 3-subset give the same pose
  REQUIRE(d.size() == 1);
  CHECK(d.total() == 3);
}
