#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mclip/scenes.hpp"

using namespace mclip;

namespace {

constexpr double kPi = std::numbers::pi;

SceneSpec spec_of(SceneKind k) {
  SceneSpec s;
  s.kind = k;
  return s;
}

bool contains(const std::vector<Pose>& group, const Pose& p) {
  for (const auto& g : group) {
    if (chordal_distance(g.rotation, p.rotation) < 1e-9 &&
        (g.translation - p.translation).norm() < 1e-9) {
      return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("circle symmetry group holds the eight yaw rotations") {
  SceneSpec s = spec_of(SceneKind::circle);
  s.radius = 2.0;
  const Scene sc = generate(s);
  CHECK(sc.S.size() == 8);
  for (int k = 0; k < 8; ++k) CHECK(contains(sc.symmetry_group, Pose::from_yaw(k * kPi / 4)));
  CHECK(sc.symmetry_group.size() == 16);
  CHECK(sc.S.points[2].y() == doctest::Approx(2.0));
}

TEST_CASE("two lines symmetries are shifts by the spacing") {
  SceneSpec s = spec_of(SceneKind::two_lines);
  const Scene sc = generate(s);
  CHECK(sc.S.size() == 2 * s.points_per_line);
  const long reach = static_cast<long>(s.points_per_line) - 2;
  for (long k = -reach; k <= reach; ++k) {
    CHECK(contains(sc.symmetry_group,
                   Pose::from_yaw(0, Eigen::Vector3d(k * s.spacing, 0, 0))));
  }
  CHECK_FALSE(contains(sc.symmetry_group,
                       Pose::from_yaw(0, Eigen::Vector3d(0.5 * s.spacing, 0, 0))));
}

TEST_CASE("noiseless identity pose copies the scene") {
  for (auto k : {SceneKind::circle, SceneKind::two_lines, SceneKind::repeated_clusters}) {
    const Scene sc = generate(spec_of(k));
    CHECK(sc.S.points == sc.T.points);
  }
  const Scene tri = generate(spec_of(SceneKind::triangle_toy));
  CHECK(tri.S.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK((tri.true_pose * tri.S.points[i] - tri.T.points[i]).norm() < 1e-12);
  }
  CHECK(tri.true_pose.yaw() == doctest::Approx(kPi / 6));
}

TEST_CASE("repeated clusters layout") {
  const Scene sc = generate(spec_of(SceneKind::repeated_clusters));
  CHECK(sc.S.size() == 48);
  CHECK(sc.symmetry_group.size() > 2);
  // the pod swap is a full self-map
  CHECK(matched_indices(sc.S, sc.symmetry_group[1]).size() == 48);
}

TEST_CASE("property: symmetry maps register with zero residual") {
  for (auto k : {SceneKind::circle, SceneKind::two_lines,
                 SceneKind::repeated_clusters, SceneKind::triangle_toy}) {
    const Scene sc = generate(spec_of(k));
    for (const auto& g : sc.symmetry_group) {
      const auto match = matched_indices(sc.S, g, 1e-9);
      REQUIRE(match.size() >= 3);
      std::vector<PointPair> pairs;
      for (auto [i, j] : match) pairs.emplace_back(sc.S.points[i], sc.S.points[j]);
      const Pose fit = fit_rigid_transform(pairs);
      double r = 0;
      for (const auto& [a, b] : pairs) r = std::max(r, (fit * a - b).norm());
      CHECK(r < 1e-9);
      CHECK(chordal_distance(fit.rotation, g.rotation) < 1e-9);
      CHECK((fit.translation - g.translation).norm() < 1e-9);
    }
  }
}

TEST_CASE("generation is deterministic") {
  SceneSpec s = spec_of(SceneKind::circle);
  s.noise_sigma = 0.1;
  s.seed = 5;
  const Scene a = generate(s), b = generate(s);
  CHECK(a.T.points == b.T.points);
  s.seed = 6;
  CHECK(generate(s).T.points != a.T.points);
}

TEST_CASE("property: noise standard deviation matches noise_sigma") {
  SceneSpec s = spec_of(SceneKind::circle);
  s.noise_sigma = 0.05;
  s.applied_pose = Pose::from_yaw(0.7, Eigen::Vector3d(1, 2, 3));
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero();
  double count = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    s.seed = seed;
    const Scene sc = generate(s);
    for (std::size_t i = 0; i < sc.S.size(); ++i) {
      const Eigen::Vector3d e = sc.T.points[i] - sc.true_pose * sc.S.points[i];
      sum += e;
      sq += e.cwiseProduct(e);
      count += 1;
    }
  }
  for (int c = 0; c < 3; ++c) {
    const double mean = sum(c) / count;
    const double sd = std::sqrt(sq(c) / count - mean * mean);
    CHECK(std::abs(sd / 0.05 - 1.0) < 0.03);
  }
}

TEST_CASE("subset") {
  const Scene sc = generate(spec_of(SceneKind::circle));
  std::vector<std::size_t> all(8);
  for (std::size_t i = 0; i < 8; ++i) all[i] = i;
  CHECK(subset(sc.S, all).points == sc.S.points);
  CHECK(subset(sc.S, {}).empty());
  const auto half = subset(sc.S, {0, 1, 2, 3});
  CHECK(half.size() == 4);
  CHECK(half.frame_id == sc.S.frame_id);
  CHECK_THROWS_AS(subset(sc.S, {8}), std::out_of_range);
}

TEST_CASE("invalid specs") {
  SceneSpec s = spec_of(SceneKind::circle);
  s.radius = -1;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  s = spec_of(SceneKind::circle);
  s.noise_sigma = -0.1;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  s = spec_of(SceneKind::two_lines);
  s.spacing = 0;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  s = spec_of(SceneKind::from_file);
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  CHECK_THROWS_AS(scene_kind_from_string("cube"), std::invalid_argument);
}

TEST_CASE("dense ring") {
  SceneSpec s = spec_of(SceneKind::circle);
  s.n_points = 64;
  const Scene sc = generate(s);
  CHECK(sc.S.size() == 64);
  CHECK(sc.symmetry_group.size() == 128);
}
