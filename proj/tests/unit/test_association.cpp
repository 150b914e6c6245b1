#include <doctest.h>

#include <cmath>
#include <random>

#include "mclip/association.hpp"
#include "mclip/registration.hpp"
#include "test_util.hpp"

using namespace mclip;

namespace {

PointSet pts(std::vector<Eigen::Vector3d> p) {
  PointSet s;
  s.points = std::move(p);
  return s;
}

PointSet random_points(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  PointSet s;
  for (std::size_t i = 0; i < n; ++i) s.points.emplace_back(u(rng), u(rng), u(rng));
  return s;
}

void check_invariants(const AffinityMatrix& a) {
  const auto& m = a.m();
  const auto& c = a.mask();
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    CHECK(m(i, i) == 1.0);
    CHECK(c(i, i) == 0.0);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      CHECK(m(i, j) >= 0.0);
      CHECK(m(i, j) <= 1.0);
      if (i != j) CHECK((m(i, j) == 0.0) == (c(i, j) == 1.0));
    }
  }
}

}  // namespace

TEST_CASE("all_pairs_candidates is s-major") {
  const auto s = pts({{0, 0, 0}, {1, 0, 0}});
  const auto t = pts({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  const auto c = all_pairs_candidates(s, t);
  REQUIRE(c.size() == 6);
  CHECK(c.front() == Association{0, 0});
  CHECK(c[1] == Association{0, 1});
  CHECK(c.back() == Association{1, 2});
  CHECK(all_pairs_candidates(PointSet{}, t).empty());

  PointSet ring;
  for (int k = 0; k < 8; ++k) ring.points.emplace_back(std::cos(k), std::sin(k), 0);
  CHECK(all_pairs_candidates(ring, ring).size() == 64);
}

TEST_CASE("consistency_distance examples") {
  const auto s = pts({{0, 0, 0}, {1, 0, 0}});
  const auto t = pts({{5, 0, 0}, {5, 1, 0}, {5, 1.5, 0}});
  CHECK(consistency_distance({0, 0}, {1, 1}, s, t) == doctest::Approx(0.0));
  CHECK(consistency_distance({0, 0}, {1, 2}, s, t) == doctest::Approx(0.5));
  CHECK(consistency_distance({1, 2}, {1, 2}, s, t) == 0.0);
}

TEST_CASE("build_affinity entries") {
  // Associations (0,0) and (1,1): source distance 1, target distance d.
  const auto make = [](double d) {
    const auto s = pts({{0, 0, 0}, {1, 0, 0}});
    const auto t = pts({{0, 0, 0}, {d, 0, 0}});
    return build_affinity(s, t, {{0, 0}, {1, 1}}, 0.4, 0.6);
  };
  CHECK(make(1.0).m()(0, 1) == 1.0);
  CHECK(make(1.5).m()(0, 1) == doctest::Approx(std::exp(-0.25 / 0.32)).epsilon(1e-12));
  CHECK(make(1.5).m()(0, 1) == doctest::Approx(0.45783).epsilon(1e-4));
  const auto cut = make(1.7);
  CHECK(cut.m()(0, 1) == 0.0);
  CHECK(cut.mask()(0, 1) == 1.0);
}

TEST_CASE("build_affinity rejects bad arguments") {
  const auto s = pts({{0, 0, 0}, {1, 0, 0}});
  CHECK_THROWS_AS(build_affinity(s, s, {{0, 0}}, 0.0, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(build_affinity(s, s, {{0, 0}}, 0.4, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_affinity(s, s, {}, 0.4, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(build_affinity(s, s, {{0, 5}}, 0.4, 0.6), std::out_of_range);
}

TEST_CASE("shared endpoints are exclusive unless disabled") {
  // (0,0) and (0,1) share s_0: source distance 0, target distance 1.
  const auto s = pts({{0, 0, 0}, {1, 0, 0}});
  const auto t = pts({{0, 0, 0}, {1, 0, 0}});
  const std::vector<Association> c{{0, 0}, {0, 1}};
  CHECK(build_affinity(s, t, c, AffinityOptions{0.4, 1.5, true}).m()(0, 1) == 0.0);
  CHECK(build_affinity(s, t, c, AffinityOptions{0.4, 1.5, false}).m()(0, 1) ==
        doctest::Approx(std::exp(-1.0 / 0.32)));
}

TEST_CASE("property: affinity invariants on random scenes") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_points(rng, 5);
    const auto t = random_points(rng, 4);
    for (bool excl : {true, false}) {
      const auto a = build_affinity(s, t, all_pairs_candidates(s, t),
                                    AffinityOptions{0.4, 2.0, excl});
      check_invariants(a);
    }
  }
}

TEST_CASE("property: monotone in consistency distance below the cutoff") {
  double prev = 2.0;
  for (double d = 0.0; d < 0.6; d += 0.05) {
    const auto s = pts({{0, 0, 0}, {1, 0, 0}});
    const auto t = pts({{0, 0, 0}, {1.0 + d, 0, 0}});
    const double v = build_affinity(s, t, {{0, 0}, {1, 1}}, 0.4, 0.6).m()(0, 1);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("property: rigid transform of T leaves M unchanged") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_points(rng, 5);
    const auto t = random_points(rng, 5);
    const Pose g = Pose::from_axis_angle(testutil::random_vector(rng, 3).normalized(),
                                         0.3 * trial + 0.1,
                                         testutil::random_vector(rng, 3) * 4.0);
    PointSet gt;
    for (const auto& p : t.points) gt.points.push_back(g * p);
    const auto c = all_pairs_candidates(s, t);
    const auto a = build_affinity(s, t, c, AffinityOptions{0.4, 1.5, true});
    const auto b = build_affinity(s, gt, c, AffinityOptions{0.4, 1.5, true});
    CHECK((a.m() - b.m()).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("penalize") {
  std::mt19937_64 rng(3);
  const auto a = testutil::random_affinity(rng, 9);
  CHECK(penalize(a, 0.0).m_d() == a.m());
  for (double d : {0.5, 3.0, 9.0}) {
    const auto pa = penalize(a, d);
    CHECK(pa.m_d() + d * a.mask() == a.m());
    for (Eigen::Index i = 0; i < 9; ++i) {
      CHECK(pa.m_d()(i, i) == 1.0);
      for (Eigen::Index j = 0; j < 9; ++j) {
        if (a.mask()(i, j) == 1.0) CHECK(pa.m_d()(i, j) == -d);
      }
    }
  }
  CHECK_THROWS_AS(penalize(a, -1.0), std::invalid_argument);
}

TEST_CASE("from_matrix validation") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
  m(0, 1) = 0.5;
  CHECK_THROWS_AS(AffinityMatrix::from_matrix(m), std::invalid_argument);
  m(1, 0) = 0.5;
  m(2, 2) = 0.3;
  const auto a = AffinityMatrix::from_matrix(m);
  CHECK(a.m()(2, 2) == 1.0);
  CHECK(a.mask()(0, 2) == 1.0);
  CHECK(a.mask()(0, 1) == 0.0);
  m(0, 2) = m(2, 0) = 1.5;
  CHECK_THROWS_AS(AffinityMatrix::from_matrix(m), std::invalid_argument);
  CHECK_THROWS_AS(AffinityMatrix::from_matrix(Eigen::MatrixXd::Zero(2, 3)),
                  std::invalid_argument);
}

TEST_CASE("non-finite points are rejected") {
  PointSet s = pts({{0, 0, 0}, {std::nan(""), 0, 0}});
  CHECK_THROWS_AS(validate(s), std::invalid_argument);
}
