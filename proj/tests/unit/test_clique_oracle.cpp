#include <doctest.h>

#include <random>

#include "mclip/clique_oracle.hpp"
#include "mclip/scenes.hpp"
#include "test_util.hpp"

using namespace mclip;

namespace {

ConsistencyGraph random_graph(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution edge(p);
  ConsistencyGraph g(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (edge(rng)) g.add_edge(i, j);
    }
  }
  return g;
}

Clique clique(std::vector<std::size_t> v) {
  return Clique{v, static_cast<int>(v.size())};
}

}  // namespace

TEST_CASE("binarize uses a strict threshold") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
  m(0, 1) = m(1, 0) = 0.5;
  m(1, 2) = m(2, 1) = 0.51;
  const auto g = binarize(AffinityMatrix::from_matrix(m));
  CHECK_FALSE(g.adjacent(0, 1));
  CHECK(g.adjacent(1, 2));
  CHECK_FALSE(g.adjacent(0, 0));
  CHECK(g.edge_count() == 1);
}

TEST_CASE("graph rejects self-loops") {
  ConsistencyGraph g(3);
  CHECK_THROWS_AS(g.add_edge(1, 1), std::invalid_argument);
  CHECK_THROWS_AS(g.add_edge(0, 3), std::out_of_range);
}

TEST_CASE("Bron-Kerbosch matches brute force") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + trial % 14;
    const double p = 0.2 + 0.1 * (trial % 7);
    const auto g = random_graph(rng, n, p);
    const auto bk = enumerate_maximal_cliques(g);
    std::vector<std::vector<std::size_t>> got;
    for (const auto& c : bk) {
      CHECK(c.omega_hat == static_cast<int>(c.indices.size()));
      CHECK(std::is_sorted(c.indices.begin(), c.indices.end()));
      got.push_back(c.indices);
    }
    CHECK(std::is_sorted(got.begin(), got.end()));
    CHECK(got == testutil::brute_force_maximal_cliques(g));
  }
}

TEST_CASE("edge cases") {
  CHECK(enumerate_maximal_cliques(ConsistencyGraph(0)).empty());
  const auto iso = enumerate_maximal_cliques(ConsistencyGraph(3));
  CHECK(iso.size() == 3);
  ConsistencyGraph k4(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) k4.add_edge(i, j);
  }
  const auto one = enumerate_maximal_cliques(k4);
  REQUIRE(one.size() == 1);
  CHECK(one[0].indices == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK_THROWS_AS(enumerate_maximal_cliques(ConsistencyGraph(65)), CliqueCapExceeded);
  CHECK_NOTHROW(enumerate_maximal_cliques(ConsistencyGraph(65), 100));
}

TEST_CASE("triangle toy fixture") {
  SceneSpec spec;
  spec.kind = SceneKind::triangle_toy;
  const Scene sc = generate(spec);
  const auto m = build_affinity(sc.S, sc.T, all_pairs_candidates(sc.S, sc.T));
  std::vector<std::vector<std::size_t>> big;
  for (const auto& c : enumerate_maximal_cliques(binarize(m))) {
    if (c.indices.size() >= 3) big.push_back(c.indices);
  }
  // identity {(0,0),(1,1),(2,2)} and the flip {(0,0),(1,2),(2,1)}
  CHECK(big == std::vector<std::vector<std::size_t>>{{0, 4, 8}, {0, 5, 7}});
}

TEST_CASE("coverage_report") {
  const std::vector<Clique> oracle{clique({0, 1, 2}), clique({2, 3, 4}),
                                   clique({5, 6, 7}), clique({8})};
  const std::vector<Clique> got{clique({0, 1, 2}), clique({0, 1, 2}),
                                clique({2, 3}),     clique({0, 5}),
                                clique({9})};
  const auto r = coverage_report(got, oracle, 2);
  CHECK(r.oracle_count == 3);
  CHECK(r.extracted_distinct == 3);
  CHECK(r.hits == 1);
  CHECK(r.partials == 1);
  CHECK(r.spurious == 1);
  CHECK(r.hit_rate == doctest::Approx(1.0 / 3));
  CHECK(r.spurious_rate == doctest::Approx(1.0 / 3));
  CHECK(r.multiplicity.at({0, 1, 2}) == 2);

  const auto all = coverage_report(oracle, oracle, 1);
  CHECK(all.hit_rate == 1.0);
  CHECK(all.spurious == 0);
}
