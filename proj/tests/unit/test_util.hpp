#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "mclip/association.hpp"
#include "mclip/clique_oracle.hpp"

namespace testutil {

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n,
                                     double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// Random symmetric matrix with unit diagonal, entries in [0,1], roughly
/// `zero_frac` of off-diagonal entries exactly 0.
inline mclip::AffinityMatrix random_affinity(std::mt19937_64& rng, Eigen::Index n,
                                             double zero_frac = 0.3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = u(rng) < zero_frac ? 0.0 : u(rng);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return mclip::AffinityMatrix::from_matrix(m);
}

/// Binary affinity (identity plus adjacency) of a G(n, p) graph with a planted
/// clique on `planted`.
inline Eigen::MatrixXd planted_binary(std::mt19937_64& rng, Eigen::Index n,
                                      double p,
                                      const std::vector<Eigen::Index>& planted) {
  std::bernoulli_distribution edge(p);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (edge(rng)) m(i, j) = m(j, i) = 1.0;
    }
  }
  for (auto a : planted) {
    for (auto b : planted) m(a, b) = 1.0;
  }
  return m;
}

/// Maximal cliques by subset enumeration; n <= 16.
inline std::vector<std::vector<std::size_t>> brute_force_maximal_cliques(
    const mclip::ConsistencyGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::size_t>> out;
  const auto members = [n](std::uint32_t mask) {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) v.push_back(i);
    }
    return v;
  };
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    const auto v = members(mask);
    if (!mclip::is_clique(g, v)) continue;
    bool maximal = true;
    for (std::size_t k = 0; k < n && maximal; ++k) {
      if (mask & (1u << k)) continue;
      auto w = v;
      w.push_back(k);
      if (mclip::is_clique(g, w)) maximal = false;
    }
    if (maximal) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace testutil
