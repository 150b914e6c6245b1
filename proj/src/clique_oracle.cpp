#include "mclip/clique_oracle.hpp"

#include <algorithm>
#include <string>

#include <boost/dynamic_bitset.hpp>

namespace mclip {

ConsistencyGraph::ConsistencyGraph(std::size_t n) : n_(n), adj_(n * n, 0) {}

void ConsistencyGraph::add_edge(std::size_t i, std::size_t j) {
  if (i >= n_ || j >= n_) throw std::out_of_range("vertex out of range");
  if (i == j) throw std::invalid_argument("self-loops are not allowed");
  adj_[i * n_ + j] = 1;
  adj_[j * n_ + i] = 1;
}

std::size_t ConsistencyGraph::edge_count() const {
  return static_cast<std::size_t>(
             std::count(adj_.begin(), adj_.end(), static_cast<unsigned char>(1))) /
         2;
}

ConsistencyGraph binarize(const AffinityMatrix& m, double threshold) {
  const std::size_t n = m.size();
  ConsistencyGraph g(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (m.m()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >
          threshold) {
        g.add_edge(i, j);
      }
    }
  }
  return g;
}

namespace {

using Bits = boost::dynamic_bitset<>;

struct BronKerbosch {
  std::vector<Bits> neighbors;
  std::vector<Clique> out;

  void expand(std::vector<std::size_t>& r, Bits p, Bits x) {
    if (p.none() && x.none()) {
      Clique c;
      c.indices = r;
      std::sort(c.indices.begin(), c.indices.end());
      c.omega_hat = static_cast<int>(c.indices.size());
      out.push_back(std::move(c));
      return;
    }
    // Pivot on the vertex of P ∪ X with the most neighbors in P.
    const Bits pux = p | x;
    std::size_t pivot = Bits::npos;
    std::size_t best = 0;
    for (auto v = pux.find_first(); v != Bits::npos; v = pux.find_next(v)) {
      const std::size_t deg = (p & neighbors[v]).count();
      if (pivot == Bits::npos || deg > best) {
        best = deg;
        pivot = v;
      }
    }
    const Bits candidates = p - neighbors[pivot];
    for (auto v = candidates.find_first(); v != Bits::npos;
         v = candidates.find_next(v)) {
      r.push_back(v);
      expand(r, p & neighbors[v], x & neighbors[v]);
      r.pop_back();
      p.reset(v);
      x.set(v);
    }
  }
};

}  // namespace

std::vector<Clique> enumerate_maximal_cliques(const ConsistencyGraph& g,
                                              std::size_t cap) {
  const std::size_t n = g.size();
  if (n > cap) {
    throw CliqueCapExceeded("graph has " + std::to_string(n) +
                            " vertices, above the enumeration cap of " +
                            std::to_string(cap));
  }
  if (n == 0) return {};
  BronKerbosch bk;
  bk.neighbors.assign(n, Bits(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (g.adjacent(i, j)) bk.neighbors[i].set(j);
    }
  }
  std::vector<std::size_t> r;
  Bits p(n);
  p.set();
  bk.expand(r, p, Bits(n));
  std::sort(bk.out.begin(), bk.out.end());
  return bk.out;
}

bool is_clique(const ConsistencyGraph& g, const std::vector<std::size_t>& set) {
  for (std::size_t a = 0; a < set.size(); ++a) {
    for (std::size_t b = a + 1; b < set.size(); ++b) {
      if (!g.adjacent(set[a], set[b])) return false;
    }
  }
  return true;
}

CoverageReport coverage_report(const std::vector<Clique>& extracted,
                               const std::vector<Clique>& oracle,
                               std::size_t min_size) {
  CoverageReport rep;
  for (const auto& c : extracted) {
    if (c.indices.size() >= min_size) ++rep.multiplicity[c.indices];
  }
  std::vector<const std::vector<std::size_t>*> maximal;
  for (const auto& c : oracle) {
    if (c.indices.size() >= min_size) maximal.push_back(&c.indices);
  }
  rep.oracle_count = maximal.size();
  rep.extracted_distinct = rep.multiplicity.size();

  const auto subset = [](const std::vector<std::size_t>& small,
                         const std::vector<std::size_t>& big) {
    return std::includes(big.begin(), big.end(), small.begin(), small.end());
  };

  for (const auto* o : maximal) {
    if (rep.multiplicity.contains(*o)) {
      ++rep.hits;
      continue;
    }
    for (const auto& [e, count] : rep.multiplicity) {
      if (e.size() < o->size() && subset(e, *o)) {
        ++rep.partials;
        break;
      }
    }
  }
  for (const auto& [e, count] : rep.multiplicity) {
    const bool contained = std::any_of(
        maximal.begin(), maximal.end(),
        [&](const auto* o) { return subset(e, *o); });
    if (!contained) ++rep.spurious;
  }
  if (rep.oracle_count > 0) {
    rep.hit_rate = static_cast<double>(rep.hits) / rep.oracle_count;
    rep.partial_rate = static_cast<double>(rep.partials) / rep.oracle_count;
  }
  if (rep.extracted_distinct > 0) {
    rep.spurious_rate =
        static_cast<double>(rep.spurious) / rep.extracted_distinct;
  }
  return rep;
}

}  // namespace mclip
