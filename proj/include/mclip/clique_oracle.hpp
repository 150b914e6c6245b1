#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "mclip/association.hpp"
#include "mclip/solvers.hpp"

namespace mclip {

/// Undirected graph over candidate associations; symmetric, no self-loops.
class ConsistencyGraph {
 public:
  explicit ConsistencyGraph(std::size_t n);

  std::size_t size() const { return n_; }
  bool adjacent(std::size_t i, std::size_t j) const {
    return adj_[i * n_ + j] != 0;
  }
  void add_edge(std::size_t i, std::size_t j);
  std::size_t edge_count() const;

 private:
  std::size_t n_;
  std::vector<unsigned char> adj_;
};

/// Edge (i, j) iff i != j and m(i, j) > threshold.
ConsistencyGraph binarize(const AffinityMatrix& m, double threshold = 0.5);

class CliqueCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All maximal cliques (Bron–Kerbosch with pivoting). Each clique is sorted
/// and the list is in lexicographic order; isolated vertices appear as
/// singletons. Throws CliqueCapExceeded when the graph has more than `cap`
/// vertices.
std::vector<Clique> enumerate_maximal_cliques(const ConsistencyGraph& g,
                                              std::size_t cap = 64);

bool is_clique(const ConsistencyGraph& g, const std::vector<std::size_t>& set);

struct CoverageReport {
  std::size_t oracle_count = 0;
  std::size_t extracted_distinct = 0;
  std::size_t hits = 0;
  std::size_t partials = 0;
  std::size_t spurious = 0;
  double hit_rate = 0.0;       ///< hits / oracle_count
  double partial_rate = 0.0;   ///< partials / oracle_count
  double spurious_rate = 0.0;  ///< spurious / extracted_distinct
  /// Particle count per distinct extracted clique (after size filtering).
  std::map<std::vector<std::size_t>, std::size_t> multiplicity;
};

/// Compares extracted cliques against oracle maximal cliques. Cliques with
/// fewer than `min_size` members are dropped from both sides. An oracle
/// clique is a hit when some extracted clique equals it, a partial when it
/// is not hit but contains some extracted clique strictly. An extracted
/// clique is spurious when no oracle clique contains it.
CoverageReport coverage_report(const std::vector<Clique>& extracted,
                               const std::vector<Clique>& oracle,
                               std::size_t min_size = 2);

}  // namespace mclip
