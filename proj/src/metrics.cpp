#include "mclip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/SVD>

namespace mclip {

std::string to_string(GroundMetric g) {
  return g == GroundMetric::translation_euclidean ? "trans" : "rot";
}

namespace {

Eigen::Matrix3d proper_rotation(const Eigen::Matrix3d& r) {
  Pose p;
  p.rotation = r;
  if (p.is_valid(1e-9)) return r;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1 : 1;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Eigen::VectorXd weights(const PoseDistribution& d) {
  d.validate();
  Eigen::VectorXd w(static_cast<Eigen::Index>(d.size()));
  const double total = static_cast<double>(d.total());
  for (std::size_t i = 0; i < d.size(); ++i) {
    w(static_cast<Eigen::Index>(i)) =
        static_cast<double>(d.multiplicities[i]) / total;
  }
  return w;
}

void require_nonempty(const PoseDistribution& a, const PoseDistribution& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("distribution metrics need nonempty inputs");
  }
}

}  // namespace

Eigen::MatrixXd pairwise_distances(const PoseDistribution& a,
                                   const PoseDistribution& b, GroundMetric g) {
  require_nonempty(a, b);
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd d(na, nb);
  if (g == GroundMetric::translation_euclidean) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      for (Eigen::Index i = 0; i < na; ++i) {
        d(i, j) = (a.samples[static_cast<std::size_t>(i)].translation -
                   b.samples[static_cast<std::size_t>(j)].translation)
                      .norm();
      }
    }
    return d;
  }
  std::vector<Eigen::Matrix3d> ra;
  std::vector<Eigen::Matrix3d> rb;
  for (const auto& p : a.samples) ra.push_back(proper_rotation(p.rotation));
  for (const auto& p : b.samples) rb.push_back(proper_rotation(p.rotation));
  for (Eigen::Index j = 0; j < nb; ++j) {
    for (Eigen::Index i = 0; i < na; ++i) {
      d(i, j) = chordal_distance(ra[static_cast<std::size_t>(i)],
                                 rb[static_cast<std::size_t>(j)]);
    }
  }
  return d;
}

double energy_distance(const PoseDistribution& a, const PoseDistribution& b,
                       GroundMetric g) {
  require_nonempty(a, b);
  const Eigen::VectorXd wa = weights(a);
  const Eigen::VectorXd wb = weights(b);
  const double ab = wa.dot(pairwise_distances(a, b, g) * wb);
  const double aa = wa.dot(pairwise_distances(a, a, g) * wa);
  const double bb = wb.dot(pairwise_distances(b, b, g) * wb);
  return std::max(0.0, 2.0 * ab - aa - bb);
}

double median_heuristic_bandwidth(const PoseDistribution& a,
                                  const PoseDistribution& b, GroundMetric g) {
  require_nonempty(a, b);
  PoseDistribution pooled = a;
  for (std::size_t i = 0; i < b.size(); ++i) {
    pooled.add(b.samples[i], b.multiplicities[i]);
  }
  const Eigen::MatrixXd d = pairwise_distances(pooled, pooled, g);
  std::vector<std::pair<double, double>> entries;  // (distance, pair count)
  for (std::size_t p = 0; p < pooled.size(); ++p) {
    const auto wp = static_cast<double>(pooled.multiplicities[p]);
    entries.emplace_back(0.0, wp * (wp - 1.0) / 2.0);
    for (std::size_t q = p + 1; q < pooled.size(); ++q) {
      entries.emplace_back(
          d(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)),
          wp * static_cast<double>(pooled.multiplicities[q]));
    }
  }
  std::sort(entries.begin(), entries.end());
  double total = 0.0;
  for (const auto& e : entries) total += e.second;
  if (total <= 0.0) return 1.0;
  double cumulative = 0.0;
  double median = 0.0;
  for (const auto& [dist, count] : entries) {
    cumulative += count;
    if (cumulative >= 0.5 * total) {
      median = dist;
      break;
    }
  }
  return median > 0.0 ? median : 1.0;
}

double mmd(const PoseDistribution& a, const PoseDistribution& b, GroundMetric g,
           std::optional<double> bandwidth) {
  require_nonempty(a, b);
  const double h =
      bandwidth ? *bandwidth : median_heuristic_bandwidth(a, b, g);
  if (!(h > 0.0)) throw std::invalid_argument("MMD bandwidth must be > 0");
  const double inv = 1.0 / (2.0 * h * h);
  const auto kernel = [inv](const Eigen::MatrixXd& d) {
    return (-(d.array().square()) * inv).exp().matrix().eval();
  };
  const Eigen::VectorXd wa = weights(a);
  const Eigen::VectorXd wb = weights(b);
  const double aa = wa.dot(kernel(pairwise_distances(a, a, g)) * wa);
  const double bb = wb.dot(kernel(pairwise_distances(b, b, g)) * wb);
  const double ab = wa.dot(kernel(pairwise_distances(a, b, g)) * wb);
  return std::max(0.0, aa + bb - 2.0 * ab);
}

double min_cost_transport(const Eigen::MatrixXd& cost,
                          std::span<const std::int64_t> supply,
                          std::span<const std::int64_t> demand) {
  const auto m = static_cast<Eigen::Index>(supply.size());
  const auto k = static_cast<Eigen::Index>(demand.size());
  if (cost.rows() != m || cost.cols() != k) {
    throw std::invalid_argument("cost matrix shape does not match marginals");
  }
  const auto sum = [](auto s) {
    return std::accumulate(s.begin(), s.end(), std::int64_t{0});
  };
  if (sum(supply) != sum(demand)) {
    throw std::invalid_argument("supply and demand totals differ");
  }
  if ((cost.array() < 0.0).any() || !cost.allFinite()) {
    throw std::invalid_argument("transport costs must be finite and >= 0");
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> left(supply.begin(), supply.end());
  std::vector<std::int64_t> right(demand.begin(), demand.end());
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> flow =
      Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(m, k);
  // Potentials keep reduced costs nonnegative on residual edges.
  Eigen::VectorXd pot_u = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd pot_v = Eigen::VectorXd::Zero(k);

  Eigen::VectorXd dist_u(m), dist_v(k);
  std::vector<Eigen::Index> parent_v(static_cast<std::size_t>(k));
  std::vector<Eigen::Index> parent_u(static_cast<std::size_t>(m));
  std::vector<char> done_u(static_cast<std::size_t>(m));
  std::vector<char> done_v(static_cast<std::size_t>(k));

  std::int64_t remaining = sum(supply);
  while (remaining > 0) {
    // Multi-source Dijkstra from every row with supply left.
    dist_u.setConstant(kInf);
    dist_v.setConstant(kInf);
    std::fill(done_u.begin(), done_u.end(), 0);
    std::fill(done_v.begin(), done_v.end(), 0);
    std::fill(parent_u.begin(), parent_u.end(), -1);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (left[static_cast<std::size_t>(i)] > 0) dist_u(i) = 0.0;
    }
    Eigen::Index sink = -1;
    while (true) {
      Eigen::Index bu = -1, bv = -1;
      double best = kInf;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!done_u[static_cast<std::size_t>(i)] && dist_u(i) < best) {
          best = dist_u(i);
          bu = i;
          bv = -1;
        }
      }
      for (Eigen::Index j = 0; j < k; ++j) {
        if (!done_v[static_cast<std::size_t>(j)] && dist_v(j) < best) {
          best = dist_v(j);
          bv = j;
          bu = -1;
        }
      }
      if (bu < 0 && bv < 0) break;
      if (bu >= 0) {
        done_u[static_cast<std::size_t>(bu)] = 1;
        for (Eigen::Index j = 0; j < k; ++j) {
          if (done_v[static_cast<std::size_t>(j)]) continue;
          const double rc = std::max(0.0, cost(bu, j) + pot_u(bu) - pot_v(j));
          if (dist_u(bu) + rc < dist_v(j)) {
            dist_v(j) = dist_u(bu) + rc;
            parent_v[static_cast<std::size_t>(j)] = bu;
          }
        }
      } else {
        done_v[static_cast<std::size_t>(bv)] = 1;
        if (right[static_cast<std::size_t>(bv)] > 0) {
          sink = bv;
          break;
        }
        for (Eigen::Index i = 0; i < m; ++i) {
          if (done_u[static_cast<std::size_t>(i)] || flow(i, bv) == 0) continue;
          const double rc = std::max(0.0, -cost(i, bv) + pot_v(bv) - pot_u(i));
          if (dist_v(bv) + rc < dist_u(i)) {
            dist_u(i) = dist_v(bv) + rc;
            parent_u[static_cast<std::size_t>(i)] = bv;
          }
        }
      }
    }
    if (sink < 0) throw std::logic_error("transport problem is infeasible");

    const double cap = dist_v(sink);
    for (Eigen::Index i = 0; i < m; ++i) {
      pot_u(i) += std::min(dist_u(i), cap);
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      pot_v(j) += std::min(dist_v(j), cap);
    }

    // Walk back to find the bottleneck, then augment.
    std::int64_t push = right[static_cast<std::size_t>(sink)];
    Eigen::Index j = sink;
    Eigen::Index i = parent_v[static_cast<std::size_t>(j)];
    while (true) {
      const Eigen::Index prev = parent_u[static_cast<std::size_t>(i)];
      if (prev < 0) {
        push = std::min(push, left[static_cast<std::size_t>(i)]);
        break;
      }
      push = std::min(push, flow(i, prev));
      j = prev;
      i = parent_v[static_cast<std::size_t>(j)];
    }
    j = sink;
    i = parent_v[static_cast<std::size_t>(j)];
    right[static_cast<std::size_t>(sink)] -= push;
    while (true) {
      flow(i, j) += push;
      const Eigen::Index prev = parent_u[static_cast<std::size_t>(i)];
      if (prev < 0) {
        left[static_cast<std::size_t>(i)] -= push;
        break;
      }
      flow(i, prev) -= push;
      j = prev;
      i = parent_v[static_cast<std::size_t>(j)];
    }
    remaining -= push;
  }

  double total = 0.0;
  for (Eigen::Index jj = 0; jj < k; ++jj) {
    for (Eigen::Index ii = 0; ii < m; ++ii) {
      if (flow(ii, jj) != 0) total += static_cast<double>(flow(ii, jj)) * cost(ii, jj);
    }
  }
  return total;
}

double wasserstein1(const PoseDistribution& a, const PoseDistribution& b,
                    GroundMetric g) {
  require_nonempty(a, b);
  a.validate();
  b.validate();
  const auto ta = static_cast<std::int64_t>(a.total());
  const auto tb = static_cast<std::int64_t>(b.total());
  const std::int64_t common = std::gcd(ta, tb);
  std::vector<std::int64_t> supply, demand;
  for (auto m : a.multiplicities) {
    supply.push_back(static_cast<std::int64_t>(m) * (tb / common));
  }
  for (auto m : b.multiplicities) {
    demand.push_back(static_cast<std::int64_t>(m) * (ta / common));
  }
  const double mass = static_cast<double>(ta) * static_cast<double>(tb / common);
  return min_cost_transport(pairwise_distances(a, b, g), supply, demand) / mass;
}

std::vector<MetricRecord> compare_distributions(
    const PoseDistribution& a, const PoseDistribution& b,
    const std::vector<std::string>& metrics,
    std::optional<double> mmd_bandwidth) {
  std::vector<MetricRecord> out;
  for (const auto& name : metrics) {
    for (auto g : {GroundMetric::translation_euclidean,
                   GroundMetric::rotation_chordal}) {
      double v;
      if (name == "mmd") {
        v = mmd(a, b, g, mmd_bandwidth);
      } else if (name == "ed") {
        v = energy_distance(a, b, g);
      } else if (name == "w1") {
        v = wasserstein1(a, b, g);
      } else {
        throw std::invalid_argument("unknown metric '" + name + "'");
      }
      out.push_back({name, to_string(g), v});
    }
  }
  return out;
}

}  // namespace mclip
