#include "mclip/association.hpp"

#include <cmath>
#include <stdexcept>

namespace mclip {

void validate(const PointSet& set) {
  for (const auto& p : set.points) {
    if (!p.allFinite()) {
      throw std::invalid_argument("point set '" + set.frame_id +
                                  "' contains a non-finite coordinate");
    }
  }
}

std::vector<Association> all_pairs_candidates(const PointSet& S,
                                              const PointSet& T) {
  std::vector<Association> out;
  out.reserve(S.size() * T.size());
  for (std::size_t s = 0; s < S.size(); ++s) {
    for (std::size_t t = 0; t < T.size(); ++t) out.push_back({s, t});
  }
  return out;
}

double consistency_distance(const Association& a_i, const Association& a_j,
                            const PointSet& S, const PointSet& T) {
  const double ds = (S[a_i.s_index] - S[a_j.s_index]).norm();
  const double dt = (T[a_i.t_index] - T[a_j.t_index]).norm();
  return std::abs(ds - dt);
}

void AffinityMatrix::derive_mask() {
  const Eigen::Index n = m_.rows();
  mask_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != j && m_(i, j) == 0.0) mask_(i, j) = 1.0;
    }
  }
}

AffinityMatrix AffinityMatrix::from_matrix(Eigen::MatrixXd m,
                                           std::vector<Association> candidates) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("affinity matrix must be square");
  }
  if (!candidates.empty() &&
      candidates.size() != static_cast<std::size_t>(m.rows())) {
    throw std::invalid_argument("candidate list length does not match matrix");
  }
  const Eigen::Index n = m.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = m(i, j);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw std::invalid_argument("affinity entries must lie in [0, 1]");
      }
      if (std::abs(v - m(j, i)) > 1e-12) {
        throw std::invalid_argument("affinity matrix must be symmetric");
      }
    }
  }
  m.diagonal().setOnes();
  AffinityMatrix out;
  // Exact symmetry from here on.
  out.m_ = 0.5 * (m + m.transpose());
  out.candidates_ = std::move(candidates);
  out.derive_mask();
  return out;
}

AffinityMatrix build_affinity(const PointSet& S, const PointSet& T,
                              const std::vector<Association>& candidates,
                              const AffinityOptions& options) {
  if (!(options.sigma > 0.0) || !(options.epsilon > 0.0)) {
    throw std::invalid_argument("sigma and epsilon must be positive");
  }
  if (candidates.empty()) {
    throw std::invalid_argument("candidate list is empty");
  }
  for (const auto& a : candidates) {
    if (a.s_index >= S.size() || a.t_index >= T.size()) {
      throw std::out_of_range("association index out of range");
    }
  }

  const auto n = static_cast<Eigen::Index>(candidates.size());
  const double inv_two_sigma_sq = 1.0 / (2.0 * options.sigma * options.sigma);

  AffinityMatrix out;
  out.m_ = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ai = candidates[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& aj = candidates[static_cast<std::size_t>(j)];
      if (options.exclusive_endpoints &&
          (ai.s_index == aj.s_index || ai.t_index == aj.t_index)) {
        continue;
      }
      const double d = consistency_distance(ai, aj, S, T);
      if (d < options.epsilon) {
        const double w = std::exp(-d * d * inv_two_sigma_sq);
        out.m_(i, j) = w;
        out.m_(j, i) = w;
      }
    }
  }
  out.candidates_ = candidates;
  out.sigma_ = options.sigma;
  out.epsilon_ = options.epsilon;
  out.derive_mask();
  return out;
}

PenalizedAffinity::PenalizedAffinity(const AffinityMatrix& base, double d)
    : base_(&base), d_(d) {
  if (!(d >= 0.0)) throw std::invalid_argument("penalty d must be >= 0");
  m_d_ = base.m() - d * base.mask();
}

PenalizedAffinity penalize(const AffinityMatrix& base, double d) {
  return PenalizedAffinity(base, d);
}

}  // namespace mclip
