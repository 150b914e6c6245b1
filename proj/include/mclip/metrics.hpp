#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mclip/registration.hpp"

namespace mclip {

enum class GroundMetric {
  translation_euclidean,  ///< ‖t₁ − t₂‖
  rotation_chordal,       ///< ‖R₁ − R₂‖_F
};

std::string to_string(GroundMetric g);

/// |A|×|B| ground distances between samples. Rotations are re-orthonormalized
/// first when they are not proper within 1e-9. Throws on empty input.
Eigen::MatrixXd pairwise_distances(const PoseDistribution& a,
                                   const PoseDistribution& b, GroundMetric g);

/// 2·E d(X,Y) − E d(X,X′) − E d(Y,Y′) under the multiplicity-weighted
/// empirical measures.
double energy_distance(const PoseDistribution& a, const PoseDistribution& b,
                       GroundMetric g);

/// Bandwidth from the weighted median of pairwise ground distances of the
/// pooled multiset (pairs of distinct copies). Falls back to 1 when the
/// median is 0.
double median_heuristic_bandwidth(const PoseDistribution& a,
                                  const PoseDistribution& b, GroundMetric g);

/// Squared MMD, biased V-statistic, Gaussian kernel exp(−d²/(2h²)).
/// nullopt bandwidth selects the median heuristic.
double mmd(const PoseDistribution& a, const PoseDistribution& b, GroundMetric g,
           std::optional<double> bandwidth = std::nullopt);

/// Exact Wasserstein-1 between the multiplicity-weighted empirical measures.
double wasserstein1(const PoseDistribution& a, const PoseDistribution& b,
                    GroundMetric g);

/// Minimum-cost transportation with integer supplies and demands of equal
/// total; returns Σ flow·cost. Dense successive shortest paths.
double min_cost_transport(const Eigen::MatrixXd& cost,
                          std::span<const std::int64_t> supply,
                          std::span<const std::int64_t> demand);

struct MetricRecord {
  std::string metric;     ///< "mmd" | "ed" | "w1"
  std::string component;  ///< "trans" | "rot"
  double value = 0.0;
};

/// Every requested metric on both components, in the order metrics ×
/// {trans, rot}. Unknown metric names throw std::invalid_argument.
std::vector<MetricRecord> compare_distributions(
    const PoseDistribution& a, const PoseDistribution& b,
    const std::vector<std::string>& metrics = {"mmd", "ed", "w1"},
    std::optional<double> mmd_bandwidth = std::nullopt);

}  // namespace mclip
