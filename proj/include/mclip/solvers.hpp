#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mclip/association.hpp"

namespace mclip {

/// Coefficient c of the Langevin noise term c·√α·ξ.
enum class NoiseScale {
  paper_2sqrt,     ///< c = 2
  standard_sqrt2,  ///< c = √2, the unadjusted Langevin algorithm
};

double noise_coefficient(NoiseScale mode);

/// Tunables shared by the three solvers. Use the named factories for the
/// per-solver defaults; a default-constructed config matches stein().
struct SolverConfig {
  std::size_t n_particles = 1000;
  /// Stein and baseline: per homotopy stage (see split_stage_budget).
  /// Langevin: total.
  std::size_t max_inner_iters = 1000;
  /// Stein: parameter step. Langevin: α in α·score + c·√α·ξ.
  /// Baseline: initial trial step of the backtracking line search.
  double step_size = 0.001;
  /// Langevin only: parameter step η in θ ← θ + η·AdaGrad(φ).
  double update_step = 0.01;
  double adagrad_decay = 0.9;
  double adagrad_epsilon = 1e-8;
  double kernel_bandwidth = 0.005;
  NoiseScale noise_scale = NoiseScale::paper_2sqrt;
  /// Langevin only: when false, AdaGrad rescales the drift alone and the
  /// noise is added as η·c·√α·ξ.
  bool noise_through_adagrad = true;
  /// Stein only: treat max_inner_iters as a total and divide it evenly over
  /// the homotopy stages.
  bool split_stage_budget = false;
  std::uint64_t seed = 0;
  /// Worker threads for per-particle work. Results do not depend on it.
  int jobs = 1;

  static SolverConfig stein();
  static SolverConfig langevin();
  static SolverConfig baseline();

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Association set selected by one particle.
struct Clique {
  std::vector<std::size_t> indices;  ///< sorted ascending
  int omega_hat = 0;                 ///< == indices.size()

  friend bool operator==(const Clique&, const Clique&) = default;
  friend auto operator<=>(const Clique& a, const Clique& b) {
    return a.indices <=> b.indices;
  }
};

/// One hypothesis vector per row.
struct ParticleEnsemble {
  Eigen::MatrixXd theta;
  Eigen::MatrixXd adagrad_acc;
  std::vector<std::uint64_t> rng_seeds;
};

// ---------------------------------------------------------------------------
// Building blocks

/// uᵀ M_d u
double objective(const Eigen::Ref<const Eigen::VectorXd>& u,
                 const PenalizedAffinity& pa);

/// ∇F_d(u) = 2 M_d u
Eigen::VectorXd score(const Eigen::Ref<const Eigen::VectorXd>& u,
                      const PenalizedAffinity& pa);

struct KernelValue {
  double value = 0.0;
  Eigen::VectorXd grad_y;  ///< ∂k(x, y)/∂y = k·(x − y)/σ_k²
};

KernelValue rbf_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y,
                       double sigma_k);

/// SVGD direction for every particle (row) of theta. Row i is
///   (1/N) Σ_j [ score(θ_j)·k(θ_i, θ_j) + ∇_{θ_j} k(θ_i, θ_j) ].
/// Kernel entries that underflow to zero are skipped.
Eigen::MatrixXd svgd_direction(const Eigen::MatrixXd& theta,
                               const PenalizedAffinity& pa, double sigma_k,
                               int jobs = 1);

/// α·score(u) + c·√α·noise, before AdaGrad.
Eigen::VectorXd langevin_direction(const Eigen::Ref<const Eigen::VectorXd>& u,
                                   const PenalizedAffinity& pa, double alpha,
                                   const Eigen::Ref<const Eigen::VectorXd>& noise,
                                   NoiseScale mode);

/// Decayed squared-gradient rescaling, per coordinate:
///   acc ← decay·acc + (1 − decay)·g²,  out = g / (√acc + eps).
Eigen::MatrixXd adagrad_rescale(const Eigen::MatrixXd& direction,
                                Eigen::MatrixXd& acc, double decay,
                                double eps = 1e-8);

struct Projection {
  Eigen::VectorXd u;
  bool degenerate = false;  ///< nothing positive survived; u is zero
};

/// max(u/‖u‖, 0): normalize, then clamp. The result may have norm < 1.
Projection project(const Eigen::Ref<const Eigen::VectorXd>& u);

/// Largest eigenvalue of a symmetric entrywise-nonnegative matrix by power
/// iteration from the all-ones vector (at most 1000 iterations).
double max_eigenvalue(const Eigen::MatrixXd& m);
inline double max_eigenvalue(const AffinityMatrix& m) {
  return max_eigenvalue(m.m());
}

/// Top round(uᵀM_d u) coordinates of u (clamped to [0, n]); ties go to the
/// lower index.
Clique extract_clique(const Eigen::Ref<const Eigen::VectorXd>& u,
                      const PenalizedAffinity& pa);

// ---------------------------------------------------------------------------
// Solvers

struct ParticleReport {
  Clique clique;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::size_t reinit_count = 0;
};

struct RunReport {
  std::string solver;
  std::size_t n = 0;
  std::size_t n_particles = 0;
  std::size_t stages = 0;
  double delta_d = 0.0;
  double d_final = 0.0;
  std::vector<ParticleReport> particles;
  std::size_t degenerate_reinits = 0;
  /// Post-projection rows that were negative or had norm > 1 + 1e-9.
  std::size_t feasibility_violations = 0;
  /// Baseline only: accepted steps that lowered the objective by > 1e-9.
  std::size_t objective_decreases = 0;
  std::vector<std::string> warnings;
  double wall_time_s = 0.0;
};

struct SolverResult {
  std::vector<Clique> cliques;
  ParticleEnsemble ensemble;
  RunReport report;
};

/// Optional instrumentation for tests and the bench harness.
struct SolverHooks {
  /// Replaces the seeded uniform initialization (n_particles × n).
  const Eigen::MatrixXd* initial_theta = nullptr;
  /// Called after every projection with (stage, iteration, theta).
  std::function<void(std::size_t, std::size_t, const Eigen::MatrixXd&)>
      on_projected;
};

SolverResult run_stein_clipper(const AffinityMatrix& m, const SolverConfig& cfg,
                               const SolverHooks& hooks = {});

SolverResult run_langevin_clipper(const AffinityMatrix& m,
                                  const SolverConfig& cfg,
                                  const SolverHooks& hooks = {});

/// Single-particle projected gradient ascent with backtracking line search
/// over the homotopy schedule d = 0, Δd, 2Δd, ... (Δd = λ₁(M)).
SolverResult run_baseline_clipper(const AffinityMatrix& m,
                                  const SolverConfig& cfg,
                                  const SolverHooks& hooks = {});

}  // namespace mclip
