#include "mclip/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mclip/parallel.hpp"
#include "mclip/random.hpp"

namespace mclip {

namespace {

constexpr double kFeasibilitySlack = 1e-9;
// exp(-x) is exactly zero in double precision beyond this.
constexpr double kKernelUnderflow = 746.0;

using Clock = std::chrono::steady_clock;

template <typename Row>
void fill_uniform(Row&& row, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index j = 0; j < row.size(); ++j) row(j) = unif(rng);
}

bool feasible(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  return (row.array() >= 0.0).all() &&
         row.norm() <= 1.0 + kFeasibilitySlack;
}

// Per-particle state that must not depend on thread scheduling.
struct Streams {
  std::vector<Rng> rngs;
  std::vector<std::uint64_t> seeds;

  Streams(std::uint64_t seed, std::size_t count) {
    rngs.reserve(count);
    seeds.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      seeds.push_back(derive_seed(seed, i));
      rngs.emplace_back(seeds.back());
    }
  }
};

Eigen::MatrixXd initial_theta(const SolverConfig& cfg, std::size_t n,
                              Streams& streams, const SolverHooks& hooks) {
  const auto rows = static_cast<Eigen::Index>(cfg.n_particles);
  const auto cols = static_cast<Eigen::Index>(n);
  if (hooks.initial_theta != nullptr) {
    if (hooks.initial_theta->rows() != rows ||
        hooks.initial_theta->cols() != cols) {
      throw std::invalid_argument("initial_theta has the wrong shape");
    }
    return *hooks.initial_theta;
  }
  Eigen::MatrixXd theta(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    fill_uniform(theta.row(i), streams.rngs[static_cast<std::size_t>(i)]);
  }
  return theta;
}

// Projects row i in place; re-initializes it when degenerate. Returns
// whether a re-initialization happened.
bool project_row(Eigen::MatrixXd& theta, Eigen::MatrixXd& acc, Eigen::Index i,
                 Rng& rng) {
  Projection p = project(theta.row(i).transpose());
  if (!p.degenerate) {
    theta.row(i) = p.u.transpose();
    return false;
  }
  fill_uniform(theta.row(i), rng);
  acc.row(i).setZero();
  // A fresh uniform draw is not on the sphere yet.
  theta.row(i) = project(theta.row(i).transpose()).u.transpose();
  return true;
}

RunReport make_report(std::string solver, const AffinityMatrix& m,
                      const SolverConfig& cfg) {
  RunReport r;
  r.solver = std::move(solver);
  r.n = m.size();
  r.n_particles = cfg.n_particles;
  return r;
}

void finish(SolverResult& out, const Eigen::MatrixXd& theta,
            const PenalizedAffinity& pa, std::size_t iterations,
            const std::vector<std::size_t>& reinits, Clock::time_point start) {
  const auto rows = theta.rows();
  out.cliques.reserve(static_cast<std::size_t>(rows));
  out.report.particles.reserve(static_cast<std::size_t>(rows));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::VectorXd u = theta.row(i).transpose();
    ParticleReport pr;
    pr.clique = extract_clique(u, pa);
    pr.objective = objective(u, pa);
    pr.iterations = iterations;
    pr.reinit_count = reinits[static_cast<std::size_t>(i)];
    out.cliques.push_back(pr.clique);
    out.report.particles.push_back(std::move(pr));
  }
  out.report.d_final = pa.d();
  out.report.degenerate_reinits =
      std::accumulate(reinits.begin(), reinits.end(), std::size_t{0});
  if (out.report.degenerate_reinits > 0) {
    out.report.warnings.push_back(
        std::to_string(out.report.degenerate_reinits) +
        " degenerate particle(s) re-initialized after projection");
  }
  out.report.wall_time_s =
      std::chrono::duration<double>(Clock::now() - start).count();
}

// Shared by the solvers and langevin_direction so both paths stay identical.
inline double langevin_coordinate(double m_d_u, double alpha, double c,
                                  double xi) {
  return alpha * 2.0 * m_d_u + c * std::sqrt(alpha) * xi;
}

}  // namespace

double noise_coefficient(NoiseScale mode) {
  return mode == NoiseScale::paper_2sqrt ? 2.0 : std::sqrt(2.0);
}

SolverConfig SolverConfig::stein() { return SolverConfig{}; }

SolverConfig SolverConfig::langevin() {
  SolverConfig cfg;
  cfg.step_size = 1.0;
  return cfg;
}

SolverConfig SolverConfig::baseline() {
  SolverConfig cfg;
  cfg.n_particles = 1;
  cfg.step_size = 1.0;
  return cfg;
}

void SolverConfig::validate() const {
  if (n_particles == 0) throw std::invalid_argument("n_particles must be >= 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be > 0");
  if (!(update_step > 0.0)) {
    throw std::invalid_argument("update_step must be > 0");
  }
  if (!(adagrad_decay > 0.0 && adagrad_decay < 1.0)) {
    throw std::invalid_argument("adagrad_decay must lie in (0, 1)");
  }
  if (!(adagrad_epsilon > 0.0)) {
    throw std::invalid_argument("adagrad_epsilon must be > 0");
  }
  if (!(kernel_bandwidth > 0.0)) {
    throw std::invalid_argument("kernel_bandwidth must be > 0");
  }
}

double objective(const Eigen::Ref<const Eigen::VectorXd>& u,
                 const PenalizedAffinity& pa) {
  if (static_cast<std::size_t>(u.size()) != pa.size()) {
    throw std::invalid_argument("hypothesis length does not match affinity");
  }
  return u.dot(pa.m_d() * u);
}

namespace {

// Row j is score(θ_j)ᵀ; M_d is symmetric. score() goes through here too so the
// single-particle SVGD direction matches it bit for bit.
Eigen::MatrixXd row_scores(const Eigen::MatrixXd& theta,
                           const PenalizedAffinity& pa) {
  return 2.0 * (theta * pa.m_d());
}

}  // namespace

Eigen::VectorXd score(const Eigen::Ref<const Eigen::VectorXd>& u,
                      const PenalizedAffinity& pa) {
  if (static_cast<std::size_t>(u.size()) != pa.size()) {
    throw std::invalid_argument("hypothesis length does not match affinity");
  }
  const Eigen::MatrixXd row = u.transpose();
  return row_scores(row, pa).transpose();
}

KernelValue rbf_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y,
                       double sigma_k) {
  if (x.size() != y.size()) throw std::invalid_argument("length mismatch");
  if (!(sigma_k > 0.0)) throw std::invalid_argument("sigma_k must be > 0");
  const double s2 = sigma_k * sigma_k;
  KernelValue k;
  k.value = std::exp(-(x - y).squaredNorm() / (2.0 * s2));
  k.grad_y = k.value * (x - y) / s2;
  return k;
}

Eigen::MatrixXd svgd_direction(const Eigen::MatrixXd& theta,
                               const PenalizedAffinity& pa, double sigma_k,
                               int jobs) {
  if (!(sigma_k > 0.0)) throw std::invalid_argument("sigma_k must be > 0");
  if (static_cast<std::size_t>(theta.cols()) != pa.size()) {
    throw std::invalid_argument("particle length does not match affinity");
  }
  const Eigen::Index np = theta.rows();
  if (np < 1) throw std::invalid_argument("need at least one particle");

  const Eigen::MatrixXd scores = row_scores(theta, pa);
  const double s2 = sigma_k * sigma_k;
  const double cutoff = kKernelUnderflow * 2.0 * s2;
  const double inv_np = 1.0 / static_cast<double>(np);

  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(np, theta.cols());
  parallel_for(static_cast<std::size_t>(np), jobs,
               [&](std::size_t begin, std::size_t end) {
                 Eigen::RowVectorXd attract(theta.cols());
                 Eigen::RowVectorXd repel(theta.cols());
                 for (auto ii = begin; ii < end; ++ii) {
                   const auto i = static_cast<Eigen::Index>(ii);
                   attract.setZero();
                   repel.setZero();
                   for (Eigen::Index j = 0; j < np; ++j) {
                     double d2 = 0.0;
                     bool far = false;
                     for (Eigen::Index c = 0; c < theta.cols(); ++c) {
                       const double diff = theta(i, c) - theta(j, c);
                       d2 += diff * diff;
                       if (d2 > cutoff) {
                         far = true;
                         break;
                       }
                     }
                     if (far) continue;
                     const double k = std::exp(-d2 / (2.0 * s2));
                     if (k == 0.0) continue;
                     attract += k * scores.row(j);
                     repel += (k / s2) * (theta.row(i) - theta.row(j));
                   }
                   phi.row(i) = (attract + repel) * inv_np;
                 }
               });
  return phi;
}

Eigen::VectorXd langevin_direction(const Eigen::Ref<const Eigen::VectorXd>& u,
                                   const PenalizedAffinity& pa, double alpha,
                                   const Eigen::Ref<const Eigen::VectorXd>& noise,
                                   NoiseScale mode) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (noise.size() != u.size()) {
    throw std::invalid_argument("noise length does not match hypothesis");
  }
  const Eigen::VectorXd m_d_u = 0.5 * score(u, pa);
  const double c = noise_coefficient(mode);
  Eigen::VectorXd out(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    out(j) = langevin_coordinate(m_d_u(j), alpha, c, noise(j));
  }
  return out;
}

Eigen::MatrixXd adagrad_rescale(const Eigen::MatrixXd& direction,
                                Eigen::MatrixXd& acc, double decay,
                                double eps) {
  if (direction.rows() != acc.rows() || direction.cols() != acc.cols()) {
    throw std::invalid_argument("accumulator shape mismatch");
  }
  if (!(decay > 0.0 && decay < 1.0)) {
    throw std::invalid_argument("decay must lie in (0, 1)");
  }
  acc = decay * acc + (1.0 - decay) * direction.cwiseAbs2();
  return direction.array() / (acc.array().sqrt() + eps);
}

Projection project(const Eigen::Ref<const Eigen::VectorXd>& u) {
  Projection p;
  const double norm = u.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    p.u = Eigen::VectorXd::Zero(u.size());
    p.degenerate = true;
    return p;
  }
  p.u = (u / norm).cwiseMax(0.0);
  p.degenerate = !(p.u.array() > 0.0).any();
  return p;
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix not square");
  const Eigen::Index n = m.rows();
  if (n == 0) return 0.0;
  Eigen::VectorXd v =
      Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double lambda = v.dot(m * v);
  for (int it = 0; it < 1000; ++it) {
    Eigen::VectorXd w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = v.dot(m * v);
    const bool done = std::abs(next - lambda) <= 1e-13 * std::abs(next);
    lambda = next;
    if (done) break;
  }
  return lambda;
}

Clique extract_clique(const Eigen::Ref<const Eigen::VectorXd>& u,
                      const PenalizedAffinity& pa) {
  const auto n = static_cast<long long>(u.size());
  const long long rounded = std::llround(objective(u, pa));
  const long long omega = std::clamp(rounded, 0LL, n);

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return u(static_cast<Eigen::Index>(a)) > u(static_cast<Eigen::Index>(b));
  });
  Clique c;
  c.indices.assign(order.begin(), order.begin() + omega);
  std::sort(c.indices.begin(), c.indices.end());
  c.omega_hat = static_cast<int>(omega);
  return c;
}

// ---------------------------------------------------------------------------

SolverResult run_stein_clipper(const AffinityMatrix& m, const SolverConfig& cfg,
                               const SolverHooks& hooks) {
  cfg.validate();
  const auto start = Clock::now();
  const std::size_t n = m.size();
  Streams streams(cfg.seed, cfg.n_particles);

  SolverResult out;
  out.report = make_report("stein", m, cfg);
  Eigen::MatrixXd theta = initial_theta(cfg, n, streams, hooks);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
  std::vector<std::size_t> reinits(cfg.n_particles, 0);

  const double delta_d = max_eigenvalue(m);
  out.report.delta_d = delta_d;
  std::vector<double> schedule;
  for (double d = 0.0; d < static_cast<double>(n);) {
    d += delta_d;
    schedule.push_back(d);
  }
  const std::size_t per_stage =
      cfg.split_stage_budget
          ? std::max<std::size_t>(1, cfg.max_inner_iters / schedule.size())
          : cfg.max_inner_iters;
  std::size_t iterations = 0;
  PenalizedAffinity pa(m, 0.0);
  std::size_t stage = 0;
  for (const double d : schedule) {
    pa = penalize(m, d);
    for (std::size_t it = 0; it < per_stage; ++it) {
      const Eigen::MatrixXd phi =
          svgd_direction(theta, pa, cfg.kernel_bandwidth, cfg.jobs);
      theta += cfg.step_size *
               adagrad_rescale(phi, acc, cfg.adagrad_decay, cfg.adagrad_epsilon);
      std::vector<std::size_t> violations(cfg.n_particles, 0);
      parallel_for(cfg.n_particles, cfg.jobs, [&](std::size_t b, std::size_t e) {
        for (auto i = b; i < e; ++i) {
          const auto row = static_cast<Eigen::Index>(i);
          if (project_row(theta, acc, row, streams.rngs[i])) ++reinits[i];
          if (!feasible(theta.row(row))) ++violations[i];
        }
      });
      out.report.feasibility_violations +=
          std::accumulate(violations.begin(), violations.end(), std::size_t{0});
      if (hooks.on_projected) hooks.on_projected(stage, it, theta);
      ++iterations;
    }
    ++stage;
  }
  out.report.stages = stage;
  finish(out, theta, pa, iterations, reinits, start);
  out.ensemble = {std::move(theta), std::move(acc), std::move(streams.seeds)};
  return out;
}

SolverResult run_langevin_clipper(const AffinityMatrix& m,
                                  const SolverConfig& cfg,
                                  const SolverHooks& hooks) {
  cfg.validate();
  const auto start = Clock::now();
  const std::size_t n = m.size();
  Streams streams(cfg.seed, cfg.n_particles);

  SolverResult out;
  out.report = make_report("langevin", m, cfg);
  out.report.stages = 1;
  Eigen::MatrixXd theta = initial_theta(cfg, n, streams, hooks);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
  std::vector<std::size_t> reinits(cfg.n_particles, 0);
  std::vector<std::size_t> violations(cfg.n_particles, 0);

  const PenalizedAffinity pa = penalize(m, static_cast<double>(n));
  const double alpha = cfg.step_size;
  const double c = noise_coefficient(cfg.noise_scale);
  const double eta = cfg.update_step;
  const double decay = cfg.adagrad_decay;
  const double eps = cfg.adagrad_epsilon;
  const auto cols = static_cast<Eigen::Index>(n);

  for (std::size_t it = 0; it < cfg.max_inner_iters; ++it) {
    // Row i holds (M_d θ_i)ᵀ.
    const Eigen::MatrixXd m_d_theta = theta * pa.m_d();
    parallel_for(cfg.n_particles, cfg.jobs, [&](std::size_t b, std::size_t e) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto i = b; i < e; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        Rng& rng = streams.rngs[i];
        for (Eigen::Index j = 0; j < cols; ++j) {
          const double xi = normal(rng);
          double g;
          double extra = 0.0;
          if (cfg.noise_through_adagrad) {
            g = langevin_coordinate(m_d_theta(row, j), alpha, c, xi);
          } else {
            g = langevin_coordinate(m_d_theta(row, j), alpha, c, 0.0);
            extra = eta * c * std::sqrt(alpha) * xi;
          }
          double& a = acc(row, j);
          a = decay * a + (1.0 - decay) * g * g;
          theta(row, j) += eta * g / (std::sqrt(a) + eps) + extra;
        }
        if (project_row(theta, acc, row, rng)) ++reinits[i];
        if (!feasible(theta.row(row))) ++violations[i];
      }
    });
    if (hooks.on_projected) hooks.on_projected(0, it, theta);
  }
  out.report.feasibility_violations =
      std::accumulate(violations.begin(), violations.end(), std::size_t{0});
  finish(out, theta, pa, cfg.max_inner_iters, reinits, start);
  out.ensemble = {std::move(theta), std::move(acc), std::move(streams.seeds)};
  return out;
}

SolverResult run_baseline_clipper(const AffinityMatrix& m,
                                  const SolverConfig& cfg,
                                  const SolverHooks& hooks) {
  cfg.validate();
  const auto start = Clock::now();
  const std::size_t n = m.size();
  SolverConfig single = cfg;
  single.n_particles = 1;
  Streams streams(cfg.seed, 1);

  SolverResult out;
  out.report = make_report("baseline", m, single);
  Eigen::MatrixXd theta = initial_theta(single, n, streams, hooks);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(1, theta.cols());
  std::vector<std::size_t> reinits(1, 0);

  // Clamp, then normalize.
  const auto feasible_point = [](const Eigen::VectorXd& v) {
    Eigen::VectorXd w = v.cwiseMax(0.0);
    const double norm = w.norm();
    if (norm > 0.0) w /= norm;
    return w;
  };

  Eigen::VectorXd u = feasible_point(theta.row(0).transpose());
  if (u.norm() == 0.0) {
    u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                  1.0 / std::sqrt(static_cast<double>(n)));
  }

  const double delta_d = max_eigenvalue(m);
  out.report.delta_d = delta_d;
  std::vector<double> schedule{0.0};
  for (double d = 0.0; d < static_cast<double>(n);) {
    d += delta_d;
    schedule.push_back(d);
  }

  constexpr int kMaxBacktracks = 40;
  constexpr double kShrink = 0.5;
  std::size_t iterations = 0;
  PenalizedAffinity pa(m, 0.0);
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    pa = penalize(m, schedule[stage]);
    double f = objective(u, pa);
    for (std::size_t it = 0; it < cfg.max_inner_iters; ++it) {
      const Eigen::VectorXd g = score(u, pa);
      double step = cfg.step_size;
      bool accepted = false;
      Eigen::VectorXd next;
      double f_next = f;
      for (int bt = 0; bt < kMaxBacktracks; ++bt, step *= kShrink) {
        next = feasible_point(u + step * g);
        if (next.norm() == 0.0) continue;
        f_next = objective(next, pa);
        if (f_next >= f) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      if (f_next < f - 1e-9) ++out.report.objective_decreases;
      if (!feasible(next.transpose())) ++out.report.feasibility_violations;
      const double moved = (next - u).norm();
      u = std::move(next);
      f = f_next;
      ++iterations;
      if (hooks.on_projected) {
        theta.row(0) = u.transpose();
        hooks.on_projected(stage, it, theta);
      }
      if (moved < 1e-10) break;
    }
  }
  out.report.stages = schedule.size();
  theta.row(0) = u.transpose();
  finish(out, theta, pa, iterations, reinits, start);
  out.ensemble = {std::move(theta), std::move(acc), std::move(streams.seeds)};
  return out;
}

}  // namespace mclip
