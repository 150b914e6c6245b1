#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "mclip/clique_oracle.hpp"
#include "mclip/metrics.hpp"
#include "mclip/registration.hpp"
#include "mclip/scenes.hpp"
#include "mclip/solvers.hpp"

namespace py = pybind11;
using namespace mclip;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

PointSet to_point_set(const Points& p) {
  PointSet s;
  s.points.reserve(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) s.points.emplace_back(p.row(i).transpose());
  validate(s);
  return s;
}

Points to_array(const PointSet& s) {
  Points p(static_cast<Eigen::Index>(s.size()), 3);
  for (std::size_t i = 0; i < s.size(); ++i) {
    p.row(static_cast<Eigen::Index>(i)) = s[i].transpose();
  }
  return p;
}

GroundMetric ground_from_string(const std::string& g) {
  if (g == "trans" || g == "translation") return GroundMetric::translation_euclidean;
  if (g == "rot" || g == "rotation") return GroundMetric::rotation_chordal;
  throw std::invalid_argument("ground metric must be 'trans' or 'rot'");
}

AffinityMatrix affinity_for(const Points& S, const Points& T, double sigma,
                            double epsilon, bool exclusive) {
  const PointSet s = to_point_set(S);
  const PointSet t = to_point_set(T);
  return build_affinity(s, t, all_pairs_candidates(s, t),
                        AffinityOptions{sigma, epsilon, exclusive});
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Particle CLIPPER solvers, clique oracle, registration and metrics";

  py::class_<AffinityMatrix>(m, "AffinityMatrix")
      .def_static("from_matrix",
                  [](const Eigen::MatrixXd& mat) { return AffinityMatrix::from_matrix(mat); },
                  py::arg("m"))
      .def_property_readonly("m", &AffinityMatrix::m)
      .def_property_readonly("mask", &AffinityMatrix::mask)
      .def_property_readonly("candidates",
                             [](const AffinityMatrix& a) {
                               std::vector<std::pair<std::size_t, std::size_t>> out;
                               for (const auto& c : a.candidates()) {
                                 out.emplace_back(c.s_index, c.t_index);
                               }
                               return out;
                             })
      .def("__len__", &AffinityMatrix::size);

  m.def("build_affinity", &affinity_for, py::arg("source"), py::arg("target"),
        py::arg("sigma") = 0.4, py::arg("epsilon") = 0.6,
        py::arg("exclusive_endpoints") = true,
        "Affinity over all source x target associations.");
  m.def("max_eigenvalue", [](const AffinityMatrix& a) { return max_eigenvalue(a); });

  py::enum_<NoiseScale>(m, "NoiseScale")
      .value("paper_2sqrt", NoiseScale::paper_2sqrt)
      .value("standard_sqrt2", NoiseScale::standard_sqrt2);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_static("stein", &SolverConfig::stein)
      .def_static("langevin", &SolverConfig::langevin)
      .def_static("baseline", &SolverConfig::baseline)
      .def_readwrite("n_particles", &SolverConfig::n_particles)
      .def_readwrite("max_inner_iters", &SolverConfig::max_inner_iters)
      .def_readwrite("step_size", &SolverConfig::step_size)
      .def_readwrite("update_step", &SolverConfig::update_step)
      .def_readwrite("adagrad_decay", &SolverConfig::adagrad_decay)
      .def_readwrite("adagrad_epsilon", &SolverConfig::adagrad_epsilon)
      .def_readwrite("kernel_bandwidth", &SolverConfig::kernel_bandwidth)
      .def_readwrite("noise_scale", &SolverConfig::noise_scale)
      .def_readwrite("noise_through_adagrad", &SolverConfig::noise_through_adagrad)
      .def_readwrite("split_stage_budget", &SolverConfig::split_stage_budget)
      .def_readwrite("seed", &SolverConfig::seed)
      .def_readwrite("jobs", &SolverConfig::jobs)
      .def("validate", &SolverConfig::validate);

  py::class_<Clique>(m, "Clique")
      .def_readonly("indices", &Clique::indices)
      .def_readonly("omega_hat", &Clique::omega_hat)
      .def("__repr__", [](const Clique& c) {
        std::string s = "Clique([";
        for (std::size_t i = 0; i < c.indices.size(); ++i) {
          s += (i ? ", " : "") + std::to_string(c.indices[i]);
        }
        return s + "])";
      });

  py::class_<RunReport>(m, "RunReport")
      .def_readonly("solver", &RunReport::solver)
      .def_readonly("stages", &RunReport::stages)
      .def_readonly("delta_d", &RunReport::delta_d)
      .def_readonly("d_final", &RunReport::d_final)
      .def_readonly("degenerate_reinits", &RunReport::degenerate_reinits)
      .def_readonly("feasibility_violations", &RunReport::feasibility_violations)
      .def_readonly("warnings", &RunReport::warnings)
      .def_readonly("wall_time_s", &RunReport::wall_time_s)
      .def_property_readonly("objectives", [](const RunReport& r) {
        std::vector<double> out;
        for (const auto& p : r.particles) out.push_back(p.objective);
        return out;
      });

  py::class_<SolverResult>(m, "SolverResult")
      .def_readonly("cliques", &SolverResult::cliques)
      .def_readonly("report", &SolverResult::report)
      .def_property_readonly("theta",
                             [](const SolverResult& r) { return r.ensemble.theta; });

  const auto bind_solver = [&m](const char* name, auto fn, const char* doc) {
    m.def(
        name,
        [fn](const AffinityMatrix& a, const SolverConfig& cfg,
             std::optional<Eigen::MatrixXd> initial_theta) {
          SolverHooks hooks;
          if (initial_theta) hooks.initial_theta = &*initial_theta;
          py::gil_scoped_release release;
          return fn(a, cfg, hooks);
        },
        py::arg("affinity"), py::arg("config"), py::arg("initial_theta") = py::none(),
        doc);
  };
  bind_solver("run_stein", &run_stein_clipper, "Stein CLIPPER (SVGD particles).");
  bind_solver("run_langevin", &run_langevin_clipper, "Langevin CLIPPER.");
  bind_solver("run_baseline", &run_baseline_clipper, "Single-solution CLIPPER ascent.");

  m.def(
      "maximal_cliques",
      [](const AffinityMatrix& a, double threshold, std::size_t cap) {
        std::vector<std::vector<std::size_t>> out;
        for (auto& c : enumerate_maximal_cliques(binarize(a, threshold), cap)) {
          out.push_back(std::move(c.indices));
        }
        return out;
      },
      py::arg("affinity"), py::arg("threshold") = 0.5, py::arg("cap") = 64,
      "Bron-Kerbosch maximal cliques of the binarized affinity.");

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
             Pose p;
             p.rotation = r;
             p.translation = t;
             return p;
           }),
           py::arg("rotation"), py::arg("translation"))
      .def_static("from_yaw", &Pose::from_yaw, py::arg("yaw"),
                  py::arg("translation") = Eigen::Vector3d::Zero())
      .def_readwrite("rotation", &Pose::rotation)
      .def_readwrite("translation", &Pose::translation)
      .def_property_readonly("yaw", &Pose::yaw)
      .def("__mul__", [](const Pose& a, const Pose& b) { return a * b; })
      .def("inverse", &Pose::inverse);

  py::class_<PoseDistribution>(m, "PoseDistribution")
      .def(py::init<>())
      .def("add", &PoseDistribution::add, py::arg("pose"), py::arg("multiplicity") = 1)
      .def_readonly("samples", &PoseDistribution::samples)
      .def_readonly("multiplicities", &PoseDistribution::multiplicities)
      .def("total", &PoseDistribution::total)
      .def("__len__", &PoseDistribution::size);

  m.def(
      "cliques_to_distribution",
      [](const std::vector<Clique>& cliques, const AffinityMatrix& a, const Points& S,
         const Points& T) {
        return cliques_to_distribution(cliques, a, to_point_set(S), to_point_set(T));
      },
      py::arg("cliques"), py::arg("affinity"), py::arg("source"), py::arg("target"));

  m.def(
      "ransac_reference",
      [](const Points& S, const Points& T, std::size_t n_trials, double inlier_dist,
         std::uint64_t seed) {
        RansacOptions o;
        o.n_trials = n_trials;
        o.inlier_dist = inlier_dist;
        o.seed = seed;
        return ransac_reference_distribution(to_point_set(S), to_point_set(T), o)
            .distribution;
      },
      py::arg("source"), py::arg("target"), py::arg("n_trials") = 100000,
      py::arg("inlier_dist") = 0.2, py::arg("seed") = 0);

  m.def(
      "energy_distance",
      [](const PoseDistribution& a, const PoseDistribution& b, const std::string& g) {
        return energy_distance(a, b, ground_from_string(g));
      },
      py::arg("a"), py::arg("b"), py::arg("ground") = "trans");
  m.def(
      "mmd",
      [](const PoseDistribution& a, const PoseDistribution& b, const std::string& g,
         std::optional<double> bandwidth) {
        return mmd(a, b, ground_from_string(g), bandwidth);
      },
      py::arg("a"), py::arg("b"), py::arg("ground") = "trans",
      py::arg("bandwidth") = py::none());
  m.def(
      "wasserstein1",
      [](const PoseDistribution& a, const PoseDistribution& b, const std::string& g) {
        return wasserstein1(a, b, ground_from_string(g));
      },
      py::arg("a"), py::arg("b"), py::arg("ground") = "trans");

  m.def(
      "generate_scene",
      [](const std::string& kind, double noise_sigma, std::uint64_t seed) {
        SceneSpec spec;
        spec.kind = scene_kind_from_string(kind);
        spec.noise_sigma = noise_sigma;
        spec.seed = seed;
        const Scene s = generate(spec);
        return py::make_tuple(to_array(s.S), to_array(s.T), s.true_pose,
                              s.symmetry_group);
      },
      py::arg("kind"), py::arg("noise_sigma") = 0.0, py::arg("seed") = 0,
      "Built-in scene: returns (source, target, true_pose, symmetry_group).");

  py::register_exception<CliqueCapExceeded>(m, "CliqueCapExceeded", PyExc_ValueError);
}
