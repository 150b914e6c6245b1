#include "mclip/scenes.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <stdexcept>

#include "mclip/io.hpp"
#include "mclip/random.hpp"

namespace mclip {

namespace {

constexpr double kPi = std::numbers::pi;

PointSet circle(const SceneSpec& spec) {
  PointSet s;
  s.frame_id = "circle";
  for (std::size_t k = 0; k < spec.n_points; ++k) {
    const double a = 2.0 * kPi * static_cast<double>(k) /
                     static_cast<double>(spec.n_points);
    s.points.emplace_back(spec.radius * std::cos(a), spec.radius * std::sin(a),
                          0.0);
  }
  return s;
}

std::vector<Pose> circle_symmetries(const SceneSpec& spec) {
  std::vector<Pose> g;
  const auto n = static_cast<double>(spec.n_points);
  for (std::size_t k = 0; k < spec.n_points; ++k) {
    g.push_back(Pose::from_yaw(2.0 * kPi * static_cast<double>(k) / n));
  }
  // Flips: half turns about in-plane axes.
  const Pose flip = Pose::from_axis_angle(Eigen::Vector3d::UnitX(), kPi);
  for (std::size_t k = 0; k < spec.n_points; ++k) {
    g.push_back(Pose::from_yaw(2.0 * kPi * static_cast<double>(k) / n) * flip);
  }
  return g;
}

PointSet two_lines(const SceneSpec& spec) {
  PointSet s;
  s.frame_id = "two_lines";
  for (double y : {0.0, spec.line_separation}) {
    for (std::size_t k = 0; k < spec.points_per_line; ++k) {
      s.points.emplace_back(static_cast<double>(k) * spec.spacing, y, 0.0);
    }
  }
  return s;
}

std::vector<Pose> two_lines_symmetries(const SceneSpec& spec) {
  const double length =
      static_cast<double>(spec.points_per_line - 1) * spec.spacing;
  const Eigen::Vector3d centre(length / 2.0, spec.line_separation / 2.0, 0.0);
  // Half turns about the three axes through the centre of the point grid.
  std::vector<Pose> flips;
  flips.push_back(Pose::identity());
  for (const Eigen::Vector3d axis :
       {Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX(),
        Eigen::Vector3d::UnitY()}) {
    Pose f = Pose::from_axis_angle(axis, kPi);
    f.translation = centre - f.rotation * centre;
    flips.push_back(f);
  }
  std::vector<long> shifts{0};
  const auto reach = static_cast<long>(spec.points_per_line) - 2;
  for (long k = 1; k <= reach; ++k) {
    shifts.push_back(k);
    shifts.push_back(-k);
  }
  std::vector<Pose> g;
  for (long k : shifts) {
    const Pose shift = Pose::from_yaw(
        0.0, Eigen::Vector3d(static_cast<double>(k) * spec.spacing, 0, 0));
    for (const auto& f : flips) g.push_back(shift * f);
  }
  return g;
}

std::vector<Eigen::Vector3d> default_template() {
  // chair, desk, keyboard, monitor centroids
  return {{0.0, 0.0, 0.45},
          {0.0, 0.8, 0.75},
          {0.25, 0.65, 0.78},
          {-0.3, 1.05, 1.0}};
}

// Station frames of one U-shaped pod, facing the inside of the U.
std::vector<Pose> pod_stations(const SceneSpec& spec) {
  std::vector<Pose> st;
  const std::size_t n = spec.stations_per_pod;
  const std::size_t base = n / 3 + (n % 3 == 2 ? 1 : 0);
  const std::size_t arm_left = (n - base) / 2;
  const std::size_t arm_right = n - base - arm_left;
  const double p = spec.station_pitch;
  const double width = static_cast<double>(base + 1) * p;
  for (std::size_t k = 0; k < arm_left; ++k) {
    st.push_back(Pose::from_yaw(
        -kPi / 2.0, Eigen::Vector3d(0.0, static_cast<double>(k + 1) * p, 0.0)));
  }
  for (std::size_t k = 0; k < base; ++k) {
    st.push_back(Pose::from_yaw(
        0.0, Eigen::Vector3d(static_cast<double>(k + 1) * p, 0.0, 0.0)));
  }
  for (std::size_t k = 0; k < arm_right; ++k) {
    st.push_back(Pose::from_yaw(
        kPi / 2.0,
        Eigen::Vector3d(width, static_cast<double>(k + 1) * p, 0.0)));
  }
  return st;
}

struct ClusterLayout {
  std::vector<Pose> stations;
  Pose pod_swap;
};

ClusterLayout cluster_layout(const SceneSpec& spec) {
  const std::vector<Pose> pod = pod_stations(spec);
  double max_y = 0.0;
  double max_x = 0.0;
  for (const auto& p : pod) {
    max_x = std::max(max_x, p.translation.x());
    max_y = std::max(max_y, p.translation.y());
  }
  ClusterLayout out;
  // Pod i+1 is pod i turned a half turn about z, placed across the aisle.
  Pose step = Pose::from_yaw(kPi);
  step.translation = Eigen::Vector3d(max_x, 2.0 * max_y + spec.pod_gap, 0.0);
  Pose place = Pose::identity();
  for (std::size_t k = 0; k < spec.pods; ++k) {
    for (const auto& st : pod) out.stations.push_back(place * st);
    place = step * place;
  }
  out.pod_swap = step;
  return out;
}

PointSet repeated_clusters(const SceneSpec& spec) {
  const auto tmpl =
      spec.cluster_template.empty() ? default_template() : spec.cluster_template;
  PointSet s;
  s.frame_id = "repeated_clusters";
  for (const auto& st : cluster_layout(spec).stations) {
    for (const auto& p : tmpl) s.points.push_back(st * p);
  }
  return s;
}

std::vector<Pose> cluster_symmetries(const SceneSpec& spec) {
  const ClusterLayout layout = cluster_layout(spec);
  std::vector<Pose> g{Pose::identity()};
  if (spec.pods == 2) g.push_back(layout.pod_swap);
  const auto known = [&](const Pose& p) {
    for (const auto& q : g) {
      if ((p.translation - q.translation).norm() < 1e-9 &&
          chordal_distance(p.rotation, q.rotation) < 1e-9) {
        return true;
      }
    }
    return false;
  };
  for (const auto& a : layout.stations) {
    for (const auto& b : layout.stations) {
      const Pose m = b * a.inverse();
      if (!known(m)) g.push_back(m);
    }
  }
  return g;
}

PointSet triangle() {
  PointSet s;
  s.frame_id = "triangle_toy";
  s.points = {{0.0, 3.0, 0.0}, {-1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  return s;
}

Pose default_pose(SceneKind kind) {
  if (kind == SceneKind::triangle_toy) {
    return Pose::from_yaw(kPi / 6.0, Eigen::Vector3d(1.0, 2.0, 0.0));
  }
  return Pose::identity();
}

}  // namespace

std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::circle: return "circle";
    case SceneKind::two_lines: return "two_lines";
    case SceneKind::repeated_clusters: return "repeated_clusters";
    case SceneKind::triangle_toy: return "triangle_toy";
    case SceneKind::from_file: return "from_file";
  }
  return "unknown";
}

SceneKind scene_kind_from_string(const std::string& s) {
  for (auto k : {SceneKind::circle, SceneKind::two_lines,
                 SceneKind::repeated_clusters, SceneKind::triangle_toy,
                 SceneKind::from_file}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown scene kind '" + s + "'");
}

void SceneSpec::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(name) + " must be > 0");
    }
  };
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw std::invalid_argument("noise_sigma must be >= 0");
  }
  if (applied_pose && !applied_pose->is_valid(1e-9)) {
    throw std::invalid_argument("applied_pose rotation is not proper");
  }
  switch (kind) {
    case SceneKind::circle:
      positive(radius, "radius");
      if (n_points < 3) throw std::invalid_argument("circle needs >= 3 points");
      break;
    case SceneKind::two_lines:
      positive(spacing, "spacing");
      positive(line_separation, "line_separation");
      if (points_per_line < 2) {
        throw std::invalid_argument("two_lines needs >= 2 points per line");
      }
      break;
    case SceneKind::repeated_clusters:
      positive(station_pitch, "station_pitch");
      positive(pod_gap, "pod_gap");
      if (stations_per_pod < 1 || pods < 1) {
        throw std::invalid_argument("repeated_clusters needs stations and pods");
      }
      if (!cluster_template.empty() && cluster_template.size() < 3) {
        throw std::invalid_argument("cluster template needs >= 3 points");
      }
      break;
    case SceneKind::triangle_toy:
      break;
    case SceneKind::from_file:
      if (path.empty()) throw std::invalid_argument("from_file needs a path");
      break;
  }
}

Scene generate(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  switch (spec.kind) {
    case SceneKind::circle:
      scene.S = circle(spec);
      scene.symmetry_group = circle_symmetries(spec);
      break;
    case SceneKind::two_lines:
      scene.S = two_lines(spec);
      scene.symmetry_group = two_lines_symmetries(spec);
      break;
    case SceneKind::repeated_clusters:
      scene.S = repeated_clusters(spec);
      scene.symmetry_group = cluster_symmetries(spec);
      break;
    case SceneKind::triangle_toy: {
      scene.S = triangle();
      Pose flip = Pose::from_axis_angle(Eigen::Vector3d::UnitY(), kPi);
      scene.symmetry_group = {Pose::identity(), flip};
      break;
    }
    case SceneKind::from_file: {
      scene.S = read_point_set(spec.path);
      scene.symmetry_group = {Pose::identity()};
      if (auto side = read_scene_sidecar_if_present(spec.path)) {
        scene.symmetry_group = side->symmetry_group;
      }
      break;
    }
  }
  scene.true_pose = spec.applied_pose.value_or(default_pose(spec.kind));
  scene.T.frame_id = scene.S.frame_id + "_view";
  Rng rng(derive_seed(spec.seed, 0x5ce7e));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& p : scene.S.points) {
    Eigen::Vector3d q = scene.true_pose * p;
    if (spec.noise_sigma > 0.0) {
      for (int c = 0; c < 3; ++c) q(c) += spec.noise_sigma * noise(rng);
    }
    scene.T.points.push_back(q);
  }
  return scene;
}

PointSet subset(const PointSet& s, const std::vector<std::size_t>& indices) {
  PointSet out;
  out.frame_id = s.frame_id;
  out.points.reserve(indices.size());
  for (auto i : indices) {
    if (i >= s.size()) throw std::out_of_range("subset index out of range");
    out.points.push_back(s.points[i]);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> matched_indices(
    const PointSet& s, const Pose& g, double tol) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Eigen::Vector3d q = g * s.points[i];
    for (std::size_t j = 0; j < s.size(); ++j) {
      if ((q - s.points[j]).norm() <= tol) {
        out.emplace_back(i, j);
        break;
      }
    }
  }
  return out;
}

std::uint64_t hash_points(const PointSet& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&h](const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : s.points) {
    for (int c = 0; c < 3; ++c) {
      const double v = p(c) == 0.0 ? 0.0 : p(c);  // fold -0.0
      feed(&v, sizeof v);
    }
  }
  return h;
}

}  // namespace mclip
