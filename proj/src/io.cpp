#include "mclip/io.hpp"

#include <array>
#include <charconv>

#include <fstream>
#include <sstream>

namespace mclip {

namespace fs = std::filesystem;

namespace {

Eigen::Vector3d vec3(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw FormatError(std::string(what) + " must be an array of 3 numbers");
  }
  Eigen::Vector3d v;
  for (int c = 0; c < 3; ++c) {
    if (!j[static_cast<std::size_t>(c)].is_number()) {
      throw FormatError(std::string(what) + " must contain numbers");
    }
    v(c) = j[static_cast<std::size_t>(c)].get<double>();
  }
  return v;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

}  // namespace

Json to_json(const PointSet& s) {
  Json pts = Json::array();
  for (const auto& p : s.points) pts.push_back({p.x(), p.y(), p.z()});
  return {{"frame_id", s.frame_id}, {"points", pts}};
}

PointSet point_set_from_json(const Json& j) {
  PointSet s;
  const Json& id = field(j, "frame_id");
  if (!id.is_string()) throw FormatError("frame_id must be a string");
  s.frame_id = id.get<std::string>();
  const Json& pts = field(j, "points");
  if (!pts.is_array()) throw FormatError("points must be an array");
  for (const auto& p : pts) s.points.push_back(vec3(p, "point"));
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return s;
}

Json to_json(const Pose& p) {
  const Eigen::Quaterniond q = p.quaternion();
  return {{"quaternion", {q.w(), q.x(), q.y(), q.z()}},
          {"translation",
           {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

Pose pose_from_json(const Json& j) {
  const Json& q = field(j, "quaternion");
  if (!q.is_array() || q.size() != 4) {
    throw FormatError("quaternion must be [w, x, y, z]");
  }
  for (const auto& c : q) {
    if (!c.is_number()) throw FormatError("quaternion must contain numbers");
  }
  const Eigen::Quaterniond quat(q[0].get<double>(), q[1].get<double>(),
                                q[2].get<double>(), q[3].get<double>());
  if (!(quat.norm() > 0.0)) throw FormatError("quaternion has zero norm");
  return Pose::from_quaternion(quat, vec3(field(j, "translation"), "translation"));
}

Json to_json(const PoseDistribution& d) {
  d.validate();
  Json out = Json::array();
  for (std::size_t i = 0; i < d.size(); ++i) {
    Json e = to_json(d.samples[i]);
    e["multiplicity"] = d.multiplicities[i];
    out.push_back(std::move(e));
  }
  return out;
}

PoseDistribution pose_distribution_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("pose distribution must be a JSON list");
  PoseDistribution d;
  for (const auto& e : j) {
    const Json& m = field(e, "multiplicity");
    if (!m.is_number_unsigned() || m.get<std::size_t>() == 0) {
      throw FormatError("multiplicity must be a positive integer");
    }
    d.add(pose_from_json(e), m.get<std::size_t>());
  }
  return d;
}

std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

std::string to_csv(const PoseDistribution& d) {
  d.validate();
  std::ostringstream os;
  os << "qw,qx,qy,qz,tx,ty,tz,mult\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto q = d.samples[i].quaternion();
    const auto& t = d.samples[i].translation;
    for (double v : {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()}) {
      os << format_number(v) << ',';
    }
    os << d.multiplicities[i] << '\n';
  }
  return os.str();
}

PoseDistribution pose_distribution_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) ||
      line.rfind("qw,qx,qy,qz,tx,ty,tz,mult", 0) != 0) {
    throw FormatError("CSV header must be qw,qx,qy,qz,tx,ty,tz,mult");
  }
  PoseDistribution d;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) {
      throw FormatError("CSV row " + std::to_string(row) + " needs 8 columns");
    }
    double v[7];
    long long mult = 0;
    try {
      for (int c = 0; c < 7; ++c) v[c] = std::stod(cells[static_cast<std::size_t>(c)]);
      mult = std::stoll(cells[7]);
    } catch (const std::exception&) {
      throw FormatError("CSV row " + std::to_string(row) + " is not numeric");
    }
    if (mult <= 0) {
      throw FormatError("CSV row " + std::to_string(row) +
                        " has a non-positive multiplicity");
    }
    const Eigen::Quaterniond q(v[0], v[1], v[2], v[3]);
    if (!(q.norm() > 0.0)) throw FormatError("quaternion has zero norm");
    d.add(Pose::from_quaternion(q, Eigen::Vector3d(v[4], v[5], v[6])),
          static_cast<std::size_t>(mult));
  }
  return d;
}

Json to_json(const std::vector<Clique>& cliques) {
  Json out = Json::array();
  for (const auto& c : cliques) {
    out.push_back({{"indices", c.indices}, {"omega_hat", c.omega_hat}});
  }
  return out;
}

std::vector<Clique> cliques_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("clique list must be a JSON list");
  std::vector<Clique> out;
  for (const auto& e : j) {
    Clique c;
    try {
      c.indices = field(e, "indices").get<std::vector<std::size_t>>();
      c.omega_hat = field(e, "omega_hat").get<int>();
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(ex.what());
    }
    out.push_back(std::move(c));
  }
  return out;
}

Json to_json(const RunReport& r, bool include_timing) {
  Json particles = Json::array();
  for (const auto& p : r.particles) {
    particles.push_back({{"clique", p.clique.indices},
                         {"omega_hat", p.clique.omega_hat},
                         {"objective", p.objective},
                         {"iterations", p.iterations},
                         {"reinit_count", p.reinit_count}});
  }
  Json out = {{"solver", r.solver},
              {"n", r.n},
              {"n_particles", r.n_particles},
              {"stages", r.stages},
              {"delta_d", r.delta_d},
              {"d_final", r.d_final},
              {"degenerate_reinits", r.degenerate_reinits},
              {"feasibility_violations", r.feasibility_violations},
              {"objective_decreases", r.objective_decreases},
              {"warnings", r.warnings},
              {"particles", particles}};
  if (include_timing) out["wall_time_s"] = r.wall_time_s;
  return out;
}

Json to_json(const std::vector<MetricRecord>& records) {
  Json out = Json::array();
  for (const auto& r : records) {
    out.push_back(
        {{"metric", r.metric}, {"component", r.component}, {"value", r.value}});
  }
  return out;
}

Json to_json(const SceneSidecar& s) {
  Json group = Json::array();
  for (const auto& g : s.symmetry_group) group.push_back(to_json(g));
  return {{"true_pose", to_json(s.true_pose)}, {"symmetry_group", group}};
}

SceneSidecar scene_sidecar_from_json(const Json& j) {
  SceneSidecar s;
  s.true_pose = pose_from_json(field(j, "true_pose"));
  const Json& g = field(j, "symmetry_group");
  if (!g.is_array()) throw FormatError("symmetry_group must be a list");
  for (const auto& p : g) s.symmetry_group.push_back(pose_from_json(p));
  return s;
}

fs::path sidecar_path(const fs::path& scene_file) {
  fs::path p = scene_file;
  p.replace_extension(".scene.json");
  return p;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

PointSet read_point_set(const fs::path& path) {
  try {
    return point_set_from_json(read_json(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

void write_point_set(const fs::path& path, const PointSet& s) {
  write_json(path, to_json(s));
}

PoseDistribution read_pose_distribution(const fs::path& path) {
  try {
    if (path.extension() == ".csv") {
      return pose_distribution_from_csv(read_text(path));
    }
    return pose_distribution_from_json(read_json(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

std::optional<SceneSidecar> read_scene_sidecar_if_present(
    const fs::path& scene_file) {
  const fs::path side = sidecar_path(scene_file);
  if (!fs::exists(side)) return std::nullopt;
  return scene_sidecar_from_json(read_json(side));
}

}  // namespace mclip
