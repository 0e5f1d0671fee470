#include "respalloc/trajectory_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "respalloc/checkpoint.hpp"

namespace respalloc {

using nlohmann::json;

TrajectoryFormatError::TrajectoryFormatError(int line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

TrajectoryHeader make_header(const Scenario& scenario, json config) {
  TrajectoryHeader h;
  h.n_agents = scenario.n_agents();
  h.state_dim = scenario.joint_state_dim();
  h.control_dim = scenario.control_dim();
  h.scenario = std::string(scenario.name());
  h.config = std::move(config);
  return h;
}

namespace {

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json per_agent(const Vec& v, int n_agents, int control_dim) {
  json out = json::array();
  for (int i = 0; i < n_agents; ++i) out.push_back(vec_json(v.segment(i * control_dim, control_dim)));
  return out;
}

// NaN and infinities are not representable in JSON; nlohmann writes null.
Vec read_vec(const json& j, int line, const char* field, int expected) {
  if (!j.is_array()) throw TrajectoryFormatError(line, std::string(field) + " must be an array");
  if (expected >= 0 && static_cast<int>(j.size()) != expected)
    throw TrajectoryFormatError(line, std::string(field) + " has length " + std::to_string(j.size()) +
                                          ", expected " + std::to_string(expected));
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number())
      throw TrajectoryFormatError(line, std::string(field) + "[" + std::to_string(k) +
                                            "] is not a finite number");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
    if (!std::isfinite(v[static_cast<Eigen::Index>(k)]))
      throw TrajectoryFormatError(line, std::string(field) + " holds a non-finite value");
  }
  return v;
}

Vec read_controls(const json& j, int line, const char* field, const TrajectoryHeader& h) {
  if (!j.is_array() || static_cast<int>(j.size()) != h.n_agents)
    throw TrajectoryFormatError(line, std::string(field) + " must hold one array per agent (" +
                                          std::to_string(h.n_agents) + ")");
  Vec v(h.n_agents * h.control_dim);
  for (int i = 0; i < h.n_agents; ++i)
    v.segment(i * h.control_dim, h.control_dim) = read_vec(j[static_cast<std::size_t>(i)], line, field, h.control_dim);
  return v;
}

TrajectoryHeader read_header(const json& j, int line) {
  if (!j.is_object()) throw TrajectoryFormatError(line, "header must be an object");
  TrajectoryHeader h;
  try {
    h.version = j.at("version").get<int>();
    h.n_agents = j.at("n_agents").get<int>();
    h.state_dim = j.at("state_dim").get<int>();
    h.control_dim = j.at("control_dim").get<int>();
    h.scenario = j.at("scenario").get<std::string>();
    if (j.contains("config")) h.config = j.at("config");
  } catch (const json::exception& e) {
    throw TrajectoryFormatError(line, std::string("malformed header: ") + e.what());
  }
  if (h.version != kTrajectoryFormatVersion)
    throw TrajectoryFormatError(line, "unsupported trajectory format version " + std::to_string(h.version));
  if (h.n_agents <= 0 || h.state_dim <= 0 || h.control_dim <= 0)
    throw TrajectoryFormatError(line, "header dimensions must be positive");
  return h;
}

}  // namespace

std::string format_trajectories(const TrajectoryHeader& h, std::span<const InteractionSample> samples) {
  std::ostringstream out;
  json header{{"version", h.version},     {"n_agents", h.n_agents},
              {"state_dim", h.state_dim}, {"control_dim", h.control_dim},
              {"scenario", h.scenario},   {"config", h.config}};
  out << header.dump() << '\n';
  for (const auto& s : samples) {
    if (s.x.size() != h.state_dim || s.u.size() != h.n_agents * h.control_dim)
      throw std::invalid_argument("sample dimensions do not match the trajectory header");
    json rec{{"trajectory_id", s.trajectory_id},
             {"t", s.t},
             {"x", vec_json(s.x)},
             {"u", per_agent(s.u, h.n_agents, h.control_dim)}};
    if (s.u_des.size()) rec["u_des"] = per_agent(s.u_des, h.n_agents, h.control_dim);
    if (s.gamma.size()) rec["gamma"] = vec_json(s.gamma);
    out << rec.dump() << '\n';
  }
  return out.str();
}

TrajectoryFile parse_trajectories(std::istream& in) {
  TrajectoryFile file;
  std::string text;
  int line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw TrajectoryFormatError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!have_header) {
      file.header = read_header(j, line);
      have_header = true;
      continue;
    }
    const TrajectoryHeader& h = file.header;
    if (!j.is_object()) throw TrajectoryFormatError(line, "record must be an object");
    InteractionSample s;
    try {
      s.trajectory_id = j.at("trajectory_id").get<int>();
      const json& t = j.at("t");
      if (!t.is_number()) throw TrajectoryFormatError(line, "t is not a finite number");
      s.t = t.get<double>();
    } catch (const json::exception& e) {
      throw TrajectoryFormatError(line, std::string("malformed record: ") + e.what());
    }
    if (!j.contains("x") || !j.contains("u"))
      throw TrajectoryFormatError(line, "record needs fields x and u");
    s.x = read_vec(j["x"], line, "x", h.state_dim);
    s.u = read_controls(j["u"], line, "u", h);
    if (j.contains("u_des") && !j["u_des"].is_null()) s.u_des = read_controls(j["u_des"], line, "u_des", h);
    if (j.contains("gamma") && !j["gamma"].is_null()) s.gamma = read_vec(j["gamma"], line, "gamma", h.n_agents);
    file.samples.push_back(std::move(s));
  }
  if (!have_header) throw TrajectoryFormatError(line, "missing header record");
  return file;
}

void save_trajectories(const std::filesystem::path& path, const TrajectoryHeader& header,
                       std::span<const InteractionSample> samples) {
  write_file_atomic(path, format_trajectories(header, samples));
}

TrajectoryFile load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TrajectoryFormatError(0, "cannot open trajectory file " + path.string());
  return parse_trajectories(in);
}

void save_trajectories_csv(const std::filesystem::path& path, const TrajectoryHeader& h,
                           std::span<const InteractionSample> samples) {
  std::ostringstream out;
  out.precision(17);
  out << "trajectory_id,t";
  for (int k = 0; k < h.state_dim; ++k) out << ",x_" << k;
  for (int i = 1; i <= h.n_agents; ++i)
    for (int k = 0; k < h.control_dim; ++k) out << ",u" << i << '_' << k;
  for (int i = 1; i <= h.n_agents; ++i)
    for (int k = 0; k < h.control_dim; ++k) out << ",u" << i << "_des_" << k;
  for (int i = 1; i <= h.n_agents; ++i) out << ",gamma_" << i;
  out << '\n';
  const auto put = [&out](const Vec& v, int n) {
    for (int k = 0; k < n; ++k) {
      out << ',';
      if (v.size()) out << v[k];
    }
  };
  for (const auto& s : samples) {
    out << s.trajectory_id << ',' << s.t;
    put(s.x, h.state_dim);
    put(s.u, h.n_agents * h.control_dim);
    put(s.u_des, h.n_agents * h.control_dim);
    put(s.gamma, h.n_agents);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace respalloc
