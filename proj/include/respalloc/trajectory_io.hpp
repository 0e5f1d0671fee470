#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "respalloc/datasets.hpp"

namespace respalloc {

inline constexpr int kTrajectoryFormatVersion = 1;

/// First record of a trajectory file. `config` carries the effective
/// generation/scenario configuration for provenance.
struct TrajectoryHeader {
  int version = kTrajectoryFormatVersion;
  int n_agents = 2;
  int state_dim = 0;    // joint state length
  int control_dim = 0;  // per agent
  std::string scenario;
  nlohmann::json config = nlohmann::json::object();
};

struct TrajectoryFile {
  TrajectoryHeader header;
  std::vector<InteractionSample> samples;
};

/// Schema violation; `line` is 1-based, 0 when not tied to a line.
class TrajectoryFormatError : public std::runtime_error {
 public:
  TrajectoryFormatError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

TrajectoryHeader make_header(const Scenario& scenario, nlohmann::json config = nlohmann::json::object());

/// Newline-delimited JSON: header, then one record per sample
/// {trajectory_id, t, x, u: [[agent 1], [agent 2], ...], u_des?, gamma?}.
std::string format_trajectories(const TrajectoryHeader& header,
                                std::span<const InteractionSample> samples);
TrajectoryFile parse_trajectories(std::istream& in);

/// Atomic write (temp file + rename).
void save_trajectories(const std::filesystem::path& path, const TrajectoryHeader& header,
                       std::span<const InteractionSample> samples);
TrajectoryFile load_trajectories(const std::filesystem::path& path);

/// Flat CSV: trajectory_id, t, x_*, u<i>_*, u<i>_des_*, gamma_* columns.
void save_trajectories_csv(const std::filesystem::path& path, const TrajectoryHeader& header,
                           std::span<const InteractionSample> samples);

}  // namespace respalloc
