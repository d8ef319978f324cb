#pragma once

// Line-delimited JSON trajectory dumps. The first line is a header with the
// physics parameters; every following line is one time step of one episode:
//   {"type":"step","episode":e,"step":t,"action":a|null,"reward":r,
//    "done":b,"reason":"...","target":[x,y,r],
//    "x":[...],"y":[...],"theta":[...],"absorbed":[0|1,...]}
// Step 0 of each episode carries the initial state and a null action.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "swarmnav/swarm_dynamics.hpp"

namespace swarmnav::harness {

struct TrajectoryStep {
  long episode = 0;
  int step = 0;
  std::optional<double> action;  // commanded heading, already clipped
  int reward = 0;
  bool done = false;
  dynamics::TerminationReason reason = dynamics::TerminationReason::None;
  dynamics::TargetSpec target;
  dynamics::SwarmState state;
};

struct TrajectoryHeader {
  dynamics::PhysicsConfig physics;
  int n_swimmers = 0;
  std::string experiment;
};

class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::filesystem::path& path, const TrajectoryHeader& header);
  ~TrajectoryWriter();
  TrajectoryWriter(const TrajectoryWriter&) = delete;
  TrajectoryWriter& operator=(const TrajectoryWriter&) = delete;

  void write(const TrajectoryStep& step);

 private:
  std::unique_ptr<std::ofstream> out_;
};

struct TrajectoryDump {
  TrajectoryHeader header;
  std::vector<TrajectoryStep> steps;
};

TrajectoryDump read_trajectory(const std::filesystem::path& path);

struct ReplayReport {
  long episodes = 0;
  long steps = 0;
  long mismatches = 0;  // steps whose replayed state differs bitwise from the record
  std::string first_mismatch;
};

// Re-applies every recorded action to the recorded initial state of its
// episode and compares the resulting states exactly.
ReplayReport replay(const TrajectoryDump& dump);

// One SVG per episode: target disc, swimmer paths, start and end markers.
void render_svg(const TrajectoryDump& dump, const std::filesystem::path& dir);

}  // namespace swarmnav::harness
