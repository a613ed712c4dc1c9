#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "taksie/sim/world.hpp"

namespace taksie::sim {

using ActionVec = std::array<double, kActDim>;

struct Trajectory {
  TaskId task = TaskId::open_drawer;
  std::string command;
  std::vector<Observation> observations;
  std::vector<ActionVec> actions;
  bool success = false;

  std::size_t length() const { return observations.size(); }
  bool operator==(const Trajectory&) const = default;
};

// Fixed train / held-out split by dataset position.
inline bool is_heldout(std::size_t index) { return index % 10 == 9; }

// Empty when the trajectory is well formed.
std::string trajectory_violation(const Trajectory& t);

class DemoTooLong : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Waypoint planner: approach, align, grasp or actuate, complete. Per-step
// length is nominal * speed_scale * U[1 - jitter, 1 + jitter], capped by the
// action clamp. Throws DemoTooLong past the step limit.
Trajectory scripted_demo(TaskId task, std::uint64_t seed, double speed_scale);
Trajectory scripted_demo_from(TaskId task, const WorldState& start, std::uint64_t seed, double speed_scale);

// Replays actions from the first observation's state; used to audit files.
WorldState replay(const Trajectory& t);

}  // namespace taksie::sim
