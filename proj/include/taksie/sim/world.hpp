#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace taksie::sim {

inline constexpr std::size_t kObsDim = 16;
inline constexpr std::size_t kActDim = 4;
inline constexpr double kMaxDelta = 0.05;

// gripper x y z grip, q_d, q_s, light, then red / green / blue block xyz.
using Observation = std::array<double, kObsDim>;

namespace obs {
inline constexpr std::size_t gx = 0, gy = 1, gz = 2, grip = 3, drawer = 4, slider = 5, light = 6;
inline constexpr std::size_t block(std::size_t b, std::size_t axis) { return 7 + 3 * b + axis; }
}  // namespace obs

// Fixed scene layout.
namespace geom {
inline constexpr double grasp_xy = 0.04;
inline constexpr double grasp_z = 0.05;

inline constexpr double drawer_x = 0.15, drawer_z = 0.15;
inline constexpr double drawer_y_closed = 0.35, drawer_travel = 0.25;
inline constexpr double slider_y = 0.90, slider_z = 0.50;
inline constexpr double slider_x_left = 0.40, slider_travel = 0.30;

inline constexpr double switch_x = 0.88, switch_y = 0.78, switch_half = 0.04, switch_top = 0.20;

inline constexpr double box_x0 = 0.80, box_x1 = 0.95, box_y0 = 0.15, box_y1 = 0.35;
inline constexpr double box_cx = 0.875, box_cy = 0.25;

inline constexpr double table_z = 0.02;
inline constexpr double push_height = 0.06;
inline constexpr double push_contact = 0.04;
inline constexpr double push_band = 0.04;
inline constexpr double min_block_gap = 0.08;

inline constexpr double drawer_handle_y(double q) { return drawer_y_closed - drawer_travel * q; }
inline constexpr double slider_handle_x(double q) { return slider_x_left + slider_travel * q; }
}  // namespace geom

struct Block {
  double x = 0.0, y = 0.0, z = 0.0;
  bool held = false;
  bool operator==(const Block&) const = default;
};

enum class Handle { none, drawer, slider };

inline constexpr std::size_t kRed = 0, kGreen = 1, kBlue = 2;

struct WorldState {
  double gx = 0.5, gy = 0.5, gz = 0.5;
  int grip = 0;
  double q_d = 0.0, q_s = 0.0;
  int light = 0;
  std::array<Block, 3> blocks{};
  Handle grasped = Handle::none;

  bool operator==(const WorldState&) const = default;
  bool holding_anything() const;
};

struct Action {
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double grip = -1.0;  // > 0 closes
  bool operator==(const Action&) const = default;
};

Action clamp_action(const Action& a);
std::array<double, kActDim> to_array(const Action& a);
Action action_from(std::span<const double> v);

WorldState step(const WorldState& s, const Action& a);
Observation observe(const WorldState& s);
// Network input scaling: [0, 1] -> [-1, 1] and back.
Observation to_signed(const Observation& o);
Observation from_signed(const Observation& o);
// Rebuilds a state from its observation; held / grasped flags are inferred
// from exact coincidence with the closed gripper.
WorldState state_from_observation(const Observation& o);

// Empty string when every physics invariant holds, otherwise a description.
std::string invariant_violation(const WorldState& s);

bool in_switch_region(double x, double y, double z);
bool in_box(const Block& b);

// Tasks --------------------------------------------------------------------

enum class TaskId : int {
  open_drawer = 0,
  close_drawer,
  slide_left,
  slide_right,
  light_on,
  light_off,
  push_left,
  push_right,
  lift_red,
  place_red,
};

inline constexpr std::size_t kTaskCount = 10;

struct Task {
  TaskId id;
  std::string_view name;
  std::string_view command;
  std::string_view negative;
};

const std::array<Task, kTaskCount>& all_tasks();
const Task& task_info(TaskId id);
// Rejects ids outside the table.
TaskId task_from_int(int id);
std::optional<TaskId> task_from_name(std::string_view name);
TaskId parse_task(std::string_view name);

inline constexpr double open_threshold = 0.8;
inline constexpr double closed_threshold = 0.2;
inline constexpr double push_distance = 0.15;
inline constexpr double lift_height = 0.5;

bool precondition(TaskId task, const WorldState& s);
// `start` is the state the task began from; push predicates compare against it.
bool success(TaskId task, const WorldState& start, const WorldState& now);

// Generic scene: every field sampled, no task precondition enforced.
WorldState sample_scene(std::uint64_t seed);
WorldState reset(TaskId task, std::uint64_t seed);

// State with the task done: relevant fields edited analytically and the
// gripper moved to the pose the scripted planner finishes at.
WorldState oracle_goal_world(TaskId task, const WorldState& s);
Observation oracle_goal_state(TaskId task, const WorldState& s);

}  // namespace taksie::sim
