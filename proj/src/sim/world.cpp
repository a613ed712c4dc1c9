#include "taksie/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "taksie/numerics/rng.hpp"
#include "taksie/sim/plan_constants.hpp"

namespace taksie::sim {
namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

bool in01(double v) { return v >= 0.0 && v <= 1.0; }

bool within_grasp(double gx, double gy, double gz, double x, double y, double z) {
  return std::hypot(gx - x, gy - y) <= geom::grasp_xy && std::abs(gz - z) <= geom::grasp_z;
}

double dist3(double ax, double ay, double az, double bx, double by, double bz) {
  return std::sqrt((ax - bx) * (ax - bx) + (ay - by) * (ay - by) + (az - bz) * (az - bz));
}

void pin_to_drawer(WorldState& s) {
  s.gx = geom::drawer_x;
  s.gy = geom::drawer_handle_y(s.q_d);
  s.gz = geom::drawer_z;
}

void pin_to_slider(WorldState& s) {
  s.gx = geom::slider_handle_x(s.q_s);
  s.gy = geom::slider_y;
  s.gz = geom::slider_z;
}

// Closing: attach the nearest graspable thing in range, if any.
void attach(WorldState& s) {
  double best = 1e9;
  int pick = -1;  // 0..2 block, 3 drawer, 4 slider
  for (int b = 0; b < 3; ++b) {
    const Block& k = s.blocks[b];
    if (within_grasp(s.gx, s.gy, s.gz, k.x, k.y, k.z)) {
      const double d = dist3(s.gx, s.gy, s.gz, k.x, k.y, k.z);
      if (d < best) best = d, pick = b;
    }
  }
  const double dy = geom::drawer_handle_y(s.q_d);
  if (within_grasp(s.gx, s.gy, s.gz, geom::drawer_x, dy, geom::drawer_z)) {
    const double d = dist3(s.gx, s.gy, s.gz, geom::drawer_x, dy, geom::drawer_z);
    if (d < best) best = d, pick = 3;
  }
  const double sx = geom::slider_handle_x(s.q_s);
  if (within_grasp(s.gx, s.gy, s.gz, sx, geom::slider_y, geom::slider_z)) {
    const double d = dist3(s.gx, s.gy, s.gz, sx, geom::slider_y, geom::slider_z);
    if (d < best) best = d, pick = 4;
  }
  if (pick < 0) return;
  if (pick == 3) {
    s.grasped = Handle::drawer;
    pin_to_drawer(s);
  } else if (pick == 4) {
    s.grasped = Handle::slider;
    pin_to_slider(s);
  } else {
    Block& k = s.blocks[pick];
    k.held = true;
    k.x = s.gx, k.y = s.gy, k.z = s.gz;
  }
}

}  // namespace

bool WorldState::holding_anything() const {
  if (grasped != Handle::none) return true;
  return std::any_of(blocks.begin(), blocks.end(), [](const Block& b) { return b.held; });
}

Action clamp_action(const Action& a) {
  auto c = [](double v) { return std::isfinite(v) ? std::clamp(v, -kMaxDelta, kMaxDelta) : 0.0; };
  return {c(a.dx), c(a.dy), c(a.dz), std::isfinite(a.grip) ? std::clamp(a.grip, -1.0, 1.0) : -1.0};
}

std::array<double, kActDim> to_array(const Action& a) { return {a.dx, a.dy, a.dz, a.grip}; }

Action action_from(std::span<const double> v) {
  if (v.size() != kActDim) throw std::invalid_argument("action needs 4 values");
  return {v[0], v[1], v[2], v[3]};
}

bool in_switch_region(double x, double y, double z) {
  return std::abs(x - geom::switch_x) <= geom::switch_half && std::abs(y - geom::switch_y) <= geom::switch_half &&
         z <= geom::switch_top;
}

bool in_box(const Block& b) {
  return b.x >= geom::box_x0 && b.x <= geom::box_x1 && b.y >= geom::box_y0 && b.y <= geom::box_y1;
}

WorldState step(const WorldState& s, const Action& raw) {
  const Action a = clamp_action(raw);
  WorldState n = s;
  const bool close_cmd = a.grip > 0.0;

  // Grip transitions happen at the pre-motion pose.
  if (!close_cmd && s.grip == 1) {
    n.grip = 0;
    for (Block& b : n.blocks) b.held = false;
    n.grasped = Handle::none;
  } else if (close_cmd && s.grip == 0) {
    n.grip = 1;
    attach(n);
  }

  const double prev_x = n.gx;
  if (n.grasped == Handle::drawer) {
    const double y = std::clamp(n.gy + a.dy, geom::drawer_handle_y(1.0), geom::drawer_handle_y(0.0));
    n.q_d = clamp01((geom::drawer_y_closed - y) / geom::drawer_travel);
    pin_to_drawer(n);
  } else if (n.grasped == Handle::slider) {
    const double x = std::clamp(n.gx + a.dx, geom::slider_handle_x(0.0), geom::slider_handle_x(1.0));
    n.q_s = clamp01((x - geom::slider_x_left) / geom::slider_travel);
    pin_to_slider(n);
  } else {
    n.gx = clamp01(n.gx + a.dx);
    n.gy = clamp01(n.gy + a.dy);
    n.gz = clamp01(n.gz + a.dz);
  }

  bool holding_block = false;
  for (Block& b : n.blocks) {
    if (b.held) {
      b.x = n.gx, b.y = n.gy, b.z = n.gz;
      holding_block = true;
    }
  }

  // A closed, empty gripper low over the table shoves blocks along x.
  if (n.grip == 1 && n.grasped == Handle::none && !holding_block && n.gz < geom::push_height) {
    for (Block& b : n.blocks) {
      if (std::abs(n.gy - b.y) >= geom::push_band) continue;
      // The 1e-9 slack keeps contact across steps despite rounding in b.x.
      if (n.gx > prev_x && prev_x <= b.x - geom::push_contact + 1e-9 && n.gx > b.x - geom::push_contact) {
        b.x = std::min(1.0, n.gx + geom::push_contact);
      } else if (n.gx < prev_x && prev_x >= b.x + geom::push_contact - 1e-9 && n.gx < b.x + geom::push_contact) {
        b.x = std::max(0.0, n.gx - geom::push_contact);
      }
    }
  }

  if (n.grip == 1 && in_switch_region(n.gx, n.gy, n.gz) && !in_switch_region(s.gx, s.gy, s.gz)) {
    n.light = 1 - n.light;
  }
  return n;
}

Observation observe(const WorldState& s) {
  Observation o{};
  o[obs::gx] = s.gx;
  o[obs::gy] = s.gy;
  o[obs::gz] = s.gz;
  o[obs::grip] = s.grip;
  o[obs::drawer] = s.q_d;
  o[obs::slider] = s.q_s;
  o[obs::light] = s.light;
  for (std::size_t b = 0; b < 3; ++b) {
    o[obs::block(b, 0)] = s.blocks[b].x;
    o[obs::block(b, 1)] = s.blocks[b].y;
    o[obs::block(b, 2)] = s.blocks[b].z;
  }
  return o;
}

Observation to_signed(const Observation& o) {
  Observation r;
  for (std::size_t i = 0; i < kObsDim; ++i) r[i] = 2.0 * o[i] - 1.0;
  return r;
}

Observation from_signed(const Observation& o) {
  Observation r;
  for (std::size_t i = 0; i < kObsDim; ++i) r[i] = 0.5 * (o[i] + 1.0);
  return r;
}

WorldState state_from_observation(const Observation& o) {
  WorldState s;
  s.gx = o[obs::gx], s.gy = o[obs::gy], s.gz = o[obs::gz];
  s.grip = o[obs::grip] > 0.5 ? 1 : 0;
  s.q_d = o[obs::drawer], s.q_s = o[obs::slider];
  s.light = o[obs::light] > 0.5 ? 1 : 0;
  for (std::size_t b = 0; b < 3; ++b) {
    Block& k = s.blocks[b];
    k.x = o[obs::block(b, 0)], k.y = o[obs::block(b, 1)], k.z = o[obs::block(b, 2)];
    k.held = s.grip == 1 && k.x == s.gx && k.y == s.gy && k.z == s.gz;
  }
  if (s.grip == 1) {
    if (s.gx == geom::drawer_x && s.gz == geom::drawer_z && s.gy == geom::drawer_handle_y(s.q_d)) {
      s.grasped = Handle::drawer;
    } else if (s.gy == geom::slider_y && s.gz == geom::slider_z && s.gx == geom::slider_handle_x(s.q_s)) {
      s.grasped = Handle::slider;
    }
  }
  return s;
}

std::string invariant_violation(const WorldState& s) {
  const Observation o = observe(s);
  for (std::size_t i = 0; i < kObsDim; ++i) {
    if (!in01(o[i])) return "coordinate " + std::to_string(i) + " outside [0,1]";
  }
  if (s.grip != 0 && s.grip != 1) return "grip not binary";
  if (s.light != 0 && s.light != 1) return "light not binary";
  int held = 0;
  for (const Block& b : s.blocks) {
    if (!b.held) continue;
    ++held;
    if (b.x != s.gx || b.y != s.gy || b.z != s.gz) return "held block detached from gripper";
  }
  if (held > 1) return "more than one block held";
  if ((held > 0 || s.grasped != Handle::none) && s.grip != 1) return "holding with an open gripper";
  if (held > 0 && s.grasped != Handle::none) return "block held while a handle is grasped";
  if (s.grasped == Handle::drawer &&
      (s.gx != geom::drawer_x || s.gz != geom::drawer_z || s.gy != geom::drawer_handle_y(s.q_d))) {
    return "gripper off the drawer handle";
  }
  if (s.grasped == Handle::slider &&
      (s.gy != geom::slider_y || s.gz != geom::slider_z || s.gx != geom::slider_handle_x(s.q_s))) {
    return "gripper off the slider handle";
  }
  return {};
}

const std::array<Task, kTaskCount>& all_tasks() {
  static const std::array<Task, kTaskCount> tasks = {{
      {TaskId::open_drawer, "open_drawer", "open the drawer", "close the drawer"},
      {TaskId::close_drawer, "close_drawer", "close the drawer", "open the drawer"},
      {TaskId::slide_left, "slide_left", "slide the door left", "slide the door right"},
      {TaskId::slide_right, "slide_right", "slide the door right", "slide the door left"},
      {TaskId::light_on, "light_on", "turn on the light", "turn off the light"},
      {TaskId::light_off, "light_off", "turn off the light", "turn on the light"},
      {TaskId::push_left, "push_left", "push the red block left", "push the red block right"},
      {TaskId::push_right, "push_right", "push the red block right", "push the red block left"},
      {TaskId::lift_red, "lift_red", "lift the red block", "place the red block"},
      {TaskId::place_red, "place_red", "place the red block in the box", "lift the red block in the box"},
  }};
  return tasks;
}

TaskId task_from_int(int id) {
  if (id < 0 || id >= static_cast<int>(kTaskCount)) throw std::invalid_argument("unknown task id " + std::to_string(id));
  return static_cast<TaskId>(id);
}

const Task& task_info(TaskId id) { return all_tasks()[static_cast<std::size_t>(task_from_int(static_cast<int>(id)))]; }

std::optional<TaskId> task_from_name(std::string_view name) {
  for (const Task& t : all_tasks()) {
    if (t.name == name) return t.id;
  }
  return std::nullopt;
}

TaskId parse_task(std::string_view name) {
  if (auto t = task_from_name(name)) return *t;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

bool precondition(TaskId task, const WorldState& s) {
  if (s.holding_anything()) return false;
  const Block& red = s.blocks[kRed];
  switch (task_from_int(static_cast<int>(task))) {
    case TaskId::open_drawer: return s.q_d < closed_threshold;
    case TaskId::close_drawer: return s.q_d > open_threshold;
    case TaskId::slide_left: return s.q_s > open_threshold;
    case TaskId::slide_right: return s.q_s < closed_threshold;
    case TaskId::light_on: return s.light == 0;
    case TaskId::light_off: return s.light == 1;
    case TaskId::push_left:
      return red.z <= plan::table_max_z && !in_box(red) && red.x - plan::push_travel - plan::push_offset >= 0.0;
    case TaskId::push_right:
      return red.z <= plan::table_max_z && !in_box(red) && red.x + plan::push_travel + plan::push_offset <= 1.0;
    case TaskId::lift_red: return red.z <= plan::liftable_max_z;
    case TaskId::place_red: return red.z <= plan::liftable_max_z && !in_box(red);
  }
  return false;
}

bool success(TaskId task, const WorldState& start, const WorldState& now) {
  const Block& red = now.blocks[kRed];
  switch (task_from_int(static_cast<int>(task))) {
    case TaskId::open_drawer: return now.q_d >= open_threshold;
    case TaskId::close_drawer: return now.q_d <= closed_threshold;
    case TaskId::slide_left: return now.q_s <= closed_threshold;
    case TaskId::slide_right: return now.q_s >= open_threshold;
    case TaskId::light_on: return now.light == 1;
    case TaskId::light_off: return now.light == 0;
    case TaskId::push_left: return red.x <= start.blocks[kRed].x - push_distance;
    case TaskId::push_right: return red.x >= start.blocks[kRed].x + push_distance;
    case TaskId::lift_red: return red.held && red.z >= lift_height;
    case TaskId::place_red: return !red.held && in_box(red) && red.z <= plan::placed_max_z;
  }
  return false;
}

WorldState sample_scene(std::uint64_t seed) {
  num::Rng rng(num::derive_seed(seed, 0x5ce7e));
  WorldState s;
  s.gx = rng.uniform(0.2, 0.8);
  s.gy = rng.uniform(0.2, 0.8);
  s.gz = rng.uniform(0.25, 0.6);
  s.grip = 0;
  s.q_d = rng.bernoulli(0.5) ? rng.uniform(0.0, 0.1) : rng.uniform(0.9, 1.0);
  s.q_s = rng.bernoulli(0.5) ? rng.uniform(0.0, 0.1) : rng.uniform(0.9, 1.0);
  s.light = rng.bernoulli(0.5) ? 1 : 0;

  Block& red = s.blocks[kRed];
  red.x = rng.uniform(plan::zone_x0, plan::zone_x1);
  red.y = rng.uniform(plan::red_y0, plan::red_y1);
  red.z = geom::table_z;
  // Distractors stay out of the red block's pushing lane.
  for (std::size_t b = 1; b < 3; ++b) {
    Block& k = s.blocks[b];
    for (;;) {
      k.x = rng.uniform(plan::zone_x0, plan::zone_x1);
      k.y = rng.uniform(plan::zone_y0, plan::zone_y1);
      k.z = geom::table_z;
      bool ok = std::abs(k.y - red.y) >= plan::lane_half;
      for (std::size_t o = 0; o < b && ok; ++o) {
        ok = std::hypot(k.x - s.blocks[o].x, k.y - s.blocks[o].y) >= geom::min_block_gap;
      }
      if (ok) break;
    }
  }
  return s;
}

WorldState reset(TaskId task, std::uint64_t seed) {
  const auto id = static_cast<std::uint64_t>(task_from_int(static_cast<int>(task)));
  WorldState s = sample_scene(num::derive_seed(seed, 0x7a5c, id));
  num::Rng rng(num::derive_seed(seed, 0x9e7, id));
  switch (task) {
    case TaskId::open_drawer: s.q_d = rng.uniform(0.0, 0.1); break;
    case TaskId::close_drawer: s.q_d = rng.uniform(0.9, 1.0); break;
    case TaskId::slide_left: s.q_s = rng.uniform(0.9, 1.0); break;
    case TaskId::slide_right: s.q_s = rng.uniform(0.0, 0.1); break;
    case TaskId::light_on: s.light = 0; break;
    case TaskId::light_off: s.light = 1; break;
    default: break;
  }
  if (!precondition(task, s)) {
    throw std::runtime_error("reset could not satisfy the precondition of " + std::string(task_info(task).name));
  }
  return s;
}

WorldState oracle_goal_world(TaskId task, const WorldState& s) {
  if (!precondition(task, s)) {
    throw std::invalid_argument("precondition of " + std::string(task_info(task).name) + " does not hold");
  }
  WorldState g = s;
  g.grip = 0;
  g.grasped = Handle::none;
  auto put = [&](double x, double y, double z) { g.gx = x, g.gy = y, g.gz = z; };
  Block& red = g.blocks[kRed];
  switch (task) {
    case TaskId::open_drawer:
      g.q_d = 1.0;
      put(geom::drawer_x, geom::drawer_handle_y(1.0), plan::drawer_above_z);
      break;
    case TaskId::close_drawer:
      g.q_d = 0.0;
      put(geom::drawer_x, geom::drawer_handle_y(0.0), plan::drawer_above_z);
      break;
    case TaskId::slide_left:
      g.q_s = 0.0;
      put(geom::slider_handle_x(0.0), geom::slider_y, plan::slider_above_z);
      break;
    case TaskId::slide_right:
      g.q_s = 1.0;
      put(geom::slider_handle_x(1.0), geom::slider_y, plan::slider_above_z);
      break;
    case TaskId::light_on:
    case TaskId::light_off:
      g.light = task == TaskId::light_on ? 1 : 0;
      put(geom::switch_x, geom::switch_y, plan::switch_above_z);
      break;
    case TaskId::push_left:
      red.x = s.blocks[kRed].x - plan::push_travel;
      put(red.x + geom::push_contact, red.y, plan::push_above_z);
      break;
    case TaskId::push_right:
      red.x = s.blocks[kRed].x + plan::push_travel;
      put(red.x - geom::push_contact, red.y, plan::push_above_z);
      break;
    case TaskId::lift_red:
      g.grip = 1;
      red.held = true;
      red.z = plan::lift_z;
      put(red.x, red.y, red.z);
      break;
    case TaskId::place_red:
      red.x = geom::box_cx, red.y = geom::box_cy, red.z = plan::place_release_z;
      put(geom::box_cx, geom::box_cy, plan::place_retreat_z);
      break;
  }
  return g;
}

Observation oracle_goal_state(TaskId task, const WorldState& s) { return observe(oracle_goal_world(task, s)); }

}  // namespace taksie::sim
