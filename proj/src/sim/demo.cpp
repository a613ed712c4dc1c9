#include "taksie/sim/demo.hpp"

#include <cmath>
#include <variant>

#include "taksie/numerics/rng.hpp"
#include "taksie/sim/plan_constants.hpp"

namespace taksie::sim {
namespace {

struct Move {
  double x, y, z;
};
struct Grip {
  bool close;
};
using Segment = std::variant<Move, Grip>;

std::vector<Segment> plan_for(TaskId task, const WorldState& s) {
  using namespace plan;
  const Block& red = s.blocks[kRed];
  const double dx = geom::drawer_x;
  switch (task) {
    case TaskId::open_drawer:
    case TaskId::close_drawer: {
      const double hy = geom::drawer_handle_y(s.q_d);
      const double ty = geom::drawer_handle_y(task == TaskId::open_drawer ? 1.0 : 0.0);
      return {Move{dx, hy, drawer_above_z}, Move{dx, hy, geom::drawer_z}, Grip{true},
              Move{dx, ty, geom::drawer_z}, Grip{false}, Move{dx, ty, drawer_above_z}};
    }
    case TaskId::slide_left:
    case TaskId::slide_right: {
      const double hx = geom::slider_handle_x(s.q_s);
      const double tx = geom::slider_handle_x(task == TaskId::slide_right ? 1.0 : 0.0);
      const double y = geom::slider_y;
      return {Move{hx, y, slider_above_z}, Move{hx, y, geom::slider_z}, Grip{true},
              Move{tx, y, geom::slider_z}, Grip{false}, Move{tx, y, slider_above_z}};
    }
    case TaskId::light_on:
    case TaskId::light_off: {
      const double x = geom::switch_x, y = geom::switch_y;
      return {Move{x, y, switch_above_z}, Grip{true}, Move{x, y, switch_press_z}, Move{x, y, switch_above_z},
              Grip{false}};
    }
    case TaskId::push_left:
    case TaskId::push_right: {
      const double side = task == TaskId::push_left ? 1.0 : -1.0;
      const double x0 = red.x + side * push_offset;
      const double x1 = red.x - side * (push_travel - geom::push_contact);
      return {Move{x0, red.y, push_above_z}, Grip{true}, Move{x0, red.y, push_low_z}, Move{x1, red.y, push_low_z},
              Move{x1, red.y, push_above_z}, Grip{false}};
    }
    case TaskId::lift_red:
      return {Move{red.x, red.y, block_above_z}, Move{red.x, red.y, red.z}, Grip{true},
              Move{red.x, red.y, lift_z}};
    case TaskId::place_red:
      return {Move{red.x, red.y, block_above_z},
              Move{red.x, red.y, red.z},
              Grip{true},
              Move{red.x, red.y, carry_z},
              Move{geom::box_cx, geom::box_cy, carry_z},
              Move{geom::box_cx, geom::box_cy, place_release_z},
              Grip{false},
              Move{geom::box_cx, geom::box_cy, place_retreat_z}};
  }
  return {};
}

}  // namespace

std::string trajectory_violation(const Trajectory& t) {
  if (t.observations.empty()) return "no observations";
  if (t.actions.size() + 1 != t.observations.size()) return "actions must number observations - 1";
  for (const auto& o : t.observations) {
    for (double v : o) {
      if (!std::isfinite(v)) return "non-finite observation";
    }
  }
  for (const auto& a : t.actions) {
    for (double v : a) {
      if (!std::isfinite(v)) return "non-finite action";
    }
  }
  if (t.success) {
    const WorldState start = state_from_observation(t.observations.front());
    const WorldState end = state_from_observation(t.observations.back());
    if (!sim::success(t.task, start, end)) return "success flag set but predicate fails on final observation";
  }
  return {};
}

Trajectory scripted_demo(TaskId task, std::uint64_t seed, double speed_scale) {
  return scripted_demo_from(task, reset(task, seed), seed, speed_scale);
}

Trajectory scripted_demo_from(TaskId task, const WorldState& start, std::uint64_t seed, double speed_scale) {
  if (!(speed_scale >= 0.5 && speed_scale <= 2.0)) throw std::invalid_argument("speed_scale must lie in [0.5, 2]");
  if (!precondition(task, start)) {
    throw std::invalid_argument("precondition of " + std::string(task_info(task).name) + " does not hold");
  }
  num::Rng rng(num::derive_seed(seed, 0xde70, static_cast<std::uint64_t>(task)));
  Trajectory t;
  t.task = task;
  t.command = std::string(task_info(task).command);
  WorldState s = start;
  t.observations.push_back(observe(s));

  auto emit = [&](const Action& a) {
    if (t.actions.size() >= static_cast<std::size_t>(plan::max_demo_steps)) {
      throw DemoTooLong(std::string(task_info(task).name) + " demo exceeded " +
                        std::to_string(plan::max_demo_steps) + " steps");
    }
    s = step(s, a);
    t.actions.push_back(to_array(a));
    t.observations.push_back(observe(s));
  };

  // States reached by a policy can leave the gripper closed on nothing;
  // grasping needs an open-to-closed transition.
  if (s.grip == 1) emit({0.0, 0.0, 0.0, -1.0});
  for (const Segment& seg : plan_for(task, start)) {
    if (const auto* g = std::get_if<Grip>(&seg)) {
      emit({0.0, 0.0, 0.0, g->close ? 1.0 : -1.0});
      continue;
    }
    const Move m = std::get<Move>(seg);
    for (;;) {
      const double ex = m.x - s.gx, ey = m.y - s.gy, ez = m.z - s.gz;
      const double rem = std::sqrt(ex * ex + ey * ey + ez * ez);
      if (rem <= 1e-9) break;
      const double len =
          std::min(kMaxDelta, plan::nominal_step * speed_scale * rng.uniform(1.0 - plan::jitter, 1.0 + plan::jitter));
      const double f = rem <= len ? 1.0 : len / rem;
      emit({ex * f, ey * f, ez * f, s.grip == 1 ? 1.0 : -1.0});
    }
  }
  t.success = success(task, start, s);
  if (!t.success) throw std::logic_error("scripted demo for " + std::string(task_info(task).name) + " failed");
  return t;
}

WorldState replay(const Trajectory& t) {
  WorldState s = state_from_observation(t.observations.front());
  for (const auto& a : t.actions) s = step(s, action_from(a));
  return s;
}

}  // namespace taksie::sim
