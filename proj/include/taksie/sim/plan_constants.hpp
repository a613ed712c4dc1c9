#pragma once

// Waypoint heights and offsets shared by the scripted planner and the
// analytic goal states.

namespace taksie::sim::plan {

// Block sampling zone; the red block keeps a lane of +-lane_half in y free.
inline constexpr double zone_x0 = 0.30, zone_x1 = 0.70;
inline constexpr double zone_y0 = 0.35, zone_y1 = 0.70;
inline constexpr double red_y0 = 0.40, red_y1 = 0.65;
inline constexpr double lane_half = 0.06;

inline constexpr double table_max_z = 0.05;
inline constexpr double liftable_max_z = 0.10;
inline constexpr double placed_max_z = 0.15;

inline constexpr double drawer_above_z = 0.25;
inline constexpr double slider_above_z = 0.60;
inline constexpr double switch_above_z = 0.30;
inline constexpr double switch_press_z = 0.14;

inline constexpr double push_above_z = 0.20;
inline constexpr double push_low_z = 0.03;
inline constexpr double push_offset = 0.08;
inline constexpr double push_travel = 0.20;

inline constexpr double block_above_z = 0.25;
inline constexpr double lift_z = 0.55;
inline constexpr double carry_z = 0.30;
inline constexpr double place_release_z = 0.08;
inline constexpr double place_retreat_z = 0.25;

// Straight-line step length at speed 1, before jitter.
inline constexpr double nominal_step = 0.025;
inline constexpr double jitter = 0.2;
inline constexpr int max_demo_steps = 300;

}  // namespace taksie::sim::plan
