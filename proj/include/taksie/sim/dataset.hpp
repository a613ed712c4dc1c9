#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "taksie/sim/demo.hpp"

namespace taksie::sim {

// Text format, one header line then one block per trajectory:
//
//   TAKSIE-DATA v1 obs_dim=16 act_dim=4
//   traj <index> task=<name> success=<0|1> frames=<n>
//   command <text>
//   o <16 x 16 hex digits>        (n lines)
//   a <4 x 16 hex digits>         (n - 1 lines)
//   end
//
// Floats are written as the hex of their IEEE-754 bit pattern.
std::string dataset_serialize(const std::vector<Trajectory>& trajs);
std::vector<Trajectory> dataset_parse(const std::string& text);

void dataset_write(const std::vector<Trajectory>& trajs, const std::filesystem::path& path);
std::vector<Trajectory> dataset_read(const std::filesystem::path& path);

}  // namespace taksie::sim
