#pragma once

#include <filesystem>
#include <string>

#include "taksie/numerics/tensor.hpp"

namespace taksie::num {

// Checkpoint layout:
//   "TAKSIE-CKPT v1\n"
//   "version <int> entries <count>\n"
//   per entry: "<name> <rank> <d0> ... <dr-1>\n" followed by size*8 bytes of
//   little-endian IEEE-754 doubles.
std::string serialize_checkpoint(const ParameterSet& params);
ParameterSet deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace taksie::num
