#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "taksie/sim/world.hpp"

namespace taksie::sim {

inline constexpr int kRasterSize = 32;

// Top-down 32x32 grayscale debug view, row 0 at y = 1. Gripper brightness
// encodes height; the switch square lights up when on.
std::vector<std::uint8_t> rasterize(const Observation& o);

std::string pgm_bytes(const std::vector<std::uint8_t>& pixels, int width, int height);
void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels, int width, int height);

}  // namespace taksie::sim
