#include "taksie/sim/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace taksie::sim {
namespace {

int to_px(double v) { return std::clamp(static_cast<int>(std::floor(v * kRasterSize)), 0, kRasterSize - 1); }

struct Canvas {
  std::vector<std::uint8_t> px = std::vector<std::uint8_t>(kRasterSize * kRasterSize, 0);

  void set(int col, int row, std::uint8_t v) {
    if (col < 0 || row < 0 || col >= kRasterSize || row >= kRasterSize) return;
    px[static_cast<std::size_t>(row * kRasterSize + col)] = v;
  }
  // Axis-aligned world rectangle.
  void rect(double x0, double y0, double x1, double y1, std::uint8_t v, bool outline = false) {
    const int c0 = to_px(x0), c1 = to_px(x1);
    const int r0 = kRasterSize - 1 - to_px(y1), r1 = kRasterSize - 1 - to_px(y0);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (!outline || r == r0 || r == r1 || c == c0 || c == c1) set(c, r, v);
      }
    }
  }
};

}  // namespace

std::vector<std::uint8_t> rasterize(const Observation& o) {
  Canvas cv;
  cv.rect(0.0, 0.0, 1.0, 1.0, 20);
  cv.rect(geom::box_x0, geom::box_y0, geom::box_x1, geom::box_y1, 90, true);
  // Drawer front moves with q_d.
  const double dy = geom::drawer_handle_y(o[obs::drawer]);
  cv.rect(0.05, dy - 0.02, 0.25, dy + 0.02, 110);
  const double sx = geom::slider_handle_x(o[obs::slider]);
  cv.rect(sx - 0.08, geom::slider_y - 0.02, sx + 0.08, geom::slider_y + 0.02, 130);
  cv.rect(geom::switch_x - geom::switch_half, geom::switch_y - geom::switch_half, geom::switch_x + geom::switch_half,
          geom::switch_y + geom::switch_half, o[obs::light] > 0.5 ? 255 : 60);
  const std::uint8_t shade[3] = {200, 160, 140};
  for (std::size_t b = 0; b < 3; ++b) {
    const double x = o[obs::block(b, 0)], y = o[obs::block(b, 1)];
    cv.rect(x - 0.02, y - 0.02, x + 0.02, y + 0.02, shade[b]);
  }
  const int gc = to_px(o[obs::gx]), gr = kRasterSize - 1 - to_px(o[obs::gy]);
  const auto g = static_cast<std::uint8_t>(150 + std::lround(105.0 * std::clamp(o[obs::gz], 0.0, 1.0)));
  for (int k = -1; k <= 1; ++k) {
    cv.set(gc + k, gr, g);
    cv.set(gc, gr + k, g);
  }
  if (o[obs::grip] > 0.5) cv.set(gc, gr, 0);
  return cv.px;
}

std::string pgm_bytes(const std::vector<std::uint8_t>& pixels, int width, int height) {
  if (width <= 0 || height <= 0 || pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw std::invalid_argument("pixel buffer does not match image size");
  }
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  return out;
}

void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels, int width, int height) {
  const std::string bytes = pgm_bytes(pixels, width, height);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace taksie::sim
