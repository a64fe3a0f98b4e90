#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "izflood/terrain.hpp"

namespace izflood {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Flood palette: linear blend from pale water (173,216,230) at 0 m to deep
/// water (0,30,120) at 2 m and beyond. Depth 0.5 m is exactly (130,170,203),
/// which regression tests pin so rendered frames stay comparable.
Rgb depth_color(double depth_m);

/// Horn's slope estimate lit from the northwest (azimuth 315 degrees) at 45
/// degrees altitude; intensities in [0,1]. Nodata cells get 1 (rendered
/// white); edge cells reuse their nearest neighbours.
Eigen::ArrayXXd hillshade(const DtmRaster& dtm);

/// Grayscale hillshade with flooded cells (depth > 0) painted in the flood
/// palette and nodata white. Row-major RGB8, northernmost row first.
std::vector<std::uint8_t> compose_frame(const DtmRaster& dtm, const DtmRaster& depth);

/// Binary portable pixmap, 8 bits per channel ("P6").
void write_ppm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& rgb);

/// Paint every depth_<t>.asc in a run directory (next to the terrain.asc that
/// run_scenario leaves there) into render_<t>.ppm. Returns the frame count;
/// a directory without frames is an error.
int render_run(const std::string& run_dir);

}  // namespace izflood
