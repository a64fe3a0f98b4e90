#include "izflood/render.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "izflood/common.hpp"

namespace fs = std::filesystem;

namespace izflood {

Rgb depth_color(double depth_m) {
  const double f = std::clamp(depth_m, 0.0, 2.0) / 2.0;
  const double shallow[3] = {173.0, 216.0, 230.0};
  const double deep[3] = {0.0, 30.0, 120.0};
  Rgb out;
  out.r = static_cast<std::uint8_t>(std::lround(shallow[0] + (deep[0] - shallow[0]) * f));
  out.g = static_cast<std::uint8_t>(std::lround(shallow[1] + (deep[1] - shallow[1]) * f));
  out.b = static_cast<std::uint8_t>(std::lround(shallow[2] + (deep[2] - shallow[2]) * f));
  return out;
}

Eigen::ArrayXXd hillshade(const DtmRaster& dtm) {
  const int nr = dtm.nrows;
  const int nc = dtm.ncols;
  Eigen::ArrayXXd shade(nr, nc);

  const double zenith = (90.0 - 45.0) * M_PI / 180.0;     // sun 45 degrees up
  const double azimuth = (360.0 - 315.0 + 90.0) * M_PI / 180.0;  // from the NW
  const double cos_zen = std::cos(zenith);
  const double sin_zen = std::sin(zenith);

  // Replicate edges, and flatten nodata neighbours onto the centre elevation
  // so shading never leaks across holes.
  auto sample = [&](int r, int c, double center) {
    r = std::clamp(r, 0, nr - 1);
    c = std::clamp(c, 0, nc - 1);
    if (dtm.is_nodata(r, c)) return center;
    return dtm.z(r, c);
  };

  for (int r = 0; r < nr; ++r) {
    for (int c = 0; c < nc; ++c) {
      if (dtm.is_nodata(r, c)) {
        shade(r, c) = 1.0;
        continue;
      }
      const double e = dtm.z(r, c);
      const double a = sample(r - 1, c - 1, e), b = sample(r - 1, c, e), cc = sample(r - 1, c + 1, e);
      const double d = sample(r, c - 1, e), f = sample(r, c + 1, e);
      const double g = sample(r + 1, c - 1, e), h = sample(r + 1, c, e), i = sample(r + 1, c + 1, e);
      const double dzdx = ((cc + 2.0 * f + i) - (a + 2.0 * d + g)) / (8.0 * dtm.cellsize);
      const double dzdy = ((g + 2.0 * h + i) - (a + 2.0 * b + cc)) / (8.0 * dtm.cellsize);
      const double slope = std::atan(std::hypot(dzdx, dzdy));
      const double aspect = std::atan2(dzdy, -dzdx);
      const double s = cos_zen * std::cos(slope) +
                       sin_zen * std::sin(slope) * std::cos(azimuth - aspect);
      shade(r, c) = std::clamp(s, 0.0, 1.0);
    }
  }
  return shade;
}

std::vector<std::uint8_t> compose_frame(const DtmRaster& dtm, const DtmRaster& depth) {
  if (depth.nrows != dtm.nrows || depth.ncols != dtm.ncols) {
    throw ValidationError("depth frame is " + std::to_string(depth.nrows) + "x" +
                          std::to_string(depth.ncols) + " but the terrain is " +
                          std::to_string(dtm.nrows) + "x" + std::to_string(dtm.ncols));
  }
  const Eigen::ArrayXXd shade = hillshade(dtm);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(dtm.nrows) * dtm.ncols * 3);
  std::size_t k = 0;
  for (int r = 0; r < dtm.nrows; ++r) {
    for (int c = 0; c < dtm.ncols; ++c) {
      Rgb px;
      if (dtm.is_nodata(r, c)) {
        px = {255, 255, 255};
      } else if (!depth.is_nodata(r, c) && depth.z(r, c) > 0.0) {
        px = depth_color(depth.z(r, c));
      } else {
        const auto gray = static_cast<std::uint8_t>(std::lround(255.0 * shade(r, c)));
        px = {gray, gray, gray};
      }
      rgb[k++] = px.r;
      rgb[k++] = px.g;
      rgb[k++] = px.b;
    }
  }
  return rgb;
}

void write_ppm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ValidationError("pixel buffer holds " + std::to_string(rgb.size()) +
                          " bytes, expected " + std::to_string(3 * width * height));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write image: " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()),
            static_cast<std::streamsize>(rgb.size()));
  if (!out) throw ValidationError("short write on image: " + path);
}

int render_run(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const fs::path terrain_path = dir / "terrain.asc";
  if (!fs::exists(terrain_path)) {
    throw ValidationError("no terrain.asc in " + run_dir +
                          " — point this at a directory written by a run");
  }

  // depth_<t>.asc -> tag "<t>", kept verbatim so image names match the frames.
  std::vector<std::pair<std::string, fs::path>> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("depth_", 0) == 0 && name.size() > 10 &&
        name.compare(name.size() - 4, 4, ".asc") == 0) {
      frames.emplace_back(name.substr(6, name.size() - 10), entry.path());
    }
  }
  if (frames.empty()) {
    throw ValidationError("no depth_<t>.asc frames in " + run_dir);
  }
  std::sort(frames.begin(), frames.end());

  const DtmRaster dtm = read_ascii_grid(terrain_path.string());
  for (const auto& [tag, path] : frames) {
    const DtmRaster depth = read_ascii_grid(path.string());
    const auto rgb = compose_frame(dtm, depth);
    write_ppm((dir / ("render_" + tag + ".ppm")).string(), dtm.ncols, dtm.nrows, rgb);
  }
  return static_cast<int>(frames.size());
}

}  // namespace izflood
