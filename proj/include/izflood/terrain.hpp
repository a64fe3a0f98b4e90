#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "izflood/common.hpp"

namespace izflood {

/// Regular elevation raster, row 0 = northernmost (max y), ESRI ASCII layout.
struct DtmRaster {
  int ncols = 0;
  int nrows = 0;
  double xll = 0.0;      // x of lower-left corner
  double yll = 0.0;      // y of lower-left corner
  double cellsize = 1.0; // m, square cells
  double nodata = -9999.0;
  Eigen::ArrayXXd z;     // (nrows, ncols) elevation in m

  bool is_nodata(int r, int c) const { return z(r, c) == nodata; }
  std::int64_t cell_count() const { return std::int64_t(nrows) * ncols; }
  std::int64_t active_count() const;

  /// Linear cell index used everywhere a flat id is needed.
  std::int64_t cell_id(int r, int c) const { return std::int64_t(r) * ncols + c; }
  int row_of(std::int64_t id) const { return int(id / ncols); }
  int col_of(std::int64_t id) const { return int(id % ncols); }

  /// Cell-center coordinates in map units.
  double x_of(int c) const { return xll + (c + 0.5) * cellsize; }
  double y_of(int r) const { return yll + (nrows - r - 0.5) * cellsize; }

  void validate() const;  // throws ValidationError
};

/// Parse an ESRI ASCII grid. Header keys are case-insensitive and may come in
/// any order; NODATA_value is optional (default -9999). Errors carry line
/// numbers. The value block must hold exactly nrows*ncols numbers.
DtmRaster parse_ascii_grid(std::istream& in);
DtmRaster read_ascii_grid(const std::string& path);

/// Write in the canonical 6-line-header form. Values use enough digits that
/// parse(write(r)) reproduces r bit-exactly.
void write_ascii_grid(const DtmRaster& r, std::ostream& out);
void write_ascii_grid(const DtmRaster& r, const std::string& path);

/// Parametric synthetic terrains for tests and demos. Pure arithmetic over
/// (row, col): same spec gives bitwise-identical rasters on every platform.
struct SynthSpec {
  enum class Shape {
    flat,            // constant z0
    single_basin,    // paraboloid depression in a plateau
    two_basin,       // two depressions separated by a saddle ridge
    coastal_slope,   // plane rising away from the y=min edge
    island_center,   // coastal ring at z=0, linear rise to a rim, sunken middle
  };

  Shape shape = Shape::flat;
  int nrows = 0;
  int ncols = 0;
  double cellsize = 1.0;
  double xll = 0.0;
  double yll = 0.0;

  double z0 = 0.0;           // flat level / coastal base elevation
  double rim_z = 1.0;        // plateau or island rim elevation
  double depth = 1.0;        // basin depth below its rim
  double radius_cells = 0.0; // basin radius; 0 = pick from grid size
  double slope = 0.01;       // coastal_slope gradient (m per m northward)
  double rim_frac = 0.4;     // island: rim radius as fraction of half-extent
  double coast_frac = 0.85;  // island: where the flat coastal ring begins

  static SynthSpec flat(int nrows, int ncols, double cellsize, double z0);
  static SynthSpec single_basin(int nrows, int ncols, double cellsize, double rim_z,
                                double depth, double radius_cells = 0.0);
  static SynthSpec two_basin(int nrows, int ncols, double cellsize, double saddle_z,
                             double depth, double radius_cells = 0.0);
  static SynthSpec coastal_slope(int nrows, int ncols, double cellsize, double z0,
                                 double slope);
  static SynthSpec island_center(int nrows, int ncols, double cellsize, double rim_z,
                                 double center_depth);
};

DtmRaster synth_terrain(const SynthSpec& spec);

}  // namespace izflood
