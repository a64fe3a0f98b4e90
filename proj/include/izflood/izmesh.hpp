#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "izflood/terrain.hpp"

namespace izflood {

/// Piecewise-linear level(h) <-> stored-volume(V) relation of one zone.
/// Breakpoints sit at the distinct cell elevations, so between breakpoints the
/// wetted plan area is constant and V(h) is exactly linear. levels strictly
/// increase; volumes[0] = 0 at the zone floor and the curve is convex.
struct LevelVolumeTable {
  Eigen::ArrayXd levels;   // m
  Eigen::ArrayXd volumes;  // m3

  double z_min() const { return levels(0); }
  double top_level() const { return levels(levels.size() - 1); }
  double top_volume() const { return volumes(volumes.size() - 1); }

  /// V(h); clamps to 0 below the floor, throws ValidationError above the top.
  double volume_at(double level) const;

  /// h(V); exact inverse of volume_at on [0, top_volume]. V < 0 throws
  /// ValidationError, V beyond the table throws TableOverflow (with excess).
  double level_at(double volume) const;

  /// Wetted plan area dV/dh of the segment containing `level` (right-sided at
  /// breakpoints). 0 below the floor.
  double wetted_area_at(double level) const;

  void validate() const;
};

/// Free-function spellings used throughout the pipeline.
double volume_from_level(const LevelVolumeTable& t, double level);
double level_from_volume(const LevelVolumeTable& t, double volume);

/// Build the table over the given cells of a raster. The top breakpoint is
/// extended to `top_level` if that lies above the highest cell, so storage
/// above the zone's own relief (up to a spill crest + headroom) stays on the
/// curve.
LevelVolumeTable build_level_volume_table(const DtmRaster& dtm,
                                          const std::vector<std::int64_t>& cells,
                                          double top_level);

/// One depression-centred computational element of the overland model.
struct ImpactZone {
  int id = -1;
  std::vector<std::int64_t> cells;  // sorted raster cell ids
  double z_min = 0.0;               // pit floor elevation
  double spill_elevation = 0.0;     // lowest crest on the zone's border
  double plan_area = 0.0;           // m2
  LevelVolumeTable table;
};

/// Shared border between two zones.
struct ZoneEdge {
  int a = -1;
  int b = -1;                    // zone ids, a < b
  double crest = 0.0;            // lowest saddle across the border, m
  double boundary_length = 0.0;  // m
  double flow_distance = 0.0;    // centroid distance, m (floored at one cell)
};

struct ZoneMesh {
  // raster frame the mesh was derived from
  int ncols = 0;
  int nrows = 0;
  double cellsize = 1.0;
  double xll = 0.0;
  double yll = 0.0;

  std::vector<ImpactZone> zones;
  std::vector<ZoneEdge> edges;
  Eigen::ArrayXXi labels;  // (nrows, ncols) zone id, -1 outside/nodata

  int zone_count() const { return int(zones.size()); }

  /// Edge indices incident to each zone, built once on demand.
  const std::vector<std::vector<int>>& incidence() const;

  void validate() const;  // partition + ordering invariants

 private:
  mutable std::vector<std::vector<int>> incidence_;
};

struct DelineateOptions {
  double merge_epsilon = 0.01;  // m; zones shallower than this get merged away
  double headroom = 10.0;       // m of table range above max(spill, relief)
};

/// Partition the active cells into impact zones: steepest-descent routing into
/// pits, flats resolved toward their outlets (undrained flats become zones of
/// their own), then a merge pass that folds sub-epsilon depressions into the
/// neighbour behind their lowest crest.
ZoneMesh delineate_zones(const DtmRaster& dtm, const DelineateOptions& opt = {});

struct MeshStats {
  std::int64_t cell_count = 0;
  int zone_count = 0;
  int edge_count = 0;
  std::int64_t min_cells = 0;
  std::int64_t max_cells = 0;
  double mean_cells = 0.0;
  std::vector<std::int64_t> size_histogram;  // bucket k counts zones in [2^k, 2^(k+1))
};

MeshStats mesh_stats(const ZoneMesh& mesh);
std::string format_stats(const MeshStats& s);

/// Zones whose cells touch the raster border, with the length of border they
/// own. Default waterfront for coastal scenarios.
std::vector<std::pair<int, double>> border_zones(const ZoneMesh& mesh);

/// Text persistence; read(write(mesh)) reproduces every field bit-exactly.
void write_mesh(const ZoneMesh& mesh, std::ostream& out);
void write_mesh(const ZoneMesh& mesh, const std::string& path);
ZoneMesh parse_mesh(std::istream& in);
ZoneMesh read_mesh(const std::string& path);

}  // namespace izflood
