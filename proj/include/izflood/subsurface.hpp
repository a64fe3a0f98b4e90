#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "izflood/terrain.hpp"

namespace izflood {

struct PorousParams {
  double storage = 1e-6;       // 1/Pa, pressure storage coefficient
  double permeability = 1e-12; // m2
  double viscosity = 1e-3;     // Pa s
  double density = 1000.0;     // kg/m3
  double gravity = kGravity;   // m/s2

  /// Pressure diffusivity K/(mu*S) in m2/s.
  double diffusivity() const { return permeability / (viscosity * storage); }
  void validate() const;
};

/// Terrain-following columns of hexahedral cells under the land surface.
/// Column c spans [z_top(c) - depth, z_top(c)]; cell (c, k) with k = 0 at the
/// top has id c*nz + k. Pressure evolves by transient seepage
///   S dp/dt = div( K/mu grad(p + rho g z) )
/// handled internally in the potential phi = p + rho g z, where hydrostatic
/// rest is exactly phi = const.
struct SubsurfaceGrid {
  int nx = 0, ny = 0;  // coarse footprint (ny rows, nx cols)
  int nz = 0;
  double dx = 0.0;     // horizontal spacing, m (fine cellsize * coarsen)
  double depth = 0.0;  // m
  double dz = 0.0;
  double xll = 0.0, yll = 0.0;

  // provenance of the footprint, for mapping back onto the fine raster
  int coarsen = 1;
  int fine_nrows = 0, fine_ncols = 0;

  Eigen::ArrayXXi col_index;                // (ny, nx) -> column id or -1
  std::vector<std::pair<int, int>> col_rc;  // column id -> (row, col) coarse coords
  Eigen::ArrayXd z_top;                     // m, mean member elevation
  Eigen::ArrayXd top_area;                  // m2, summed member cell area

  PorousParams params;
  Eigen::VectorXd p;  // Pa per cell; starts at rest (phi = 0, i.e. p = -rho g z)

  int column_count() const { return int(col_rc.size()); }
  int cell_count() const { return column_count() * nz; }
  double cell_z(int col, int k) const { return z_top(col) - (k + 0.5) * dz; }
  Eigen::VectorXd potential() const;  // phi = p + rho g z per cell

  void validate() const;
};

/// Columns are aggregated coarsen x coarsen blocks of raster cells (active
/// when at least one member is). Initial pressure is the rest state phi = 0.
SubsurfaceGrid build_subsurface_grid(const DtmRaster& dtm, const PorousParams& params,
                                     double depth, int nz, int coarsen = 1);

/// What the surface hands down per column: standing water depth (0 = dry) and
/// how a dry surface behaves.
struct SurfaceBc {
  /// zero_head clamps a dry surface to atmospheric pressure (water table may
  /// drain freely); no_flow seals it unless water is already pressing against
  /// it from below, which opens a seepage face at p = 0.
  enum class DryMode { zero_head, no_flow };

  Eigen::ArrayXd h_in;  // m, >= 0 per column
  DryMode dry_mode = DryMode::no_flow;
  bool embankment_dirichlet = true;  // flooded border columns press on the domain wall
};

/// A face with prescribed potential (the Dirichlet side of the operator).
struct DirichletFace {
  int cell = -1;
  double area = 0.0;  // m2
  double dist = 0.0;  // m, cell centre to face
  double phi = 0.0;   // Pa
  bool top_surface = false;  // land-surface face of `column`
  int column = -1;
};

struct InternalFace {
  int c0 = -1, c1 = -1;
  double area = 0.0;
  double dist = 0.0;
};

/// Everything the operator needs to know about the domain boundary and
/// connectivity; assembly and flux evaluation share one face set, so reported
/// fluxes are exactly the discrete operator's.
struct FaceSet {
  std::vector<InternalFace> internal;
  std::vector<DirichletFace> dirichlet;
};

/// Geometry + boundary rules -> faces. Flooded columns press rho g (z_top +
/// h_in) on their top face (and on border walls if configured); dry columns
/// follow the dry mode, consulting the current pressure for seepage switching.
FaceSet build_faces(const SubsurfaceGrid& grid, const SurfaceBc& bc);

struct SolveOptions {
  double tol = 1e-10;      // relative residual
  int max_iterations = 0;  // 0 = 10 * unknown count
};

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;  // relative, at exit
};

/// Conjugate gradients with Jacobi preconditioning on an SPD system.
/// Exceeding the iteration cap throws SolverError carrying the residual trace.
SolveStats solve_spd(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                     Eigen::VectorXd& x, const SolveOptions& opt = {});

/// One backward-Euler step over the given faces; updates grid.p in place.
SolveStats step_subsurface(SubsurfaceGrid& grid, const FaceSet& faces, double dt,
                           const SolveOptions& opt = {});

/// Signed face fluxes (m3/s) of a potential field over a face set: internal
/// entries flow c0 -> c1 when positive, Dirichlet entries flow out of the
/// domain when positive.
struct FluxField {
  Eigen::ArrayXd internal;
  Eigen::ArrayXd dirichlet;
};

FluxField face_fluxes(const SubsurfaceGrid& grid, const FaceSet& faces,
                      const Eigen::VectorXd& phi);

/// Water rise above the terrain fed from below: pressure extrapolated to the
/// land surface from the two top cells, floored at zero, in metres of water.
Eigen::ArrayXd h_filtr_field(const SubsurfaceGrid& grid);

/// Elementwise h_in + h_filtr, the total inundation height per column.
Eigen::ArrayXd h_total_field(const Eigen::ArrayXd& h_in, const Eigen::ArrayXd& h_filtr);

/// Outward land-surface flux summed per zone and spread over the zone's
/// column area -> exchange rate in m/s (positive feeds the surface).
/// col_zone maps columns to zones (-1 = unmapped), zone_col_area is the summed
/// top area of each zone's columns.
Eigen::ArrayXd zone_exchange_rates(const FaceSet& faces, const FluxField& flux,
                                   const std::vector<int>& col_zone,
                                   const Eigen::ArrayXd& zone_col_area);

/// Per-column values painted back onto the fine raster footprint (nodata kept).
DtmRaster expand_to_raster(const SubsurfaceGrid& grid, const Eigen::ArrayXd& per_column,
                           const DtmRaster& dtm);

}  // namespace izflood
