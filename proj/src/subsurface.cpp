#include "izflood/subsurface.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace izflood {

void PorousParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError(std::string("porous parameter ") + name + " must be positive");
  };
  positive(storage, "storage");
  positive(permeability, "permeability");
  positive(viscosity, "viscosity");
  positive(density, "density");
  positive(gravity, "gravity");
}

void SubsurfaceGrid::validate() const {
  params.validate();
  if (nz < 2) throw ValidationError("subsurface grid needs at least 2 layers");
  if (!(depth > 0.0) || !(dx > 0.0)) throw ValidationError("subsurface grid extents must be positive");
  if (col_index.rows() != ny || col_index.cols() != nx)
    throw ValidationError("column index shape mismatch");
  if (int(col_rc.size()) != z_top.size() || z_top.size() != top_area.size())
    throw ValidationError("column arrays disagree in length");
  if (p.size() != cell_count()) throw ValidationError("pressure vector has the wrong length");
  for (int c = 0; c < column_count(); ++c) {
    auto [r, q] = col_rc[c];
    if (r < 0 || r >= ny || q < 0 || q >= nx || col_index(r, q) != c)
      throw ValidationError("column coordinates disagree with the index raster");
    if (!(top_area(c) > 0.0)) throw ValidationError("column with non-positive area");
  }
}

Eigen::VectorXd SubsurfaceGrid::potential() const {
  Eigen::VectorXd phi(cell_count());
  const double rg = params.density * params.gravity;
  for (int c = 0; c < column_count(); ++c)
    for (int k = 0; k < nz; ++k) phi(c * nz + k) = p(c * nz + k) + rg * cell_z(c, k);
  return phi;
}

SubsurfaceGrid build_subsurface_grid(const DtmRaster& dtm, const PorousParams& params,
                                     double depth, int nz, int coarsen) {
  dtm.validate();
  params.validate();
  if (nz < 2) throw ValidationError("subsurface grid needs at least 2 layers");
  if (!(depth > 0.0)) throw ValidationError("subsurface depth must be positive");
  if (coarsen < 1) throw ValidationError("coarsening factor must be >= 1");

  SubsurfaceGrid g;
  g.params = params;
  g.nz = nz;
  g.depth = depth;
  g.dz = depth / nz;
  g.coarsen = coarsen;
  g.fine_nrows = dtm.nrows;
  g.fine_ncols = dtm.ncols;
  g.dx = dtm.cellsize * coarsen;
  g.xll = dtm.xll;
  g.yll = dtm.yll;
  g.ny = (dtm.nrows + coarsen - 1) / coarsen;
  g.nx = (dtm.ncols + coarsen - 1) / coarsen;
  g.col_index.resize(g.ny, g.nx);
  g.col_index.setConstant(-1);

  std::vector<double> ztop, area;
  for (int r = 0; r < g.ny; ++r)
    for (int c = 0; c < g.nx; ++c) {
      double zsum = 0.0;
      int live = 0;
      for (int i = r * coarsen; i < std::min((r + 1) * coarsen, dtm.nrows); ++i)
        for (int j = c * coarsen; j < std::min((c + 1) * coarsen, dtm.ncols); ++j)
          if (!dtm.is_nodata(i, j)) {
            zsum += dtm.z(i, j);
            ++live;
          }
      if (live == 0) continue;
      g.col_index(r, c) = int(g.col_rc.size());
      g.col_rc.emplace_back(r, c);
      ztop.push_back(zsum / live);
      area.push_back(double(live) * dtm.cellsize * dtm.cellsize);
    }
  if (g.col_rc.empty()) throw ValidationError("no active columns under the raster");
  g.z_top = Eigen::Map<Eigen::ArrayXd>(ztop.data(), Eigen::Index(ztop.size()));
  g.top_area = Eigen::Map<Eigen::ArrayXd>(area.data(), Eigen::Index(area.size()));

  // rest state: constant potential 0 everywhere (hydrostatic below a dry
  // surface whose water table sits exactly at z = 0 datum)
  const double rg = params.density * params.gravity;
  g.p.resize(g.cell_count());
  for (int c = 0; c < g.column_count(); ++c)
    for (int k = 0; k < nz; ++k) g.p(c * nz + k) = -rg * g.cell_z(c, k);

  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// boundary faces
// ---------------------------------------------------------------------------

FaceSet build_faces(const SubsurfaceGrid& g, const SurfaceBc& bc) {
  if (bc.h_in.size() != g.column_count())
    throw ValidationError("surface depth vector does not match the column count");
  for (Eigen::Index i = 0; i < bc.h_in.size(); ++i)
    if (bc.h_in(i) < 0.0) throw ValidationError("negative standing-water depth");

  const double rg = g.params.density * g.params.gravity;
  FaceSet fs;

  // internal faces: vertical within a column, lateral between same-layer
  // neighbours (terrain-following: layer k couples to layer k)
  for (int c = 0; c < g.column_count(); ++c)
    for (int k = 0; k + 1 < g.nz; ++k)
      fs.internal.push_back({c * g.nz + k, c * g.nz + k + 1, g.top_area(c), g.dz});

  for (int c = 0; c < g.column_count(); ++c) {
    auto [r, q] = g.col_rc[c];
    // east and south neighbours cover each pair once
    for (auto [dr, dq] : {std::pair{0, 1}, std::pair{1, 0}}) {
      int rr = r + dr, qq = q + dq;
      if (rr >= g.ny || qq >= g.nx) continue;
      int n = g.col_index(rr, qq);
      if (n < 0) continue;
      for (int k = 0; k < g.nz; ++k)
        fs.internal.push_back({c * g.nz + k, n * g.nz + k, g.dx * g.dz, g.dx});
    }
  }

  // top faces per the surface condition
  Eigen::ArrayXd hf;  // lazy: only needed for seepage switching
  for (int c = 0; c < g.column_count(); ++c) {
    bool flooded = bc.h_in(c) > 0.0;
    if (flooded) {
      fs.dirichlet.push_back(
          {c * g.nz, g.top_area(c), g.dz / 2, rg * (g.z_top(c) + bc.h_in(c)), true, c});
      continue;
    }
    if (bc.dry_mode == SurfaceBc::DryMode::zero_head) {
      fs.dirichlet.push_back({c * g.nz, g.top_area(c), g.dz / 2, rg * g.z_top(c), true, c});
    } else {
      // sealed until water presses from below, then a p = 0 seepage face
      if (hf.size() == 0) hf = h_filtr_field(g);
      if (hf(c) > 0.0)
        fs.dirichlet.push_back({c * g.nz, g.top_area(c), g.dz / 2, rg * g.z_top(c), true, c});
    }
  }

  // flooded columns on the domain wall press on it laterally
  if (bc.embankment_dirichlet) {
    for (int c = 0; c < g.column_count(); ++c) {
      if (!(bc.h_in(c) > 0.0)) continue;
      auto [r, q] = g.col_rc[c];
      int exposed = 0;
      for (auto [dr, dq] : {std::pair{0, 1}, std::pair{0, -1}, std::pair{1, 0}, std::pair{-1, 0}}) {
        int rr = r + dr, qq = q + dq;
        bool outside = rr < 0 || rr >= g.ny || qq < 0 || qq >= g.nx || g.col_index(rr, qq) < 0;
        if (outside) ++exposed;
      }
      if (!exposed) continue;
      double level = g.z_top(c) + bc.h_in(c);
      for (int k = 0; k < g.nz; ++k) {
        if (g.cell_z(c, k) >= level) continue;  // wall face above the waterline
        fs.dirichlet.push_back(
            {c * g.nz + k, exposed * g.dx * g.dz, g.dx / 2, rg * level, false, c});
      }
    }
  }
  // bottom faces stay closed: no entry

  return fs;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

SolveStats solve_spd(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                     Eigen::VectorXd& x, const SolveOptions& opt) {
  const Eigen::Index n = A.rows();
  const int cap = opt.max_iterations > 0 ? opt.max_iterations : int(10 * n);
  const double bnorm = b.norm();
  x = Eigen::VectorXd::Zero(n);
  if (bnorm == 0.0) return {0, 0.0};

  Eigen::VectorXd diag = A.diagonal();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(diag(i) > 0.0))
      throw SolverError("system is not positive definite (row " + std::to_string(i) + ")", {});
  Eigen::VectorXd inv_diag = diag.cwiseInverse();

  Eigen::VectorXd r = b;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd pdir = z;
  double rho = r.dot(z);
  std::vector<double> history;

  for (int it = 0; it <= cap; ++it) {
    double rel = r.norm() / bnorm;
    history.push_back(rel);
    if (rel <= opt.tol) return {it, rel};
    if (it == cap) break;

    Eigen::VectorXd q = A * pdir;
    double alpha = rho / pdir.dot(q);
    x += alpha * pdir;
    r -= alpha * q;
    z = inv_diag.cwiseProduct(r);
    double rho_next = r.dot(z);
    pdir = z + (rho_next / rho) * pdir;
    rho = rho_next;
  }
  throw SolverError("conjugate gradients stalled at relative residual " +
                        fmt_double(history.back()) + " after " + std::to_string(cap) +
                        " iterations",
                    history);
}

SolveStats step_subsurface(SubsurfaceGrid& g, const FaceSet& faces, double dt,
                           const SolveOptions& opt) {
  if (!(dt > 0.0)) throw ValidationError("subsurface dt must be positive");
  const int n = g.cell_count();
  const double mob = g.params.permeability / g.params.viscosity;
  const double rg = g.params.density * g.params.gravity;

  Eigen::VectorXd phi_old = g.potential();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(std::size_t(n) + 4 * faces.internal.size() + faces.dirichlet.size());
  Eigen::VectorXd rhs(n);

  for (int c = 0; c < g.column_count(); ++c) {
    double mass = g.params.storage * g.top_area(c) * g.dz / dt;  // S*Vol/dt per cell
    for (int k = 0; k < g.nz; ++k) {
      int id = c * g.nz + k;
      trip.emplace_back(id, id, mass);
      rhs(id) = mass * phi_old(id);
    }
  }
  for (const InternalFace& f : faces.internal) {
    double T = mob * f.area / f.dist;
    trip.emplace_back(f.c0, f.c0, T);
    trip.emplace_back(f.c1, f.c1, T);
    trip.emplace_back(f.c0, f.c1, -T);
    trip.emplace_back(f.c1, f.c0, -T);
  }
  for (const DirichletFace& f : faces.dirichlet) {
    double T = mob * f.area / f.dist;
    trip.emplace_back(f.cell, f.cell, T);
    rhs(f.cell) += T * f.phi;
  }

  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());

  Eigen::VectorXd phi;
  SolveStats stats = solve_spd(A, rhs, phi, opt);

  for (int c = 0; c < g.column_count(); ++c)
    for (int k = 0; k < g.nz; ++k) g.p(c * g.nz + k) = phi(c * g.nz + k) - rg * g.cell_z(c, k);
  return stats;
}

// ---------------------------------------------------------------------------
// derived fields
// ---------------------------------------------------------------------------

FluxField face_fluxes(const SubsurfaceGrid& g, const FaceSet& faces, const Eigen::VectorXd& phi) {
  if (phi.size() != g.cell_count()) throw ValidationError("potential vector has the wrong length");
  const double mob = g.params.permeability / g.params.viscosity;
  FluxField out;
  out.internal.resize(Eigen::Index(faces.internal.size()));
  out.dirichlet.resize(Eigen::Index(faces.dirichlet.size()));
  for (std::size_t i = 0; i < faces.internal.size(); ++i) {
    const InternalFace& f = faces.internal[i];
    out.internal(Eigen::Index(i)) = mob * f.area / f.dist * (phi(f.c0) - phi(f.c1));
  }
  for (std::size_t i = 0; i < faces.dirichlet.size(); ++i) {
    const DirichletFace& f = faces.dirichlet[i];
    out.dirichlet(Eigen::Index(i)) = mob * f.area / f.dist * (phi(f.cell) - f.phi);
  }
  return out;
}

Eigen::ArrayXd h_filtr_field(const SubsurfaceGrid& g) {
  const double rg = g.params.density * g.params.gravity;
  Eigen::ArrayXd h(g.column_count());
  for (int c = 0; c < g.column_count(); ++c) {
    // linear extrapolation from the two top cell centres to the surface;
    // exact for a hydrostatic profile
    double p_surface = 1.5 * g.p(c * g.nz) - 0.5 * g.p(c * g.nz + 1);
    h(c) = std::max(0.0, p_surface) / rg;
  }
  return h;
}

Eigen::ArrayXd h_total_field(const Eigen::ArrayXd& h_in, const Eigen::ArrayXd& h_filtr) {
  if (h_in.size() != h_filtr.size())
    throw ValidationError("h_in and h_filtr lengths disagree");
  return h_in + h_filtr;
}

Eigen::ArrayXd zone_exchange_rates(const FaceSet& faces, const FluxField& flux,
                                   const std::vector<int>& col_zone,
                                   const Eigen::ArrayXd& zone_col_area) {
  Eigen::ArrayXd rate = Eigen::ArrayXd::Zero(zone_col_area.size());
  for (std::size_t i = 0; i < faces.dirichlet.size(); ++i) {
    const DirichletFace& f = faces.dirichlet[i];
    if (!f.top_surface) continue;  // wall faces exchange with the sea, not a zone
    if (f.column < 0 || f.column >= int(col_zone.size())) continue;
    int zn = col_zone[f.column];
    if (zn < 0) continue;
    rate(zn) += flux.dirichlet(Eigen::Index(i));
  }
  for (Eigen::Index z = 0; z < rate.size(); ++z)
    rate(z) = zone_col_area(z) > 0.0 ? rate(z) / zone_col_area(z) : 0.0;
  return rate;
}

DtmRaster expand_to_raster(const SubsurfaceGrid& g, const Eigen::ArrayXd& per_column,
                           const DtmRaster& dtm) {
  if (per_column.size() != g.column_count())
    throw ValidationError("per-column vector has the wrong length");
  if (dtm.nrows != g.fine_nrows || dtm.ncols != g.fine_ncols)
    throw ValidationError("raster does not match the grid footprint");
  DtmRaster out = dtm;
  for (int r = 0; r < dtm.nrows; ++r)
    for (int c = 0; c < dtm.ncols; ++c) {
      if (dtm.is_nodata(r, c)) continue;
      int col = g.col_index(r / g.coarsen, c / g.coarsen);
      out.z(r, c) = col >= 0 ? per_column(col) : 0.0;
    }
  return out;
}

}  // namespace izflood
