#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "izflood/izmesh.hpp"

namespace izflood {

/// Sea level vs time, piecewise linear between strictly increasing samples.
struct Hydrograph {
  Eigen::ArrayXd t;      // s
  Eigen::ArrayXd level;  // m, absolute

  /// Interpolated level; time outside the sampled range halts the run.
  double level_at(double time) const;

  double t_begin() const { return t(0); }
  double t_end() const { return t(t.size() - 1); }
  void validate() const;

  /// CSV "time_s,level_m"; '#' comments and an optional header line allowed.
  static Hydrograph from_csv(std::istream& in);
  static Hydrograph from_csv_file(const std::string& path);
};

enum class DischargeLaw { weir, manning };

/// A zone open to the sea and how much protection line it owns.
struct WaterfrontZone {
  int zone = -1;
  double boundary_length = 0.0;  // m
};

struct SurfaceConfig {
  double dt = 10.0;               // s
  DischargeLaw law = DischargeLaw::weir;
  double weir_cd = 0.6;           // broad-crested discharge coefficient
  double manning_n = 0.05;        // roughness for the friction law
  double limiter_fraction = 0.25; // max share of a donor's volume per step
  double flood_threshold = 1.30;  // m of depth that counts as "flooded"

  /// Plan area converts a surcharge rate to volume while a zone is dry; once
  /// flooded the wetted area at the current level is used instead (or plan
  /// always, if configured).
  enum class AreaBasis { wetted, plan };
  AreaBasis surcharge_area = AreaBasis::wetted;

  std::vector<WaterfrontZone> waterfront;

  void validate(int zone_count) const;
};

/// Signed discharge a->b over a broad-crested weir with Villemonte submergence
/// reduction; antisymmetric in (h_a, h_b) by construction, 0 below the crest.
double weir_discharge(double h_a, double h_b, double crest, double length, double cd);

/// Signed wide-channel friction flow: Q = L/n * d^(5/3) * sqrt(|dh|/dist)
/// with flow depth d above the crest.
double manning_discharge(double h_a, double h_b, double crest, double length,
                         double flow_distance, double n);

struct SurfaceState {
  double t = 0.0;
  Eigen::ArrayXd volume;     // m3 per zone, >= 0
  Eigen::ArrayXd level;      // m, consistent with volume via the zone table
  Eigen::ArrayXd discharge;  // m3/s, mean |Q| over the zone's edges last step
  Eigen::ArrayXd velocity;   // m/s, |Q|-weighted edge velocity last step

  // running ledgers for the volume balance
  double initial_volume = 0.0;  // m3 at state creation
  double inflow_total = 0.0;    // net boundary volume, signed
  double surcharge_total = 0.0; // net applied exchange volume, signed
  double created_total = 0.0;   // volume created by clamping dry zones at 0
  double clipped_total = 0.0;   // sink demand that found no water (diagnostic)

  void refresh_levels(const ZoneMesh& mesh);  // level = table(volume), may halt
};

SurfaceState init_surface_state(const ZoneMesh& mesh);

/// |sum(V) - (V0 + inflow + surcharge + created)| / max(1, sum(V))
double mass_balance_error(const SurfaceState& s);

/// Volume each waterfront zone exchanges with the sea over one dt: weir flow
/// over the protection crest at the flood threshold, a dry zone taking the
/// free-flow head. Inflow is capped at equalising with the sea, ebb at
/// draining to the higher of sea level and the crest, so the exchange can
/// never overshoot past its own driving head.
Eigen::ArrayXd boundary_inflow(const ZoneMesh& mesh, const SurfaceConfig& cfg,
                               const Hydrograph& hydro, const SurfaceState& s);

struct SurchargeVolumes {
  Eigen::ArrayXd dv;      // m3 per zone over one dt
  double clipped = 0.0;   // sink demand beyond the stored volume
};

/// Depth-rate (m/s) per zone -> volume per step, sinks clipped at empty.
SurchargeVolumes surcharge_volumes(const ZoneMesh& mesh, const SurfaceConfig& cfg,
                                   const SurfaceState& s, const Eigen::ArrayXd& rates);

/// One explicit step: inter-zone transfers under the flux limiter, then the
/// optional boundary/surcharge volumes, then levels and per-zone kinematics.
void step_surface(SurfaceState& s, const ZoneMesh& mesh, const SurfaceConfig& cfg,
                  const Eigen::ArrayXd* boundary_dv = nullptr,
                  const Eigen::ArrayXd* surcharge_dv = nullptr,
                  double surcharge_clipped = 0.0);

/// Water depth over the terrain implied by the zone levels; nodata preserved.
DtmRaster depth_raster(const ZoneMesh& mesh, const SurfaceState& s, const DtmRaster& dtm);

/// Mesh + config + hydrograph driving one SurfaceState forward in fixed steps.
class SurfaceModel {
 public:
  SurfaceModel(const ZoneMesh& mesh, SurfaceConfig cfg, Hydrograph hydro);

  /// Advance by `duration` (a multiple of cfg.dt), applying the given
  /// subsurface exchange rates (m/s per zone) on every step; null = none.
  void advance(double duration, const Eigen::ArrayXd* rates = nullptr);

  const SurfaceState& state() const { return state_; }
  SurfaceState& state() { return state_; }
  const ZoneMesh& mesh() const { return mesh_; }
  const SurfaceConfig& config() const { return cfg_; }
  const Hydrograph& hydrograph() const { return hydro_; }

 private:
  const ZoneMesh& mesh_;
  SurfaceConfig cfg_;
  Hydrograph hydro_;
  SurfaceState state_;
};

}  // namespace izflood
