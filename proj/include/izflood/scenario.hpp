#pragma once

#include <string>
#include <vector>

#include "izflood/coupling.hpp"

namespace izflood {

enum class CouplingMode { off, in_process, connect };

/// Everything one run needs, read from a single JSON file. Relative paths in
/// the file are resolved against the file's own directory, so a scenario can
/// travel together with its inputs.
struct ScenarioConfig {
  // inputs
  std::string dtm_path;
  std::string mesh_path;        // empty: delineate from the DTM at startup
  std::string hydrograph_path;
  DelineateOptions delineate;   // for inline preprocessing

  // overland model; the waterfront is either every raster-border zone or an
  // explicit list of (zone, boundary length) pairs
  SurfaceConfig surface;
  bool waterfront_border = true;
  std::vector<WaterfrontZone> waterfront_explicit;

  // porous model
  PorousParams porous;
  double porous_depth = 10.0;
  int porous_nz = 5;
  int porous_coarsen = 1;
  SurfaceBc::DryMode dry_mode = SurfaceBc::DryMode::no_flow;
  bool embankment_dirichlet = true;
  SolveOptions solver;

  // timetable and topology
  CouplingSchedule schedule;    // surface_dt mirrors surface.dt after loading
  CouplingMode coupling = CouplingMode::off;
  std::string endpoint;         // host:port for coupling = connect (and serve)
  double peer_timeout_s = 60.0;

  // outputs
  std::string output_dir = "out";
  double output_interval = 0.0;  // s; 0 means one output per coupling interval

  /// Field-level checks plus referenced-file existence; everything is checked
  /// before any compute starts, so a refused config writes nothing.
  void validate() const;

  /// The interval actually used for outputs (resolves the 0 default).
  double effective_output_interval() const;
};

/// Parse + resolve + validate. JSON syntax trouble raises ParseError; an
/// unknown key, a wrong type or a bad value raises ValidationError naming it.
ScenarioConfig load_scenario(const std::string& path);

/// Command-line values that win over the file (empty / negative = keep file).
struct ScenarioOverrides {
  std::string output_dir;
  std::string connect_endpoint;  // also flips coupling to connect
  double until = -1.0;           // replaces schedule.end_time
  double output_interval = -1.0;
};

void apply_overrides(ScenarioConfig& cfg, const ScenarioOverrides& ov);

/// The config as JSON text (round-trips through load_scenario), used for the
/// run manifest so a run can be reproduced from its outputs alone.
std::string scenario_to_json(const ScenarioConfig& cfg);

}  // namespace izflood
