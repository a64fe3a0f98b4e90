#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "izflood/scenario.hpp"

namespace izflood {

struct RunReport {
  double t_end = 0.0;   // simulation seconds actually reached
  int frames = 0;       // output times written, t = 0 included
  int zones = 0;
  int columns = 0;      // 0 when the run is uncoupled
};

/// Execute a scenario end to end. cfg.output_dir receives depth_<t>.asc (plus
/// h_filtr_<t>.asc and h_total_<t>.asc when coupled), zones.csv,
/// mass_balance.csv, subsurface_log.csv (in-process coupling), a terrain.asc
/// copy for rendering, and manifest.json. A numerical halt or a lost peer
/// flushes everything written so far and records the failure in the manifest
/// before the exception continues to the caller.
RunReport run_scenario(const ScenarioConfig& cfg);

/// Serve the scenario's porous model to one surface peer. on_listening is
/// called with the bound port before the first accept, so callers can connect
/// to an ephemeral port. Writes subsurface_log.csv and serve_manifest.json
/// into cfg.output_dir; file names stay disjoint from run_scenario's so both
/// ends of a loopback run may share a directory.
ServeReport serve_scenario(const ScenarioConfig& cfg, const std::string& listen_endpoint,
                           const std::function<void(std::uint16_t)>& on_listening = {});

}  // namespace izflood
