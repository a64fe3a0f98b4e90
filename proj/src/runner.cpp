#include "izflood/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include <json.hpp>

namespace izflood {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct MeshBundle {
  DtmRaster dtm;
  ZoneMesh mesh;
};

MeshBundle load_inputs(const ScenarioConfig& cfg) {
  MeshBundle b;
  b.dtm = read_ascii_grid(cfg.dtm_path);
  if (cfg.mesh_path.empty()) {
    b.mesh = delineate_zones(b.dtm, cfg.delineate);
  } else {
    b.mesh = read_mesh(cfg.mesh_path);
    if (b.mesh.nrows != b.dtm.nrows || b.mesh.ncols != b.dtm.ncols ||
        b.mesh.cellsize != b.dtm.cellsize)
      throw ValidationError("mesh " + cfg.mesh_path + " was built for a different raster than " +
                            cfg.dtm_path);
  }
  return b;
}

SurfaceConfig surface_config(const ScenarioConfig& cfg, const ZoneMesh& mesh) {
  SurfaceConfig scfg = cfg.surface;
  scfg.waterfront.clear();
  if (cfg.waterfront_border) {
    for (auto [zone, length] : border_zones(mesh)) scfg.waterfront.push_back({zone, length});
  } else {
    scfg.waterfront = cfg.waterfront_explicit;
  }
  return scfg;
}

SubsurfaceEngine::Config engine_config(const ScenarioConfig& cfg) {
  SubsurfaceEngine::Config ec;
  ec.dry_mode = cfg.dry_mode;
  ec.embankment_dirichlet = cfg.embankment_dirichlet;
  ec.solver = cfg.solver;
  return ec;
}

std::string frame_name(const char* stem, double t) {
  return std::string(stem) + "_" + fmt_double(t) + ".asc";
}

void write_manifest(const fs::path& path, const ScenarioConfig& cfg, const std::string& outcome,
                    const std::string& message, double wall_seconds,
                    const std::vector<double>& frame_times, int zones, int columns) {
  json j;
  j["tool"] = "izflood";
  j["version"] = kVersion;
  j["outcome"] = outcome;
  if (!message.empty()) j["message"] = message;
  j["wall_seconds"] = wall_seconds;
  j["zone_count"] = zones;
  j["column_count"] = columns;
  json times = json::array();
  for (double t : frame_times) times.push_back(t);
  j["frame_times"] = times;
  j["scenario"] = json::parse(scenario_to_json(cfg));
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_solve_log(const fs::path& path, const std::vector<SolveLogRow>& log) {
  std::ofstream out(path);
  out << "t_s,iterations,relative_residual\n";
  for (const SolveLogRow& row : log)
    out << fmt_double(row.t) << "," << row.iterations << "," << fmt_double(row.residual) << "\n";
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto wall0 = std::chrono::steady_clock::now();
  auto wall_seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  };

  MeshBundle in = load_inputs(cfg);
  SurfaceConfig scfg = surface_config(cfg, in.mesh);
  Hydrograph hydro = Hydrograph::from_csv_file(cfg.hydrograph_path);
  SurfaceModel surface(in.mesh, scfg, hydro);

  const bool coupled = cfg.coupling != CouplingMode::off;
  std::optional<SubsurfaceGrid> grid;  // footprint for painting; engine state when in-process
  std::optional<SubsurfaceEngine> engine;
  std::unique_ptr<SubsurfaceSession> session;
  if (coupled) {
    grid = build_subsurface_grid(in.dtm, cfg.porous, cfg.porous_depth, cfg.porous_nz,
                                 cfg.porous_coarsen);
    if (cfg.coupling == CouplingMode::in_process) {
      engine.emplace(in.mesh, *grid, engine_config(cfg));  // engine owns a copy
      session = std::make_unique<InProcessSession>(*engine, cfg.schedule);
    } else {
      session = std::make_unique<SocketSession>(connect_peer(cfg.endpoint, cfg.peer_timeout_s),
                                                in.mesh.zone_count(), grid->column_count(),
                                                cfg.schedule);
    }
  }

  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  write_ascii_grid(in.dtm, (out / "terrain.asc").string());

  std::ofstream zones_csv(out / "zones.csv");
  zones_csv << "t_s,zone,volume_m3,level_m,depth_m,discharge_m3_s,velocity_m_s\n";
  std::ofstream mass_csv(out / "mass_balance.csv");
  mass_csv << "t_s,total_m3,initial_m3,inflow_m3,surcharge_m3,created_m3,clipped_m3,"
              "relative_error\n";

  RunReport report;
  report.zones = in.mesh.zone_count();
  report.columns = coupled ? grid->column_count() : 0;
  std::vector<double> frame_times;

  auto write_frame = [&](double t, const Eigen::ArrayXd* h_filtr) {
    const SurfaceState& s = surface.state();
    DtmRaster depth = depth_raster(in.mesh, s, in.dtm);
    write_ascii_grid(depth, (out / frame_name("depth", t)).string());
    if (h_filtr) {
      DtmRaster hf = expand_to_raster(*grid, *h_filtr, in.dtm);
      write_ascii_grid(hf, (out / frame_name("h_filtr", t)).string());
      DtmRaster total = depth;
      for (int r = 0; r < total.nrows; ++r)
        for (int c = 0; c < total.ncols; ++c)
          if (!total.is_nodata(r, c)) total.z(r, c) += hf.z(r, c);
      write_ascii_grid(total, (out / frame_name("h_total", t)).string());
    }
    for (int z = 0; z < in.mesh.zone_count(); ++z) {
      zones_csv << fmt_double(t) << "," << z << "," << fmt_double(s.volume(z)) << ","
                << fmt_double(s.level(z)) << ","
                << fmt_double(s.level(z) - in.mesh.zones[std::size_t(z)].z_min) << ","
                << fmt_double(s.discharge(z)) << "," << fmt_double(s.velocity(z)) << "\n";
    }
    double total = s.volume.sum();
    mass_csv << fmt_double(t) << "," << fmt_double(total) << "," << fmt_double(s.initial_volume)
             << "," << fmt_double(s.inflow_total) << "," << fmt_double(s.surcharge_total) << ","
             << fmt_double(s.created_total) << "," << fmt_double(s.clipped_total) << ","
             << fmt_double(mass_balance_error(s)) << "\n";
    frame_times.push_back(t);
    ++report.frames;
  };

  auto flush_outputs = [&](const std::string& outcome, const std::string& message) {
    zones_csv.flush();
    mass_csv.flush();
    if (engine) write_solve_log(out / "subsurface_log.csv", engine->solve_log());
    write_manifest(out / "manifest.json", cfg, outcome, message, wall_seconds(), frame_times,
                   report.zones, report.columns);
  };

  try {
    const double out_dt = cfg.effective_output_interval();
    if (!coupled) {
      write_frame(0.0, nullptr);
      int blocks = int(std::llround(cfg.schedule.end_time / out_dt));
      for (int b = 0; b < blocks; ++b) {
        surface.advance(out_dt);
        write_frame(surface.state().t, nullptr);
      }
    } else {
      Eigen::ArrayXd hf0 = engine ? h_filtr_field(engine->grid()) : h_filtr_field(*grid);
      write_frame(0.0, &hf0);
      const int per_output = int(std::llround(out_dt / cfg.schedule.coupling_dt));
      run_coupled(surface, *session, cfg.schedule,
                  [&](int interval, double t, const SurfaceModel&, const ExchangeReply& reply) {
                    if ((interval + 1) % per_output == 0) write_frame(t, &reply.h_filtr);
                  });
    }
  } catch (const SimulationHalt& e) {
    flush_outputs("halted", e.what());
    throw;
  } catch (const SolverError& e) {
    flush_outputs("halted", e.what());
    throw;
  } catch (const TableOverflow& e) {
    flush_outputs("halted", e.what());
    throw;
  } catch (const ProtocolError& e) {
    flush_outputs("peer_failure", e.what());
    throw;
  }

  report.t_end = surface.state().t;
  flush_outputs("completed", "");
  return report;
}

ServeReport serve_scenario(const ScenarioConfig& cfg, const std::string& listen_endpoint,
                           const std::function<void(std::uint16_t)>& on_listening) {
  cfg.validate();
  const auto wall0 = std::chrono::steady_clock::now();
  auto wall_seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  };

  MeshBundle in = load_inputs(cfg);
  SubsurfaceGrid grid = build_subsurface_grid(in.dtm, cfg.porous, cfg.porous_depth,
                                              cfg.porous_nz, cfg.porous_coarsen);
  SubsurfaceEngine engine(in.mesh, std::move(grid), engine_config(cfg));

  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  auto flush_outputs = [&](const std::string& outcome, const std::string& message) {
    write_solve_log(out / "subsurface_log.csv", engine.solve_log());
    write_manifest(out / "serve_manifest.json", cfg, outcome, message, wall_seconds(), {},
                   engine.zone_count(), engine.column_count());
  };

  Listener listener(listen_endpoint);
  if (on_listening) on_listening(listener.port());
  try {
    ServeReport report = serve_subsurface(listener, engine, cfg.schedule, {cfg.peer_timeout_s});
    flush_outputs("completed", "");
    return report;
  } catch (const ProtocolError& e) {
    flush_outputs("peer_failure", e.what());
    throw;
  } catch (const SolverError& e) {
    flush_outputs("halted", e.what());
    throw;
  }
}

}  // namespace izflood
