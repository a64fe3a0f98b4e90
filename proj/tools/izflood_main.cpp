#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "izflood/izmesh.hpp"
#include "izflood/render.hpp"
#include "izflood/runner.hpp"

namespace {

// Exit codes, also relied on by the test drivers:
//   0 success, 2 bad input (CLI, config, files), 3 numerical failure,
//   4 peer / protocol failure.
constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kNumericalError = 3;
constexpr int kPeerError = 4;

int run_preprocess(const std::string& dtm_path, const std::string& mesh_out,
                   const izflood::DelineateOptions& opt) {
  const izflood::DtmRaster dtm = izflood::read_ascii_grid(dtm_path);
  const izflood::ZoneMesh mesh = izflood::delineate_zones(dtm, opt);
  izflood::write_mesh(mesh, mesh_out);
  std::cout << izflood::format_stats(izflood::mesh_stats(mesh));
  std::cout << "mesh written to " << mesh_out << "\n";
  return kOk;
}

int run_run(const std::string& config_path, const izflood::ScenarioOverrides& ov) {
  izflood::ScenarioConfig cfg = izflood::load_scenario(config_path);
  izflood::apply_overrides(cfg, ov);
  cfg.validate();
  const izflood::RunReport rep = izflood::run_scenario(cfg);
  std::cout << "completed: t = " << rep.t_end << " s, " << rep.frames
            << " output frame(s), " << rep.zones << " zone(s)";
  if (rep.columns > 0) std::cout << ", " << rep.columns << " porous column(s)";
  std::cout << "\noutputs in " << cfg.output_dir << "\n";
  return kOk;
}

int run_serve(const std::string& config_path, const std::string& listen,
              const std::string& out_dir) {
  izflood::ScenarioConfig cfg = izflood::load_scenario(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  const izflood::ServeReport rep = izflood::serve_scenario(
      cfg, listen, [](std::uint16_t port) {
        std::cout << "listening on " << port << std::endl;  // flushed: peers wait for it
      });
  std::cout << "peer drove " << rep.intervals << " interval(s); "
            << (rep.halted ? "clean halt" : "ended without halt") << "\n";
  return kOk;
}

int run_render(const std::string& run_dir) {
  const int n = izflood::render_run(run_dir);
  std::cout << "rendered " << n << " frame(s) in " << run_dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"izflood — coupled surface/subsurface urban flood model"};
  app.require_subcommand(1);

  std::string dtm_path, mesh_out = "mesh.izmesh";
  izflood::DelineateOptions dopt;
  CLI::App* pre = app.add_subcommand("preprocess", "build an impact-zone mesh from a terrain raster");
  pre->add_option("dtm", dtm_path, "terrain raster (ESRI ASCII grid)")->required();
  pre->add_option("--out", mesh_out, "mesh file to write (default mesh.izmesh)");
  pre->add_option("--merge-epsilon", dopt.merge_epsilon, "fold depressions shallower than this many metres into their neighbour");
  pre->add_option("--headroom", dopt.headroom, "level-table range above the highest spill crest, m");

  std::string run_config;
  izflood::ScenarioOverrides ov;
  CLI::App* run = app.add_subcommand("run", "execute a scenario");
  run->add_option("--config", run_config, "scenario JSON")->required();
  run->add_option("--out", ov.output_dir, "output directory (overrides the scenario)");
  run->add_option("--connect", ov.connect_endpoint, "host:port of a porous-model server; forces socket coupling");
  run->add_option("--until", ov.until, "stop at this simulation time, s (overrides the scenario)");
  run->add_option("--output-interval", ov.output_interval, "seconds between output frames (overrides the scenario)");

  std::string serve_config, listen, serve_out;
  CLI::App* serve = app.add_subcommand("serve", "serve the scenario's porous model to one surface peer");
  serve->add_option("--config", serve_config, "scenario JSON")->required();
  serve->add_option("--listen", listen, "host:port to listen on (port 0 picks one and prints it)")->required();
  serve->add_option("--out", serve_out, "output directory (overrides the scenario)");

  std::string run_dir;
  CLI::App* render = app.add_subcommand("render", "paint a run's depth frames over a hillshade");
  render->add_option("run_dir", run_dir, "output directory of a finished run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (pre->parsed()) return run_preprocess(dtm_path, mesh_out, dopt);
    if (run->parsed()) return run_run(run_config, ov);
    if (serve->parsed()) return run_serve(serve_config, listen, serve_out);
    if (render->parsed()) return run_render(run_dir);
  } catch (const izflood::ProtocolError& e) {  // PeerTimeout included
    std::cerr << "error: " << e.what() << "\n";
    return kPeerError;
  } catch (const izflood::SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const izflood::SimulationHalt& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const izflood::TableOverflow& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const izflood::ValidationError& e) {  // ParseError included
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
