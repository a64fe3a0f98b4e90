#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "izflood/scenario.hpp"
#include "izflood/terrain.hpp"

using namespace izflood;
namespace fs = std::filesystem;

namespace {

// Self-cleaning directory holding one test's input files.
struct ScratchDir {
  fs::path path;

  ScratchDir() {
    std::random_device rd;
    path = fs::temp_directory_path() /
           ("izflood_scenario_" + std::to_string(rd() % 1000000000));
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }

  std::string file(const std::string& name, const std::string& body) const {
    const fs::path p = path / name;
    std::ofstream out(p);
    out << body;
    return p.string();
  }
};

// Writes the two inputs every scenario needs and returns the directory.
ScratchDir make_inputs() {
  ScratchDir dir;
  write_ascii_grid(synth_terrain(SynthSpec::two_basin(12, 12, 10.0, 2.0, 1.0)),
                   (dir.path / "terrain.asc").string());
  dir.file("sea.csv", "time_s,level_m\n0,0.1\n600,1.5\n7200,1.5\n");
  return dir;
}

}  // namespace

TEST_CASE("minimal scenario gets the documented defaults") {
  ScratchDir dir = make_inputs();
  dir.file("scn.json", R"({"dtm": "terrain.asc", "hydrograph": "sea.csv"})");

  ScenarioConfig cfg = load_scenario((dir.path / "scn.json").string());

  CHECK(cfg.dtm_path == (dir.path / "terrain.asc").string());
  CHECK(cfg.hydrograph_path == (dir.path / "sea.csv").string());
  CHECK(cfg.mesh_path.empty());
  CHECK(cfg.coupling == CouplingMode::off);
  CHECK(cfg.surface.dt == 10.0);
  CHECK(cfg.surface.law == DischargeLaw::weir);
  CHECK(cfg.surface.flood_threshold == 1.30);
  CHECK(cfg.waterfront_border);
  CHECK(cfg.porous_nz == 5);
  CHECK(cfg.schedule.surface_dt == cfg.surface.dt);
  CHECK(cfg.output_interval == 0.0);
  CHECK(cfg.effective_output_interval() == cfg.schedule.coupling_dt);
  // relative output_dir resolves next to the scenario file
  CHECK(cfg.output_dir == (dir.path / "out").string());
}

TEST_CASE("a fully specified scenario round-trips every field") {
  ScratchDir dir = make_inputs();
  dir.file("scn.json", R"({
    // comments are fine in scenario files
    "dtm": "terrain.asc",
    "hydrograph": "sea.csv",
    "output_dir": "results",
    "output_interval": 600,
    "coupling": "in_process",
    "peer_timeout_s": 5,
    "delineate": {"merge_epsilon": 0.05, "headroom": 20},
    "surface": {
      "dt": 5,
      "law": "manning",
      "manning_n": 0.04,
      "weir_cd": 0.55,
      "limiter_fraction": 0.2,
      "flood_threshold": 0.8,
      "surcharge_area": "plan",
      "waterfront": [[0, 120.5], [3, 60]]
    },
    "subsurface": {
      "storage": 1e-5,
      "permeability": 1e-11,
      "viscosity": 1.3e-3,
      "density": 1025,
      "depth": 8,
      "nz": 4,
      "coarsen": 2,
      "dry_mode": "zero_head",
      "embankment_dirichlet": false,
      "solver_tol": 1e-9,
      "solver_max_iterations": 500
    },
    "schedule": {"subsurface_dt": 30, "coupling_dt": 60, "end_time": 1800}
  })");

  ScenarioConfig cfg = load_scenario((dir.path / "scn.json").string());

  CHECK(cfg.output_dir == (dir.path / "results").string());
  CHECK(cfg.output_interval == 600.0);
  CHECK(cfg.coupling == CouplingMode::in_process);
  CHECK(cfg.peer_timeout_s == 5.0);
  CHECK(cfg.delineate.merge_epsilon == 0.05);
  CHECK(cfg.delineate.headroom == 20.0);
  CHECK(cfg.surface.dt == 5.0);
  CHECK(cfg.surface.law == DischargeLaw::manning);
  CHECK(cfg.surface.manning_n == 0.04);
  CHECK(cfg.surface.weir_cd == 0.55);
  CHECK(cfg.surface.limiter_fraction == 0.2);
  CHECK(cfg.surface.flood_threshold == 0.8);
  CHECK(cfg.surface.surcharge_area == SurfaceConfig::AreaBasis::plan);
  CHECK_FALSE(cfg.waterfront_border);
  REQUIRE(cfg.waterfront_explicit.size() == 2);
  CHECK(cfg.waterfront_explicit[0].zone == 0);
  CHECK(cfg.waterfront_explicit[0].boundary_length == 120.5);
  CHECK(cfg.waterfront_explicit[1].zone == 3);
  CHECK(cfg.porous.storage == 1e-5);
  CHECK(cfg.porous.permeability == 1e-11);
  CHECK(cfg.porous.viscosity == 1.3e-3);
  CHECK(cfg.porous.density == 1025.0);
  CHECK(cfg.porous_depth == 8.0);
  CHECK(cfg.porous_nz == 4);
  CHECK(cfg.porous_coarsen == 2);
  CHECK(cfg.dry_mode == SurfaceBc::DryMode::zero_head);
  CHECK_FALSE(cfg.embankment_dirichlet);
  CHECK(cfg.solver.tol == 1e-9);
  CHECK(cfg.solver.max_iterations == 500);
  CHECK(cfg.schedule.subsurface_dt == 30.0);
  CHECK(cfg.schedule.coupling_dt == 60.0);
  CHECK(cfg.schedule.end_time == 1800.0);
  CHECK(cfg.schedule.surface_dt == 5.0);
}

TEST_CASE("the emitted JSON loads back to the same configuration") {
  ScratchDir dir = make_inputs();
  dir.file("scn.json", R"({
    "dtm": "terrain.asc", "hydrograph": "sea.csv",
    "coupling": "in_process",
    "surface": {"dt": 5, "waterfront": [[1, 44]]},
    "schedule": {"subsurface_dt": 30, "coupling_dt": 30, "end_time": 600}
  })");
  ScenarioConfig cfg = load_scenario((dir.path / "scn.json").string());

  dir.file("echo.json", scenario_to_json(cfg));
  ScenarioConfig back = load_scenario((dir.path / "echo.json").string());

  CHECK(back.dtm_path == cfg.dtm_path);
  CHECK(back.hydrograph_path == cfg.hydrograph_path);
  CHECK(back.coupling == cfg.coupling);
  CHECK(back.surface.dt == cfg.surface.dt);
  CHECK(back.waterfront_border == cfg.waterfront_border);
  REQUIRE(back.waterfront_explicit.size() == 1);
  CHECK(back.waterfront_explicit[0].zone == 1);
  CHECK(back.schedule.end_time == cfg.schedule.end_time);
  CHECK(back.output_dir == cfg.output_dir);
}

TEST_CASE("typos and wrong types are refused with the key named") {
  ScratchDir dir = make_inputs();
  const std::string head = R"({"dtm": "terrain.asc", "hydrograph": "sea.csv")";

  dir.file("a.json", head + R"(, "coupling_mode": "off"})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "a.json").string()),
                       doctest::Contains("unknown key 'coupling_mode'"), ValidationError);

  dir.file("b.json", head + R"(, "surface": {"depth": 3}})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "b.json").string()),
                       doctest::Contains("unknown key 'depth'"), ValidationError);

  dir.file("c.json", head + R"(, "surface": {"dt": "10"}})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "c.json").string()),
                       doctest::Contains("'dt' must be a number"), ValidationError);

  dir.file("d.json", head + R"(, "subsurface": {"nz": 4.5}})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "d.json").string()),
                       doctest::Contains("'nz' must be an integer"), ValidationError);

  dir.file("e.json", head + R"(, "coupling": "sidecar"})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "e.json").string()),
                       doctest::Contains("coupling must be off, in_process or connect"),
                       ValidationError);

  dir.file("f.json", head + R"(, "surface": {"law": "chezy"}})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "f.json").string()),
                       doctest::Contains("law must be weir or manning"), ValidationError);

  dir.file("g.json", head + R"(, "surface": {"waterfront": [[0]]}})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "g.json").string()),
                       doctest::Contains("[zone, boundary_length]"), ValidationError);
}

TEST_CASE("missing pieces are refused before anything runs") {
  ScratchDir dir = make_inputs();

  dir.file("no_hydro.json", R"({"dtm": "terrain.asc"})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "no_hydro.json").string()),
                       doctest::Contains("'hydrograph' is required"), ValidationError);

  dir.file("ghost.json", R"({"dtm": "missing.asc", "hydrograph": "sea.csv"})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "ghost.json").string()),
                       doctest::Contains("does not exist"), ValidationError);

  dir.file("broken.json", R"({"dtm": "terrain.asc", )");
  CHECK_THROWS_AS(load_scenario((dir.path / "broken.json").string()), ValidationError);

  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "never_written.json").string()),
                       doctest::Contains("cannot open"), ValidationError);
}

TEST_CASE("the timetable must nest: outputs on coupling intervals, end on outputs") {
  ScratchDir dir = make_inputs();
  const std::string head = R"({"dtm": "terrain.asc", "hydrograph": "sea.csv")";

  dir.file("a.json", head + R"(, "output_interval": 90,
    "schedule": {"subsurface_dt": 60, "coupling_dt": 60, "end_time": 3600}})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "a.json").string()),
                       doctest::Contains("whole multiple"), ValidationError);

  dir.file("b.json", head + R"(, "output_interval": 120,
    "schedule": {"subsurface_dt": 60, "coupling_dt": 60, "end_time": 3180}})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "b.json").string()),
                       doctest::Contains("whole multiple"), ValidationError);

  dir.file("ok.json", head + R"(, "output_interval": 120,
    "schedule": {"subsurface_dt": 60, "coupling_dt": 60, "end_time": 3600}})");
  CHECK_NOTHROW(load_scenario((dir.path / "ok.json").string()));
}

TEST_CASE("connect mode needs a usable endpoint") {
  ScratchDir dir = make_inputs();
  const std::string head = R"({"dtm": "terrain.asc", "hydrograph": "sea.csv")";

  dir.file("a.json", head + R"(, "coupling": "connect"})");
  CHECK_THROWS_WITH_AS(load_scenario((dir.path / "a.json").string()),
                       doctest::Contains("needs an endpoint"), ValidationError);

  dir.file("b.json", head + R"(, "coupling": "connect", "endpoint": "nocolon"})");
  CHECK_THROWS_AS(load_scenario((dir.path / "b.json").string()), ValidationError);

  dir.file("ok.json", head + R"(, "coupling": "connect", "endpoint": "127.0.0.1:4444"})");
  ScenarioConfig cfg = load_scenario((dir.path / "ok.json").string());
  CHECK(cfg.coupling == CouplingMode::connect);
  CHECK(cfg.endpoint == "127.0.0.1:4444");
}

TEST_CASE("command-line overrides replace file values and re-validate") {
  ScratchDir dir = make_inputs();
  dir.file("scn.json", R"({
    "dtm": "terrain.asc", "hydrograph": "sea.csv",
    "schedule": {"subsurface_dt": 60, "coupling_dt": 60, "end_time": 3600}
  })");
  ScenarioConfig cfg = load_scenario((dir.path / "scn.json").string());

  ScenarioOverrides keep;  // all fields at their "keep the file" defaults
  apply_overrides(cfg, keep);
  CHECK(cfg.schedule.end_time == 3600.0);
  CHECK(cfg.coupling == CouplingMode::off);

  ScenarioOverrides ov;
  ov.output_dir = (dir.path / "elsewhere").string();
  ov.connect_endpoint = "127.0.0.1:9999";
  ov.until = 1800.0;
  ov.output_interval = 600.0;
  apply_overrides(cfg, ov);
  CHECK(cfg.output_dir == ov.output_dir);
  CHECK(cfg.coupling == CouplingMode::connect);
  CHECK(cfg.endpoint == "127.0.0.1:9999");
  CHECK(cfg.schedule.end_time == 1800.0);
  CHECK(cfg.output_interval == 600.0);

  // an override that breaks the timetable is refused like any other bad input
  ScenarioOverrides bad;
  bad.until = 1850.0;  // not a multiple of the 600 s output interval
  CHECK_THROWS_WITH_AS(apply_overrides(cfg, bad), doctest::Contains("whole multiple"),
                       ValidationError);
}

TEST_CASE("absolute paths in the file are left alone") {
  ScratchDir dir = make_inputs();
  const std::string abs_dtm = (dir.path / "terrain.asc").string();
  dir.file("scn.json",
           R"({"dtm": ")" + abs_dtm + R"(", "hydrograph": "sea.csv"})");
  ScenarioConfig cfg = load_scenario((dir.path / "scn.json").string());
  CHECK(cfg.dtm_path == abs_dtm);
}
