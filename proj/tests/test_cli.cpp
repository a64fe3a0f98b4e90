// Drives the installed binary the way a user would: real argv, real exit
// codes, real files. The binary path is baked in at compile time.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <sys/wait.h>

#include "izflood/terrain.hpp"

using namespace izflood;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
  fs::path path;
  ScratchDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("izflood_cli_" + std::to_string(rd() % 1000000000));
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Run `izflood <args>` with stdout/stderr captured into scratch files.
CmdResult izflood_cmd(const ScratchDir& dir, const std::string& args) {
  const fs::path out = dir.path / ".cmd_out";
  const fs::path err = dir.path / ".cmd_err";
  const std::string cmd = std::string(IZFLOOD_BIN) + " " + args + " >" + out.string() +
                          " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Terrain + sea + scenario file in `dir`; returns the scenario path.
std::string make_scenario(const ScratchDir& dir,
                          const std::string& hydro = "0,0.1\n600,1.2\n1e6,1.2\n") {
  write_ascii_grid(synth_terrain(SynthSpec::island_center(12, 12, 10.0, 2.0, 1.0)),
                   (dir.path / "terrain.asc").string());
  std::ofstream(dir.path / "sea.csv") << hydro;
  std::ofstream(dir.path / "scn.json") << R"({
    "dtm": "terrain.asc",
    "hydrograph": "sea.csv",
    "output_interval": 60,
    "peer_timeout_s": 5,
    "surface": {"dt": 5, "flood_threshold": 0.2},
    "subsurface": {"permeability": 1e-9, "storage": 1e-5, "depth": 5, "nz": 4, "coarsen": 2},
    "schedule": {"subsurface_dt": 15, "coupling_dt": 30, "end_time": 300}
  })";
  return (dir.path / "scn.json").string();
}

}  // namespace

TEST_CASE("no subcommand is refused with usage, --help succeeds") {
  ScratchDir dir;
  CmdResult none = izflood_cmd(dir, "");
  CHECK(none.exit_code == 2);

  CmdResult help = izflood_cmd(dir, "--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("preprocess") != std::string::npos);
  CHECK(help.out.find("run") != std::string::npos);
  CHECK(help.out.find("serve") != std::string::npos);
  CHECK(help.out.find("render") != std::string::npos);

  CmdResult typo = izflood_cmd(dir, "simulate");
  CHECK(typo.exit_code == 2);
}

TEST_CASE("preprocess reports the mesh and writes it where asked") {
  ScratchDir dir;
  write_ascii_grid(synth_terrain(SynthSpec::two_basin(16, 16, 5.0, 2.0, 1.0)),
                   (dir.path / "t.asc").string());
  const std::string mesh = (dir.path / "m.izmesh").string();

  CmdResult r = izflood_cmd(dir, "preprocess " + (dir.path / "t.asc").string() + " --out " + mesh);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("zones ") != std::string::npos);
  CHECK(r.out.find("cells/zone") != std::string::npos);
  CHECK(r.out.find("mesh written to") != std::string::npos);
  CHECK(fs::exists(mesh));

  CmdResult missing = izflood_cmd(dir, "preprocess " + (dir.path / "absent.asc").string());
  CHECK(missing.exit_code == 2);
  CHECK(missing.err.find("absent.asc") != std::string::npos);
}

TEST_CASE("run executes a scenario and reports where the outputs went") {
  ScratchDir dir;
  const std::string scn = make_scenario(dir);
  const std::string out = (dir.path / "out").string();

  CmdResult r = izflood_cmd(dir, "run --config " + scn + " --out " + out);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("completed") != std::string::npos);
  CHECK(r.out.find(out) != std::string::npos);
  CHECK(fs::exists(fs::path(out) / "depth_300.asc"));
  CHECK(fs::exists(fs::path(out) / "manifest.json"));

  // --until trims the schedule: last frame at 120, none beyond
  const std::string cut = (dir.path / "cut").string();
  CmdResult u = izflood_cmd(dir, "run --config " + scn + " --out " + cut + " --until 120");
  CHECK(u.exit_code == 0);
  CHECK(fs::exists(fs::path(cut) / "depth_120.asc"));
  CHECK_FALSE(fs::exists(fs::path(cut) / "depth_180.asc"));
}

TEST_CASE("bad configs exit 2 and say what is wrong") {
  ScratchDir dir;
  make_scenario(dir);

  std::ofstream(dir.path / "typo.json") << R"({"dtm": "terrain.asc", "hydrograph": "sea.csv",
    "coupling_mode": "off"})";
  CmdResult r = izflood_cmd(dir, "run --config " + (dir.path / "typo.json").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("unknown key 'coupling_mode'") != std::string::npos);

  CmdResult gone = izflood_cmd(dir, "run --config " + (dir.path / "nope.json").string());
  CHECK(gone.exit_code == 2);

  // an override that breaks the timetable is input error, not a crash
  CmdResult bad = izflood_cmd(dir, "run --config " + (dir.path / "scn.json").string() +
                                       " --until 145");
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("whole multiple") != std::string::npos);
}

TEST_CASE("a run that halts mid-way exits 3 and leaves the manifest honest") {
  ScratchDir dir;
  const std::string scn = make_scenario(dir, "0,0.1\n200,1.2\n");  // too short
  const std::string out = (dir.path / "out").string();

  CmdResult r = izflood_cmd(dir, "run --config " + scn + " --out " + out);
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(slurp(fs::path(out) / "manifest.json").find("\"halted\"") != std::string::npos);
}

TEST_CASE("render paints the frames of a finished run") {
  ScratchDir dir;
  const std::string scn = make_scenario(dir);
  const std::string out = (dir.path / "out").string();
  REQUIRE(izflood_cmd(dir, "run --config " + scn + " --out " + out).exit_code == 0);

  CmdResult r = izflood_cmd(dir, "render " + out);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("rendered 6 frame(s)") != std::string::npos);
  CHECK(fs::exists(fs::path(out) / "render_0.ppm"));
  CHECK(fs::exists(fs::path(out) / "render_300.ppm"));
  CHECK(slurp(fs::path(out) / "render_300.ppm").rfind("P6\n", 0) == 0);

  CmdResult empty = izflood_cmd(dir, "render " + (dir.path / "nothing").string());
  CHECK(empty.exit_code == 2);
}

TEST_CASE("connecting to a dead endpoint exits 4") {
  ScratchDir dir;
  const std::string scn = make_scenario(dir);
  CmdResult r = izflood_cmd(dir, "run --config " + scn + " --out " + (dir.path / "o").string() +
                                     " --connect 127.0.0.1:1");
  CHECK(r.exit_code == 4);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("serve and run pair up over a socket and match the in-process answer") {
  ScratchDir dir;
  const std::string scn = make_scenario(dir);

  const std::string local = (dir.path / "local").string();
  std::ofstream(dir.path / "coupled.json") << R"({
    "dtm": "terrain.asc",
    "hydrograph": "sea.csv",
    "output_interval": 60,
    "peer_timeout_s": 5,
    "coupling": "in_process",
    "surface": {"dt": 5, "flood_threshold": 0.2},
    "subsurface": {"permeability": 1e-9, "storage": 1e-5, "depth": 5, "nz": 4, "coarsen": 2},
    "schedule": {"subsurface_dt": 15, "coupling_dt": 30, "end_time": 300}
  })";
  REQUIRE(izflood_cmd(dir, "run --config " + (dir.path / "coupled.json").string() + " --out " +
                               local)
              .exit_code == 0);

  // server in the background; its first stdout line carries the bound port
  const std::string srv_cmd = std::string(IZFLOOD_BIN) + " serve --config " + scn +
                              " --listen 127.0.0.1:0 --out " + (dir.path / "srv").string() +
                              " 2>" + (dir.path / "srv.err").string();
  FILE* srv = popen(srv_cmd.c_str(), "r");
  REQUIRE(srv != nullptr);
  char line[128] = {0};
  REQUIRE(std::fgets(line, sizeof line, srv) != nullptr);
  int port = 0;
  REQUIRE(std::sscanf(line, "listening on %d", &port) == 1);
  REQUIRE(port > 0);

  CmdResult client = izflood_cmd(dir, "run --config " + scn + " --out " +
                                          (dir.path / "remote").string() + " --connect 127.0.0.1:" +
                                          std::to_string(port));
  std::string srv_tail;  // the server's remaining output, drained before pclose
  while (std::fgets(line, sizeof line, srv)) srv_tail += line;
  const int srv_status = pclose(srv);
  const std::string srv_err = slurp(dir.path / "srv.err");
  CAPTURE(srv_status);
  CAPTURE(srv_tail);
  CAPTURE(srv_err);

  CHECK(client.exit_code == 0);
  CHECK(WIFEXITED(srv_status));
  CHECK(WEXITSTATUS(srv_status) == 0);
  CHECK(srv_err.empty());

  for (const char* name : {"zones.csv", "mass_balance.csv", "depth_300.asc", "h_filtr_300.asc"})
    CHECK(slurp(dir.path / "remote" / name) == slurp(dir.path / "local" / name));
}
