#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "izflood/coupling.hpp"

using namespace izflood;

namespace {

// A ring settlement behind a low protection line, an enclosed basin inland,
// porous ground underneath, and a rising sea: small but fully featured.
struct Scenario {
  DtmRaster dtm;
  ZoneMesh mesh;
  SurfaceConfig cfg;
  Hydrograph hydro;
  PorousParams params;

  Scenario() : dtm(synth_terrain(SynthSpec::island_center(12, 12, 10.0, 2.0, 1.0))) {
    mesh = delineate_zones(dtm);
    cfg.dt = 5.0;
    cfg.flood_threshold = 0.2;  // the protection crest sits low in this test
    for (auto [zone, length] : border_zones(mesh)) cfg.waterfront.push_back({zone, length});
    hydro.t.resize(3);
    hydro.t << 0.0, 600.0, 1e6;
    hydro.level.resize(3);
    hydro.level << 0.1, 1.2, 1.2;
    params.permeability = 1e-9;
    params.storage = 1e-5;
  }

  SubsurfaceGrid grid() const { return build_subsurface_grid(dtm, params, 5.0, 4, 2); }
};

CouplingSchedule quick_schedule() {
  CouplingSchedule s;
  s.surface_dt = 5.0;
  s.subsurface_dt = 15.0;
  s.coupling_dt = 30.0;
  s.end_time = 300.0;
  return s;
}

}  // namespace

TEST_CASE("schedules must nest: substeps per interval, intervals per run") {
  CouplingSchedule s = quick_schedule();
  s.validate();
  CHECK(s.surface_substeps() == 6);
  CHECK(s.subsurface_substeps() == 2);
  CHECK(s.intervals() == 10);

  CouplingSchedule bad = s;
  bad.surface_dt = 7.0;  // 30/7 is not whole
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.end_time = 310.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.coupling_dt = -30.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("columns join the zone most of their cells carry") {
  Scenario sc;
  SubsurfaceEngine engine(sc.mesh, sc.grid());
  REQUIRE(engine.zone_count() == sc.mesh.zone_count());
  REQUIRE(int(engine.column_zones().size()) == engine.column_count());

  // recount the majority vote straight from the label raster
  const SubsurfaceGrid& g = engine.grid();
  double mapped_area = 0.0;
  for (int c = 0; c < g.column_count(); ++c) {
    auto [R, C] = g.col_rc[std::size_t(c)];
    std::map<int, int> count;
    for (int r = R * g.coarsen; r < std::min((R + 1) * g.coarsen, g.fine_nrows); ++r)
      for (int q = C * g.coarsen; q < std::min((C + 1) * g.coarsen, g.fine_ncols); ++q)
        if (sc.mesh.labels(r, q) >= 0) ++count[sc.mesh.labels(r, q)];
    int best = -1, best_n = 0;
    for (auto [zone, n] : count)
      if (n > best_n) {
        best = zone;
        best_n = n;
      }
    CHECK(engine.column_zones()[std::size_t(c)] == best);
    if (best >= 0) mapped_area += g.top_area(c);
  }
  CHECK(engine.zone_column_area().sum() == doctest::Approx(mapped_area));

  // the enclosed inland basin owns the columns under the island's middle
  int centre_zone = 0;
  for (int z = 0; z < sc.mesh.zone_count(); ++z)
    if (sc.mesh.zones[z].z_min > sc.mesh.zones[centre_zone].z_min) centre_zone = z;
  int mid = g.col_index(g.ny / 2, g.nx / 2);
  REQUIRE(mid >= 0);
  CHECK(engine.column_zones()[std::size_t(mid)] == centre_zone);
}

TEST_CASE("a zero-feedback stub reproduces the plain surface run bitwise") {
  Scenario sc;
  CouplingSchedule sched = quick_schedule();

  SurfaceModel plain(sc.mesh, sc.cfg, sc.hydro);
  plain.advance(sched.end_time);

  SurfaceModel coupled(sc.mesh, sc.cfg, sc.hydro);
  ZeroFeedbackSession zero(sc.mesh.zone_count(), 0);
  int n = run_coupled(coupled, zero, sched);
  CHECK(n == 10);

  CHECK(coupled.state().t == plain.state().t);
  for (int z = 0; z < sc.mesh.zone_count(); ++z) {
    CHECK(coupled.state().volume(z) == plain.state().volume(z));
    CHECK(coupled.state().level(z) == plain.state().level(z));
  }
  CHECK(coupled.state().inflow_total == plain.state().inflow_total);
}

TEST_CASE("feedback rates actually move water through the surface model") {
  Scenario sc;
  CouplingSchedule sched = quick_schedule();

  struct ConstantRates : SubsurfaceSession {
    double rate;
    int zones;
    explicit ConstantRates(double r, int n) : rate(r), zones(n) {}
    ExchangeReply exchange(double, const Eigen::ArrayXd&) override {
      ExchangeReply reply;
      reply.zone_rates = Eigen::ArrayXd::Constant(zones, rate);
      reply.h_filtr = Eigen::ArrayXd();
      return reply;
    }
  };

  SurfaceModel fed(sc.mesh, sc.cfg, sc.hydro);
  ConstantRates springs(1e-5, sc.mesh.zone_count());
  run_coupled(fed, springs, sched);

  SurfaceModel dryrun(sc.mesh, sc.cfg, sc.hydro);
  ZeroFeedbackSession zero(sc.mesh.zone_count(), 0);
  run_coupled(dryrun, zero, sched);

  CHECK(fed.state().volume.sum() > dryrun.state().volume.sum());
  CHECK(fed.state().surcharge_total > 0.0);
  CHECK(dryrun.state().surcharge_total == 0.0);
}

TEST_CASE("interval rates are the time average of the sub-step rates") {
  Scenario sc;
  SubsurfaceEngine engine(sc.mesh, sc.grid());
  const int nz = engine.zone_count();

  Eigen::ArrayXd levels(nz);
  for (int z = 0; z < nz; ++z) levels(z) = sc.mesh.zones[z].z_min + 0.8;  // everything wet
  ExchangeReply reply = engine.advance_interval(0.0, levels, 2, 15.0);
  REQUIRE(reply.zone_rates.size() == nz);
  CHECK(engine.solve_log().size() == 2);
  CHECK(engine.solve_log()[0].t == 15.0);
  CHECK(engine.solve_log()[1].t == 30.0);

  // replay by hand on a second, identical grid
  SubsurfaceGrid g = sc.grid();
  SurfaceBc bc;
  bc.h_in.resize(g.column_count());
  for (int c = 0; c < g.column_count(); ++c) {
    int zn = engine.column_zones()[std::size_t(c)];
    double h = 0.0;
    if (zn >= 0 && levels(zn) > sc.mesh.zones[zn].z_min)
      h = std::max(0.0, levels(zn) - g.z_top(c));
    bc.h_in(c) = h;
  }
  Eigen::ArrayXd accum = Eigen::ArrayXd::Zero(nz);
  for (int s = 0; s < 2; ++s) {
    FaceSet faces = build_faces(g, bc);
    step_subsurface(g, faces, 15.0);
    FluxField flux = face_fluxes(g, faces, g.potential());
    accum += zone_exchange_rates(faces, flux, engine.column_zones(), engine.zone_column_area());
  }
  for (int z = 0; z < nz; ++z) CHECK(reply.zone_rates(z) == accum(z) / 2.0);
  Eigen::ArrayXd hf = h_filtr_field(g);
  for (int c = 0; c < g.column_count(); ++c) CHECK(reply.h_filtr(c) == hf(c));

  // fresh standing water soaks in: the wet zones lose to the ground
  CHECK(reply.zone_rates.minCoeff() < 0.0);
}

TEST_CASE("the wire between the models is invisible in the results") {
  Scenario sc;
  CouplingSchedule sched = quick_schedule();

  // in-process reference
  std::vector<Eigen::ArrayXd> levels_ref;
  {
    SubsurfaceEngine engine(sc.mesh, sc.grid());
    SurfaceModel surface(sc.mesh, sc.cfg, sc.hydro);
    InProcessSession session(engine, sched);
    run_coupled(surface, session, sched,
                [&](int, double, const SurfaceModel& m, const ExchangeReply&) {
                  levels_ref.push_back(m.state().level);
                });
  }

  // same run, subsurface behind a loopback socket
  Listener listener("127.0.0.1:0");
  std::string server_error;
  ServeReport report;
  std::thread server([&] {
    try {
      SubsurfaceEngine engine(sc.mesh, sc.grid());
      report = serve_subsurface(listener, engine, sched, {10.0});
    } catch (const std::exception& e) {
      server_error = e.what();
    }
  });

  std::vector<Eigen::ArrayXd> levels_sock;
  SurfaceModel surface(sc.mesh, sc.cfg, sc.hydro);
  {
    SubsurfaceEngine probe(sc.mesh, sc.grid());  // only for the counts
    SocketSession session(
        connect_peer("127.0.0.1:" + std::to_string(listener.port()), 10.0),
        probe.zone_count(), probe.column_count(), sched);
    run_coupled(surface, session, sched,
                [&](int, double, const SurfaceModel& m, const ExchangeReply&) {
                  levels_sock.push_back(m.state().level);
                });
  }
  server.join();

  CHECK(server_error.empty());
  CHECK(report.halted);
  CHECK(report.intervals == 10);
  REQUIRE(levels_sock.size() == levels_ref.size());
  for (std::size_t i = 0; i < levels_ref.size(); ++i)
    for (int z = 0; z < levels_ref[i].size(); ++z)
      CHECK(levels_sock[i](z) == levels_ref[i](z));  // bitwise, not approximately
}

TEST_CASE("a peer with different geometry is turned away at the door") {
  Scenario sc;
  CouplingSchedule sched = quick_schedule();

  Listener listener("127.0.0.1:0");
  std::string server_error;
  std::thread server([&] {
    try {
      SubsurfaceEngine engine(sc.mesh, sc.grid());
      serve_subsurface(listener, engine, sched, {10.0});
    } catch (const std::exception& e) {
      server_error = e.what();
    }
  });

  bool refused = false;
  std::string client_error;
  try {
    SocketSession session(connect_peer("127.0.0.1:" + std::to_string(listener.port()), 10.0),
                          sc.mesh.zone_count() + 1, 0, sched);  // wrong zone count
  } catch (const ProtocolError& e) {
    refused = true;
    client_error = e.what();
  }
  server.join();

  CHECK(refused);
  CHECK(client_error.find("geometry mismatch") != std::string::npos);
  CHECK(server_error.find("zone count") != std::string::npos);
}

TEST_CASE("a sequence jump is answered with an error frame") {
  Scenario sc;
  CouplingSchedule sched = quick_schedule();

  Listener listener("127.0.0.1:0");
  std::string server_error;
  std::thread server([&] {
    try {
      SubsurfaceEngine engine(sc.mesh, sc.grid());
      serve_subsurface(listener, engine, sched, {10.0});
    } catch (const std::exception& e) {
      server_error = e.what();
    }
  });

  Socket sock = connect_peer("127.0.0.1:" + std::to_string(listener.port()), 10.0);
  SubsurfaceEngine probe(sc.mesh, sc.grid());
  CouplingMessage hello;
  hello.kind = MsgKind::hello;
  hello.payload = {double(probe.zone_count()), double(probe.column_count()), sched.surface_dt,
                   sched.subsurface_dt,        sched.coupling_dt,            sched.end_time};
  write_frame(sock, hello);
  CHECK(read_frame(sock).kind == MsgKind::hello);

  CouplingMessage state;
  state.kind = MsgKind::surface_state;
  state.seq = 5;  // should have been 1
  state.payload.assign(std::size_t(probe.zone_count()), 0.0);
  write_frame(sock, state);

  CouplingMessage reply = read_frame(sock);
  server.join();
  CHECK(reply.kind == MsgKind::error);
  REQUIRE(reply.payload.size() == 1);
  CHECK(int(reply.payload[0]) == int(ErrorCode::sequence_gap));
  CHECK(server_error.find("sequence-number gap") != std::string::npos);
}

TEST_CASE("peer death mid-run leaves the survivor with its partial state") {
  Scenario sc;
  CouplingSchedule sched = quick_schedule();

  Listener listener("127.0.0.1:0");
  std::thread server([&] {
    // answer the handshake and exactly one exchange, then vanish
    Socket peer = listener.accept_peer(10.0);
    CouplingMessage hello = read_frame(peer);
    write_frame(peer, hello);  // echoing it back is a valid acceptance
    CouplingMessage state = read_frame(peer);
    CouplingMessage reply;
    reply.kind = MsgKind::subsurface_result;
    reply.seq = 1;
    reply.t = state.t;
    reply.payload.assign(state.payload.size(), 0.0);  // zero rates, no columns
    write_frame(peer, reply);
  });

  SurfaceModel surface(sc.mesh, sc.cfg, sc.hydro);
  bool died = false;
  try {
    SocketSession session(connect_peer("127.0.0.1:" + std::to_string(listener.port()), 10.0),
                          sc.mesh.zone_count(), 0, sched);
    run_coupled(surface, session, sched);
  } catch (const ProtocolError&) {
    died = true;
  }
  server.join();

  CHECK(died);
  CHECK(surface.state().t == 30.0);  // the first interval survived
}

TEST_CASE("the driver refuses a model whose clock disagrees with the schedule") {
  Scenario sc;
  CouplingSchedule sched = quick_schedule();
  sc.cfg.dt = 10.0;  // schedule says 5
  SurfaceModel surface(sc.mesh, sc.cfg, sc.hydro);
  ZeroFeedbackSession zero(sc.mesh.zone_count(), 0);
  CHECK_THROWS_AS(run_coupled(surface, zero, sched), ValidationError);
}
