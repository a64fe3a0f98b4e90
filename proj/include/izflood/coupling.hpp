#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "izflood/subsurface.hpp"
#include "izflood/surface.hpp"
#include "izflood/wire.hpp"

namespace izflood {

/// Lockstep timetable. Each coupling interval holds a whole number of surface
/// and subsurface sub-steps, and the run ends on an interval boundary.
struct CouplingSchedule {
  double surface_dt = 10.0;     // s
  double subsurface_dt = 60.0;  // s
  double coupling_dt = 60.0;    // s, exchange cadence
  double end_time = 3600.0;     // s, from the start of the run

  void validate() const;
  int surface_substeps() const;     // per coupling interval
  int subsurface_substeps() const;  // per coupling interval
  int intervals() const;            // over the whole run
};

/// One porous-model solve, for the diagnostics log.
struct SolveLogRow {
  double t = 0.0;  // s at the end of the solve
  int iterations = 0;
  double residual = 0.0;  // relative, at exit
};

/// What the porous model hands back for one coupling interval.
struct ExchangeReply {
  Eigen::ArrayXd zone_rates;  // m/s per zone, positive feeds the surface
  Eigen::ArrayXd h_filtr;     // m per column at the end of the interval
};

/// The surface loop's view of the porous model, wherever that model runs.
/// exchange() advances it across one coupling interval under fixed per-zone
/// water levels and returns rates averaged over the interval.
class SubsurfaceSession {
 public:
  virtual ~SubsurfaceSession() = default;
  virtual ExchangeReply exchange(double t, const Eigen::ArrayXd& zone_levels) = 0;
  virtual void halt() {}
};

/// Porous model plus the zone<->column bookkeeping needed to serve a surface
/// model: each column belongs to the zone most of its member cells carry, a
/// zone's standing water presses on its columns, and outward seepage is
/// averaged back per zone.
class SubsurfaceEngine {
 public:
  struct Config {
    SurfaceBc::DryMode dry_mode = SurfaceBc::DryMode::no_flow;
    bool embankment_dirichlet = true;
    SolveOptions solver;
  };

  SubsurfaceEngine(const ZoneMesh& mesh, SubsurfaceGrid grid, Config cfg);
  SubsurfaceEngine(const ZoneMesh& mesh, SubsurfaceGrid grid)
      : SubsurfaceEngine(mesh, std::move(grid), Config{}) {}

  int zone_count() const { return int(zone_area_.size()); }
  int column_count() const { return grid_.column_count(); }
  const SubsurfaceGrid& grid() const { return grid_; }
  const std::vector<int>& column_zones() const { return col_zone_; }
  const Eigen::ArrayXd& zone_column_area() const { return zone_area_; }
  const std::vector<SolveLogRow>& solve_log() const { return log_; }

  /// `substeps` backward-Euler steps of `dt` under per-zone absolute water
  /// levels held fixed; a zone at or below its floor level is dry everywhere.
  ExchangeReply advance_interval(double t, const Eigen::ArrayXd& zone_levels, int substeps,
                                 double dt);

 private:
  SubsurfaceGrid grid_;
  Config cfg_;
  std::vector<int> col_zone_;   // column -> zone, -1 if unmapped
  Eigen::ArrayXd zone_area_;    // m2 of mapped column top area per zone
  Eigen::ArrayXd zone_floor_;   // m, zone pit floor elevation
  std::vector<SolveLogRow> log_;
};

/// Porous model living in this process.
class InProcessSession : public SubsurfaceSession {
 public:
  InProcessSession(SubsurfaceEngine& engine, const CouplingSchedule& schedule)
      : engine_(engine), schedule_(schedule) {}
  ExchangeReply exchange(double t, const Eigen::ArrayXd& zone_levels) override;

 private:
  SubsurfaceEngine& engine_;
  CouplingSchedule schedule_;
};

/// Stub that feeds back nothing; couples a surface model to thin air.
class ZeroFeedbackSession : public SubsurfaceSession {
 public:
  ZeroFeedbackSession(int zones, int columns) : zones_(zones), columns_(columns) {}
  ExchangeReply exchange(double t, const Eigen::ArrayXd& zone_levels) override;

 private:
  int zones_, columns_;
};

/// Porous model on the far side of a stream socket. The constructor runs the
/// handshake: both sides must agree on zone count, column count and the whole
/// schedule, or the session refuses to start.
class SocketSession : public SubsurfaceSession {
 public:
  SocketSession(Socket sock, int zones, int columns, const CouplingSchedule& schedule);
  ExchangeReply exchange(double t, const Eigen::ArrayXd& zone_levels) override;
  void halt() override;

 private:
  Socket sock_;
  int zones_, columns_;
  std::uint64_t seq_out_ = 1, seq_in_ = 1;
  double t_last_ = 0.0;
};

/// Called after each coupling interval with the interval index, the surface
/// time reached, the advanced surface model and the subsurface reply.
using CouplingObserver =
    std::function<void(int, double, const SurfaceModel&, const ExchangeReply&)>;

/// Explicit lockstep co-simulation: per interval the surface's per-zone levels
/// go down, the porous model advances under them and its interval-averaged
/// exchange rates come back, then the surface advances applying those rates.
/// No sub-iteration; returns the number of intervals run.
int run_coupled(SurfaceModel& surface, SubsurfaceSession& session,
                const CouplingSchedule& schedule, const CouplingObserver& observer = {});

struct ServeOptions {
  double timeout_s = 60.0;  // accept and per-frame receive deadline
};

struct ServeReport {
  int intervals = 0;
  bool halted = false;  // peer said halt (clean end)
};

/// Serve one surface peer: handshake, then answer each surface state with one
/// subsurface result until the peer says halt. Geometry or sequence trouble is
/// answered with an error frame before the exception is raised locally.
ServeReport serve_subsurface(Listener& listener, SubsurfaceEngine& engine,
                             const CouplingSchedule& schedule, const ServeOptions& opt = {});

}  // namespace izflood
