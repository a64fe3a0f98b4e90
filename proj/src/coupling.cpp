#include "izflood/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace izflood {

// ---------------------------------------------------------------------------
// schedule
// ---------------------------------------------------------------------------

namespace {

int whole_ratio(double big, double small, const char* big_name, const char* small_name) {
  double r = big / small;
  double n = std::round(r);
  if (n < 1.0 || std::abs(r - n) > 1e-9 * std::max(1.0, r))
    throw ValidationError(std::string(big_name) + " (" + fmt_double(big) +
                          " s) must be a whole multiple of " + small_name + " (" +
                          fmt_double(small) + " s)");
  return int(n);
}

}  // namespace

void CouplingSchedule::validate() const {
  for (auto [v, name] : {std::pair{surface_dt, "surface dt"}, {subsurface_dt, "subsurface dt"},
                         {coupling_dt, "coupling dt"}, {end_time, "end time"}})
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError(std::string(name) + " must be positive");
  whole_ratio(coupling_dt, surface_dt, "coupling dt", "surface dt");
  whole_ratio(coupling_dt, subsurface_dt, "coupling dt", "subsurface dt");
  whole_ratio(end_time, coupling_dt, "end time", "coupling dt");
}

int CouplingSchedule::surface_substeps() const {
  return whole_ratio(coupling_dt, surface_dt, "coupling dt", "surface dt");
}

int CouplingSchedule::subsurface_substeps() const {
  return whole_ratio(coupling_dt, subsurface_dt, "coupling dt", "subsurface dt");
}

int CouplingSchedule::intervals() const {
  return whole_ratio(end_time, coupling_dt, "end time", "coupling dt");
}

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

SubsurfaceEngine::SubsurfaceEngine(const ZoneMesh& mesh, SubsurfaceGrid grid, Config cfg)
    : grid_(std::move(grid)), cfg_(cfg) {
  if (grid_.fine_nrows != mesh.labels.rows() || grid_.fine_ncols != mesh.labels.cols())
    throw ValidationError("subsurface grid footprint does not match the zone mesh");

  const int nz = mesh.zone_count();
  zone_floor_.resize(nz);
  for (int z = 0; z < nz; ++z) zone_floor_(z) = mesh.zones[z].z_min;

  // a column belongs to the zone most of its member cells carry; ties go to
  // the lowest zone id so the mapping is deterministic
  col_zone_.assign(std::size_t(grid_.column_count()), -1);
  zone_area_ = Eigen::ArrayXd::Zero(nz);
  for (int c = 0; c < grid_.column_count(); ++c) {
    auto [R, C] = grid_.col_rc[std::size_t(c)];
    std::map<int, int> count;
    for (int r = R * grid_.coarsen; r < std::min((R + 1) * grid_.coarsen, grid_.fine_nrows); ++r)
      for (int q = C * grid_.coarsen; q < std::min((C + 1) * grid_.coarsen, grid_.fine_ncols); ++q)
        if (mesh.labels(r, q) >= 0) ++count[mesh.labels(r, q)];
    int best = -1, best_n = 0;
    for (auto [zone, n] : count)
      if (n > best_n) {
        best = zone;
        best_n = n;
      }
    col_zone_[std::size_t(c)] = best;
    if (best >= 0) zone_area_(best) += grid_.top_area(c);
  }
}

ExchangeReply SubsurfaceEngine::advance_interval(double t, const Eigen::ArrayXd& zone_levels,
                                                 int substeps, double dt) {
  if (zone_levels.size() != zone_count())
    throw ValidationError("zone level vector does not match the zone count");
  if (substeps < 1) throw ValidationError("coupling interval without sub-steps");

  SurfaceBc bc;
  bc.dry_mode = cfg_.dry_mode;
  bc.embankment_dirichlet = cfg_.embankment_dirichlet;
  bc.h_in.resize(grid_.column_count());
  for (int c = 0; c < grid_.column_count(); ++c) {
    int zn = col_zone_[std::size_t(c)];
    double h = 0.0;
    if (zn >= 0 && zone_levels(zn) > zone_floor_(zn))
      h = std::max(0.0, zone_levels(zn) - grid_.z_top(c));
    bc.h_in(c) = h;
  }

  Eigen::ArrayXd rates = Eigen::ArrayXd::Zero(zone_count());
  for (int s = 0; s < substeps; ++s) {
    // faces refresh every sub-step: h_in stays fixed over the interval but
    // seepage faces may open or close as the pressure evolves
    FaceSet faces = build_faces(grid_, bc);
    SolveStats stats = step_subsurface(grid_, faces, dt, cfg_.solver);
    FluxField flux = face_fluxes(grid_, faces, grid_.potential());
    rates += zone_exchange_rates(faces, flux, col_zone_, zone_area_);
    log_.push_back({t + (s + 1) * dt, stats.iterations, stats.residual});
  }

  ExchangeReply reply;
  reply.zone_rates = rates / double(substeps);
  reply.h_filtr = h_filtr_field(grid_);
  return reply;
}

// ---------------------------------------------------------------------------
// sessions
// ---------------------------------------------------------------------------

ExchangeReply InProcessSession::exchange(double t, const Eigen::ArrayXd& zone_levels) {
  return engine_.advance_interval(t, zone_levels, schedule_.subsurface_substeps(),
                                  schedule_.subsurface_dt);
}

ExchangeReply ZeroFeedbackSession::exchange(double, const Eigen::ArrayXd& zone_levels) {
  if (zone_levels.size() != zones_)
    throw ValidationError("zone level vector does not match the zone count");
  ExchangeReply reply;
  reply.zone_rates = Eigen::ArrayXd::Zero(zones_);
  reply.h_filtr = Eigen::ArrayXd::Zero(columns_);
  return reply;
}

namespace {

CouplingMessage make_hello(int zones, int columns, const CouplingSchedule& s) {
  CouplingMessage msg;
  msg.kind = MsgKind::hello;
  msg.payload = {double(zones),  double(columns),  s.surface_dt,
                 s.subsurface_dt, s.coupling_dt,   s.end_time};
  return msg;
}

/// Both ends must describe the same run; any difference refuses the handshake.
void check_hello(const CouplingMessage& msg, int zones, int columns,
                 const CouplingSchedule& s) {
  if (msg.kind != MsgKind::hello) throw ProtocolError("expected a hello frame");
  const CouplingMessage local = make_hello(zones, columns, s);
  if (msg.payload.size() != local.payload.size())
    throw ProtocolError("hello payload has " + std::to_string(msg.payload.size()) +
                        " values, expected " + std::to_string(local.payload.size()));
  static const char* names[6] = {"zone count", "column count",  "surface dt",
                                 "subsurface dt", "coupling dt", "end time"};
  for (std::size_t i = 0; i < 6; ++i)
    if (msg.payload[i] != local.payload[i])
      throw ProtocolError(std::string("handshake mismatch: peer ") + names[i] + " = " +
                          fmt_double(msg.payload[i]) + ", local = " +
                          fmt_double(local.payload[i]));
}

void send_error(Socket& sock, std::uint64_t seq, double t, ErrorCode code) {
  CouplingMessage msg;
  msg.kind = MsgKind::error;
  msg.seq = seq;
  msg.t = t;
  msg.payload = {double(int(code))};
  try {
    write_frame(sock, msg);
  } catch (const std::exception&) {
    // the peer may already be gone; the local exception still carries the story
  }
}

const char* error_code_name(double code) {
  switch (int(code)) {
    case int(ErrorCode::geometry_mismatch): return "geometry mismatch";
    case int(ErrorCode::version_mismatch): return "version mismatch";
    case int(ErrorCode::sequence_gap): return "sequence gap";
    case int(ErrorCode::internal): return "internal error";
    default: return "unknown error";
  }
}

[[noreturn]] void throw_peer_error(const CouplingMessage& msg) {
  double code = msg.payload.empty() ? 0.0 : msg.payload[0];
  throw ProtocolError(std::string("peer reported ") + error_code_name(code));
}

}  // namespace

SocketSession::SocketSession(Socket sock, int zones, int columns,
                             const CouplingSchedule& schedule)
    : sock_(std::move(sock)), zones_(zones), columns_(columns) {
  write_frame(sock_, make_hello(zones, columns, schedule));
  CouplingMessage reply = read_frame(sock_);
  if (reply.kind == MsgKind::error) throw_peer_error(reply);
  check_hello(reply, zones, columns, schedule);
}

ExchangeReply SocketSession::exchange(double t, const Eigen::ArrayXd& zone_levels) {
  if (zone_levels.size() != zones_)
    throw ValidationError("zone level vector does not match the zone count");
  CouplingMessage msg;
  msg.kind = MsgKind::surface_state;
  msg.seq = seq_out_++;
  msg.t = t;
  msg.payload.assign(zone_levels.data(), zone_levels.data() + zone_levels.size());
  write_frame(sock_, msg);
  t_last_ = t;

  CouplingMessage reply = read_frame(sock_);
  if (reply.kind == MsgKind::error) throw_peer_error(reply);
  if (reply.kind != MsgKind::subsurface_result)
    throw ProtocolError("expected a subsurface result, got kind " +
                        std::to_string(int(reply.kind)));
  if (reply.seq != seq_in_)
    throw ProtocolError("sequence-number gap: got " + std::to_string(reply.seq) +
                        ", expected " + std::to_string(seq_in_));
  ++seq_in_;
  if (reply.t != t)
    throw ProtocolError("peer answered for t = " + fmt_double(reply.t) + ", asked about t = " +
                        fmt_double(t));
  if (reply.payload.size() != std::size_t(zones_ + columns_))
    throw ProtocolError("subsurface result carries " + std::to_string(reply.payload.size()) +
                        " values, expected " + std::to_string(zones_ + columns_));

  ExchangeReply out;
  out.zone_rates = Eigen::Map<const Eigen::ArrayXd>(reply.payload.data(), zones_);
  out.h_filtr = Eigen::Map<const Eigen::ArrayXd>(reply.payload.data() + zones_, columns_);
  return out;
}

void SocketSession::halt() {
  if (!sock_.open()) return;
  CouplingMessage msg;
  msg.kind = MsgKind::halt;
  msg.seq = seq_out_++;
  msg.t = t_last_;
  write_frame(sock_, msg);
  sock_.close();
}

// ---------------------------------------------------------------------------
// lockstep driver and server
// ---------------------------------------------------------------------------

int run_coupled(SurfaceModel& surface, SubsurfaceSession& session,
                const CouplingSchedule& schedule, const CouplingObserver& observer) {
  schedule.validate();
  if (surface.config().dt != schedule.surface_dt)
    throw ValidationError("surface model dt disagrees with the schedule");

  const double t0 = surface.state().t;
  const int n = schedule.intervals();
  for (int i = 0; i < n; ++i) {
    double t = t0 + i * schedule.coupling_dt;
    ExchangeReply reply = session.exchange(t, surface.state().level);
    surface.advance(schedule.coupling_dt, &reply.zone_rates);
    if (observer) observer(i, surface.state().t, surface, reply);
  }
  session.halt();
  return n;
}

ServeReport serve_subsurface(Listener& listener, SubsurfaceEngine& engine,
                             const CouplingSchedule& schedule, const ServeOptions& opt) {
  schedule.validate();
  Socket peer = listener.accept_peer(opt.timeout_s);

  CouplingMessage hello = read_frame(peer);
  try {
    check_hello(hello, engine.zone_count(), engine.column_count(), schedule);
  } catch (const ProtocolError&) {
    send_error(peer, 0, 0.0, ErrorCode::geometry_mismatch);
    throw;
  }
  write_frame(peer, make_hello(engine.zone_count(), engine.column_count(), schedule));

  ServeReport report;
  std::uint64_t seq_in = 1, seq_out = 1;
  double t_last = 0.0;
  const int substeps = schedule.subsurface_substeps();

  for (;;) {
    CouplingMessage msg = read_frame(peer);
    if (msg.kind == MsgKind::halt) {
      report.halted = true;
      return report;
    }
    if (msg.kind == MsgKind::error) throw_peer_error(msg);
    if (msg.kind != MsgKind::surface_state) {
      send_error(peer, seq_out, t_last, ErrorCode::internal);
      throw ProtocolError("expected a surface state, got kind " + std::to_string(int(msg.kind)));
    }
    if (msg.seq != seq_in) {
      send_error(peer, seq_out, t_last, ErrorCode::sequence_gap);
      throw ProtocolError("sequence-number gap: got " + std::to_string(msg.seq) +
                          ", expected " + std::to_string(seq_in));
    }
    if (msg.t < t_last) {
      send_error(peer, seq_out, t_last, ErrorCode::internal);
      throw ProtocolError("time went backwards: " + fmt_double(msg.t) + " after " +
                          fmt_double(t_last));
    }
    if (msg.payload.size() != std::size_t(engine.zone_count())) {
      send_error(peer, seq_out, t_last, ErrorCode::geometry_mismatch);
      throw ProtocolError("surface state carries " + std::to_string(msg.payload.size()) +
                          " zones, expected " + std::to_string(engine.zone_count()));
    }

    Eigen::ArrayXd levels =
        Eigen::Map<const Eigen::ArrayXd>(msg.payload.data(), Eigen::Index(msg.payload.size()));
    ExchangeReply reply =
        engine.advance_interval(msg.t, levels, substeps, schedule.subsurface_dt);

    CouplingMessage out;
    out.kind = MsgKind::subsurface_result;
    out.seq = seq_out++;
    out.t = msg.t;
    out.payload.assign(reply.zone_rates.data(), reply.zone_rates.data() + reply.zone_rates.size());
    out.payload.insert(out.payload.end(), reply.h_filtr.data(),
                       reply.h_filtr.data() + reply.h_filtr.size());
    write_frame(peer, out);

    ++seq_in;
    t_last = msg.t;
    ++report.intervals;
  }
}

}  // namespace izflood
