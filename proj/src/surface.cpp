#include "izflood/surface.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>

namespace izflood {

// ---------------------------------------------------------------------------
// hydrograph
// ---------------------------------------------------------------------------

void Hydrograph::validate() const {
  if (t.size() < 2 || t.size() != level.size())
    throw ValidationError("hydrograph needs >= 2 (time, level) samples");
  for (Eigen::Index i = 1; i < t.size(); ++i)
    if (!(t(i) > t(i - 1))) throw ValidationError("hydrograph times must strictly increase");
  for (Eigen::Index i = 0; i < t.size(); ++i)
    if (!std::isfinite(t(i)) || !std::isfinite(level(i)))
      throw ValidationError("hydrograph contains non-finite values");
}

double Hydrograph::level_at(double time) const {
  if (time < t(0) || time > t(t.size() - 1))
    throw SimulationHalt("time " + fmt_double(time) + " s outside the hydrograph range [" +
                         fmt_double(t(0)) + ", " + fmt_double(t(t.size() - 1)) + "]");
  const double* b = t.data();
  Eigen::Index i = std::upper_bound(b, b + t.size(), time) - b - 1;
  i = std::clamp<Eigen::Index>(i, 0, t.size() - 2);
  double w = (time - t(i)) / (t(i + 1) - t(i));
  return level(i) + w * (level(i + 1) - level(i));
}

Hydrograph Hydrograph::from_csv(std::istream& in) {
  std::vector<double> ts, hs;
  std::string line;
  std::size_t lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    std::string a, b, extra;
    if (!(ss >> a)) continue;  // blank
    if (!(ss >> b) || (ss >> extra))
      throw ParseError("hydrograph rows need exactly 'time,level'", lineno);
    char* end = nullptr;
    double tv = std::strtod(a.c_str(), &end);
    bool t_ok = end == a.c_str() + a.size();
    double hv = std::strtod(b.c_str(), &end);
    bool h_ok = end == b.c_str() + b.size();
    if (!t_ok || !h_ok) {
      if (first_content) {  // header row
        first_content = false;
        continue;
      }
      throw ParseError("non-numeric hydrograph row", lineno);
    }
    first_content = false;
    ts.push_back(tv);
    hs.push_back(hv);
  }
  Hydrograph h;
  h.t = Eigen::Map<Eigen::ArrayXd>(ts.data(), Eigen::Index(ts.size()));
  h.level = Eigen::Map<Eigen::ArrayXd>(hs.data(), Eigen::Index(hs.size()));
  h.validate();
  return h;
}

Hydrograph Hydrograph::from_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open hydrograph '" + path + "'");
  try {
    return from_csv(f);
  } catch (const ParseError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// discharge laws
// ---------------------------------------------------------------------------

namespace {

// Free-flow broad-crested weir; submergence knocks it down per Villemonte.
double weir_one_way(double h_up, double h_dn, double crest, double length, double cd) {
  double head = h_up - crest;
  if (head <= 0.0) return 0.0;
  double q = (2.0 / 3.0) * cd * std::sqrt(2.0 * kGravity) * length * head * std::sqrt(head);
  double sub = h_dn - crest;
  if (sub > 0.0) {
    double ratio = sub / head;  // < 1 here
    q *= std::pow(1.0 - ratio * std::sqrt(ratio), 0.385);
  }
  return q;
}

double manning_one_way(double h_up, double h_dn, double crest, double length,
                       double flow_distance, double n) {
  double depth = h_up - crest;
  if (depth <= 0.0) return 0.0;
  double slope = (h_up - h_dn) / flow_distance;
  return (length / n) * std::pow(depth, 5.0 / 3.0) * std::sqrt(slope);
}

}  // namespace

double weir_discharge(double h_a, double h_b, double crest, double length, double cd) {
  if (h_a > h_b) return weir_one_way(h_a, h_b, crest, length, cd);
  if (h_b > h_a) return -weir_one_way(h_b, h_a, crest, length, cd);
  return 0.0;
}

double manning_discharge(double h_a, double h_b, double crest, double length,
                         double flow_distance, double n) {
  if (h_a > h_b) return manning_one_way(h_a, h_b, crest, length, flow_distance, n);
  if (h_b > h_a) return -manning_one_way(h_b, h_a, crest, length, flow_distance, n);
  return 0.0;
}

// ---------------------------------------------------------------------------
// state and configuration
// ---------------------------------------------------------------------------

void SurfaceConfig::validate(int zone_count) const {
  if (!(dt > 0.0)) throw ValidationError("surface dt must be positive");
  if (!(weir_cd > 0.0)) throw ValidationError("weir coefficient must be positive");
  if (!(manning_n > 0.0)) throw ValidationError("manning n must be positive");
  if (!(limiter_fraction > 0.0) || limiter_fraction > 0.5)
    throw ValidationError("limiter fraction must lie in (0, 0.5]");
  if (!(flood_threshold >= 0.0)) throw ValidationError("flood threshold must be >= 0");
  for (const WaterfrontZone& w : waterfront) {
    if (w.zone < 0 || w.zone >= zone_count)
      throw ValidationError("waterfront zone " + std::to_string(w.zone) + " does not exist");
    if (!(w.boundary_length > 0.0))
      throw ValidationError("waterfront boundary length must be positive");
  }
}

SurfaceState init_surface_state(const ZoneMesh& mesh) {
  SurfaceState s;
  const int n = mesh.zone_count();
  s.volume = Eigen::ArrayXd::Zero(n);
  s.level.resize(n);
  for (int i = 0; i < n; ++i) s.level(i) = mesh.zones[i].z_min;
  s.discharge = Eigen::ArrayXd::Zero(n);
  s.velocity = Eigen::ArrayXd::Zero(n);
  return s;
}

void SurfaceState::refresh_levels(const ZoneMesh& mesh) {
  for (int i = 0; i < mesh.zone_count(); ++i) {
    try {
      level(i) = mesh.zones[i].table.level_at(volume(i));
    } catch (const TableOverflow& e) {
      throw SimulationHalt("zone " + std::to_string(i) + " overflowed its level-volume table at t=" +
                           fmt_double(t) + " s (excess " + fmt_double(e.excess_m3()) +
                           " m3 above level " + fmt_double(e.top_level_m()) +
                           " m); raise the table headroom or check the inflows");
    }
  }
}

double mass_balance_error(const SurfaceState& s) {
  double expect = s.initial_volume + s.inflow_total + s.surcharge_total + s.created_total;
  return std::abs(s.volume.sum() - expect) / std::max(1.0, s.volume.sum());
}

// ---------------------------------------------------------------------------
// sources
// ---------------------------------------------------------------------------

Eigen::ArrayXd boundary_inflow(const ZoneMesh& mesh, const SurfaceConfig& cfg,
                               const Hydrograph& hydro, const SurfaceState& s) {
  Eigen::ArrayXd dv = Eigen::ArrayXd::Zero(mesh.zone_count());
  if (cfg.waterfront.empty()) return dv;
  const double sea = hydro.level_at(s.t);
  const double crest = cfg.flood_threshold;
  for (const WaterfrontZone& w : cfg.waterfront) {
    const LevelVolumeTable& tab = mesh.zones[w.zone].table;
    // a dry zone takes free overflow (head measured at the crest)
    double h_zone = s.volume(w.zone) > 0.0 ? s.level(w.zone) : crest;
    double q = weir_discharge(sea, h_zone, crest, w.boundary_length, cfg.weir_cd);
    double d = q * cfg.dt;
    if (d > 0.0) {
      // the sea can only fill the zone up to its own level
      double sea_c = std::clamp(sea, tab.z_min(), tab.top_level());
      d = std::min(d, std::max(0.0, tab.volume_at(sea_c) - s.volume(w.zone)));
    } else if (d < 0.0) {
      // ebb drains no further than the higher of sea level and the crest
      double floor_h = std::clamp(std::max(sea, crest), tab.z_min(), tab.top_level());
      d = std::max(d, -std::max(0.0, s.volume(w.zone) - tab.volume_at(floor_h)));
    }
    dv(w.zone) += d;
  }
  return dv;
}

SurchargeVolumes surcharge_volumes(const ZoneMesh& mesh, const SurfaceConfig& cfg,
                                   const SurfaceState& s, const Eigen::ArrayXd& rates) {
  if (rates.size() != mesh.zone_count())
    throw ValidationError("surcharge rate count does not match the zone count");
  SurchargeVolumes out;
  out.dv = Eigen::ArrayXd::Zero(mesh.zone_count());
  for (int i = 0; i < mesh.zone_count(); ++i) {
    if (rates(i) == 0.0) continue;
    const ImpactZone& zn = mesh.zones[i];
    double area = zn.plan_area;
    if (cfg.surcharge_area == SurfaceConfig::AreaBasis::wetted && s.volume(i) > 0.0)
      area = zn.table.wetted_area_at(s.level(i));
    double want = rates(i) * area * cfg.dt;
    double give = std::max(want, -s.volume(i));  // sinks stop at empty
    out.dv(i) = give;
    out.clipped += give - want;  // >= 0, the unfulfilled sink demand
  }
  return out;
}

// ---------------------------------------------------------------------------
// stepping
// ---------------------------------------------------------------------------

namespace {

/// Largest volume the donor may pass before both zones sit at one level.
/// Walks the merged table breakpoints inside the bracket, so the answer is
/// exact for piecewise-linear storage; shaved by 1e-12 so a full transfer can
/// never flip the level difference sign.
double equalization_cap(const LevelVolumeTable& don, double v_don, double h_don,
                        const LevelVolumeTable& rec, double v_rec, double h_rec) {
  double h_end = std::min({h_don, don.top_level(), rec.top_level()});
  if (h_end <= h_rec) return 0.0;

  // released-by-donor minus absorbed-by-receiver when both stand at level h
  auto f = [&](double h) {
    return (v_don - don.volume_at(std::min(h, don.top_level()))) -
           (rec.volume_at(std::min(h, rec.top_level())) - v_rec);
  };

  double cap;
  if (f(h_end) >= 0.0) {
    // receiver tops out (or reaches the donor level) before they meet
    cap = rec.volume_at(h_end) - v_rec;
  } else {
    // gather candidate levels: bracket ends plus each table breakpoint inside
    std::vector<double> hs{h_rec};
    auto add_between = [&](const Eigen::ArrayXd& levels) {
      for (Eigen::Index i = 0; i < levels.size(); ++i)
        if (levels(i) > h_rec && levels(i) < h_end) hs.push_back(levels(i));
    };
    add_between(don.levels);
    add_between(rec.levels);
    hs.push_back(h_end);
    std::sort(hs.begin(), hs.end());

    cap = 0.0;
    for (std::size_t i = 0; i + 1 < hs.size(); ++i) {
      double f0 = f(hs[i]), f1 = f(hs[i + 1]);
      if (f1 <= 0.0) {  // crossing inside this linear piece
        double w = f0 - f1 > 0.0 ? f0 / (f0 - f1) : 0.0;
        double h_star = hs[i] + w * (hs[i + 1] - hs[i]);
        cap = rec.volume_at(std::min(h_star, rec.top_level())) - v_rec;
        break;
      }
    }
  }
  return std::max(0.0, cap) * (1.0 - 1e-12);
}

}  // namespace

void step_surface(SurfaceState& s, const ZoneMesh& mesh, const SurfaceConfig& cfg,
                  const Eigen::ArrayXd* boundary_dv, const Eigen::ArrayXd* surcharge_dv,
                  double surcharge_clipped) {
  const int n = mesh.zone_count();
  const int ne = int(mesh.edges.size());

  // pass 1: desired transfer per edge, capped by equalization and donor share
  Eigen::ArrayXd edge_dv = Eigen::ArrayXd::Zero(ne);      // magnitude
  Eigen::ArrayXi edge_donor = Eigen::ArrayXi::Constant(ne, -1);
  Eigen::ArrayXd demand = Eigen::ArrayXd::Zero(n);
  for (int e = 0; e < ne; ++e) {
    const ZoneEdge& ed = mesh.edges[e];
    double ha = s.level(ed.a), hb = s.level(ed.b);
    double q = cfg.law == DischargeLaw::weir
                   ? weir_discharge(ha, hb, ed.crest, ed.boundary_length, cfg.weir_cd)
                   : manning_discharge(ha, hb, ed.crest, ed.boundary_length, ed.flow_distance,
                                       cfg.manning_n);
    if (q == 0.0) continue;
    int don = q > 0.0 ? ed.a : ed.b;
    int rec = q > 0.0 ? ed.b : ed.a;
    double dv = std::abs(q) * cfg.dt;
    dv = std::min(dv, cfg.limiter_fraction * s.volume(don));
    dv = std::min(dv, equalization_cap(mesh.zones[don].table, s.volume(don), s.level(don),
                                       mesh.zones[rec].table, s.volume(rec), s.level(rec)));
    if (dv <= 0.0) continue;
    edge_dv(e) = dv;
    edge_donor(e) = don;
    demand(don) += dv;
  }

  // pass 2: a zone asked for more than it holds pays out proportionally
  Eigen::ArrayXd scale = Eigen::ArrayXd::Ones(n);
  for (int i = 0; i < n; ++i)
    if (demand(i) > s.volume(i)) scale(i) = s.volume(i) / demand(i);

  // pass 3: move the water and collect per-zone kinematics
  Eigen::ArrayXd flux_sum = Eigen::ArrayXd::Zero(n);       // sum |Q| per zone
  Eigen::ArrayXd flux_mom = Eigen::ArrayXd::Zero(n);       // sum |Q|*v per zone
  Eigen::ArrayXi edge_count = Eigen::ArrayXi::Zero(n);
  for (const ZoneEdge& ed : mesh.edges) {
    ++edge_count(ed.a);
    ++edge_count(ed.b);
  }
  for (int e = 0; e < ne; ++e) {
    if (edge_donor(e) < 0) continue;
    const ZoneEdge& ed = mesh.edges[e];
    int don = edge_donor(e);
    int rec = don == ed.a ? ed.b : ed.a;
    double dv = edge_dv(e) * scale(don);
    s.volume(don) -= dv;
    s.volume(rec) += dv;

    double q = dv / cfg.dt;
    double depth = std::max(s.level(ed.a), s.level(ed.b)) - ed.crest;  // levels not refreshed yet
    double v = depth > 1e-12 ? q / (ed.boundary_length * depth) : 0.0;
    for (int z : {ed.a, ed.b}) {
      flux_sum(z) += q;
      flux_mom(z) += q * v;
    }
  }

  // sources
  if (boundary_dv) {
    s.volume += *boundary_dv;
    s.inflow_total += boundary_dv->sum();
  }
  if (surcharge_dv) {
    s.volume += *surcharge_dv;
    s.surcharge_total += surcharge_dv->sum();
  }
  s.clipped_total += surcharge_clipped;

  // clamp rounding dust (and over-drained zones) at empty; the created volume
  // goes on its own ledger so the balance identity stays closed
  for (int i = 0; i < n; ++i)
    if (s.volume(i) < 0.0) {
      s.created_total += -s.volume(i);
      s.volume(i) = 0.0;
    }

  s.t += cfg.dt;
  s.refresh_levels(mesh);

  for (int i = 0; i < n; ++i) {
    s.discharge(i) = edge_count(i) ? flux_sum(i) / edge_count(i) : 0.0;
    s.velocity(i) = flux_sum(i) > 0.0 ? flux_mom(i) / flux_sum(i) : 0.0;
  }
}

// ---------------------------------------------------------------------------
// rasterisation
// ---------------------------------------------------------------------------

DtmRaster depth_raster(const ZoneMesh& mesh, const SurfaceState& s, const DtmRaster& dtm) {
  if (dtm.nrows != mesh.nrows || dtm.ncols != mesh.ncols)
    throw ValidationError("terrain and mesh shapes disagree");
  DtmRaster out = dtm;
  for (int r = 0; r < dtm.nrows; ++r)
    for (int c = 0; c < dtm.ncols; ++c) {
      if (dtm.is_nodata(r, c)) continue;  // keep the sentinel
      int id = mesh.labels(r, c);
      out.z(r, c) = id >= 0 ? std::max(0.0, s.level(id) - dtm.z(r, c)) : 0.0;
    }
  return out;
}

// ---------------------------------------------------------------------------
// model driver
// ---------------------------------------------------------------------------

SurfaceModel::SurfaceModel(const ZoneMesh& mesh, SurfaceConfig cfg, Hydrograph hydro)
    : mesh_(mesh), cfg_(std::move(cfg)), hydro_(std::move(hydro)) {
  cfg_.validate(mesh.zone_count());
  hydro_.validate();
  state_ = init_surface_state(mesh_);
}

void SurfaceModel::advance(double duration, const Eigen::ArrayXd* rates) {
  double steps_real = duration / cfg_.dt;
  auto steps = std::int64_t(std::llround(steps_real));
  if (steps < 0 || std::abs(steps_real - double(steps)) > 1e-9)
    throw ValidationError("advance duration must be a whole number of surface steps");
  for (std::int64_t k = 0; k < steps; ++k) {
    Eigen::ArrayXd bdv = boundary_inflow(mesh_, cfg_, hydro_, state_);
    if (rates) {
      SurchargeVolumes sv = surcharge_volumes(mesh_, cfg_, state_, *rates);
      step_surface(state_, mesh_, cfg_, &bdv, &sv.dv, sv.clipped);
    } else {
      step_surface(state_, mesh_, cfg_, &bdv, nullptr, 0.0);
    }
  }
}

}  // namespace izflood
