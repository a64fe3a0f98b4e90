#include "izflood/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace izflood {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw ValidationError("scenario " + where + ": " + what);
}

/// Strict view over one JSON object: every key must be consumed, so a typo in
/// a scenario file is an error instead of a silently ignored setting.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) bad(name_, "must be a JSON object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* get(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const char* key, double fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) bad(name_, std::string("'") + key + "' must be a number");
    return v->get<double>();
  }

  int integer(const char* key, int fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) bad(name_, std::string("'") + key + "' must be an integer");
    return v->get<int>();
  }

  bool boolean(const char* key, bool fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) bad(name_, std::string("'") + key + "' must be true or false");
    return v->get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) bad(name_, std::string("'") + key + "' must be a string");
    return v->get<std::string>();
  }

  std::string require_text(const char* key) {
    const json* v = get(key);
    if (!v) bad(name_, std::string("'") + key + "' is required");
    if (!v->is_string()) bad(name_, std::string("'") + key + "' must be a string");
    return v->get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) bad(name_, "unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path q(p);
  if (q.is_absolute()) return q.lexically_normal().string();
  return (base / q).lexically_normal().string();
}

void check_multiple(double big, double small, const char* big_name, const char* small_name) {
  double r = big / small;
  double n = std::round(r);
  if (n < 1.0 || std::abs(r - n) > 1e-9 * std::max(1.0, r))
    throw ValidationError(std::string("scenario: ") + big_name + " (" + fmt_double(big) +
                          " s) must be a whole multiple of " + small_name + " (" +
                          fmt_double(small) + " s)");
}

}  // namespace

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  json j;
  try {
    j = json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario ") + path + ": " + e.what());
  }

  const fs::path base = fs::path(path).parent_path();
  ScenarioConfig cfg;

  Section top(j, "top level");
  cfg.dtm_path = resolve(base, top.require_text("dtm"));
  cfg.mesh_path = resolve(base, top.text("mesh", ""));
  cfg.hydrograph_path = resolve(base, top.require_text("hydrograph"));
  cfg.output_dir = resolve(base, top.text("output_dir", "out"));
  cfg.output_interval = top.number("output_interval", 0.0);
  cfg.peer_timeout_s = top.number("peer_timeout_s", 60.0);
  cfg.endpoint = top.text("endpoint", "");

  std::string mode = top.text("coupling", "off");
  if (mode == "off")
    cfg.coupling = CouplingMode::off;
  else if (mode == "in_process")
    cfg.coupling = CouplingMode::in_process;
  else if (mode == "connect")
    cfg.coupling = CouplingMode::connect;
  else
    bad("top level", "coupling must be off, in_process or connect, not '" + mode + "'");

  if (const json* v = top.get("delineate")) {
    Section d(*v, "delineate");
    cfg.delineate.merge_epsilon = d.number("merge_epsilon", cfg.delineate.merge_epsilon);
    cfg.delineate.headroom = d.number("headroom", cfg.delineate.headroom);
    d.finish();
  }

  if (const json* v = top.get("surface")) {
    Section s(*v, "surface");
    cfg.surface.dt = s.number("dt", cfg.surface.dt);
    std::string law = s.text("law", "weir");
    if (law == "weir")
      cfg.surface.law = DischargeLaw::weir;
    else if (law == "manning")
      cfg.surface.law = DischargeLaw::manning;
    else
      bad("surface", "law must be weir or manning, not '" + law + "'");
    cfg.surface.weir_cd = s.number("weir_cd", cfg.surface.weir_cd);
    cfg.surface.manning_n = s.number("manning_n", cfg.surface.manning_n);
    cfg.surface.limiter_fraction = s.number("limiter_fraction", cfg.surface.limiter_fraction);
    cfg.surface.flood_threshold = s.number("flood_threshold", cfg.surface.flood_threshold);
    std::string basis = s.text("surcharge_area", "wetted");
    if (basis == "wetted")
      cfg.surface.surcharge_area = SurfaceConfig::AreaBasis::wetted;
    else if (basis == "plan")
      cfg.surface.surcharge_area = SurfaceConfig::AreaBasis::plan;
    else
      bad("surface", "surcharge_area must be wetted or plan, not '" + basis + "'");
    if (const json* w = s.get("waterfront")) {
      if (w->is_string() && w->get<std::string>() == "border") {
        cfg.waterfront_border = true;
      } else if (w->is_array()) {
        cfg.waterfront_border = false;
        for (const json& e : *w) {
          if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number())
            bad("surface", "waterfront entries must be [zone, boundary_length] pairs");
          cfg.waterfront_explicit.push_back({e[0].get<int>(), e[1].get<double>()});
        }
      } else {
        bad("surface", "waterfront must be \"border\" or a list of [zone, length] pairs");
      }
    }
    s.finish();
  }

  if (const json* v = top.get("subsurface")) {
    Section s(*v, "subsurface");
    cfg.porous.storage = s.number("storage", cfg.porous.storage);
    cfg.porous.permeability = s.number("permeability", cfg.porous.permeability);
    cfg.porous.viscosity = s.number("viscosity", cfg.porous.viscosity);
    cfg.porous.density = s.number("density", cfg.porous.density);
    cfg.porous_depth = s.number("depth", cfg.porous_depth);
    cfg.porous_nz = s.integer("nz", cfg.porous_nz);
    cfg.porous_coarsen = s.integer("coarsen", cfg.porous_coarsen);
    std::string dm = s.text("dry_mode", "no_flow");
    if (dm == "no_flow")
      cfg.dry_mode = SurfaceBc::DryMode::no_flow;
    else if (dm == "zero_head")
      cfg.dry_mode = SurfaceBc::DryMode::zero_head;
    else
      bad("subsurface", "dry_mode must be no_flow or zero_head, not '" + dm + "'");
    cfg.embankment_dirichlet = s.boolean("embankment_dirichlet", cfg.embankment_dirichlet);
    cfg.solver.tol = s.number("solver_tol", cfg.solver.tol);
    cfg.solver.max_iterations = s.integer("solver_max_iterations", cfg.solver.max_iterations);
    s.finish();
  }

  if (const json* v = top.get("schedule")) {
    Section s(*v, "schedule");
    cfg.schedule.subsurface_dt = s.number("subsurface_dt", cfg.schedule.subsurface_dt);
    cfg.schedule.coupling_dt = s.number("coupling_dt", cfg.schedule.coupling_dt);
    cfg.schedule.end_time = s.number("end_time", cfg.schedule.end_time);
    s.finish();
  }

  top.finish();

  cfg.schedule.surface_dt = cfg.surface.dt;  // one clock, stated once
  cfg.validate();
  return cfg;
}

void ScenarioConfig::validate() const {
  if (dtm_path.empty()) throw ValidationError("scenario: dtm path is empty");
  for (const std::string& p : {dtm_path, hydrograph_path})
    if (!fs::exists(p)) throw ValidationError("scenario: input file does not exist: " + p);
  if (!mesh_path.empty() && !fs::exists(mesh_path))
    throw ValidationError("scenario: mesh file does not exist: " + mesh_path);

  // scalar surface fields; the waterfront list is checked against the mesh at
  // run start, once the zone count exists
  SurfaceConfig probe = surface;
  probe.waterfront.clear();
  probe.validate(1);
  for (const WaterfrontZone& w : waterfront_explicit) {
    if (w.zone < 0) throw ValidationError("scenario: waterfront zone ids must be >= 0");
    if (!(w.boundary_length > 0.0))
      throw ValidationError("scenario: waterfront boundary lengths must be positive");
  }

  porous.validate();
  if (!(porous_depth > 0.0)) throw ValidationError("scenario: subsurface depth must be positive");
  if (porous_nz < 2) throw ValidationError("scenario: subsurface needs at least 2 layers");
  if (porous_coarsen < 1) throw ValidationError("scenario: coarsen must be >= 1");
  if (!(solver.tol > 0.0)) throw ValidationError("scenario: solver_tol must be positive");
  if (solver.max_iterations < 0)
    throw ValidationError("scenario: solver_max_iterations must be >= 0");

  if (!(delineate.merge_epsilon >= 0.0))
    throw ValidationError("scenario: merge_epsilon must be >= 0");
  if (!(delineate.headroom > 0.0)) throw ValidationError("scenario: headroom must be positive");

  schedule.validate();
  double out_dt = effective_output_interval();
  check_multiple(out_dt, schedule.coupling_dt, "output interval", "coupling dt");
  check_multiple(schedule.end_time, out_dt, "end time", "output interval");

  if (coupling == CouplingMode::connect) {
    if (endpoint.empty())
      throw ValidationError("scenario: coupling \"connect\" needs an endpoint (host:port)");
    parse_endpoint(endpoint);
  }
  if (!(peer_timeout_s > 0.0)) throw ValidationError("scenario: peer_timeout_s must be positive");
  if (output_dir.empty()) throw ValidationError("scenario: output_dir is empty");
}

double ScenarioConfig::effective_output_interval() const {
  return output_interval > 0.0 ? output_interval : schedule.coupling_dt;
}

void apply_overrides(ScenarioConfig& cfg, const ScenarioOverrides& ov) {
  if (!ov.output_dir.empty()) cfg.output_dir = ov.output_dir;
  if (!ov.connect_endpoint.empty()) {
    cfg.endpoint = ov.connect_endpoint;
    cfg.coupling = CouplingMode::connect;
  }
  if (ov.until >= 0.0) cfg.schedule.end_time = ov.until;
  if (ov.output_interval >= 0.0) cfg.output_interval = ov.output_interval;
  cfg.validate();
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["dtm"] = cfg.dtm_path;
  if (!cfg.mesh_path.empty()) j["mesh"] = cfg.mesh_path;
  j["hydrograph"] = cfg.hydrograph_path;
  j["output_dir"] = cfg.output_dir;
  j["output_interval"] = cfg.output_interval;
  j["coupling"] = cfg.coupling == CouplingMode::off         ? "off"
                  : cfg.coupling == CouplingMode::in_process ? "in_process"
                                                             : "connect";
  if (!cfg.endpoint.empty()) j["endpoint"] = cfg.endpoint;
  j["peer_timeout_s"] = cfg.peer_timeout_s;

  j["delineate"] = {{"merge_epsilon", cfg.delineate.merge_epsilon},
                    {"headroom", cfg.delineate.headroom}};

  json s;
  s["dt"] = cfg.surface.dt;
  s["law"] = cfg.surface.law == DischargeLaw::weir ? "weir" : "manning";
  s["weir_cd"] = cfg.surface.weir_cd;
  s["manning_n"] = cfg.surface.manning_n;
  s["limiter_fraction"] = cfg.surface.limiter_fraction;
  s["flood_threshold"] = cfg.surface.flood_threshold;
  s["surcharge_area"] =
      cfg.surface.surcharge_area == SurfaceConfig::AreaBasis::wetted ? "wetted" : "plan";
  if (cfg.waterfront_border) {
    s["waterfront"] = "border";
  } else {
    json w = json::array();
    for (const WaterfrontZone& z : cfg.waterfront_explicit)
      w.push_back(json::array({z.zone, z.boundary_length}));
    s["waterfront"] = w;
  }
  j["surface"] = s;

  j["subsurface"] = {{"storage", cfg.porous.storage},
                     {"permeability", cfg.porous.permeability},
                     {"viscosity", cfg.porous.viscosity},
                     {"density", cfg.porous.density},
                     {"depth", cfg.porous_depth},
                     {"nz", cfg.porous_nz},
                     {"coarsen", cfg.porous_coarsen},
                     {"dry_mode",
                      cfg.dry_mode == SurfaceBc::DryMode::no_flow ? "no_flow" : "zero_head"},
                     {"embankment_dirichlet", cfg.embankment_dirichlet},
                     {"solver_tol", cfg.solver.tol},
                     {"solver_max_iterations", cfg.solver.max_iterations}};

  j["schedule"] = {{"subsurface_dt", cfg.schedule.subsurface_dt},
                   {"coupling_dt", cfg.schedule.coupling_dt},
                   {"end_time", cfg.schedule.end_time}};

  return j.dump(2) + "\n";
}

}  // namespace izflood
