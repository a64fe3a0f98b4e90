#include "izflood/izmesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace izflood {

// ---------------------------------------------------------------------------
// level-volume tables
// ---------------------------------------------------------------------------

void LevelVolumeTable::validate() const {
  if (levels.size() < 2 || levels.size() != volumes.size())
    throw ValidationError("level-volume table needs >= 2 matching breakpoints");
  if (volumes(0) != 0.0) throw ValidationError("table must start at volume 0");
  double prev_slope = 0.0;
  for (Eigen::Index i = 1; i < levels.size(); ++i) {
    if (!(levels(i) > levels(i - 1)))
      throw ValidationError("table levels must strictly increase");
    if (!(volumes(i) > volumes(i - 1)))
      throw ValidationError("table volumes must strictly increase");
    double slope = (volumes(i) - volumes(i - 1)) / (levels(i) - levels(i - 1));
    if (slope < prev_slope * (1.0 - 1e-12))
      throw ValidationError("table must be convex (wetted area cannot shrink with level)");
    prev_slope = slope;
  }
}

namespace {

// Index i of the segment [x(i), x(i+1)] containing v, clamped to valid range.
Eigen::Index segment_of(const Eigen::ArrayXd& x, double v) {
  const double* b = x.data();
  const double* e = b + x.size();
  Eigen::Index i = std::upper_bound(b, e, v) - b - 1;
  return std::clamp<Eigen::Index>(i, 0, x.size() - 2);
}

}  // namespace

double LevelVolumeTable::volume_at(double level) const {
  if (level <= levels(0)) return 0.0;
  if (level > top_level())
    throw ValidationError("level " + fmt_double(level) + " above table top " +
                          fmt_double(top_level()));
  Eigen::Index i = segment_of(levels, level);
  double slope = (volumes(i + 1) - volumes(i)) / (levels(i + 1) - levels(i));
  return volumes(i) + (level - levels(i)) * slope;
}

double LevelVolumeTable::level_at(double volume) const {
  if (volume < 0.0) throw ValidationError("negative volume in level lookup");
  if (volume == 0.0) return levels(0);
  if (volume > top_volume()) throw TableOverflow(volume - top_volume(), top_level());
  Eigen::Index i = segment_of(volumes, volume);
  double slope = (volumes(i + 1) - volumes(i)) / (levels(i + 1) - levels(i));
  return levels(i) + (volume - volumes(i)) / slope;
}

double LevelVolumeTable::wetted_area_at(double level) const {
  if (level < levels(0)) return 0.0;
  Eigen::Index i = segment_of(levels, level);
  return (volumes(i + 1) - volumes(i)) / (levels(i + 1) - levels(i));
}

double volume_from_level(const LevelVolumeTable& t, double level) { return t.volume_at(level); }
double level_from_volume(const LevelVolumeTable& t, double volume) { return t.level_at(volume); }

LevelVolumeTable build_level_volume_table(const DtmRaster& dtm,
                                          const std::vector<std::int64_t>& cells,
                                          double top_level) {
  if (cells.empty()) throw ValidationError("cannot build a table over zero cells");
  const double cell_area = dtm.cellsize * dtm.cellsize;

  std::vector<double> zs;
  zs.reserve(cells.size());
  for (std::int64_t id : cells) zs.push_back(dtm.z(dtm.row_of(id), dtm.col_of(id)));
  std::sort(zs.begin(), zs.end());

  // Walk the distinct elevations; cells strictly below breakpoint z hold
  // (z - z_cell) of water each, so V(z) = (count_below*z - sum_below)*area.
  std::vector<double> lev, vol;
  double sum_below = 0.0;
  std::size_t i = 0;
  while (i < zs.size()) {
    double z = zs[i];
    lev.push_back(z);
    vol.push_back((double(i) * z - sum_below) * cell_area);
    while (i < zs.size() && zs[i] == z) {
      sum_below += zs[i];
      ++i;
    }
  }
  if (top_level > lev.back()) {
    lev.push_back(top_level);
    vol.push_back((double(zs.size()) * top_level - sum_below) * cell_area);
  }
  if (lev.size() < 2)
    throw ValidationError("table top " + fmt_double(top_level) +
                          " does not rise above the zone relief");

  LevelVolumeTable t;
  t.levels = Eigen::Map<Eigen::ArrayXd>(lev.data(), Eigen::Index(lev.size()));
  t.volumes = Eigen::Map<Eigen::ArrayXd>(vol.data(), Eigen::Index(vol.size()));
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// delineation
// ---------------------------------------------------------------------------

namespace {

// Fixed neighbour scan order; ties in descent and BFS expansion resolve by
// this order, which keeps labelling deterministic. opposite(k) == 7-k.
constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
const double kDist[8] = {std::sqrt(2.0), 1.0, std::sqrt(2.0), 1.0,
                         1.0,            std::sqrt(2.0), 1.0, std::sqrt(2.0)};

struct EdgeAccum {
  double crest = std::numeric_limits<double>::infinity();
  std::int64_t pairs = 0;
};

/// Assemble a ZoneMesh from a (possibly non-compact) label raster. Ids are
/// compacted in first-appearance scan order; everything else is recomputed
/// from the terrain, so a merge pass can just rewrite labels and call this.
ZoneMesh build_from_labels(const DtmRaster& dtm, const Eigen::ArrayXXi& raw, double headroom) {
  ZoneMesh mesh;
  mesh.ncols = dtm.ncols;
  mesh.nrows = dtm.nrows;
  mesh.cellsize = dtm.cellsize;
  mesh.xll = dtm.xll;
  mesh.yll = dtm.yll;
  mesh.labels.resize(dtm.nrows, dtm.ncols);
  mesh.labels.setConstant(-1);

  std::map<int, int> compact;
  for (int r = 0; r < dtm.nrows; ++r)
    for (int c = 0; c < dtm.ncols; ++c) {
      int old = raw(r, c);
      if (old < 0) continue;
      auto [it, fresh] = compact.try_emplace(old, int(compact.size()));
      (void)fresh;
      mesh.labels(r, c) = it->second;
    }

  const int n = int(compact.size());
  mesh.zones.resize(n);
  std::vector<double> sum_r(n, 0.0), sum_c(n, 0.0);
  for (int r = 0; r < dtm.nrows; ++r)
    for (int c = 0; c < dtm.ncols; ++c) {
      int id = mesh.labels(r, c);
      if (id < 0) continue;
      ImpactZone& zn = mesh.zones[id];
      zn.cells.push_back(dtm.cell_id(r, c));  // scan order == sorted
      sum_r[id] += r;
      sum_c[id] += c;
    }

  const double cs = dtm.cellsize;
  for (int id = 0; id < n; ++id) {
    ImpactZone& zn = mesh.zones[id];
    zn.id = id;
    zn.plan_area = double(zn.cells.size()) * cs * cs;
    zn.z_min = std::numeric_limits<double>::infinity();
    for (std::int64_t cell : zn.cells)
      zn.z_min = std::min(zn.z_min, dtm.z(dtm.row_of(cell), dtm.col_of(cell)));
  }

  // Borders: every 4-neighbour pair with differing labels contributes one
  // cell side of length; the saddle over a pair is the higher of the two
  // cells, and the edge crest is the lowest such saddle.
  std::map<std::pair<int, int>, EdgeAccum> acc;
  auto touch = [&](int r1, int c1, int r2, int c2) {
    int a = mesh.labels(r1, c1), b = mesh.labels(r2, c2);
    if (a < 0 || b < 0 || a == b) return;
    if (a > b) std::swap(a, b);
    EdgeAccum& e = acc[{a, b}];
    e.crest = std::min(e.crest, std::max(dtm.z(r1, c1), dtm.z(r2, c2)));
    e.pairs += 1;
  };
  for (int r = 0; r < dtm.nrows; ++r)
    for (int c = 0; c < dtm.ncols; ++c) {
      if (c + 1 < dtm.ncols) touch(r, c, r, c + 1);
      if (r + 1 < dtm.nrows) touch(r, c, r + 1, c);
    }

  mesh.edges.reserve(acc.size());
  for (const auto& [key, e] : acc) {
    ZoneEdge edge;
    edge.a = key.first;
    edge.b = key.second;
    edge.crest = e.crest;
    edge.boundary_length = double(e.pairs) * cs;
    const ImpactZone& za = mesh.zones[edge.a];
    const ImpactZone& zb = mesh.zones[edge.b];
    double dx = (sum_c[edge.a] / double(za.cells.size()) - sum_c[edge.b] / double(zb.cells.size())) * cs;
    double dy = (sum_r[edge.a] / double(za.cells.size()) - sum_r[edge.b] / double(zb.cells.size())) * cs;
    edge.flow_distance = std::max(cs, std::sqrt(dx * dx + dy * dy));
    mesh.edges.push_back(edge);
  }

  // spill = lowest crest on the zone's border; an edgeless zone spills nowhere
  for (ImpactZone& zn : mesh.zones) zn.spill_elevation = std::numeric_limits<double>::infinity();
  for (const ZoneEdge& e : mesh.edges) {
    mesh.zones[e.a].spill_elevation = std::min(mesh.zones[e.a].spill_elevation, e.crest);
    mesh.zones[e.b].spill_elevation = std::min(mesh.zones[e.b].spill_elevation, e.crest);
  }
  for (ImpactZone& zn : mesh.zones)
    if (!std::isfinite(zn.spill_elevation)) zn.spill_elevation = zn.z_min;

  for (ImpactZone& zn : mesh.zones) {
    double z_max = -std::numeric_limits<double>::infinity();
    for (std::int64_t cell : zn.cells)
      z_max = std::max(z_max, dtm.z(dtm.row_of(cell), dtm.col_of(cell)));
    zn.table = build_level_volume_table(dtm, zn.cells,
                                        std::max(zn.spill_elevation, z_max) + headroom);
  }
  return mesh;
}

}  // namespace

ZoneMesh delineate_zones(const DtmRaster& dtm, const DelineateOptions& opt) {
  dtm.validate();
  if (opt.merge_epsilon < 0.0) throw ValidationError("merge epsilon must be >= 0");
  if (opt.headroom <= 0.0) throw ValidationError("table headroom must be positive");
  if (dtm.active_count() == 0) throw ValidationError("raster has no active cells");

  const int nr = dtm.nrows, nc = dtm.ncols;
  auto in_grid = [&](int r, int c) { return r >= 0 && r < nr && c >= 0 && c < nc; };
  auto active = [&](int r, int c) { return in_grid(r, c) && !dtm.is_nodata(r, c); };

  // 1. steepest-descent direction; -1 = no lower neighbour, -2 = nodata
  Eigen::ArrayXXi dir(nr, nc);
  dir.setConstant(-2);
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) {
      if (!active(r, c)) continue;
      double best = 0.0;
      int pick = -1;
      for (int k = 0; k < 8; ++k) {
        int rr = r + kDr[k], cc = c + kDc[k];
        if (!active(rr, cc)) continue;
        double drop = (dtm.z(r, c) - dtm.z(rr, cc)) / kDist[k];
        if (drop > best) {
          best = drop;
          pick = k;
        }
      }
      dir(r, c) = pick;
    }

  // 2. flats: connected equal-elevation groups of cells with no descent.
  //    Drained flats get routed toward the cells that do drain; undrained
  //    flats (pits, plateau bottoms) become zone cores.
  Eigen::ArrayXXi labels(nr, nc);
  labels.setConstant(-1);
  Eigen::ArrayXXi flat_seen(nr, nc);
  flat_seen.setConstant(0);
  int next_label = 0;

  for (int r0 = 0; r0 < nr; ++r0)
    for (int c0 = 0; c0 < nc; ++c0) {
      if (dir(r0, c0) != -1 || flat_seen(r0, c0)) continue;
      const double zf = dtm.z(r0, c0);

      std::vector<std::pair<int, int>> comp;
      std::deque<std::pair<int, int>> bfs{{r0, c0}};
      flat_seen(r0, c0) = 1;
      while (!bfs.empty()) {
        auto [r, c] = bfs.front();
        bfs.pop_front();
        comp.emplace_back(r, c);
        for (int k = 0; k < 8; ++k) {
          int rr = r + kDr[k], cc = c + kDc[k];
          if (active(rr, cc) && !flat_seen(rr, cc) && dir(rr, cc) == -1 && dtm.z(rr, cc) == zf) {
            flat_seen(rr, cc) = 1;
            bfs.emplace_back(rr, cc);
          }
        }
      }
      std::sort(comp.begin(), comp.end());

      // outlet seeds: flat cells bordering an equal-elevation cell that drains
      std::deque<std::pair<int, int>> queue;
      for (auto [r, c] : comp) {
        for (int k = 0; k < 8; ++k) {
          int rr = r + kDr[k], cc = c + kDc[k];
          if (active(rr, cc) && dtm.z(rr, cc) == zf && dir(rr, cc) >= 0) {
            dir(r, c) = k;
            queue.emplace_back(r, c);
            break;
          }
        }
      }

      if (queue.empty()) {
        int id = next_label++;
        for (auto [r, c] : comp) labels(r, c) = id;
      } else {
        while (!queue.empty()) {
          auto [r, c] = queue.front();
          queue.pop_front();
          for (int k = 0; k < 8; ++k) {
            int rr = r + kDr[k], cc = c + kDc[k];
            if (active(rr, cc) && dir(rr, cc) == -1 && dtm.z(rr, cc) == zf) {
              dir(rr, cc) = 7 - k;  // point back toward the drained side
              queue.emplace_back(rr, cc);
            }
          }
        }
      }
    }

  // 3. every remaining cell follows its descent chain into a labelled core
  std::vector<std::pair<int, int>> path;
  for (int r0 = 0; r0 < nr; ++r0)
    for (int c0 = 0; c0 < nc; ++c0) {
      if (!active(r0, c0) || labels(r0, c0) >= 0) continue;
      path.clear();
      int r = r0, c = c0;
      while (labels(r, c) < 0) {
        path.emplace_back(r, c);
        int k = dir(r, c);
        if (k < 0) throw ValidationError("internal: unresolved flat cell in routing");
        r += kDr[k];
        c += kDc[k];
      }
      int id = labels(r, c);
      for (auto [pr, pc] : path) labels(pr, pc) = id;
    }

  ZoneMesh mesh = build_from_labels(dtm, labels, opt.headroom);

  // 4. fold micro-depressions (spill - floor < epsilon) into the neighbour
  //    behind their lowest crest; repeat until stable.
  while (opt.merge_epsilon > 0.0 && mesh.zone_count() > 1) {
    const auto& inc = mesh.incidence();
    std::vector<int> parent(mesh.zones.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = int(i);
    std::function<int(int)> find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };

    bool merged = false;
    for (const ImpactZone& zn : mesh.zones) {
      if (inc[zn.id].empty()) continue;
      if (zn.spill_elevation - zn.z_min >= opt.merge_epsilon) continue;
      int best_edge = -1;
      for (int ei : inc[zn.id]) {
        if (best_edge < 0 || mesh.edges[ei].crest < mesh.edges[best_edge].crest)
          best_edge = ei;
      }
      const ZoneEdge& e = mesh.edges[best_edge];
      int target = e.a == zn.id ? e.b : e.a;
      int ra = find(zn.id), rb = find(target);
      if (ra != rb) {
        parent[ra] = rb;
        merged = true;
      }
    }
    if (!merged) break;

    Eigen::ArrayXXi relabel(nr, nc);
    relabel.setConstant(-1);
    for (int r = 0; r < nr; ++r)
      for (int c = 0; c < nc; ++c)
        if (mesh.labels(r, c) >= 0) relabel(r, c) = find(mesh.labels(r, c));
    mesh = build_from_labels(dtm, relabel, opt.headroom);
  }

  mesh.validate();
  return mesh;
}

// ---------------------------------------------------------------------------
// mesh queries
// ---------------------------------------------------------------------------

const std::vector<std::vector<int>>& ZoneMesh::incidence() const {
  if (incidence_.empty() && !zones.empty()) {
    incidence_.resize(zones.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      incidence_[edges[i].a].push_back(int(i));
      incidence_[edges[i].b].push_back(int(i));
    }
  }
  return incidence_;
}

void ZoneMesh::validate() const {
  if (labels.rows() != nrows || labels.cols() != ncols)
    throw ValidationError("label raster shape mismatch");
  std::int64_t labelled = 0;
  for (int r = 0; r < nrows; ++r)
    for (int c = 0; c < ncols; ++c) {
      int id = labels(r, c);
      if (id < -1 || id >= zone_count())
        throw ValidationError("label out of range at row " + std::to_string(r));
      if (id >= 0) ++labelled;
    }

  std::int64_t in_zones = 0;
  for (const ImpactZone& zn : zones) {
    if (zn.cells.empty()) throw ValidationError("zone " + std::to_string(zn.id) + " has no cells");
    if (!std::is_sorted(zn.cells.begin(), zn.cells.end()))
      throw ValidationError("zone cell list not sorted");
    for (std::int64_t cell : zn.cells) {
      int r = int(cell / ncols), c = int(cell % ncols);
      if (cell < 0 || r >= nrows || labels(r, c) != zn.id)
        throw ValidationError("zone " + std::to_string(zn.id) + " disagrees with label raster");
    }
    in_zones += std::int64_t(zn.cells.size());
    if (!(zn.spill_elevation >= zn.z_min))
      throw ValidationError("zone " + std::to_string(zn.id) + " spill below its floor");
    zn.table.validate();
    if (zn.table.z_min() != zn.z_min)
      throw ValidationError("zone " + std::to_string(zn.id) + " table floor mismatch");
  }
  if (in_zones != labelled)
    throw ValidationError("zones do not partition the labelled cells");

  for (const ZoneEdge& e : edges) {
    if (e.a < 0 || e.b <= e.a || e.b >= zone_count())
      throw ValidationError("edge endpoints out of order");
    if (!(e.boundary_length > 0.0) || !(e.flow_distance >= cellsize))
      throw ValidationError("edge geometry invalid");
    if (!(e.crest >= std::max(zones[e.a].z_min, zones[e.b].z_min)))
      throw ValidationError("edge crest below a zone floor");
  }
}

MeshStats mesh_stats(const ZoneMesh& mesh) {
  MeshStats s;
  s.zone_count = mesh.zone_count();
  s.edge_count = int(mesh.edges.size());
  s.min_cells = std::numeric_limits<std::int64_t>::max();
  for (const ImpactZone& zn : mesh.zones) {
    auto n = std::int64_t(zn.cells.size());
    s.cell_count += n;
    s.min_cells = std::min(s.min_cells, n);
    s.max_cells = std::max(s.max_cells, n);
    std::size_t bucket = 0;
    while ((std::int64_t(1) << (bucket + 1)) <= n) ++bucket;
    if (s.size_histogram.size() <= bucket) s.size_histogram.resize(bucket + 1, 0);
    ++s.size_histogram[bucket];
  }
  if (s.zone_count == 0) s.min_cells = 0;
  s.mean_cells = s.zone_count ? double(s.cell_count) / s.zone_count : 0.0;
  return s;
}

std::string format_stats(const MeshStats& s) {
  std::ostringstream out;
  out << "zones " << s.zone_count << ", edges " << s.edge_count << ", cells " << s.cell_count
      << "\n";
  out << "cells/zone: min " << s.min_cells << ", mean " << s.mean_cells << ", max " << s.max_cells
      << "\n";
  for (std::size_t k = 0; k < s.size_histogram.size(); ++k)
    out << "  [" << (std::int64_t(1) << k) << ", " << (std::int64_t(1) << (k + 1)) << "): "
        << s.size_histogram[k] << "\n";
  return out.str();
}

std::vector<std::pair<int, double>> border_zones(const ZoneMesh& mesh) {
  std::map<int, std::int64_t> sides;
  auto visit = [&](int r, int c) {
    int id = mesh.labels(r, c);
    if (id < 0) return;
    int n = (r == 0) + (r == mesh.nrows - 1) + (c == 0) + (c == mesh.ncols - 1);
    sides[id] += n;
  };
  for (int c = 0; c < mesh.ncols; ++c) {
    visit(0, c);
    if (mesh.nrows > 1) visit(mesh.nrows - 1, c);
  }
  for (int r = 1; r + 1 < mesh.nrows; ++r) {
    visit(r, 0);
    if (mesh.ncols > 1) visit(r, mesh.ncols - 1);
  }
  std::vector<std::pair<int, double>> out;
  out.reserve(sides.size());
  for (auto [id, n] : sides) out.emplace_back(id, double(n) * mesh.cellsize);
  return out;
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

void write_mesh(const ZoneMesh& mesh, std::ostream& out) {
  out << "izmesh 1\n"
      << "nrows " << mesh.nrows << "\n"
      << "ncols " << mesh.ncols << "\n"
      << "cellsize " << fmt_double(mesh.cellsize) << "\n"
      << "xllcorner " << fmt_double(mesh.xll) << "\n"
      << "yllcorner " << fmt_double(mesh.yll) << "\n"
      << "zones " << mesh.zones.size() << "\n"
      << "edges " << mesh.edges.size() << "\n";
  for (const ImpactZone& zn : mesh.zones) {
    out << "zone " << zn.id << " cells " << zn.cells.size() << " zmin " << fmt_double(zn.z_min)
        << " spill " << fmt_double(zn.spill_elevation) << " area " << fmt_double(zn.plan_area)
        << " table " << zn.table.levels.size() << "\n";
    for (Eigen::Index i = 0; i < zn.table.levels.size(); ++i)
      out << fmt_double(zn.table.levels(i)) << " " << fmt_double(zn.table.volumes(i)) << "\n";
  }
  for (const ZoneEdge& e : mesh.edges)
    out << "edge " << e.a << " " << e.b << " crest " << fmt_double(e.crest) << " length "
        << fmt_double(e.boundary_length) << " distance " << fmt_double(e.flow_distance) << "\n";
  out << "labels\n";
  std::string row;
  for (int r = 0; r < mesh.nrows; ++r) {
    row.clear();
    for (int c = 0; c < mesh.ncols; ++c) {
      if (c) row += ' ';
      row += std::to_string(mesh.labels(r, c));
    }
    row += '\n';
    out << row;
  }
  out << "end\n";
}

void write_mesh(const ZoneMesh& mesh, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open '" + path + "' for writing");
  write_mesh(mesh, f);
  if (!f.good()) throw ValidationError("short write to '" + path + "'");
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string> next(const char* what) {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      std::istringstream ss(line);
      std::vector<std::string> toks;
      std::string t;
      while (ss >> t) toks.push_back(t);
      if (!toks.empty()) return toks;
    }
    throw ParseError(std::string("unexpected end of mesh file, wanted ") + what, lineno_);
  }

  std::size_t lineno() const { return lineno_; }

  double num(const std::string& tok) const {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || tok.empty())
      throw ParseError("expected a number, got '" + tok + "'", lineno_);
    return v;
  }

  long long integer(const std::string& tok) const {
    char* end = nullptr;
    long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size() || tok.empty())
      throw ParseError("expected an integer, got '" + tok + "'", lineno_);
    return v;
  }

  void expect(const std::vector<std::string>& toks, std::size_t i, const char* word) const {
    if (i >= toks.size() || toks[i] != word)
      throw ParseError(std::string("expected '") + word + "'", lineno_);
  }

 private:
  std::istream& in_;
  std::size_t lineno_ = 0;
};

}  // namespace

ZoneMesh parse_mesh(std::istream& in) {
  LineReader rd(in);
  ZoneMesh mesh;

  auto header = rd.next("magic");
  if (header.size() != 2 || header[0] != "izmesh" || header[1] != "1")
    throw ParseError("not an izmesh v1 file", rd.lineno());

  auto field = [&](const char* key) {
    auto toks = rd.next(key);
    rd.expect(toks, 0, key);
    if (toks.size() != 2) throw ParseError(std::string("malformed '") + key + "' line", rd.lineno());
    return toks[1];
  };
  mesh.nrows = int(rd.integer(field("nrows")));
  mesh.ncols = int(rd.integer(field("ncols")));
  mesh.cellsize = rd.num(field("cellsize"));
  mesh.xll = rd.num(field("xllcorner"));
  mesh.yll = rd.num(field("yllcorner"));
  int nzones = int(rd.integer(field("zones")));
  int nedges = int(rd.integer(field("edges")));
  if (mesh.nrows <= 0 || mesh.ncols <= 0 || nzones < 0 || nedges < 0 || !(mesh.cellsize > 0))
    throw ParseError("mesh header values out of range", rd.lineno());

  // zone records: "zone <id> cells <n> zmin <z> spill <s> area <a> table <m>"
  std::vector<std::size_t> declared_cells(nzones);
  mesh.zones.resize(nzones);
  for (int i = 0; i < nzones; ++i) {
    auto toks = rd.next("zone record");
    rd.expect(toks, 0, "zone");
    if (toks.size() != 12) throw ParseError("malformed zone record", rd.lineno());
    ImpactZone& zn = mesh.zones[i];
    zn.id = int(rd.integer(toks[1]));
    if (zn.id != i) throw ParseError("zone ids must be contiguous from 0", rd.lineno());
    rd.expect(toks, 2, "cells");
    declared_cells[i] = std::size_t(rd.integer(toks[3]));
    rd.expect(toks, 4, "zmin");
    zn.z_min = rd.num(toks[5]);
    rd.expect(toks, 6, "spill");
    zn.spill_elevation = rd.num(toks[7]);
    rd.expect(toks, 8, "area");
    zn.plan_area = rd.num(toks[9]);
    rd.expect(toks, 10, "table");
    auto m = Eigen::Index(rd.integer(toks[11]));
    if (m < 2) throw ParseError("zone table needs >= 2 breakpoints", rd.lineno());
    zn.table.levels.resize(m);
    zn.table.volumes.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      auto bp = rd.next("table breakpoint");
      if (bp.size() != 2) throw ParseError("table breakpoint needs 'level volume'", rd.lineno());
      zn.table.levels(k) = rd.num(bp[0]);
      zn.table.volumes(k) = rd.num(bp[1]);
    }
  }

  // edge records: "edge <a> <b> crest <c> length <l> distance <d>"
  mesh.edges.resize(nedges);
  for (int i = 0; i < nedges; ++i) {
    auto toks = rd.next("edge record");
    rd.expect(toks, 0, "edge");
    if (toks.size() != 9) throw ParseError("malformed edge record", rd.lineno());
    ZoneEdge& e = mesh.edges[i];
    e.a = int(rd.integer(toks[1]));
    e.b = int(rd.integer(toks[2]));
    rd.expect(toks, 3, "crest");
    e.crest = rd.num(toks[4]);
    rd.expect(toks, 5, "length");
    e.boundary_length = rd.num(toks[6]);
    rd.expect(toks, 7, "distance");
    e.flow_distance = rd.num(toks[8]);
  }

  auto marker = rd.next("labels block");
  if (marker.size() != 1 || marker[0] != "labels")
    throw ParseError("expected 'labels'", rd.lineno());
  mesh.labels.resize(mesh.nrows, mesh.ncols);
  for (int r = 0; r < mesh.nrows; ++r) {
    auto toks = rd.next("label row");
    if (int(toks.size()) != mesh.ncols)
      throw ParseError("label row has " + std::to_string(toks.size()) + " values, expected " +
                       std::to_string(mesh.ncols), rd.lineno());
    for (int c = 0; c < mesh.ncols; ++c) {
      long long v = rd.integer(toks[c]);
      if (v < -1 || v >= nzones) throw ParseError("label out of range", rd.lineno());
      mesh.labels(r, c) = int(v);
    }
  }
  auto tail = rd.next("end marker");
  if (tail.size() != 1 || tail[0] != "end") throw ParseError("expected 'end'", rd.lineno());

  // cell lists are not stored; rebuild them from the label raster
  for (int r = 0; r < mesh.nrows; ++r)
    for (int c = 0; c < mesh.ncols; ++c) {
      int id = mesh.labels(r, c);
      if (id >= 0) mesh.zones[id].cells.push_back(std::int64_t(r) * mesh.ncols + c);
    }
  for (int i = 0; i < nzones; ++i)
    if (mesh.zones[i].cells.size() != declared_cells[i])
      throw ParseError("zone " + std::to_string(i) + " cell count disagrees with labels",
                       rd.lineno());

  mesh.validate();
  return mesh;
}

ZoneMesh read_mesh(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open mesh file '" + path + "'");
  try {
    return parse_mesh(f);
  } catch (const ParseError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace izflood
