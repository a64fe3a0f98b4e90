#include "izflood/terrain.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace izflood {

std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::int64_t DtmRaster::active_count() const {
  std::int64_t n = 0;
  for (int r = 0; r < nrows; ++r)
    for (int c = 0; c < ncols; ++c)
      if (!is_nodata(r, c)) ++n;
  return n;
}

void DtmRaster::validate() const {
  if (ncols <= 0 || nrows <= 0)
    throw ValidationError("raster dimensions must be positive (got " + std::to_string(nrows) +
                          "x" + std::to_string(ncols) + ")");
  if (!(cellsize > 0.0)) throw ValidationError("cellsize must be positive");
  if (z.rows() != nrows || z.cols() != ncols)
    throw ValidationError("elevation array shape does not match header dimensions");
  for (int r = 0; r < nrows; ++r)
    for (int c = 0; c < ncols; ++c) {
      double v = z(r, c);
      if (v != nodata && !std::isfinite(v))
        throw ValidationError("non-finite elevation at row " + std::to_string(r) + ", col " +
                              std::to_string(c));
    }
}

namespace {

std::string lower(std::string s) {
  for (char& ch : s) ch = char(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool parse_full_double(const std::string& tok, double& out) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + tok.size() && tok.size() > 0;
}

bool parse_full_int(const std::string& tok, long long& out) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  out = std::strtoll(begin, &end, 10);
  return end == begin + tok.size() && tok.size() > 0;
}

}  // namespace

DtmRaster parse_ascii_grid(std::istream& in) {
  DtmRaster r;
  bool have_ncols = false, have_nrows = false, have_xll = false, have_yll = false,
       have_cell = false, have_nodata = false;

  std::size_t lineno = 0;
  std::string line;
  std::vector<std::string> pending;  // first data line's tokens
  std::size_t pending_line = 0;

  // Header: keyword/value lines until something that is not a known key.
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    std::string key = lower(toks[0]);
    bool* seen = nullptr;
    if (key == "ncols") seen = &have_ncols;
    else if (key == "nrows") seen = &have_nrows;
    else if (key == "xllcorner") seen = &have_xll;
    else if (key == "yllcorner") seen = &have_yll;
    else if (key == "cellsize") seen = &have_cell;
    else if (key == "nodata_value") seen = &have_nodata;

    if (!seen) {
      double ignored;
      if (!parse_full_double(toks[0], ignored))
        throw ParseError("unknown header keyword '" + toks[0] + "'", lineno, 1);
      pending = std::move(toks);  // start of the value block
      pending_line = lineno;
      break;
    }
    if (*seen) throw ParseError("duplicate header key '" + toks[0] + "'", lineno, 1);
    if (toks.size() != 2)
      throw ParseError("header key '" + toks[0] + "' needs exactly one value", lineno, 1);
    *seen = true;

    if (key == "ncols" || key == "nrows") {
      long long v;
      if (!parse_full_int(toks[1], v) || v <= 0)
        throw ParseError("'" + toks[0] + "' must be a positive integer, got '" + toks[1] + "'",
                         lineno, 2);
      (key == "ncols" ? r.ncols : r.nrows) = int(v);
    } else {
      double v;
      if (!parse_full_double(toks[1], v))
        throw ParseError("'" + toks[0] + "' must be a number, got '" + toks[1] + "'", lineno, 2);
      if (key == "xllcorner") r.xll = v;
      else if (key == "yllcorner") r.yll = v;
      else if (key == "nodata_value") r.nodata = v;
      else {
        if (!(v > 0.0)) throw ParseError("cellsize must be positive", lineno, 2);
        r.cellsize = v;
      }
    }
  }

  if (!have_ncols) throw ParseError("missing header key 'ncols'", lineno);
  if (!have_nrows) throw ParseError("missing header key 'nrows'", lineno);
  if (!have_xll) throw ParseError("missing header key 'xllcorner'", lineno);
  if (!have_yll) throw ParseError("missing header key 'yllcorner'", lineno);
  if (!have_cell) throw ParseError("missing header key 'cellsize'", lineno);
  (void)have_nodata;  // optional, default -9999

  const std::int64_t want = std::int64_t(r.nrows) * r.ncols;
  r.z.resize(r.nrows, r.ncols);
  std::int64_t got = 0;

  auto consume = [&](const std::vector<std::string>& toks, std::size_t at_line) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (got >= want)
        throw ParseError("too many elevation values (expected " + std::to_string(want) + ")",
                         at_line, i + 1);
      double v;
      if (!parse_full_double(toks[i], v))
        throw ParseError("non-numeric elevation value '" + toks[i] + "'", at_line, i + 1);
      r.z(int(got / r.ncols), int(got % r.ncols)) = v;
      ++got;
    }
  };

  if (!pending.empty()) consume(pending, pending_line);
  while (std::getline(in, line)) {
    ++lineno;
    consume(split_ws(line), lineno);
  }
  if (got < want)
    throw ParseError("too few elevation values (got " + std::to_string(got) + " of " +
                     std::to_string(want) + ")", lineno);

  r.validate();
  return r;
}

DtmRaster read_ascii_grid(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open raster file '" + path + "'");
  try {
    return parse_ascii_grid(f);
  } catch (const ParseError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_ascii_grid(const DtmRaster& r, std::ostream& out) {
  r.validate();
  out << "ncols " << r.ncols << "\n"
      << "nrows " << r.nrows << "\n"
      << "xllcorner " << fmt_double(r.xll) << "\n"
      << "yllcorner " << fmt_double(r.yll) << "\n"
      << "cellsize " << fmt_double(r.cellsize) << "\n"
      << "NODATA_value " << fmt_double(r.nodata) << "\n";
  std::string row;
  for (int i = 0; i < r.nrows; ++i) {
    row.clear();
    for (int j = 0; j < r.ncols; ++j) {
      if (j) row += ' ';
      row += fmt_double(r.z(i, j));
    }
    row += '\n';
    out << row;
  }
}

void write_ascii_grid(const DtmRaster& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open '" + path + "' for writing");
  write_ascii_grid(r, f);
  if (!f.good()) throw ValidationError("short write to '" + path + "'");
}

SynthSpec SynthSpec::flat(int nrows, int ncols, double cellsize, double z0) {
  SynthSpec s;
  s.shape = Shape::flat;
  s.nrows = nrows;
  s.ncols = ncols;
  s.cellsize = cellsize;
  s.z0 = z0;
  return s;
}

SynthSpec SynthSpec::single_basin(int nrows, int ncols, double cellsize, double rim_z,
                                  double depth, double radius_cells) {
  SynthSpec s;
  s.shape = Shape::single_basin;
  s.nrows = nrows;
  s.ncols = ncols;
  s.cellsize = cellsize;
  s.rim_z = rim_z;
  s.depth = depth;
  s.radius_cells = radius_cells;
  return s;
}

SynthSpec SynthSpec::two_basin(int nrows, int ncols, double cellsize, double saddle_z,
                               double depth, double radius_cells) {
  SynthSpec s;
  s.shape = Shape::two_basin;
  s.nrows = nrows;
  s.ncols = ncols;
  s.cellsize = cellsize;
  s.rim_z = saddle_z;
  s.depth = depth;
  s.radius_cells = radius_cells;
  return s;
}

SynthSpec SynthSpec::coastal_slope(int nrows, int ncols, double cellsize, double z0,
                                   double slope) {
  SynthSpec s;
  s.shape = Shape::coastal_slope;
  s.nrows = nrows;
  s.ncols = ncols;
  s.cellsize = cellsize;
  s.z0 = z0;
  s.slope = slope;
  return s;
}

SynthSpec SynthSpec::island_center(int nrows, int ncols, double cellsize, double rim_z,
                                   double center_depth) {
  SynthSpec s;
  s.shape = Shape::island_center;
  s.nrows = nrows;
  s.ncols = ncols;
  s.cellsize = cellsize;
  s.z0 = 0.0;
  s.rim_z = rim_z;
  s.depth = center_depth;
  return s;
}

DtmRaster synth_terrain(const SynthSpec& spec) {
  if (spec.nrows <= 0 || spec.ncols <= 0)
    throw ValidationError("synthetic terrain needs positive dimensions");
  if (!(spec.cellsize > 0.0)) throw ValidationError("synthetic terrain needs positive cellsize");

  DtmRaster r;
  r.nrows = spec.nrows;
  r.ncols = spec.ncols;
  r.cellsize = spec.cellsize;
  r.xll = spec.xll;
  r.yll = spec.yll;
  r.z.resize(r.nrows, r.ncols);

  const double cr = (spec.nrows - 1) / 2.0;
  const double cc = (spec.ncols - 1) / 2.0;
  auto dist_m = [&](int i, int j, double center_r, double center_c) {
    double dr = (i - center_r) * spec.cellsize;
    double dc = (j - center_c) * spec.cellsize;
    return std::sqrt(dr * dr + dc * dc);
  };
  // Paraboloid bowl weight: 1 at the center, 0 at radius R and beyond.
  auto bowl = [](double d, double R) {
    double t = d / R;
    return std::max(0.0, 1.0 - t * t);
  };

  switch (spec.shape) {
    case SynthSpec::Shape::flat:
      r.z.setConstant(spec.z0);
      break;

    case SynthSpec::Shape::single_basin: {
      double Rc = spec.radius_cells > 0 ? spec.radius_cells : 0.35 * std::min(spec.nrows, spec.ncols);
      double R = Rc * spec.cellsize;
      for (int i = 0; i < r.nrows; ++i)
        for (int j = 0; j < r.ncols; ++j)
          r.z(i, j) = spec.rim_z - spec.depth * bowl(dist_m(i, j, cr, cc), R);
      break;
    }

    case SynthSpec::Shape::two_basin: {
      double Rc = spec.radius_cells > 0 ? spec.radius_cells : 0.2 * spec.ncols;
      double R = Rc * spec.cellsize;
      double c1 = (spec.ncols - 1) * 0.25, c2 = (spec.ncols - 1) * 0.75;
      for (int i = 0; i < r.nrows; ++i)
        for (int j = 0; j < r.ncols; ++j) {
          double w = std::max(bowl(dist_m(i, j, cr, c1), R), bowl(dist_m(i, j, cr, c2), R));
          r.z(i, j) = spec.rim_z - spec.depth * w;
        }
      break;
    }

    case SynthSpec::Shape::coastal_slope:
      // South edge (last row) sits at z0; land rises northward.
      for (int i = 0; i < r.nrows; ++i)
        for (int j = 0; j < r.ncols; ++j)
          r.z(i, j) = spec.z0 + spec.slope * (spec.nrows - 1 - i) * spec.cellsize;
      break;

    case SynthSpec::Shape::island_center: {
      // Flat coastal ring -> linear climb to the rim -> sunken paraboloid middle.
      // The ring is a single connected flat, so the shore delineates as one zone.
      const double half_m = 0.5 * std::min(spec.nrows, spec.ncols) * spec.cellsize;
      const double r_rim = spec.rim_frac * half_m;
      const double r_coast = spec.coast_frac * half_m;
      if (!(r_rim > 0.0) || !(r_coast > r_rim))
        throw ValidationError("island terrain needs 0 < rim_frac < coast_frac");
      const double floor_z = spec.rim_z - spec.depth;
      for (int i = 0; i < r.nrows; ++i)
        for (int j = 0; j < r.ncols; ++j) {
          double d = dist_m(i, j, cr, cc);
          if (d >= r_coast) {
            r.z(i, j) = spec.z0;
          } else if (d >= r_rim) {
            r.z(i, j) = spec.rim_z + (spec.z0 - spec.rim_z) * (d - r_rim) / (r_coast - r_rim);
          } else {
            double t = d / r_rim;
            r.z(i, j) = floor_z + (spec.rim_z - floor_z) * t * t;
          }
        }
      break;
    }
  }
  return r;
}

}  // namespace izflood
