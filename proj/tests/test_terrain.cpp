#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "izflood/terrain.hpp"

using namespace izflood;

namespace {

DtmRaster random_raster(unsigned seed, int nrows = 13, int ncols = 17) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uz(-250.0, 250.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  DtmRaster r;
  r.nrows = nrows;
  r.ncols = ncols;
  r.cellsize = 2.5;
  r.xll = 1000.125;
  r.yll = -3.75;
  r.nodata = -9999.0;
  r.z.resize(nrows, ncols);
  for (int i = 0; i < nrows; ++i)
    for (int j = 0; j < ncols; ++j)
      r.z(i, j) = u01(rng) < 0.1 ? r.nodata : uz(rng);
  return r;
}

}  // namespace

TEST_CASE("write/parse round trip is bit exact") {
  DtmRaster r = random_raster(42);
  r.z(0, 0) = 0.1 + 0.2;           // classic non-representable decimal
  r.z(1, 1) = 4 * std::atan(1.0);  // pi
  r.z(2, 2) = 1e-300;
  r.z(3, 3) = -1.0 / 3.0;

  std::ostringstream out;
  write_ascii_grid(r, out);
  std::istringstream in(out.str());
  DtmRaster q = parse_ascii_grid(in);

  CHECK(q.nrows == r.nrows);
  CHECK(q.ncols == r.ncols);
  CHECK(q.cellsize == r.cellsize);
  CHECK(q.xll == r.xll);
  CHECK(q.yll == r.yll);
  CHECK(q.nodata == r.nodata);
  REQUIRE(q.z.rows() == r.z.rows());
  for (int i = 0; i < r.nrows; ++i)
    for (int j = 0; j < r.ncols; ++j)
      CHECK(q.z(i, j) == r.z(i, j));  // bitwise, not approx
}

TEST_CASE("header keys accept any order and case") {
  std::istringstream in(
      "NROWS 2\n"
      "Cellsize 5\n"
      "ncols 3\n"
      "XLLCORNER 10\n"
      "yllcorner 20\n"
      "1 2 3\n"
      "4 5 6\n");
  DtmRaster r = parse_ascii_grid(in);
  CHECK(r.nrows == 2);
  CHECK(r.ncols == 3);
  CHECK(r.cellsize == 5.0);
  CHECK(r.xll == 10.0);
  CHECK(r.yll == 20.0);
  CHECK(r.nodata == -9999.0);  // default when NODATA_value is absent
  CHECK(r.z(0, 2) == 3.0);
  CHECK(r.z(1, 0) == 4.0);
}

TEST_CASE("values may be split across lines arbitrarily") {
  std::istringstream in(
      "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n"
      "1 2 3\n"
      "4\n");
  DtmRaster r = parse_ascii_grid(in);
  CHECK(r.z(1, 1) == 4.0);
}

TEST_CASE("parse errors carry line numbers") {
  auto expect_parse_error = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      parse_ascii_grid(in);
      FAIL_CHECK("expected ParseError for: " << needle);
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
      CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
  };

  expect_parse_error("ncols 2\nnrows 2\nxllcorner 0\ncellsize 1\n1 2 3 4\n", "yllcorner");
  expect_parse_error("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 oops\n",
                     "non-numeric");
  expect_parse_error("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n",
                     "too few");
  expect_parse_error("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3 4 5\n",
                     "too many");
  expect_parse_error("ncols 2.5\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n",
                     "positive integer");
  expect_parse_error("ncols 2\nncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n",
                     "duplicate");
  expect_parse_error("colz 2\n", "unknown header keyword");
  expect_parse_error("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize -1\n1 2 3 4\n",
                     "cellsize");

  // line number of the bad token is reported, not just any line
  std::istringstream in("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\nx 4\n");
  try {
    parse_ascii_grid(in);
    FAIL_CHECK("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 7);
  }
}

TEST_CASE("nodata cells survive the round trip and are flagged") {
  DtmRaster r = random_raster(7);
  r.z(5, 5) = r.nodata;
  CHECK(r.is_nodata(5, 5));
  CHECK_FALSE(r.is_nodata(0, 0));
  CHECK(r.active_count() < r.cell_count());

  std::ostringstream out;
  write_ascii_grid(r, out);
  std::istringstream in(out.str());
  DtmRaster q = parse_ascii_grid(in);
  CHECK(q.is_nodata(5, 5));
  CHECK(q.active_count() == r.active_count());
}

TEST_CASE("flat terrain is constant") {
  DtmRaster r = synth_terrain(SynthSpec::flat(8, 9, 2.0, 3.5));
  CHECK(r.nrows == 8);
  CHECK(r.ncols == 9);
  CHECK((r.z == 3.5).all());
}

TEST_CASE("single basin: lowest at the center, rim level at the border") {
  DtmRaster r = synth_terrain(SynthSpec::single_basin(21, 21, 1.0, 5.0, 2.0, 8.0));
  CHECK(r.z(10, 10) == doctest::Approx(3.0));
  CHECK(r.z(0, 0) == 5.0);        // outside the bowl radius
  CHECK(r.z(10, 10) < r.z(10, 6));  // monotone toward the center
  double zmin = r.z.minCoeff();
  CHECK(zmin == r.z(10, 10));
}

TEST_CASE("two basins sit left and right of a saddle ridge") {
  DtmRaster r = synth_terrain(SynthSpec::two_basin(31, 61, 1.0, 4.0, 1.5));
  int mid_r = 15;
  CHECK(r.z(mid_r, 15) == doctest::Approx(2.5));  // left pit floor
  CHECK(r.z(mid_r, 45) == doctest::Approx(2.5));  // right pit floor
  CHECK(r.z(mid_r, 30) == 4.0);                   // ridge between them
  CHECK(r.z(mid_r, 15) == r.z(mid_r, 45));        // symmetric
}

TEST_CASE("coastal slope rises away from the south edge") {
  DtmRaster r = synth_terrain(SynthSpec::coastal_slope(10, 4, 2.0, 0.5, 0.1));
  CHECK(r.z(9, 0) == 0.5);                      // south edge at base level
  CHECK(r.z(0, 0) == doctest::Approx(0.5 + 0.1 * 9 * 2.0));
  for (int i = 1; i < 10; ++i) CHECK(r.z(i - 1, 2) > r.z(i, 2));
}

TEST_CASE("island terrain: flat shore, high rim, sunken middle") {
  DtmRaster r = synth_terrain(SynthSpec::island_center(41, 41, 10.0, 3.0, 2.5));
  CHECK(r.z(0, 0) == 0.0);    // coastal ring
  CHECK(r.z(0, 40) == 0.0);
  CHECK(r.z(20, 20) == doctest::Approx(0.5));  // rim_z - depth
  double zmax = r.z.maxCoeff();
  CHECK(zmax == doctest::Approx(3.0).epsilon(0.05));  // rim reaches ~rim_z
  // the middle is a closed depression: rim higher than both floor and coast
  CHECK(zmax > r.z(20, 20));
  CHECK(zmax > 0.0);
}

TEST_CASE("synthetic terrain is deterministic") {
  DtmRaster a = synth_terrain(SynthSpec::island_center(33, 29, 5.0, 2.0, 1.0));
  DtmRaster b = synth_terrain(SynthSpec::island_center(33, 29, 5.0, 2.0, 1.0));
  CHECK((a.z == b.z).all());
}

TEST_CASE("validate rejects broken rasters") {
  DtmRaster r = random_raster(3);
  r.z(1, 2) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(r.validate(), ValidationError);
  CHECK_THROWS_AS(synth_terrain(SynthSpec::flat(0, 5, 1.0, 0.0)), ValidationError);
  CHECK_THROWS_AS(synth_terrain(SynthSpec::flat(5, 5, -1.0, 0.0)), ValidationError);
}
