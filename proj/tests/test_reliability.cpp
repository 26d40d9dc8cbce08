#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "pgplan/reliability.hpp"
#include "pgplan/util.hpp"

using namespace pgplan::reliability;
using pgplan::ErrorCode;

namespace {

PgLine make_line(int index, char orientation, double position, double length,
                 double width = 1.0, double current = 0.0) {
  PgLine ln;
  ln.index = index;
  ln.orientation = orientation;
  ln.position = position;
  ln.length = length;
  ln.width = width;
  ln.current = current;
  return ln;
}

BlockLoad make_block(int id, double x0, double x1, double y0, double y1,
                     double i_d) {
  BlockLoad b;
  b.id = id;
  b.x0 = x0;
  b.x1 = x1;
  b.y0 = y0;
  b.y1 = y1;
  b.i_d = i_d;
  return b;
}

}  // namespace

TEST_CASE("width_for_ir evaluates rho*l*I/V") {
  CHECK(width_for_ir(1.0, 1.0, 1e-3, 1e-3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(width_for_ir(0.04, 100.0, 5e-3, 0.01) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, width_for_ir(1, 1, 1e-3, 0.0));
  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, width_for_ir(-1, 1, 1e-3, 1));
  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, width_for_ir(1, 0, 1e-3, 1));
}

TEST_CASE("width_for_ir is monotone in current, length and budget") {
  double base = width_for_ir(0.04, 100, 5e-3, 0.01);
  CHECK(width_for_ir(0.04, 100, 6e-3, 0.01) > base);
  CHECK(width_for_ir(0.04, 120, 5e-3, 0.01) > base);
  CHECK(width_for_ir(0.04, 100, 5e-3, 0.02) < base);
}

TEST_CASE("em_check density, margin and boundary") {
  EmCheck c = em_check(2e-3, 1.0, 1e-3);
  CHECK(c.density == doctest::Approx(2e-3).epsilon(1e-15));
  CHECK(c.margin == doctest::Approx(-1e-3).epsilon(1e-12));
  CHECK(c.violated);

  c = em_check(0.0, 1.0, 1e-3);
  CHECK(c.density == 0.0);
  CHECK_FALSE(c.violated);

  // density exactly j_max is allowed (constraint is <=)
  c = em_check(1e-3, 1.0, 1e-3);
  CHECK_FALSE(c.violated);
  CHECK(c.margin == 0.0);

  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, em_check(1e-3, 0.0, 1e-3));
  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, em_check(1e-3, 1.0, 0.0));
  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, em_check(-1e-3, 1.0, 1e-3));
}

TEST_CASE("width/density round trip is an algebraic identity") {
  const double rhos[] = {0.02, 0.04, 1.0};
  const double lengths[] = {10.0, 100.0, 12000.0};
  const double currents[] = {1e-4, 5e-3, 0.4};
  const double budgets[] = {1e-3, 0.01, 0.09};
  for (double rho : rhos)
    for (double l : lengths)
      for (double i : currents)
        for (double v : budgets) {
          double w = width_for_ir(rho, l, i, v);
          double density = em_check(i, w, 1.0).density;
          double expected = v / (rho * l);
          CHECK(std::abs(density - expected) <= 1e-12 * std::abs(expected));
        }
}

TEST_CASE("pg_line_count floors and never reports zero") {
  CHECK(pg_line_count(100.0, 10.0) == 10);
  CHECK(pg_line_count(100.0, 100.0) == 1);
  CHECK(pg_line_count(95.0, 10.0) == 9);
  CHECK(pg_line_count(5.0, 10.0) == 1);  // floor would be 0; minimum is 1
  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, pg_line_count(100.0, 0.0));
  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, pg_line_count(0.0, 10.0));
}

TEST_CASE("allocation: single line takes the whole block") {
  std::vector<PgLine> lines = {make_line(0, 'h', 50.0, 100.0)};
  std::vector<BlockLoad> blocks = {make_block(0, 10, 90, 40, 60, 0.3)};
  Allocation a = allocate_block_currents(lines, blocks);
  REQUIRE(a.line_current.size() == 1);
  CHECK(a.line_current[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(a.pair_current[0][0] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("allocation: equal split over covered lines, exact conservation") {
  // horizontal lines at y = 10, 20, 30, 40; block spans y in [15, 45]
  std::vector<PgLine> lines;
  for (int i = 0; i < 4; ++i)
    lines.push_back(make_line(i, 'h', 10.0 * (i + 1), 100.0));
  std::vector<BlockLoad> blocks = {make_block(0, 0, 100, 15, 45, 0.3)};
  Allocation a = allocate_block_currents(lines, blocks);
  CHECK(a.line_current[0] == 0.0);  // y=10 not covered
  for (int i = 1; i < 4; ++i)
    CHECK(a.line_current[i] == doctest::Approx(0.1).epsilon(1e-12));
  double total = 0.0;
  for (double c : a.line_current) total += c;
  CHECK(std::abs(total - 0.3) <= 1e-12 * 0.3);
}

TEST_CASE("allocation conserves current over a random mixed layout") {
  pgplan::Rng rng(5);
  std::vector<PgLine> lines;
  for (int i = 0; i < 12; ++i)
    lines.push_back(make_line(i, i < 6 ? 'h' : 'v', 100.0 * (i % 6) + 50.0,
                              600.0));
  std::vector<BlockLoad> blocks;
  double total_demand = 0.0;
  for (int j = 0; j < 9; ++j) {
    double x0 = rng.uniform(0, 400), y0 = rng.uniform(0, 400);
    BlockLoad b = make_block(j, x0, x0 + rng.uniform(120, 250), y0,
                             y0 + rng.uniform(120, 250), rng.uniform(1e-3, 2e-2));
    blocks.push_back(b);
    total_demand += b.i_d;
  }
  Allocation a = allocate_block_currents(lines, blocks);
  double total = 0.0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    total += a.line_current[i];
    double from_pairs = 0.0;
    for (std::size_t j = 0; j < blocks.size(); ++j)
      from_pairs += a.pair_current[i][j];
    CHECK(a.line_current[i] == doctest::Approx(from_pairs).epsilon(1e-12));
  }
  CHECK(std::abs(total - total_demand) <= 1e-12 * total_demand);
}

TEST_CASE("allocation rejects an uncovered block") {
  std::vector<PgLine> lines = {make_line(0, 'h', 50.0, 100.0)};
  std::vector<BlockLoad> blocks = {make_block(0, 0, 100, 60, 80, 0.1)};
  CHECK_PG_ERROR(ErrorCode::UncoveredBlock,
                 allocate_block_currents(lines, blocks));
}

TEST_CASE("spacing_from_widths closes the ring budget uniformly") {
  auto s = spacing_from_widths({10.0, 10.0}, 30.0);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(5.0).epsilon(1e-15));

  // closure: sum(w_i + s_i) == core_width
  std::vector<double> widths = {1.25, 0.5, 3.0, 0.125};
  auto sp = spacing_from_widths(widths, 16.0);
  double closure = 0.0;
  for (std::size_t i = 0; i < widths.size(); ++i) closure += widths[i] + sp[i];
  CHECK(std::abs(closure - 16.0) <= 1e-9);

  CHECK_PG_ERROR(ErrorCode::InfeasibleWidths, spacing_from_widths({30.0}, 30.0));
  CHECK_PG_ERROR(ErrorCode::InfeasibleWidths, spacing_from_widths({}, 30.0));
}

TEST_CASE("reliability report lists one row per line") {
  std::vector<PgLine> lines = {make_line(0, 'h', 0.0, 100.0, 2.0, 5e-3),
                               make_line(1, 'v', 50.0, 100.0, 0.5, 4e-3)};
  std::string csv = reliability_report_csv(lines, 5e-3);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "line_index,orientation,position,length,width,current,density,violated");
  std::string row;
  std::vector<std::string> rows;
  while (std::getline(in, row)) rows.push_back(row);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ends_with(",0"));  // 5e-3/2.0 = 2.5e-3 <= 5e-3
  CHECK(rows[1].ends_with(",1"));  // 4e-3/0.5 = 8e-3 > 5e-3
}
