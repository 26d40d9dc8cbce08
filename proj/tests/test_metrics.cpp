#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "pgplan/metrics.hpp"
#include "pgplan/solver.hpp"
#include "pgplan/util.hpp"

using namespace pgplan::metrics;
using pgplan::ErrorCode;

namespace {

pgplan::netlist::PowerGridNetlist parse_text(const std::string& text) {
  std::istringstream in(text);
  return pgplan::netlist::parse_netlist(in);
}

}  // namespace

TEST_CASE("mse on pinned examples") {
  CHECK(mse({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(mse({0, 0}, {1, 1}) == 1.0);
  CHECK(mse({1, 2, 3}, {1, 2, 4}) == 1.0 / 3.0);
  CHECK_PG_ERROR(ErrorCode::EmptyInput, mse({}, {}));
  CHECK_PG_ERROR(ErrorCode::ShapeMismatch, mse({1}, {1, 2}));
}

TEST_CASE("error histogram bins signed errors and conserves counts") {
  // errors -1 and +1 over 2 bins
  Histogram h = error_histogram({0, 0}, {-1, 1}, 2);
  REQUIRE(h.counts.size() == 2);
  REQUIRE(h.edges.size() == 3);
  CHECK(h.counts[0] == 1);
  CHECK(h.counts[1] == 1);
  CHECK(h.edges[0] == -1.0);
  CHECK(h.edges[2] == 1.0);

  // identical vectors: a degenerate range still bins everything, around 0
  Histogram flat = error_histogram({1, 2, 3}, {1, 2, 3}, 5);
  long long total = 0;
  bool all_in_one = false;
  for (std::size_t i = 0; i < flat.counts.size(); ++i) {
    total += flat.counts[i];
    if (flat.counts[i] == 3) {
      all_in_one = true;
      CHECK(flat.edges[i] <= 0.0);
      CHECK(flat.edges[i + 1] >= 0.0);
    }
  }
  CHECK(total == 3);
  CHECK(all_in_one);

  CHECK_PG_ERROR(ErrorCode::BadConfig, error_histogram({1}, {1}, 0));
  CHECK_PG_ERROR(ErrorCode::EmptyInput, error_histogram({}, {}, 3));
}

TEST_CASE("histogram conserves a large random sample") {
  pgplan::Rng rng(9);
  std::vector<double> y(1000), p(1000);
  for (int i = 0; i < 1000; ++i) {
    y[static_cast<std::size_t>(i)] = rng.uniform(0, 10);
    p[static_cast<std::size_t>(i)] = rng.uniform(0, 10);
  }
  Histogram h = error_histogram(y, p, 7);
  REQUIRE(h.counts.size() == 7);
  REQUIRE(h.edges.size() == 8);
  long long total = 0;
  for (long long c : h.counts) total += c;
  CHECK(total == 1000);
  for (std::size_t i = 0; i + 1 < h.edges.size(); ++i)
    CHECK(h.edges[i] < h.edges[i + 1]);
}

TEST_CASE("pearson correlation") {
  CHECK(pearson({1, 2, 3, 4}, {2, 4, 6, 8}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson({1, 2, 3, 4}, {8, 6, 4, 2}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(pearson({1, 2, 3, 4}, {1, -1, -1, 1})) < 1e-12);
  CHECK_PG_ERROR(ErrorCode::EmptyInput, pearson({1}, {1}));
  CHECK_PG_ERROR(ErrorCode::DegenerateTarget, pearson({2, 2}, {1, 2}));
}

TEST_CASE("timing report floors at a microsecond and divides exactly") {
  Timing t = timing_report(74.80, 12.74);
  CHECK(t.speedup == doctest::Approx(5.87).epsilon(1e-3));
  CHECK(t.speedup == t.conventional_seconds / t.dl_seconds);  // exact quotient

  CHECK(timing_report(2.0, 2.0).speedup == 1.0);

  Timing floored = timing_report(1.0, 1e-9);
  CHECK(floored.dl_seconds == 1e-6);
  CHECK(floored.speedup == 1.0 / 1e-6);

  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, timing_report(0.0, 1.0));
  CHECK_PG_ERROR(ErrorCode::NonPositiveInput, timing_report(1.0, -1.0));
}

TEST_CASE("ir_map matches a brute-force per-cell scan") {
  pgplan::Rng rng(21);
  const int n = 5000, res = 8;
  std::vector<double> xs(n), ys(n), vs(n);
  for (int i = 0; i < n; ++i) {
    xs[static_cast<std::size_t>(i)] = rng.uniform(0, 100);
    ys[static_cast<std::size_t>(i)] = rng.uniform(0, 100);
    vs[static_cast<std::size_t>(i)] = rng.uniform(0, 1);
  }
  IrMap map = ir_map(xs, ys, vs, res);
  REQUIRE(map.cells.size() == static_cast<std::size_t>(res * res));

  std::vector<double> expect(static_cast<std::size_t>(res * res), -1.0);
  double min_x = *std::min_element(xs.begin(), xs.end());
  double max_x = *std::max_element(xs.begin(), xs.end());
  double min_y = *std::min_element(ys.begin(), ys.end());
  double max_y = *std::max_element(ys.begin(), ys.end());
  const double sx = static_cast<double>(res) / (max_x - min_x);
  const double sy = static_cast<double>(res) / (max_y - min_y);
  for (int i = 0; i < n; ++i) {
    auto cell = [&](double v, double lo, double scale) {
      auto c = static_cast<long long>((v - lo) * scale);
      return std::clamp<long long>(c, 0, res - 1);
    };
    long long cx = cell(xs[static_cast<std::size_t>(i)], min_x, sx);
    long long cy = cell(ys[static_cast<std::size_t>(i)], min_y, sy);
    double& slot = expect[static_cast<std::size_t>(cy * res + cx)];
    slot = std::max(slot, vs[static_cast<std::size_t>(i)]);
  }
  CHECK(map.min_x == min_x);
  CHECK(map.max_y == max_y);
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(map.cells[i] == expect[i]);
}

TEST_CASE("ir_map aggregates, flags empties, and spots a single hot node") {
  // two points share a cell; a third sits alone
  std::vector<double> xs = {0.0, 0.1, 10.0};
  std::vector<double> ys = {0.0, 0.1, 10.0};
  std::vector<double> vs = {1.0, 3.0, 0.0};
  IrMap mx = ir_map(xs, ys, vs, 4, CellAggregate::max);
  IrMap mn = ir_map(xs, ys, vs, 4, CellAggregate::mean);
  CHECK(mx.cells[0] == 3.0);
  CHECK(mn.cells[0] == 2.0);
  int empties = 0;
  for (double c : mx.cells)
    if (c == -1.0) ++empties;
  CHECK(empties == 16 - 2);

  // exactly one nonzero cell for a single hot node
  std::vector<double> hot = {0.0, 0.0, 5.0};
  IrMap hmap = ir_map(xs, ys, hot, 4);
  int nonzero = 0;
  for (double c : hmap.cells)
    if (c > 0.0) ++nonzero;
  CHECK(nonzero == 1);

  CHECK_PG_ERROR(ErrorCode::BadConfig, ir_map(xs, ys, vs, 0));
  CHECK_PG_ERROR(ErrorCode::NoCoordinates, ir_map({}, {}, {}, 4));
}

TEST_CASE("solution raster skips ground and respects symmetry") {
  // 3x3 unit mesh with corner pads and a center load (solver-test twin)
  std::ostringstream os;
  int rc = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c + 1 < 3; ++c)
      os << "R" << rc++ << " n1_" << c * 100 << "_" << r * 100 << " n1_"
         << (c + 1) * 100 << "_" << r * 100 << " 1\n";
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r + 1 < 3; ++r)
      os << "R" << rc++ << " n1_" << c * 100 << "_" << r * 100 << " n1_"
         << c * 100 << "_" << (r + 1) * 100 << " 1\n";
  os << "V0 n1_0_0 0 1.8\nV1 n1_200_0 0 1.8\nV2 n1_0_200 0 1.8\n"
        "V3 n1_200_200 0 1.8\nI0 n1_100_100 0 0.2\n";
  auto net = parse_text(os.str());
  auto sys = pgplan::solver::assemble(net);
  auto sol = pgplan::solver::solve(net, sys, 1e-12);
  auto ir = pgplan::solver::ir_drop(sol, net);

  IrMap map = ir_map_from_solution(net, ir.drop, 3);
  REQUIRE(map.cells.size() == 9);
  // every cell holds exactly one node here; center is the hottest
  CHECK(map.cells[4] == ir.worst_case);
  // 90-degree rotation: cell (r, c) -> (c, 2 - r)
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      CHECK(map.cells[static_cast<std::size_t>(r * 3 + c)] ==
            doctest::Approx(map.cells[static_cast<std::size_t>(c * 3 + (2 - r))])
                .epsilon(1e-10));
}

TEST_CASE("dl_node_drops applies the two-sided tent per channel") {
  pgplan::synth::GridGeometry geo;
  geo.rows = 1;
  geo.cols = 0;
  geo.pitch = 100.0;
  geo.rho = 0.04;
  geo.vdd = 1.8;
  pgplan::reliability::PgLine line;
  line.index = 0;
  line.orientation = 'h';
  line.position = 0.0;
  line.length = 100.0;
  line.width = 2.0;
  line.current = 5e-3;
  geo.lines.push_back(line);
  pgplan::synth::GeometryTap tap;
  tap.line = 0;
  tap.node = "n1_50_0";
  tap.offset = 50.0;
  tap.share = 5e-3;
  tap.block = 0;
  geo.taps.push_back(tap);

  auto net = parse_text(
      "V1 n1_0_0 0 1.8\n"
      "R1 n1_0_0 n1_25_0 1\n"
      "R2 n1_25_0 n1_50_0 1\n"
      "R3 n1_50_0 n1_75_0 1\n"
      "R4 n1_75_0 n1_100_0 1\n"
      "I1 n1_50_0 0 5e-3\n");
  std::vector<double> widths = {2.0};
  std::vector<double> drops = dl_node_drops(geo, net, widths);

  auto drop_at = [&](const std::string& name) {
    return drops[static_cast<std::size_t>(net.find_node(name))];
  };
  // tent G(s, a; l) = s(l-a)/l for s <= a, a(l-s)/l after; drop = i*rho*G/w
  double k = 5e-3 * 0.04 / 2.0;
  CHECK(drop_at("n1_50_0") == doctest::Approx(k * 25.0).epsilon(1e-12));
  CHECK(drop_at("n1_25_0") == doctest::Approx(k * 12.5).epsilon(1e-12));
  CHECK(drop_at("n1_75_0") == doctest::Approx(k * 12.5).epsilon(1e-12));
  CHECK(drop_at("n1_0_0") == 0.0);  // pinned end
  CHECK(drops[static_cast<std::size_t>(net.ground_id)] == 0.0);
}

TEST_CASE("dl_node_drops averages the two channel estimates") {
  pgplan::synth::GridGeometry geo;
  geo.pitch = 100.0;
  geo.rho = 0.04;
  pgplan::reliability::PgLine h, v;
  h.index = 0;
  h.orientation = 'h';
  h.position = 0.0;
  h.length = 100.0;
  v.index = 1;
  v.orientation = 'v';
  v.position = 50.0;
  v.length = 100.0;
  geo.lines = {h, v};
  pgplan::synth::GeometryTap th, tv;
  th.line = 0;
  th.node = "n1_50_0";
  th.offset = 50.0;
  th.share = 4e-3;
  tv.line = 1;
  tv.node = "n1_50_0";
  tv.offset = 0.0;  // the shared node sits at the v-line's start
  tv.share = 6e-3;
  geo.taps = {th, tv};

  auto net = parse_text(
      "V1 n1_0_0 0 1.8\n"
      "R1 n1_0_0 n1_50_0 1\n"
      "R2 n1_50_0 n1_50_100 1\n"
      "I1 n1_50_0 0 0.01\n");
  std::vector<double> widths = {2.0, 1.0};
  std::vector<double> drops = dl_node_drops(geo, net, widths);

  // h channel at (50, 0): tent 25 -> 4e-3*0.04*25/2 = 2e-3
  // v channel at offset 0: tent 0 -> 0; the node averages the two
  double expect = (4e-3 * 0.04 * 25.0 / 2.0 + 0.0) / 2.0;
  CHECK(drops[static_cast<std::size_t>(net.find_node("n1_50_0"))] ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("raster correlation uses jointly occupied cells only") {
  IrMap a, b;
  a.resolution = b.resolution = 2;
  a.cells = {1.0, 2.0, 3.0, -1.0};
  b.cells = {2.0, 4.0, 6.0, 5.0};  // last cell empty in a: ignored
  CHECK(raster_correlation(a, b) == doctest::Approx(1.0).epsilon(1e-12));

  IrMap c = a;
  c.cells = {1.0, -1.0, -1.0, -1.0};
  CHECK_PG_ERROR(ErrorCode::EmptyInput, raster_correlation(a, c));

  IrMap d;
  d.resolution = 3;
  d.cells.assign(9, 1.0);
  CHECK_PG_ERROR(ErrorCode::ShapeMismatch, raster_correlation(a, d));
}

TEST_CASE("csv and pgm writers emit the documented formats") {
  TempDir dir("metrics");

  write_scatter_csv({1.0, 2.0}, {1.5, 2.5}, dir.path("s.csv"));
  std::ifstream sc(dir.path("s.csv"));
  std::string line;
  std::getline(sc, line);
  CHECK(line == "golden_width,predicted_width");
  std::getline(sc, line);
  CHECK(line == "1,1.5");

  Histogram h = error_histogram({0, 0}, {-1, 1}, 2);
  write_histogram_csv(h, dir.path("h.csv"));
  std::ifstream hc(dir.path("h.csv"));
  std::getline(hc, line);
  CHECK(line == "bin_left,bin_right,count");
  std::getline(hc, line);
  CHECK(line == "-1,0,1");

  IrMap map;
  map.resolution = 2;
  map.cells = {0.0, 0.5, 1.0, -1.0};
  write_raster_csv(map, dir.path("m.csv"));
  std::ifstream mc(dir.path("m.csv"));
  std::getline(mc, line);
  CHECK(line == "0,0.5");
  std::getline(mc, line);
  CHECK(line == "1,-1");

  write_raster_pgm(map, dir.path("m.pgm"));
  std::ifstream pg(dir.path("m.pgm"));
  std::getline(pg, line);
  CHECK(line == "P2");
  std::getline(pg, line);
  CHECK(line == "2 2");
  std::getline(pg, line);
  CHECK(line == "255");
  std::getline(pg, line);
  CHECK(line == "0 128");  // 0.5 of peak 1.0 -> round(127.5)
  std::getline(pg, line);
  CHECK(line == "255 0");  // empty cells render as 0
}

TEST_CASE("eval report serializes optional sections only when present") {
  TempDir dir("report");
  EvalReport rep;
  rep.mse_normalized = 0.01;
  rep.mse_physical = 0.02;
  rep.r2 = 0.95;
  rep.worst_case_ir_conventional = 0.07;
  rep.worst_case_ir_predicted = 0.069;
  rep.histogram = error_histogram({0, 0}, {-1, 1}, 2);
  write_eval_report(rep, dir.path("r.json"));
  std::ifstream in(dir.path("r.json"));
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  CHECK(text.find("\"mse_normalized\"") != std::string::npos);
  CHECK(text.find("\"r2\"") != std::string::npos);
  CHECK(text.find("\"histogram\"") != std::string::npos);
  CHECK(text.find("\"timing\"") == std::string::npos);
  CHECK(text.find("\"peak_memory_mib\"") == std::string::npos);

  rep.timing = timing_report(10.0, 2.0);
  rep.peak_memory_mib = 128.0;
  write_eval_report(rep, dir.path("r2.json"));
  std::ifstream in2(dir.path("r2.json"));
  std::stringstream buf2;
  buf2 << in2.rdbuf();
  CHECK(buf2.str().find("\"speedup\"") != std::string::npos);
  CHECK(buf2.str().find("\"peak_memory_mib\"") != std::string::npos);
}
