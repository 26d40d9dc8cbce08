#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "pgplan/dataset.hpp"
#include "pgplan/util.hpp"

using namespace pgplan::dataset;
using pgplan::ErrorCode;
using pgplan::netlist::PowerGridNetlist;

namespace {

PowerGridNetlist parse_text(const std::string& text) {
  std::istringstream in(text);
  return pgplan::netlist::parse_netlist(in);
}

pgplan::synth::SynthResult seeded_grid(int rows, int cols,
                                       std::uint64_t seed) {
  pgplan::synth::SyntheticGridSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.seed = seed;
  spec.ir_budget = 0.09;
  spec.budget_taper = 0.5;
  spec.width_step = 0.005;
  pgplan::synth::RandomLayout layout;
  layout.hot_blocks = 3;
  layout.background_blocks = 5;
  layout.hot_span_lines = 4;
  layout.background_span_lines = 3;
  layout.hot_scale = 2.0;
  layout.background_scale = 0.05;
  pgplan::synth::random_blocks(spec, layout);
  return pgplan::synth::generate_synthetic(spec);
}

std::vector<double> solve_voltages(const PowerGridNetlist& net) {
  auto sys = pgplan::solver::assemble(net);
  return pgplan::solver::solve(net, sys, 1e-12).voltages;
}

std::string netlist_bytes(const PowerGridNetlist& net) {
  std::ostringstream os;
  pgplan::netlist::write_netlist(net, os);
  return os.str();
}

}  // namespace

TEST_CASE("extraction recovers generator widths and currents exactly") {
  auto res = seeded_grid(12, 12, 3);
  std::vector<double> volts = solve_voltages(res.net);
  Dataset ds = extract_features(res.net, volts, &res.geometry, nullptr, 0.04);
  REQUIRE(ds.size() == res.net.count_resistors());

  for (std::size_t i = 0; i < res.net.resistors.size(); ++i) {
    const auto& r = res.net.resistors[i];
    const auto& a = res.net.node(r.a);
    const auto& b = res.net.node(r.b);
    bool horizontal = a.y == b.y;
    double position =
        horizontal ? static_cast<double>(a.y) : static_cast<double>(a.x);
    const pgplan::reliability::PgLine* line = nullptr;
    for (const auto& ln : res.geometry.lines)
      if (ln.orientation == (horizontal ? 'h' : 'v') &&
          ln.position == position)
        line = &ln;
    REQUIRE(line != nullptr);
    CHECK(ds.samples[i].w == line->width);      // bit-exact golden width
    CHECK(ds.samples[i].i_d == line->current);  // allocated line current
    CHECK(ds.samples[i].x ==
          (static_cast<double>(a.x) + static_cast<double>(b.x)) / 2.0);
    CHECK(ds.samples[i].y ==
          (static_cast<double>(a.y) + static_cast<double>(b.y)) / 2.0);
  }
}

TEST_CASE("extraction without geometry: midpoint, load sum, current proxy") {
  PowerGridNetlist net = parse_text(
      "V1 n1_0_0 0 1.8\n"
      "R1 n1_0_0 n1_100_0 1\n"
      "R2 n1_100_0 n1_200_0 1\n"
      "I1 n1_200_0 0 0.02\n");
  std::vector<double> volts = solve_voltages(net);
  Dataset ds = extract_features(net, volts, nullptr, nullptr, 0.04);
  REQUIRE(ds.size() == 2);

  CHECK(ds.samples[0].x == 50.0);  // midpoint of (0,0)-(100,0)
  CHECK(ds.samples[0].y == 0.0);
  // no loads at R1's endpoints: falls back to |branch current| = 0.02
  CHECK(ds.samples[0].i_d == doctest::Approx(0.02).epsilon(1e-9));
  // R2's far endpoint carries the 0.02 A load
  CHECK(ds.samples[1].i_d == 0.02);
  // golden width from rho*l/R = 0.04*100/1
  CHECK(ds.samples[0].w == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("explicit branch widths override the resistance reconstruction") {
  PowerGridNetlist net = parse_text(
      "V1 n1_0_0 0 1.8\n"
      "R1 n1_0_0 n1_100_0 1\n"
      "I1 n1_100_0 0 0.01\n");
  std::vector<double> volts = solve_voltages(net);
  std::vector<double> widths = {2.75};
  Dataset ds = extract_features(net, volts, nullptr, &widths, 0.04);
  REQUIRE(ds.size() == 1);
  CHECK(ds.samples[0].w == 2.75);
}

TEST_CASE("pattern-less nodes: skipped by default, fatal in strict mode") {
  PowerGridNetlist net = parse_text(
      "V1 pad 0 1.8\n"
      "R1 pad n1_0_0 1\n"
      "R2 n1_0_0 n1_100_0 1\n"
      "I1 n1_100_0 0 0.01\n");
  std::vector<double> volts = solve_voltages(net);
  Dataset ds = extract_features(net, volts, nullptr, nullptr, 0.04);
  CHECK(ds.size() == 1);  // R1 touches the coordinate-less pad
  CHECK_PG_ERROR(ErrorCode::NoCoordinates,
                 extract_features(net, volts, nullptr, nullptr, 0.04, true));

  PowerGridNetlist bare = parse_text(
      "V1 a 0 1.8\n"
      "R1 a b 1\n"
      "I1 b 0 0.01\n");
  std::vector<double> bare_volts = solve_voltages(bare);
  CHECK_PG_ERROR(ErrorCode::EmptyDataset,
                 extract_features(bare, bare_volts, nullptr, nullptr, 0.04));
}

TEST_CASE("r2_score on pinned examples") {
  CHECK(r2_score({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(r2_score({1, 2, 3}, {2, 2, 2}) == 0.0);  // predicting the mean
  CHECK(r2_score({1, 2, 3}, {1, 2, 4}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_PG_ERROR(ErrorCode::ShapeMismatch, r2_score({1, 2}, {1, 2, 3}));
  CHECK_PG_ERROR(ErrorCode::EmptyInput, r2_score({1}, {1}));
  CHECK_PG_ERROR(ErrorCode::DegenerateTarget, r2_score({2, 2, 2}, {1, 2, 3}));
}

TEST_CASE("feature_scan: exact dependence, independence, dominance") {
  pgplan::Rng rng(17);
  Dataset exact;
  for (int i = 0; i < 2000; ++i) {
    Sample s;
    s.x = rng.uniform(0, 100);
    s.y = rng.uniform(0, 100);
    s.i_d = rng.uniform(1e-3, 2e-2);
    s.w = 0.5 + 3.0 * s.i_d;  // w is a function of i_d alone
    exact.samples.push_back(s);
  }
  FeatureScan scan = feature_scan(exact);
  CHECK(scan.r2_i == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(scan.r2_combined == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(scan.r2_x < 0.05);  // independent regressor explains ~nothing
  CHECK(scan.r2_y < 0.05);

  Dataset mixed;
  for (int i = 0; i < 10000; ++i) {
    Sample s;
    s.x = rng.uniform(0, 100);
    s.y = rng.uniform(0, 100);
    s.i_d = rng.uniform(1e-3, 2e-2);
    s.w = 0.01 * s.x + 0.02 * s.y + 50.0 * s.i_d + 0.1 * rng.normal();
    mixed.samples.push_back(s);
  }
  scan = feature_scan(mixed);
  // adding regressors never lowers OLS r^2
  CHECK(scan.r2_combined >= scan.r2_x);
  CHECK(scan.r2_combined >= scan.r2_y);
  CHECK(scan.r2_combined >= scan.r2_i);
  CHECK(scan.r2_combined > 0.9);
}

TEST_CASE("gamma 0 perturbation is the identity") {
  auto res = seeded_grid(10, 10, 5);
  PerturbationSpec spec;
  spec.gamma = 0.0;
  spec.seed = 1;
  PerturbResult out = perturb(res.net, &res.geometry, spec);
  CHECK(netlist_bytes(out.net) == netlist_bytes(res.net));
  REQUIRE(out.geometry.has_value());
  CHECK(pgplan::synth::geometry_to_json(*out.geometry) ==
        pgplan::synth::geometry_to_json(res.geometry));
}

TEST_CASE("load-only perturbation stays inside the gamma bound") {
  auto res = seeded_grid(10, 10, 5);
  PerturbationSpec spec;
  spec.gamma = 0.1;
  spec.seed = 42;
  spec.branch_current = false;
  spec.node_voltage = false;
  PerturbResult out = perturb(res.net, nullptr, spec);
  REQUIRE(out.net.loads.size() == res.net.loads.size());
  bool changed = false;
  for (std::size_t i = 0; i < res.net.loads.size(); ++i) {
    double ratio = out.net.loads[i].amps / res.net.loads[i].amps;
    CHECK(ratio >= 0.9 - 1e-12);
    CHECK(ratio <= 1.1 + 1e-12);
    changed = changed || ratio != 1.0;
  }
  CHECK(changed);
  // resistances untouched
  for (std::size_t i = 0; i < res.net.resistors.size(); ++i)
    CHECK(out.net.resistors[i].resistance == res.net.resistors[i].resistance);
  // bit-identical on repeat
  PerturbResult again = perturb(res.net, nullptr, spec);
  CHECK(netlist_bytes(again.net) == netlist_bytes(out.net));
}

TEST_CASE("resistance-channel perturbations bound the branch rescale") {
  auto res = seeded_grid(10, 10, 5);
  PerturbationSpec spec;
  spec.gamma = 0.1;
  spec.seed = 7;
  spec.node_voltage = false;
  spec.switching_current = false;
  PerturbResult out = perturb(res.net, nullptr, spec);
  for (std::size_t i = 0; i < res.net.resistors.size(); ++i) {
    double ratio =
        out.net.resistors[i].resistance / res.net.resistors[i].resistance;
    // R / (1 + u), u in [-0.1, 0.1]
    CHECK(ratio >= 1.0 / 1.1 - 1e-12);
    CHECK(ratio <= 1.0 / 0.9 + 1e-12);
  }
  for (std::size_t i = 0; i < res.net.loads.size(); ++i)
    CHECK(out.net.loads[i].amps == res.net.loads[i].amps);

  spec.branch_current = false;
  spec.node_voltage = true;
  out = perturb(res.net, nullptr, spec);
  for (std::size_t i = 0; i < res.net.resistors.size(); ++i) {
    double ratio =
        out.net.resistors[i].resistance / res.net.resistors[i].resistance;
    // R * fa * fb with per-node factors in [0.9, 1.1]
    CHECK(ratio >= 0.81 - 1e-12);
    CHECK(ratio <= 1.21 + 1e-12);
  }
}

TEST_CASE("geometry-aware perturbation keeps netlist and sidecar in step") {
  auto res = seeded_grid(12, 12, 9);
  PerturbationSpec spec;
  spec.gamma = 0.2;
  spec.seed = 13;
  PerturbResult out = perturb(res.net, &res.geometry, spec);
  REQUIRE(out.geometry.has_value());
  const auto& geo = *out.geometry;

  REQUIRE(geo.blocks.size() == res.geometry.blocks.size());
  for (std::size_t j = 0; j < geo.blocks.size(); ++j) {
    double ratio = geo.blocks[j].i_d / res.geometry.blocks[j].i_d;
    CHECK(ratio >= 0.8 - 1e-12);
    CHECK(ratio <= 1.2 + 1e-12);
  }
  // loads mirror taps, line currents re-sum the shares
  REQUIRE(geo.taps.size() == out.net.loads.size());
  std::vector<double> per_line(static_cast<std::size_t>(geo.line_count()), 0.0);
  for (std::size_t i = 0; i < geo.taps.size(); ++i) {
    CHECK(out.net.loads[i].amps == geo.taps[i].share);
    per_line[static_cast<std::size_t>(geo.taps[i].line)] += geo.taps[i].share;
  }
  for (int i = 0; i < geo.line_count(); ++i)
    CHECK(geo.lines[static_cast<std::size_t>(i)].current ==
          doctest::Approx(per_line[static_cast<std::size_t>(i)])
              .epsilon(1e-12));
  // golden widths are never rewritten by perturbation
  for (int i = 0; i < geo.line_count(); ++i)
    CHECK(geo.lines[static_cast<std::size_t>(i)].width ==
          res.geometry.lines[static_cast<std::size_t>(i)].width);
}

TEST_CASE("perturbation spec validation") {
  auto res = seeded_grid(6, 6, 1);
  PerturbationSpec spec;
  spec.gamma = 1.5;
  CHECK_PG_ERROR(ErrorCode::BadConfig, perturb(res.net, nullptr, spec));
  spec.gamma = 0.1;
  spec.branch_current = spec.node_voltage = spec.switching_current = false;
  CHECK_PG_ERROR(ErrorCode::BadConfig, perturb(res.net, nullptr, spec));
}

TEST_CASE("in-place solution perturbation rescales drops") {
  auto res = seeded_grid(10, 10, 5);
  auto sys = pgplan::solver::assemble(res.net);
  auto sol = pgplan::solver::solve(res.net, sys, 1e-12);
  PerturbationSpec spec;
  spec.gamma = 0.1;
  spec.seed = 3;
  auto out = perturb_solution_in_place(res.net, sol, spec);
  double vdd = res.net.vdd_nominal;
  for (const auto& node : res.net.nodes) {
    if (node.is_ground) continue;
    auto i = static_cast<std::size_t>(node.id);
    double d0 = vdd - sol.voltages[i];
    double d1 = vdd - out.voltages[i];
    if (d0 <= 0.0) continue;
    CHECK(d1 / d0 >= 0.9 - 1e-9);
    CHECK(d1 / d0 <= 1.1 + 1e-9);
  }
  // branch currents stay consistent with the perturbed voltages
  for (std::size_t i = 0; i < res.net.resistors.size(); ++i) {
    const auto& r = res.net.resistors[i];
    if (r.shorted) continue;
    double expect = (out.voltages[static_cast<std::size_t>(r.a)] -
                     out.voltages[static_cast<std::size_t>(r.b)]) /
                    r.resistance;
    CHECK(out.branch_currents[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("split is deterministic and preserves the sample multiset") {
  Dataset ds;
  pgplan::Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    Sample s;
    s.x = i;
    s.y = rng.uniform();
    s.i_d = rng.uniform();
    s.w = rng.uniform();
    ds.samples.push_back(s);
  }
  auto [train, test] = split(ds, 0.8, 5);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);

  auto [train2, test2] = split(ds, 0.8, 5);
  for (std::size_t i = 0; i < train.size(); ++i)
    CHECK(train.samples[i].x == train2.samples[i].x);

  std::vector<double> all;
  for (const auto& s : train.samples) all.push_back(s.x);
  for (const auto& s : test.samples) all.push_back(s.x);
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 100; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);

  auto [full, none] = split(ds, 1.0, 5);
  CHECK(full.size() == 100);
  CHECK(none.size() == 0);

  Dataset empty;
  CHECK_PG_ERROR(ErrorCode::EmptyDataset, split(empty, 0.8, 5));
  CHECK_PG_ERROR(ErrorCode::BadConfig, split(ds, 1.5, 5));
}

TEST_CASE("normalize maps to [0,1] and denormalize inverts to 1e-12") {
  Dataset ds;
  pgplan::Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    Sample s;
    s.x = rng.uniform(-50, 150);
    s.y = rng.uniform(0, 1e4);
    s.i_d = rng.uniform(1e-4, 3e-2);
    s.w = rng.uniform(0.2, 9.0);
    ds.samples.push_back(s);
  }
  Dataset orig = ds;
  Normalizer nrm = normalize(ds);
  REQUIRE(ds.normalizer.has_value());
  for (const auto& s : ds.samples) {
    CHECK(s.x >= 0.0);
    CHECK(s.x <= 1.0);
    CHECK(s.y >= 0.0);
    CHECK(s.y <= 1.0);
    CHECK(s.i_d >= 0.0);
    CHECK(s.i_d <= 1.0);
    CHECK(s.w >= 0.0);
    CHECK(s.w <= 1.0);
  }
  CHECK_PG_ERROR(ErrorCode::NotNormalized, normalize(ds));  // double apply

  denormalize(ds);
  CHECK_FALSE(ds.normalizer.has_value());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(std::abs(ds.samples[i].x - orig.samples[i].x) <=
          1e-12 * std::max(1.0, std::abs(orig.samples[i].x)));
    CHECK(std::abs(ds.samples[i].w - orig.samples[i].w) <=
          1e-12 * std::max(1.0, std::abs(orig.samples[i].w)));
  }
  CHECK_PG_ERROR(ErrorCode::NotNormalized, denormalize(ds));  // nothing to undo

  // a constant feature flags as such and survives the round trip
  Dataset flat;
  for (int i = 0; i < 5; ++i) {
    Sample s;
    s.x = 7.0;
    s.y = i;
    s.i_d = 1e-3;
    s.w = 1.0 + i;
    flat.samples.push_back(s);
  }
  Normalizer fn = normalize(flat);
  CHECK(fn.constant(0));
  for (const auto& s : flat.samples) CHECK(s.x == 0.0);
  denormalize(flat);
  for (const auto& s : flat.samples) CHECK(s.x == 7.0);
}

TEST_CASE("dataset and normalizer files round trip bit-exactly") {
  TempDir dir("dataset");
  Dataset ds;
  pgplan::Rng rng(8);
  for (int i = 0; i < 64; ++i) {
    Sample s;
    s.x = rng.uniform(0, 1200);
    s.y = rng.uniform(0, 1200);
    s.i_d = rng.uniform(1e-4, 2e-2);
    s.w = rng.uniform(0.2, 4.0);
    ds.samples.push_back(s);
  }
  write_dataset_csv(ds, dir.path("d.csv"));

  std::ifstream in(dir.path("d.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "x,y,i_d,w");

  Dataset back = read_dataset_csv(dir.path("d.csv"));
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.samples[i].x == ds.samples[i].x);
    CHECK(back.samples[i].y == ds.samples[i].y);
    CHECK(back.samples[i].i_d == ds.samples[i].i_d);
    CHECK(back.samples[i].w == ds.samples[i].w);
  }

  Normalizer nrm = normalize(ds);
  write_normalizer_csv(nrm, dir.path("n.csv"));
  Normalizer nb = read_normalizer_csv(dir.path("n.csv"));
  for (int f = 0; f < 4; ++f) {
    CHECK(nb.lo[f] == nrm.lo[f]);
    CHECK(nb.hi[f] == nrm.hi[f]);
  }

  CHECK_PG_ERROR(ErrorCode::IoError, read_dataset_csv(dir.path("no.csv")));
}
