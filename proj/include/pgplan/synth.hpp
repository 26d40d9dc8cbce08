#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgplan/netlist.hpp"
#include "pgplan/reliability.hpp"

namespace pgplan::synth {

// How generated block currents are realized as netlist loads.
//   tap_per_line: each covered line receives its allocated share at the grid
//                 node on that line nearest the block center, so the netlist
//                 realizes exactly the allocation the sizing used.
//   nearest_node: the whole block current at the single nearest grid node.
enum class LoadPlacement { tap_per_line, nearest_node };

struct SyntheticGridSpec {
  int rows = 2;
  int cols = 2;
  double pitch = 100.0;
  double sheet_resistance = 0.04;
  double base_width = 0.2;
  double core_width = 0.0;  // 0 -> no ring-budget check
  double vdd = 1.8;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> pad_positions;  // empty -> full boundary
  std::vector<reliability::BlockLoad> blocks;
  double ir_budget = 0.0;     // volts; 0 -> 5% of vdd
  double budget_taper = 0.0;  // tightens the budget toward high coordinates
  double width_step = 0.0;    // snap widths to this step; 0 -> off
  LoadPlacement load_placement = LoadPlacement::tap_per_line;
};

// Recipe for seeding a random floorplan into spec.blocks: a cluster of strong
// blocks in one quadrant plus weak background blocks spread over the die.
struct RandomLayout {
  int hot_blocks = 10;
  int background_blocks = 24;
  double hot_span_lines = 25.0;  // block edge length, in units of line pitch
  double background_span_lines = 12.0;
  double hot_scale = 6.0;
  double background_scale = 0.03;
  double current_lo = 5e-3;  // amps, before scaling
  double current_hi = 2e-2;
};

struct GeometryTap {
  int line = -1;        // index into GridGeometry::lines
  std::string node;     // netlist node name
  double offset = 0.0;  // position along the line
  double share = 0.0;   // amps delivered at this tap
  int block = -1;       // index into GridGeometry::blocks
};

// Sidecar describing the generated grid: line table with golden widths and
// allocated currents, tap placement, and the block floorplan. This is the
// ground-truth artifact the DL path predicts against.
struct GridGeometry {
  int rows = 0;
  int cols = 0;
  double pitch = 0.0;
  double rho = 0.0;
  double vdd = 0.0;
  double core_width = 0.0;
  std::vector<reliability::PgLine> lines;  // all rows then all cols
  std::vector<GeometryTap> taps;
  std::vector<reliability::BlockLoad> blocks;

  int line_count() const { return static_cast<int>(lines.size()); }
};

struct SynthResult {
  netlist::PowerGridNetlist net;
  GridGeometry geometry;
};

// Fills spec.blocks deterministically from spec.seed.
void random_blocks(SyntheticGridSpec& spec, const RandomLayout& layout);

SynthResult generate_synthetic(const SyntheticGridSpec& spec);

std::string geometry_to_json(const GridGeometry& g);
GridGeometry geometry_from_json(const std::string& text);
void write_geometry_file(const GridGeometry& g, const std::string& path);
GridGeometry read_geometry_file(const std::string& path);

}  // namespace pgplan::synth
