#include "pgplan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pgplan/error.hpp"
#include "pgplan/util.hpp"

namespace pgplan::synth {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string node_name(long long x, long long y) {
  return "n1_" + std::to_string(x) + "_" + std::to_string(y);
}

int clamp_interior(int v, int hi) { return std::clamp(v, 1, hi - 2); }

}  // namespace

void random_blocks(SyntheticGridSpec& spec, const RandomLayout& layout) {
  if (layout.hot_blocks < 0 || layout.background_blocks < 0 ||
      layout.current_lo <= 0.0 || layout.current_hi < layout.current_lo) {
    throw Error(ErrorCode::InfeasibleSpec, "bad random layout parameters");
  }
  Rng rng(spec.seed);
  double w = (spec.cols - 1) * spec.pitch;
  double h = (spec.rows - 1) * spec.pitch;
  // anchor the strong cluster in one quadrant
  std::uint64_t q = rng.below(4);
  double hx = (q % 2 == 0 ? 0.28 : 0.72) * w;
  double hy = (q / 2 == 0 ? 0.30 : 0.70) * h;
  spec.blocks.clear();
  int total = layout.hot_blocks + layout.background_blocks;
  for (int i = 0; i < total; ++i) {
    bool hot = i < layout.hot_blocks;
    double cx, cy, span, scale;
    if (hot) {
      cx = hx + rng.uniform(-0.12, 0.12) * w;
      cy = hy + rng.uniform(-0.12, 0.12) * h;
      span = layout.hot_span_lines;
      scale = layout.hot_scale;
    } else {
      cx = rng.uniform(0.05, 0.95) * w;
      cy = rng.uniform(0.05, 0.95) * h;
      span = layout.background_span_lines;
      scale = layout.background_scale;
    }
    double sw = span * spec.pitch * rng.uniform(0.6, 1.4);
    double sh = span * spec.pitch * rng.uniform(0.6, 1.4);
    reliability::BlockLoad b;
    b.id = i;
    b.x0 = std::max(0.0, cx - sw / 2);
    b.x1 = std::min(w, cx + sw / 2);
    b.y0 = std::max(0.0, cy - sh / 2);
    b.y1 = std::min(h, cy + sh / 2);
    b.i_d = rng.uniform(layout.current_lo, layout.current_hi) * scale;
    spec.blocks.push_back(b);
  }
}

SynthResult generate_synthetic(const SyntheticGridSpec& spec) {
  if (spec.rows < 2 || spec.cols < 2) {
    throw Error(ErrorCode::InfeasibleSpec, "rows and cols must be >= 2");
  }
  if (!(spec.pitch > 0.0) || !(spec.base_width > 0.0) || !(spec.vdd > 0.0)) {
    throw Error(ErrorCode::InfeasibleSpec,
                "pitch, base_width and vdd must be > 0");
  }
  const int rows = spec.rows;
  const int cols = spec.cols;
  const double pitch = spec.pitch;
  const double rho = spec.sheet_resistance;
  const double len_h = (cols - 1) * pitch;
  const double len_v = (rows - 1) * pitch;
  const double base_budget =
      spec.ir_budget > 0.0 ? spec.ir_budget : 0.05 * spec.vdd;

  // Line table: horizontal lines (one per row) then vertical (one per col).
  std::vector<reliability::PgLine> lines;
  lines.reserve(static_cast<std::size_t>(rows + cols));
  for (int r = 0; r < rows; ++r) {
    reliability::PgLine ln;
    ln.index = r;
    ln.orientation = 'h';
    ln.position = r * pitch;
    ln.length = len_h;
    lines.push_back(ln);
  }
  for (int c = 0; c < cols; ++c) {
    reliability::PgLine ln;
    ln.index = rows + c;
    ln.orientation = 'v';
    ln.position = c * pitch;
    ln.length = len_v;
    lines.push_back(ln);
  }

  // Allocation excludes the boundary ring; its segments stay at base width
  // and carry no block current of their own.
  std::vector<reliability::PgLine> interior;
  std::vector<int> interior_index;
  for (int i = 0; i < static_cast<int>(lines.size()); ++i) {
    bool boundary = (i == 0 || i == rows - 1 || i == rows || i == rows + cols - 1);
    if (!boundary) {
      interior.push_back(lines[static_cast<std::size_t>(i)]);
      interior_index.push_back(i);
    }
  }
  reliability::Allocation alloc;
  if (!spec.blocks.empty()) {
    if (interior.empty()) {
      throw Error(ErrorCode::InfeasibleSpec,
                  "grid has no interior lines to carry blocks");
    }
    alloc = reliability::allocate_block_currents(interior, spec.blocks);
    for (std::size_t k = 0; k < interior.size(); ++k) {
      lines[static_cast<std::size_t>(interior_index[k])].current =
          alloc.line_current[k];
    }
  }

  // Width sizing: base width plus the IR-driven term, budget tightened with
  // the taper toward high perpendicular coordinates. Widths are then pushed
  // through the branch-resistance representation once so that the stored
  // golden width equals exactly what a reader recovers from rho*l/R.
  for (reliability::PgLine& ln : lines) {
    double extent = ln.orientation == 'h' ? len_v : len_h;
    double budget =
        extent > 0.0
            ? base_budget / (1.0 + spec.budget_taper * ln.position / extent)
            : base_budget;
    double w = spec.base_width;
    if (ln.current > 0.0) {
      w += reliability::width_for_ir(rho, ln.length, ln.current, budget);
    }
    if (spec.width_step > 0.0) {
      w = std::round(w / spec.width_step) * spec.width_step;
      if (w < spec.width_step) w = spec.width_step;
    }
    double seg_r = rho * pitch / w;
    ln.width = rho * pitch / seg_r;
  }

  // Ring budget feasibility per direction (uniform-spacing closure).
  if (spec.core_width > 0.0) {
    std::vector<double> wh, wv;
    for (const reliability::PgLine& ln : lines) {
      (ln.orientation == 'h' ? wh : wv).push_back(ln.width);
    }
    std::vector<double> sh, sv;
    try {
      sh = reliability::spacing_from_widths(wh, spec.core_width);
      sv = reliability::spacing_from_widths(wv, spec.core_width);
    } catch (const Error& e) {
      throw Error(ErrorCode::InfeasibleSpec,
                  "ring budget cannot fit the sized lines: " + e.detail());
    }
    for (int r = 0; r < rows; ++r)
      lines[static_cast<std::size_t>(r)].spacing_after = sh[static_cast<std::size_t>(r)];
    for (int c = 0; c < cols; ++c)
      lines[static_cast<std::size_t>(rows + c)].spacing_after =
          sv[static_cast<std::size_t>(c)];
  }

  // Netlist: nodes at intersections, one resistor per segment.
  SynthResult out;
  netlist::PowerGridNetlist& net = out.net;
  auto add_node = [&](const std::string& name) {
    auto it = net.name_to_id.find(name);
    if (it != net.name_to_id.end()) return it->second;
    netlist::NodeRef n;
    n.id = static_cast<int>(net.nodes.size());
    n.name = name;
    n.is_ground = (name == "0");
    if (n.is_ground) net.ground_id = n.id;
    n.has_coords = netlist::parse_node_coordinates(name, n.layer, n.x, n.y);
    net.name_to_id.emplace(name, n.id);
    net.nodes.push_back(n);
    return n.id;
  };
  auto grid_node = [&](int r, int c) {
    return add_node(node_name(std::llround(c * pitch), std::llround(r * pitch)));
  };
  int ground = add_node("0");

  int rcount = 0;
  for (int r = 0; r < rows; ++r) {
    double w = lines[static_cast<std::size_t>(r)].width;
    for (int c = 0; c + 1 < cols; ++c) {
      netlist::ResistorBranch br;
      br.a = grid_node(r, c);
      br.b = grid_node(r, c + 1);
      br.resistance = rho * pitch / w;
      br.name = "R" + std::to_string(rcount++);
      net.resistors.push_back(std::move(br));
    }
  }
  for (int c = 0; c < cols; ++c) {
    double w = lines[static_cast<std::size_t>(rows + c)].width;
    for (int r = 0; r + 1 < rows; ++r) {
      netlist::ResistorBranch br;
      br.a = grid_node(r, c);
      br.b = grid_node(r + 1, c);
      br.resistance = rho * pitch / w;
      br.name = "R" + std::to_string(rcount++);
      net.resistors.push_back(std::move(br));
    }
  }

  // Pads: explicit positions, or the full boundary ring.
  std::vector<std::pair<int, int>> pads = spec.pad_positions;
  if (pads.empty()) {
    for (int c = 0; c < cols; ++c) pads.emplace_back(0, c);
    for (int r = 1; r < rows; ++r) pads.emplace_back(r, cols - 1);
    for (int c = cols - 2; c >= 0; --c) pads.emplace_back(rows - 1, c);
    for (int r = rows - 2; r >= 1; --r) pads.emplace_back(r, 0);
  }
  int vcount = 0;
  for (auto [r, c] : pads) {
    if (r < 0 || r >= rows || c < 0 || c >= cols) {
      throw Error(ErrorCode::InfeasibleSpec, "pad position outside grid");
    }
    netlist::VoltagePad p;
    p.node = grid_node(r, c);
    p.reference = ground;
    p.volts = spec.vdd;
    p.name = "V" + std::to_string(vcount++);
    net.pads.push_back(std::move(p));
  }
  net.vdd_nominal = spec.vdd;

  // Loads.
  int icount = 0;
  auto add_load = [&](int node_id, double amps) {
    netlist::CurrentLoad l;
    l.node = node_id;
    l.reference = ground;
    l.amps = amps;
    l.name = "I" + std::to_string(icount++);
    net.loads.push_back(std::move(l));
  };
  if (!spec.blocks.empty()) {
    if (spec.load_placement == LoadPlacement::tap_per_line) {
      for (std::size_t j = 0; j < spec.blocks.size(); ++j) {
        const reliability::BlockLoad& blk = spec.blocks[j];
        double cx = (blk.x0 + blk.x1) / 2;
        double cy = (blk.y0 + blk.y1) / 2;
        for (std::size_t k = 0; k < interior.size(); ++k) {
          double share = alloc.pair_current[k][j];
          if (share <= 0.0) continue;
          const reliability::PgLine& ln = interior[k];
          GeometryTap tap;
          tap.line = interior_index[static_cast<std::size_t>(k)];
          tap.share = share;
          tap.block = static_cast<int>(j);
          int node_id;
          if (ln.orientation == 'h') {
            int r = static_cast<int>(std::llround(ln.position / pitch));
            int c = clamp_interior(
                static_cast<int>(std::llround(cx / pitch)), cols);
            node_id = grid_node(r, c);
            tap.offset = c * pitch;
          } else {
            int c = static_cast<int>(std::llround(ln.position / pitch));
            int r = clamp_interior(
                static_cast<int>(std::llround(cy / pitch)), rows);
            node_id = grid_node(r, c);
            tap.offset = r * pitch;
          }
          tap.node = net.node(node_id).name;
          add_load(node_id, share);
          out.geometry.taps.push_back(std::move(tap));
        }
      }
    } else {
      for (std::size_t j = 0; j < spec.blocks.size(); ++j) {
        const reliability::BlockLoad& blk = spec.blocks[j];
        int r = clamp_interior(
            static_cast<int>(std::llround((blk.y0 + blk.y1) / 2 / pitch)),
            rows);
        int c = clamp_interior(
            static_cast<int>(std::llround((blk.x0 + blk.x1) / 2 / pitch)),
            cols);
        int node_id = grid_node(r, c);
        GeometryTap tap;
        tap.line = r;  // the horizontal line through the node
        tap.node = net.node(node_id).name;
        tap.offset = c * pitch;
        tap.share = blk.i_d;
        tap.block = static_cast<int>(j);
        out.geometry.taps.push_back(std::move(tap));
        add_load(node_id, blk.i_d);
      }
    }
  }

  out.geometry.rows = rows;
  out.geometry.cols = cols;
  out.geometry.pitch = pitch;
  out.geometry.rho = rho;
  out.geometry.vdd = spec.vdd;
  out.geometry.core_width = spec.core_width;
  out.geometry.lines = std::move(lines);
  out.geometry.blocks = spec.blocks;
  return out;
}

std::string geometry_to_json(const GridGeometry& g) {
  ordered_json j;
  j["format_version"] = 1;
  j["rows"] = g.rows;
  j["cols"] = g.cols;
  j["pitch"] = g.pitch;
  j["rho"] = g.rho;
  j["vdd"] = g.vdd;
  j["core_width"] = g.core_width;
  ordered_json jlines = ordered_json::array();
  for (const reliability::PgLine& ln : g.lines) {
    ordered_json e;
    e["index"] = ln.index;
    e["orientation"] = std::string(1, ln.orientation);
    e["position"] = ln.position;
    e["length"] = ln.length;
    e["width"] = ln.width;
    e["spacing_after"] = ln.spacing_after;
    e["current"] = ln.current;
    jlines.push_back(std::move(e));
  }
  j["lines"] = std::move(jlines);
  ordered_json jtaps = ordered_json::array();
  for (const GeometryTap& t : g.taps) {
    ordered_json e;
    e["line"] = t.line;
    e["node"] = t.node;
    e["offset"] = t.offset;
    e["share"] = t.share;
    e["block"] = t.block;
    jtaps.push_back(std::move(e));
  }
  j["taps"] = std::move(jtaps);
  ordered_json jblocks = ordered_json::array();
  for (const reliability::BlockLoad& b : g.blocks) {
    ordered_json e;
    e["id"] = b.id;
    e["x0"] = b.x0;
    e["x1"] = b.x1;
    e["y0"] = b.y0;
    e["y1"] = b.y1;
    e["i_d"] = b.i_d;
    jblocks.push_back(std::move(e));
  }
  j["blocks"] = std::move(jblocks);
  return j.dump(2) + "\n";
}

GridGeometry geometry_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoError, std::string("bad geometry JSON: ") + e.what());
  }
  GridGeometry g;
  g.rows = j.at("rows").get<int>();
  g.cols = j.at("cols").get<int>();
  g.pitch = j.at("pitch").get<double>();
  g.rho = j.at("rho").get<double>();
  g.vdd = j.at("vdd").get<double>();
  g.core_width = j.value("core_width", 0.0);
  for (const auto& e : j.at("lines")) {
    reliability::PgLine ln;
    ln.index = e.at("index").get<int>();
    ln.orientation = e.at("orientation").get<std::string>().at(0);
    ln.position = e.at("position").get<double>();
    ln.length = e.at("length").get<double>();
    ln.width = e.at("width").get<double>();
    ln.spacing_after = e.value("spacing_after", 0.0);
    ln.current = e.at("current").get<double>();
    g.lines.push_back(ln);
  }
  for (const auto& e : j.at("taps")) {
    GeometryTap t;
    t.line = e.at("line").get<int>();
    t.node = e.at("node").get<std::string>();
    t.offset = e.at("offset").get<double>();
    t.share = e.at("share").get<double>();
    t.block = e.at("block").get<int>();
    g.taps.push_back(std::move(t));
  }
  for (const auto& e : j.at("blocks")) {
    reliability::BlockLoad b;
    b.id = e.at("id").get<int>();
    b.x0 = e.at("x0").get<double>();
    b.x1 = e.at("x1").get<double>();
    b.y0 = e.at("y0").get<double>();
    b.y1 = e.at("y1").get<double>();
    b.i_d = e.at("i_d").get<double>();
    g.blocks.push_back(b);
  }
  return g;
}

void write_geometry_file(const GridGeometry& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << geometry_to_json(g);
}

GridGeometry read_geometry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return geometry_from_json(ss.str());
}

}  // namespace pgplan::synth
