#include "pgplan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include <json.hpp>

#include "pgplan/error.hpp"
#include "pgplan/util.hpp"

namespace pgplan::metrics {

namespace {

constexpr double kTimingFloorSeconds = 1e-6;

void check_pair(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "vector lengths disagree");
  }
  if (a.empty()) {
    throw Error(ErrorCode::EmptyInput, "empty input vectors");
  }
}

}  // namespace

double mse(const std::vector<double>& y, const std::vector<double>& y_pred) {
  check_pair(y, y_pred);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double d = y[i] - y_pred[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y.size());
}

Histogram error_histogram(const std::vector<double>& y,
                          const std::vector<double>& y_pred, int bins) {
  if (bins < 1) {
    throw Error(ErrorCode::BadConfig, "histogram needs at least one bin");
  }
  check_pair(y, y_pred);
  std::vector<double> err(y.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < y.size(); ++i) {
    err[i] = y_pred[i] - y[i];
    lo = std::min(lo, err[i]);
    hi = std::max(hi, err[i]);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (int b = 0; b <= bins; ++b) {
    h.edges[static_cast<std::size_t>(b)] = lo + width * b;
  }
  h.edges.back() = hi;
  for (double e : err) {
    auto k = static_cast<long long>((e - lo) / width);
    k = std::clamp<long long>(k, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(k)];
  }
  return h;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  check_pair(a, b);
  if (a.size() < 2) {
    throw Error(ErrorCode::EmptyInput, "correlation needs >= 2 points");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw Error(ErrorCode::DegenerateTarget, "zero variance in correlation");
  }
  return sab / std::sqrt(saa * sbb);
}

Timing timing_report(double conventional_seconds, double dl_seconds) {
  if (!(conventional_seconds > 0.0) || !(dl_seconds > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput, "wall times must be positive");
  }
  Timing t;
  t.conventional_seconds = std::max(conventional_seconds, kTimingFloorSeconds);
  t.dl_seconds = std::max(dl_seconds, kTimingFloorSeconds);
  t.speedup = t.conventional_seconds / t.dl_seconds;
  return t;
}

IrMap ir_map(const std::vector<double>& xs, const std::vector<double>& ys,
             const std::vector<double>& values, int resolution,
             CellAggregate aggregate) {
  if (resolution < 1) {
    throw Error(ErrorCode::BadConfig, "raster resolution must be >= 1");
  }
  if (xs.size() != ys.size() || xs.size() != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "raster point arrays disagree");
  }
  if (xs.empty()) {
    throw Error(ErrorCode::NoCoordinates, "no coordinate-bearing points");
  }
  IrMap m;
  m.resolution = resolution;
  m.min_x = *std::min_element(xs.begin(), xs.end());
  m.max_x = *std::max_element(xs.begin(), xs.end());
  m.min_y = *std::min_element(ys.begin(), ys.end());
  m.max_y = *std::max_element(ys.begin(), ys.end());
  const std::size_t ncells =
      static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
  m.cells.assign(ncells, -1.0);
  std::vector<long long> hits(ncells, 0);
  const double sx = m.max_x > m.min_x
                        ? static_cast<double>(resolution) / (m.max_x - m.min_x)
                        : 0.0;
  const double sy = m.max_y > m.min_y
                        ? static_cast<double>(resolution) / (m.max_y - m.min_y)
                        : 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto cx = static_cast<long long>((xs[i] - m.min_x) * sx);
    auto cy = static_cast<long long>((ys[i] - m.min_y) * sy);
    cx = std::clamp<long long>(cx, 0, resolution - 1);
    cy = std::clamp<long long>(cy, 0, resolution - 1);
    const std::size_t cell = static_cast<std::size_t>(cy) *
                                 static_cast<std::size_t>(resolution) +
                             static_cast<std::size_t>(cx);
    if (aggregate == CellAggregate::max) {
      m.cells[cell] = hits[cell] == 0 ? values[i]
                                      : std::max(m.cells[cell], values[i]);
    } else {
      m.cells[cell] = hits[cell] == 0 ? values[i] : m.cells[cell] + values[i];
    }
    ++hits[cell];
  }
  if (aggregate == CellAggregate::mean) {
    for (std::size_t c = 0; c < ncells; ++c) {
      if (hits[c] > 0) m.cells[c] /= static_cast<double>(hits[c]);
    }
  }
  return m;
}

IrMap ir_map_from_solution(const netlist::PowerGridNetlist& net,
                           const std::vector<double>& drops, int resolution,
                           CellAggregate aggregate) {
  if (drops.size() != net.nodes.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "per-node drops disagree with node count");
  }
  std::vector<double> xs, ys, vs;
  xs.reserve(net.nodes.size());
  ys.reserve(net.nodes.size());
  vs.reserve(net.nodes.size());
  for (const auto& nd : net.nodes) {
    if (nd.is_ground || !nd.has_coords) continue;
    xs.push_back(static_cast<double>(nd.x));
    ys.push_back(static_cast<double>(nd.y));
    vs.push_back(drops[static_cast<std::size_t>(nd.id)]);
  }
  if (xs.empty()) {
    throw Error(ErrorCode::NoCoordinates,
                "netlist has no coordinate-bearing nodes");
  }
  return ir_map(xs, ys, vs, resolution, aggregate);
}

std::vector<double> dl_node_drops(const synth::GridGeometry& geo,
                                  const netlist::PowerGridNetlist& net,
                                  const std::vector<double>& line_widths) {
  if (line_widths.size() != geo.lines.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "per-line widths disagree with line count");
  }
  // Taps grouped per line index.
  std::vector<std::vector<const synth::GeometryTap*>> taps_on(
      geo.lines.size());
  for (const auto& tap : geo.taps) {
    if (tap.line < 0 || tap.line >= static_cast<int>(geo.lines.size())) {
      throw Error(ErrorCode::ShapeMismatch, "tap references a missing line");
    }
    taps_on[static_cast<std::size_t>(tap.line)].push_back(&tap);
  }
  std::unordered_map<long long, std::size_t> line_at;
  const long long kOrient = 1LL << 40;
  for (std::size_t i = 0; i < geo.lines.size(); ++i) {
    const auto& ln = geo.lines[i];
    line_at.emplace((ln.orientation == 'h' ? 1LL : 2LL) * kOrient +
                        std::llround(ln.position),
                    i);
  }
  auto drop_on_line = [&](std::size_t li, double s) {
    const auto& ln = geo.lines[li];
    const double l = ln.length;
    const double w = line_widths[li];
    if (!(w > 0.0)) {
      throw Error(ErrorCode::NonPositiveInput, "line width must be positive");
    }
    double acc = 0.0;
    for (const auto* tap : taps_on[li]) {
      const double a = tap->offset;
      const double g = s <= a ? s * (l - a) / l : a * (l - s) / l;
      acc += tap->share * geo.rho * g / w;
    }
    return acc;
  };
  std::vector<double> drops(net.nodes.size(), 0.0);
  for (const auto& nd : net.nodes) {
    if (nd.is_ground || !nd.has_coords) continue;
    double acc = 0.0;
    int channels = 0;
    auto hit = line_at.find(1LL * kOrient + nd.y);
    if (hit != line_at.end()) {
      acc += drop_on_line(hit->second, static_cast<double>(nd.x));
      ++channels;
    }
    hit = line_at.find(2LL * kOrient + nd.x);
    if (hit != line_at.end()) {
      acc += drop_on_line(hit->second, static_cast<double>(nd.y));
      ++channels;
    }
    drops[static_cast<std::size_t>(nd.id)] =
        channels > 0 ? acc / channels : 0.0;
  }
  return drops;
}

double raster_correlation(const IrMap& a, const IrMap& b) {
  if (a.resolution != b.resolution || a.cells.size() != b.cells.size()) {
    throw Error(ErrorCode::ShapeMismatch, "raster shapes disagree");
  }
  std::vector<double> va, vb;
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    if (a.cells[c] >= 0.0 && b.cells[c] >= 0.0) {
      va.push_back(a.cells[c]);
      vb.push_back(b.cells[c]);
    }
  }
  if (va.size() < 2) {
    throw Error(ErrorCode::EmptyInput, "fewer than 2 jointly occupied cells");
  }
  return pearson(va, vb);
}

void write_scatter_csv(const std::vector<double>& golden,
                       const std::vector<double>& predicted,
                       const std::string& path) {
  check_pair(golden, predicted);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "golden_width,predicted_width\n";
  for (std::size_t i = 0; i < golden.size(); ++i) {
    out << fmt_double(golden[i]) << ',' << fmt_double(predicted[i]) << '\n';
  }
}

void write_histogram_csv(const Histogram& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << fmt_double(h.edges[b]) << ',' << fmt_double(h.edges[b + 1]) << ','
        << h.counts[b] << '\n';
  }
}

void write_raster_csv(const IrMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  for (int r = 0; r < map.resolution; ++r) {
    for (int c = 0; c < map.resolution; ++c) {
      if (c) out << ',';
      out << fmt_double(
          map.cells[static_cast<std::size_t>(r) *
                        static_cast<std::size_t>(map.resolution) +
                    static_cast<std::size_t>(c)]);
    }
    out << '\n';
  }
}

void write_raster_pgm(const IrMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  double peak = 0.0;
  for (double v : map.cells) peak = std::max(peak, v);
  out << "P2\n" << map.resolution << ' ' << map.resolution << "\n255\n";
  for (int r = 0; r < map.resolution; ++r) {
    for (int c = 0; c < map.resolution; ++c) {
      const double v = map.cells[static_cast<std::size_t>(r) *
                                     static_cast<std::size_t>(map.resolution) +
                                 static_cast<std::size_t>(c)];
      int level = 0;
      if (v > 0.0 && peak > 0.0) {
        level = static_cast<int>(std::lround(v / peak * 255.0));
        level = std::clamp(level, 0, 255);
      }
      if (c) out << ' ';
      out << level;
    }
    out << '\n';
  }
}

void write_eval_report(const EvalReport& report, const std::string& path) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["mse_normalized"] = report.mse_normalized;
  j["mse_physical"] = report.mse_physical;
  j["r2"] = report.r2;
  j["worst_case_ir_conventional"] = report.worst_case_ir_conventional;
  j["worst_case_ir_predicted"] = report.worst_case_ir_predicted;
  j["histogram"] = {{"edges", report.histogram.edges},
                    {"counts", report.histogram.counts}};
  if (report.timing) {
    j["timing"] = {{"conventional_seconds", report.timing->conventional_seconds},
                   {"dl_seconds", report.timing->dl_seconds},
                   {"speedup", report.timing->speedup}};
  }
  if (report.peak_memory_mib) {
    j["peak_memory_mib"] = *report.peak_memory_mib;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace pgplan::metrics
