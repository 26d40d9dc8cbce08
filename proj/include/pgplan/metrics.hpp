#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pgplan/netlist.hpp"
#include "pgplan/synth.hpp"

namespace pgplan::metrics {

struct Histogram {
  std::vector<double> edges;      // bins + 1 ascending
  std::vector<long long> counts;  // per bin; sums to n
};

struct Timing {
  double conventional_seconds = 0.0;
  double dl_seconds = 0.0;
  double speedup = 0.0;
};

enum class CellAggregate { max, mean };

struct IrMap {
  int resolution = 0;
  double min_x = 0.0, max_x = 0.0;
  double min_y = 0.0, max_y = 0.0;
  std::vector<double> cells;  // resolution^2 row-major; empty cells hold -1
};

struct EvalReport {
  double mse_normalized = 0.0;
  double mse_physical = 0.0;
  double r2 = 0.0;
  double worst_case_ir_conventional = 0.0;
  double worst_case_ir_predicted = 0.0;
  Histogram histogram;
  std::optional<Timing> timing;  // bench only: excluded from deterministic runs
  std::optional<double> peak_memory_mib;
};

double mse(const std::vector<double>& y, const std::vector<double>& y_pred);

// Signed errors (y_pred - y) over uniform bins spanning [min, max]; a
// degenerate range widens by 0.5 per side so every error still lands in a bin.
Histogram error_histogram(const std::vector<double>& y,
                          const std::vector<double>& y_pred, int bins);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Both wall times are floored at 1 microsecond before the ratio is taken.
Timing timing_report(double conventional_seconds, double dl_seconds);

// Worst (or mean) value per cell over the points' bounding box.
IrMap ir_map(const std::vector<double>& xs, const std::vector<double>& ys,
             const std::vector<double>& values, int resolution,
             CellAggregate aggregate = CellAggregate::max);

// Convenience: per-node IR drop raster for a coordinate-bearing netlist.
IrMap ir_map_from_solution(const netlist::PowerGridNetlist& net,
                           const std::vector<double>& drops, int resolution,
                           CellAggregate aggregate = CellAggregate::max);

// Predicted drop at every grid node without a solve: each line is treated as
// a wire pinned to the ring at both ends, and each tap contributes its
// two-sided current-division drop rho*G(s,a;l)/w at position s. A node
// averages its horizontal and vertical line estimates, since the mesh splits
// the local current between the two channels.
std::vector<double> dl_node_drops(const synth::GridGeometry& geo,
                                  const netlist::PowerGridNetlist& net,
                                  const std::vector<double>& line_widths);

// Pearson over cells that are non-empty in both rasters.
double raster_correlation(const IrMap& a, const IrMap& b);

void write_scatter_csv(const std::vector<double>& golden,
                       const std::vector<double>& predicted,
                       const std::string& path);
void write_histogram_csv(const Histogram& h, const std::string& path);
void write_raster_csv(const IrMap& map, const std::string& path);
void write_raster_pgm(const IrMap& map, const std::string& path);
void write_eval_report(const EvalReport& report, const std::string& path);

}  // namespace pgplan::metrics
