#pragma once

#include <string>
#include <vector>

namespace pgplan::reliability {

struct SizingParams {
  double rho = 0.0;         // sheet resistance, ohms/square
  double j_max = 0.0;       // max current density, A per width unit
  double ir_budget = 0.0;   // allowed per-line IR drop, volts
  double core_width = 0.0;  // ring width budget shared by lines + spacings
};

struct PgLine {
  int index = 0;
  char orientation = 'h';  // 'h' or 'v'
  double position = 0.0;   // perpendicular coordinate of the line
  double length = 0.0;
  double width = 0.0;
  double spacing_after = 0.0;
  double current = 0.0;  // allocated I_i
};

struct BlockLoad {
  int id = 0;
  double x0 = 0.0, x1 = 0.0;
  double y0 = 0.0, y1 = 0.0;
  double i_d = 0.0;
};

struct EmCheck {
  double density = 0.0;
  double margin = 0.0;
  bool violated = false;
};

struct Allocation {
  std::vector<double> line_current;               // I_i per line
  std::vector<std::vector<double>> pair_current;  // I_ij per (line, block)
};

// w = rho * l * I / V_ir
double width_for_ir(double rho, double length, double current,
                    double ir_budget);

// density = I / w, violated iff density > j_max (boundary allowed)
EmCheck em_check(double current, double width, double j_max);

// floor(core_width / width), minimum 1
long long pg_line_count(double core_width, double width);

// Each block's current splits equally among the lines whose position lies
// inside the block's perpendicular span. Conserves total current exactly.
Allocation allocate_block_currents(const std::vector<PgLine>& lines,
                                   const std::vector<BlockLoad>& blocks);

// Uniform spacings closing the ring budget: s_i = (core_width - sum w) / K.
std::vector<double> spacing_from_widths(const std::vector<double>& widths,
                                        double core_width);

std::string reliability_report_csv(const std::vector<PgLine>& lines,
                                   double j_max);

}  // namespace pgplan::reliability
