#include "pgplan/reliability.hpp"

#include <cmath>
#include <sstream>

#include "pgplan/error.hpp"
#include "pgplan/util.hpp"

namespace pgplan::reliability {

double width_for_ir(double rho, double length, double current,
                    double ir_budget) {
  if (!(rho > 0.0) || !(length > 0.0) || !(current > 0.0) ||
      !(ir_budget > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput,
                "width_for_ir requires rho, length, current, ir_budget > 0");
  }
  return rho * length * current / ir_budget;
}

EmCheck em_check(double current, double width, double j_max) {
  if (!(width > 0.0) || !(j_max > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput,
                "em_check requires width > 0 and j_max > 0");
  }
  if (current < 0.0) {
    throw Error(ErrorCode::NonPositiveInput, "em_check requires current >= 0");
  }
  EmCheck out;
  out.density = current / width;
  out.margin = j_max - out.density;
  out.violated = out.density > j_max;
  return out;
}

long long pg_line_count(double core_width, double width) {
  if (!(core_width > 0.0) || !(width > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput,
                "pg_line_count requires core_width > 0 and width > 0");
  }
  long long n = static_cast<long long>(std::floor(core_width / width));
  return n < 1 ? 1 : n;
}

Allocation allocate_block_currents(const std::vector<PgLine>& lines,
                                   const std::vector<BlockLoad>& blocks) {
  Allocation out;
  out.line_current.assign(lines.size(), 0.0);
  out.pair_current.assign(lines.size(),
                          std::vector<double>(blocks.size(), 0.0));
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const BlockLoad& b = blocks[j];
    std::vector<std::size_t> covered;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const PgLine& ln = lines[i];
      bool inside = ln.orientation == 'h'
                        ? (b.y0 <= ln.position && ln.position <= b.y1)
                        : (b.x0 <= ln.position && ln.position <= b.x1);
      if (inside) covered.push_back(i);
    }
    if (covered.empty()) {
      throw Error(ErrorCode::UncoveredBlock,
                  "block " + std::to_string(b.id) + " overlaps no line");
    }
    double share = b.i_d / static_cast<double>(covered.size());
    for (std::size_t i : covered) {
      out.pair_current[i][j] = share;
      out.line_current[i] += share;
    }
  }
  return out;
}

std::vector<double> spacing_from_widths(const std::vector<double>& widths,
                                        double core_width) {
  if (widths.empty()) {
    throw Error(ErrorCode::InfeasibleWidths, "no lines to space");
  }
  double total = 0.0;
  for (double w : widths) total += w;
  if (total >= core_width) {
    throw Error(ErrorCode::InfeasibleWidths,
                "sum of widths " + fmt_double(total) +
                    " leaves no spacing inside core_width " +
                    fmt_double(core_width));
  }
  double s = (core_width - total) / static_cast<double>(widths.size());
  return std::vector<double>(widths.size(), s);
}

std::string reliability_report_csv(const std::vector<PgLine>& lines,
                                   double j_max) {
  std::ostringstream os;
  os << "line_index,orientation,position,length,width,current,density,"
        "violated\n";
  for (const PgLine& ln : lines) {
    EmCheck em = em_check(ln.current, ln.width, j_max);
    os << ln.index << ',' << ln.orientation << ',' << fmt_double(ln.position)
       << ',' << fmt_double(ln.length) << ',' << fmt_double(ln.width) << ','
       << fmt_double(ln.current) << ',' << fmt_double(em.density) << ','
       << (em.violated ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace pgplan::reliability
