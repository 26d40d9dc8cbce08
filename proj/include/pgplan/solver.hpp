#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pgplan/netlist.hpp"

namespace pgplan::solver {

struct CsrMatrix {
  int dim = 0;
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<double> val;

  void matvec(const std::vector<double>& x, std::vector<double>& y,
              int threads) const;
};

// Nodal conductance system with pads eliminated as Dirichlet boundaries.
// Nodes joined by sub-threshold resistors are merged; `rep` maps every node
// id to its representative.
struct LinearSystem {
  int dim = 0;
  CsrMatrix matrix;
  std::vector<double> rhs;
  std::vector<int> rep;              // node id -> merged representative id
  std::vector<int> unknown_of_node;  // representative id -> index or -1
  std::vector<int> node_of_unknown;  // index -> representative id
  std::vector<char> is_fixed;        // representative id -> Dirichlet?
  std::vector<double> fixed_volts;   // representative id -> volts
};

struct SolveStats {
  long long iterations = 0;
  double relative_residual = 0.0;
  double wall_seconds = 0.0;  // assemble + iterate
};

struct GridSolution {
  std::vector<double> voltages;         // per node id
  std::vector<double> branch_currents;  // per resistor, (v_a - v_b)/R
  SolveStats stats;
};

struct IrDropResult {
  std::vector<double> drop;  // per node id, vdd_nominal - v (ground: 0)
  double worst_case = 0.0;
  int worst_node = -1;
};

inline constexpr double kDefaultTol = 1e-10;
inline constexpr int kDenseOracleMaxDim = 2000;

LinearSystem assemble(const netlist::PowerGridNetlist& net);

// Jacobi-preconditioned conjugate gradient. max_iter <= 0 selects 10*dim.
// stats.wall_seconds covers the iteration only; callers time assembly
// separately when they need the combined figure.
GridSolution solve(const netlist::PowerGridNetlist& net,
                   const LinearSystem& sys, double tol = kDefaultTol,
                   long long max_iter = 0, int threads = 1);

// Dense Cholesky reference; test oracle only.
GridSolution dense_solve_oracle(const netlist::PowerGridNetlist& net,
                                const LinearSystem& sys);

IrDropResult ir_drop(const GridSolution& sol,
                     const netlist::PowerGridNetlist& net);

// Max KCL violation over unknown (non-Dirichlet) merged node groups, where
// each group's violation is |sum of branch currents + load| minus its
// tolerance max(abs_tol, rel_tol * incident current magnitude). Values <= 0
// everywhere mean KCL holds.
struct KclReport {
  double max_violation = 0.0;  // worst residual-over-tolerance excess
  double max_residual = 0.0;   // worst raw residual (amps)
  int worst_node = -1;
};
KclReport kcl_check(const netlist::PowerGridNetlist& net,
                    const LinearSystem& sys, const GridSolution& sol,
                    double abs_tol = 1e-8, double rel_tol = 1e-6);

void write_solution(const netlist::PowerGridNetlist& net,
                    const GridSolution& sol, const IrDropResult& ir,
                    std::ostream& out);
void write_solution_file(const netlist::PowerGridNetlist& net,
                         const GridSolution& sol, const IrDropResult& ir,
                         const std::string& path);

// Reads `node voltage` lines back into a per-node-id vector for `net`.
// Unlisted nodes get vdd_nominal (pads/ground are often omitted in published
// solution files).
std::vector<double> read_solution_file(const netlist::PowerGridNetlist& net,
                                       const std::string& path);

}  // namespace pgplan::solver
