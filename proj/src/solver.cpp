#include "pgplan/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pgplan/error.hpp"
#include "pgplan/util.hpp"

namespace pgplan::solver {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void reconstruct(const netlist::PowerGridNetlist& net, const LinearSystem& sys,
                 const std::vector<double>& x, GridSolution& sol) {
  sol.voltages.assign(net.nodes.size(), 0.0);
  for (std::size_t n = 0; n < net.nodes.size(); ++n) {
    int r = sys.rep[n];
    if (sys.is_fixed[static_cast<std::size_t>(r)]) {
      sol.voltages[n] = sys.fixed_volts[static_cast<std::size_t>(r)];
    } else {
      int u = sys.unknown_of_node[static_cast<std::size_t>(r)];
      sol.voltages[n] = x[static_cast<std::size_t>(u)];
    }
  }
  sol.branch_currents.assign(net.resistors.size(), 0.0);
  for (std::size_t i = 0; i < net.resistors.size(); ++i) {
    const auto& br = net.resistors[i];
    if (br.shorted) continue;  // zero-length after merge; indeterminate
    sol.branch_currents[i] =
        (sol.voltages[static_cast<std::size_t>(br.a)] -
         sol.voltages[static_cast<std::size_t>(br.b)]) /
        br.resistance;
  }
}

}  // namespace

void CsrMatrix::matvec(const std::vector<double>& x, std::vector<double>& y,
                       int threads) const {
  y.resize(static_cast<std::size_t>(dim));
  const int* rp = row_ptr.data();
  const int* ci = col.data();
  const double* v = val.data();
  const double* xp = x.data();
  double* yp = y.data();
  parallel_for(static_cast<std::size_t>(dim), threads,
               [&](std::size_t lo, std::size_t hi) {
                 for (std::size_t r = lo; r < hi; ++r) {
                   double s = 0.0;
                   for (int k = rp[r]; k < rp[r + 1]; ++k) {
                     s += v[k] * xp[ci[k]];
                   }
                   yp[r] = s;
                 }
               });
}

LinearSystem assemble(const netlist::PowerGridNetlist& net) {
  const std::size_t nn = net.nodes.size();
  LinearSystem sys;

  // Short merge.
  UnionFind uf(nn);
  for (const auto& br : net.resistors) {
    if (br.shorted) uf.unite(br.a, br.b);
  }
  sys.rep.resize(nn);
  for (std::size_t n = 0; n < nn; ++n) sys.rep[n] = uf.find(static_cast<int>(n));

  // Dirichlet groups: ground at 0 V, pads at their voltage.
  sys.is_fixed.assign(nn, 0);
  sys.fixed_volts.assign(nn, 0.0);
  if (net.ground_id >= 0) {
    int g = sys.rep[static_cast<std::size_t>(net.ground_id)];
    sys.is_fixed[static_cast<std::size_t>(g)] = 1;
    sys.fixed_volts[static_cast<std::size_t>(g)] = 0.0;
  }
  for (const auto& p : net.pads) {
    int r = sys.rep[static_cast<std::size_t>(p.node)];
    if (sys.is_fixed[static_cast<std::size_t>(r)] &&
        sys.fixed_volts[static_cast<std::size_t>(r)] != p.volts) {
      throw Error(ErrorCode::SingularSystem,
                  "conflicting fixed voltages merge at node '" +
                      net.node(p.node).name + "'");
    }
    sys.is_fixed[static_cast<std::size_t>(r)] = 1;
    sys.fixed_volts[static_cast<std::size_t>(r)] = p.volts;
  }

  // Floating check: every resistive component must reach a Dirichlet group.
  // Isolated load-only nodes have no resistive path at all and also float.
  {
    UnionFind cc(nn);
    for (const auto& br : net.resistors) cc.unite(br.a, br.b);
    std::vector<char> anchored(nn, 0);
    for (std::size_t n = 0; n < nn; ++n) {
      if (sys.is_fixed[static_cast<std::size_t>(sys.rep[n])]) {
        anchored[static_cast<std::size_t>(cc.find(static_cast<int>(n)))] = 1;
      }
    }
    std::vector<int> floating;
    for (std::size_t n = 0; n < nn; ++n) {
      bool has_r_or_fixed =
          anchored[static_cast<std::size_t>(cc.find(static_cast<int>(n)))];
      if (!has_r_or_fixed) floating.push_back(static_cast<int>(n));
    }
    if (!floating.empty()) {
      std::string names;
      for (std::size_t i = 0; i < floating.size() && i < 8; ++i) {
        if (i) names += ", ";
        names += net.node(floating[i]).name;
      }
      if (floating.size() > 8) names += ", ...";
      throw Error(ErrorCode::FloatingComponent,
                  std::to_string(floating.size()) +
                      " node(s) have no path to a pad: " + names);
    }
  }

  // Unknown numbering over merged representatives.
  sys.unknown_of_node.assign(nn, -1);
  for (std::size_t n = 0; n < nn; ++n) {
    if (sys.rep[n] == static_cast<int>(n) && !sys.is_fixed[n]) {
      sys.unknown_of_node[n] = sys.dim++;
      sys.node_of_unknown.push_back(static_cast<int>(n));
    }
  }

  // Stamp in triplet form, then compress.
  struct Entry {
    int r, c;
    double g;
  };
  std::vector<Entry> entries;
  entries.reserve(net.resistors.size() * 4);
  sys.rhs.assign(static_cast<std::size_t>(sys.dim), 0.0);
  auto idx = [&](int node) {
    return sys.unknown_of_node[static_cast<std::size_t>(
        sys.rep[static_cast<std::size_t>(node)])];
  };
  auto fixed_v = [&](int node) {
    return sys.fixed_volts[static_cast<std::size_t>(
        sys.rep[static_cast<std::size_t>(node)])];
  };
  for (const auto& br : net.resistors) {
    if (br.shorted) continue;
    int ra = sys.rep[static_cast<std::size_t>(br.a)];
    int rb = sys.rep[static_cast<std::size_t>(br.b)];
    if (ra == rb) continue;  // merged into the same group
    double g = 1.0 / br.resistance;
    int ia = idx(br.a);
    int ib = idx(br.b);
    if (ia >= 0 && ib >= 0) {
      entries.push_back({ia, ia, g});
      entries.push_back({ib, ib, g});
      entries.push_back({ia, ib, -g});
      entries.push_back({ib, ia, -g});
    } else if (ia >= 0) {
      entries.push_back({ia, ia, g});
      sys.rhs[static_cast<std::size_t>(ia)] += g * fixed_v(br.b);
    } else if (ib >= 0) {
      entries.push_back({ib, ib, g});
      sys.rhs[static_cast<std::size_t>(ib)] += g * fixed_v(br.a);
    }
  }
  for (const auto& l : net.loads) {
    int i = idx(l.node);
    if (i >= 0) sys.rhs[static_cast<std::size_t>(i)] -= l.amps;
  }

  // Triplets -> CSR with duplicate accumulation.
  CsrMatrix& m = sys.matrix;
  m.dim = sys.dim;
  m.row_ptr.assign(static_cast<std::size_t>(sys.dim) + 1, 0);
  for (const Entry& e : entries) m.row_ptr[static_cast<std::size_t>(e.r) + 1]++;
  for (std::size_t r = 0; r < static_cast<std::size_t>(sys.dim); ++r) {
    m.row_ptr[r + 1] += m.row_ptr[r];
  }
  std::vector<int> cursor(m.row_ptr.begin(), m.row_ptr.end() - 1);
  m.col.assign(entries.size(), 0);
  m.val.assign(entries.size(), 0.0);
  for (const Entry& e : entries) {
    int k = cursor[static_cast<std::size_t>(e.r)]++;
    m.col[static_cast<std::size_t>(k)] = e.c;
    m.val[static_cast<std::size_t>(k)] = e.g;
  }
  // Sort each row and merge duplicates.
  std::vector<int> new_ptr(static_cast<std::size_t>(sys.dim) + 1, 0);
  std::size_t write = 0;
  std::vector<std::pair<int, double>> rowbuf;
  for (std::size_t r = 0; r < static_cast<std::size_t>(sys.dim); ++r) {
    rowbuf.clear();
    for (int k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      rowbuf.emplace_back(m.col[static_cast<std::size_t>(k)],
                          m.val[static_cast<std::size_t>(k)]);
    }
    std::sort(rowbuf.begin(), rowbuf.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::size_t row_start = write;
    for (const auto& [c, v] : rowbuf) {
      if (write > row_start && m.col[write - 1] == c) {
        m.val[write - 1] += v;
      } else {
        m.col[write] = c;
        m.val[write] = v;
        ++write;
      }
    }
    new_ptr[r + 1] = static_cast<int>(write);
  }
  m.col.resize(write);
  m.val.resize(write);
  m.row_ptr = std::move(new_ptr);

  for (std::size_t r = 0; r < static_cast<std::size_t>(sys.dim); ++r) {
    bool has_diag = false;
    for (int k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      if (m.col[static_cast<std::size_t>(k)] == static_cast<int>(r) &&
          m.val[static_cast<std::size_t>(k)] > 0.0) {
        has_diag = true;
      }
    }
    if (!has_diag) {
      throw Error(ErrorCode::SingularSystem,
                  "zero diagonal at unknown " + std::to_string(r));
    }
  }
  return sys;
}

GridSolution solve(const netlist::PowerGridNetlist& net,
                   const LinearSystem& sys, double tol, long long max_iter,
                   int threads) {
  Timer timer;
  const std::size_t n = static_cast<std::size_t>(sys.dim);
  if (max_iter <= 0) max_iter = 10LL * std::max<long long>(sys.dim, 1);

  GridSolution sol;
  std::vector<double> x(n, 0.0);
  double bnorm = norm2(sys.rhs);
  if (n == 0 || bnorm == 0.0) {
    sol.stats.iterations = 0;
    sol.stats.relative_residual = 0.0;
    reconstruct(net, sys, x, sol);
    sol.stats.wall_seconds = timer.seconds();
    return sol;
  }

  std::vector<double> inv_diag(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (int k = sys.matrix.row_ptr[r]; k < sys.matrix.row_ptr[r + 1]; ++k) {
      if (sys.matrix.col[static_cast<std::size_t>(k)] == static_cast<int>(r)) {
        inv_diag[r] = 1.0 / sys.matrix.val[static_cast<std::size_t>(k)];
      }
    }
  }

  std::vector<double> r = sys.rhs;  // x0 = 0
  std::vector<double> z(n), p(n), ap(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  long long it = 0;
  double rel = norm2(r) / bnorm;
  while (rel > tol) {
    if (it >= max_iter) {
      throw Error(ErrorCode::NoConvergence,
                  "CG hit " + std::to_string(it) + " iterations, residual " +
                      fmt_double(rel));
    }
    sys.matrix.matvec(p, ap, threads);
    double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      throw Error(ErrorCode::SingularSystem,
                  "non-positive curvature in CG (matrix not SPD?)");
    }
    double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * ap[i];
    ++it;
    rel = norm2(r) / bnorm;
    if (rel <= tol) {
      // Guard against recurrence drift: verify with the true residual.
      sys.matrix.matvec(x, ap, threads);
      for (std::size_t i = 0; i < n; ++i) r[i] = sys.rhs[i] - ap[i];
      rel = norm2(r) / bnorm;
      if (rel <= tol) break;
      // Drifted: restart from the refreshed residual.
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      rz = dot(r, z);
      p = z;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    double rz_next = dot(r, z);
    double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  sol.stats.iterations = it;
  sol.stats.relative_residual = rel;
  reconstruct(net, sys, x, sol);
  sol.stats.wall_seconds = timer.seconds();
  return sol;
}

GridSolution dense_solve_oracle(const netlist::PowerGridNetlist& net,
                                const LinearSystem& sys) {
  Timer timer;
  const int n = sys.dim;
  if (n > kDenseOracleMaxDim) {
    throw Error(ErrorCode::DimTooLarge,
                "dense oracle limited to " +
                    std::to_string(kDenseOracleMaxDim) + " unknowns, got " +
                    std::to_string(n));
  }
  std::vector<double> a(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                        0.0);
  for (int r = 0; r < n; ++r) {
    for (int k = sys.matrix.row_ptr[static_cast<std::size_t>(r)];
         k < sys.matrix.row_ptr[static_cast<std::size_t>(r) + 1]; ++k) {
      a[static_cast<std::size_t>(r) * static_cast<std::size_t>(n) +
        static_cast<std::size_t>(sys.matrix.col[static_cast<std::size_t>(k)])] =
          sys.matrix.val[static_cast<std::size_t>(k)];
    }
  }
  // In-place Cholesky A = L L^T (lower triangle).
  for (int j = 0; j < n; ++j) {
    double d = a[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) +
                 static_cast<std::size_t>(j)];
    for (int k = 0; k < j; ++k) {
      double ljk = a[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) +
                     static_cast<std::size_t>(k)];
      d -= ljk * ljk;
    }
    if (!(d > 0.0)) {
      throw Error(ErrorCode::SingularSystem,
                  "Cholesky breakdown at column " + std::to_string(j));
    }
    double ljj = std::sqrt(d);
    a[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) +
      static_cast<std::size_t>(j)] = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                   static_cast<std::size_t>(j)];
      for (int k = 0; k < j; ++k) {
        s -= a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
               static_cast<std::size_t>(k)] *
             a[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) +
               static_cast<std::size_t>(k)];
      }
      a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
        static_cast<std::size_t>(j)] = s / ljj;
    }
  }
  // Solve L y = b, then L^T x = y.
  std::vector<double> x(sys.rhs);
  for (int i = 0; i < n; ++i) {
    double s = x[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) {
      s -= a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
             static_cast<std::size_t>(k)] *
           x[static_cast<std::size_t>(k)];
    }
    x[static_cast<std::size_t>(i)] =
        s / a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
              static_cast<std::size_t>(i)];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < n; ++k) {
      s -= a[static_cast<std::size_t>(k) * static_cast<std::size_t>(n) +
             static_cast<std::size_t>(i)] *
           x[static_cast<std::size_t>(k)];
    }
    x[static_cast<std::size_t>(i)] =
        s / a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
              static_cast<std::size_t>(i)];
  }
  GridSolution sol;
  std::vector<double> ax(static_cast<std::size_t>(n));
  sys.matrix.matvec(x, ax, 1);
  double rnorm = 0.0, bnorm = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = sys.rhs[static_cast<std::size_t>(i)] - ax[static_cast<std::size_t>(i)];
    rnorm += d * d;
    bnorm += sys.rhs[static_cast<std::size_t>(i)] * sys.rhs[static_cast<std::size_t>(i)];
  }
  sol.stats.iterations = 0;
  sol.stats.relative_residual =
      bnorm > 0.0 ? std::sqrt(rnorm / bnorm) : 0.0;
  reconstruct(net, sys, x, sol);
  sol.stats.wall_seconds = timer.seconds();
  return sol;
}

IrDropResult ir_drop(const GridSolution& sol,
                     const netlist::PowerGridNetlist& net) {
  IrDropResult out;
  out.drop.assign(net.nodes.size(), 0.0);
  for (std::size_t n = 0; n < net.nodes.size(); ++n) {
    if (net.nodes[n].is_ground) continue;
    double d = net.vdd_nominal - sol.voltages[n];
    out.drop[n] = d;
    if (d > out.worst_case || out.worst_node < 0) {
      out.worst_case = d;
      out.worst_node = static_cast<int>(n);
    }
  }
  return out;
}

KclReport kcl_check(const netlist::PowerGridNetlist& net,
                    const LinearSystem& sys, const GridSolution& sol,
                    double abs_tol, double rel_tol) {
  const std::size_t nn = net.nodes.size();
  std::vector<double> net_current(nn, 0.0);   // per representative
  std::vector<double> magnitude(nn, 0.0);
  for (std::size_t i = 0; i < net.resistors.size(); ++i) {
    const auto& br = net.resistors[i];
    if (br.shorted) continue;
    int ra = sys.rep[static_cast<std::size_t>(br.a)];
    int rb = sys.rep[static_cast<std::size_t>(br.b)];
    if (ra == rb) continue;
    double c = sol.branch_currents[i];  // a -> b positive
    net_current[static_cast<std::size_t>(ra)] += c;
    net_current[static_cast<std::size_t>(rb)] -= c;
    magnitude[static_cast<std::size_t>(ra)] += std::abs(c);
    magnitude[static_cast<std::size_t>(rb)] += std::abs(c);
  }
  for (const auto& l : net.loads) {
    net_current[static_cast<std::size_t>(
        sys.rep[static_cast<std::size_t>(l.node)])] += l.amps;
  }
  KclReport rep;
  for (std::size_t n = 0; n < nn; ++n) {
    if (sys.rep[n] != static_cast<int>(n)) continue;
    if (sys.is_fixed[n]) continue;
    double resid = std::abs(net_current[n]);
    double tol = std::max(abs_tol, rel_tol * magnitude[n]);
    double excess = resid - tol;
    if (resid > rep.max_residual) rep.max_residual = resid;
    if (excess > rep.max_violation) {
      rep.max_violation = excess;
      rep.worst_node = static_cast<int>(n);
    }
  }
  return rep;
}

void write_solution(const netlist::PowerGridNetlist& net,
                    const GridSolution& sol, const IrDropResult& ir,
                    std::ostream& out) {
  for (std::size_t n = 0; n < net.nodes.size(); ++n) {
    if (net.nodes[n].is_ground) continue;
    out << net.nodes[n].name << ' ' << fmt_double(sol.voltages[n]) << '\n';
  }
  out << "worst_case " << fmt_double(ir.worst_case) << ' '
      << (ir.worst_node >= 0 ? net.node(ir.worst_node).name : "-") << '\n';
}

void write_solution_file(const netlist::PowerGridNetlist& net,
                         const GridSolution& sol, const IrDropResult& ir,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  write_solution(net, sol, ir, out);
}

std::vector<double> read_solution_file(const netlist::PowerGridNetlist& net,
                                       const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::vector<double> v(net.nodes.size(), net.vdd_nominal);
  if (net.ground_id >= 0) v[static_cast<std::size_t>(net.ground_id)] = 0.0;
  std::string name, value;
  while (in >> name >> value) {
    if (name == "worst_case") {
      in >> value;  // node name field
      continue;
    }
    auto volts = parse_double(value);
    if (!volts) {
      throw Error(ErrorCode::IoError, "bad voltage for node '" + name + "'");
    }
    int id = net.find_node(name);
    if (id >= 0) v[static_cast<std::size_t>(id)] = *volts;
  }
  return v;
}

}  // namespace pgplan::solver
