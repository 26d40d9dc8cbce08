#include "pgplan/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string_view>
#include <unordered_map>

#include "pgplan/error.hpp"
#include "pgplan/util.hpp"

namespace pgplan::dataset {

namespace {

// Key for locating a geometry line from a branch: orientation + rounded
// perpendicular coordinate.
long long line_key(char orient, long long pos) {
  return (orient == 'h' ? 1LL : 2LL) * (1LL << 40) + pos;
}

}  // namespace

Dataset extract_features(const netlist::PowerGridNetlist& net,
                         const std::vector<double>& voltages,
                         const synth::GridGeometry* geometry,
                         const std::vector<double>* branch_widths,
                         double rho, bool strict) {
  if (branch_widths && branch_widths->size() != net.resistors.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "branch_widths length does not match resistor count");
  }
  std::unordered_map<long long, const reliability::PgLine*> line_at;
  double geo_rho = rho;
  if (geometry) {
    geo_rho = geometry->rho;
    for (const auto& ln : geometry->lines) {
      line_at.emplace(line_key(ln.orientation, std::llround(ln.position)),
                      &ln);
    }
  }
  std::vector<double> load_at(net.nodes.size(), 0.0);
  for (const auto& l : net.loads) {
    load_at[static_cast<std::size_t>(l.node)] += l.amps;
  }

  Dataset ds;
  ds.samples.reserve(net.resistors.size());
  for (std::size_t i = 0; i < net.resistors.size(); ++i) {
    const auto& br = net.resistors[i];
    if (br.shorted) continue;
    const auto& na = net.node(br.a);
    const auto& nb = net.node(br.b);
    if (!na.has_coords || !nb.has_coords) {
      if (strict) {
        throw Error(ErrorCode::NoCoordinates,
                    "node '" + (na.has_coords ? nb.name : na.name) +
                        "' has no coordinate-bearing name");
      }
      continue;
    }
    Sample s;
    s.x = (static_cast<double>(na.x) + static_cast<double>(nb.x)) / 2.0;
    s.y = (static_cast<double>(na.y) + static_cast<double>(nb.y)) / 2.0;

    const reliability::PgLine* line = nullptr;
    if (geometry) {
      if (na.y == nb.y) {
        auto it = line_at.find(line_key('h', na.y));
        if (it != line_at.end()) line = it->second;
      } else if (na.x == nb.x) {
        auto it = line_at.find(line_key('v', na.x));
        if (it != line_at.end()) line = it->second;
      }
    }
    if (line) {
      s.i_d = line->current;
    } else {
      s.i_d = load_at[static_cast<std::size_t>(br.a)] +
              load_at[static_cast<std::size_t>(br.b)];
      if (s.i_d == 0.0 && !voltages.empty() && br.resistance > 0.0) {
        double c = (voltages[static_cast<std::size_t>(br.a)] -
                    voltages[static_cast<std::size_t>(br.b)]) /
                   br.resistance;
        s.i_d = std::abs(c);
      }
    }

    if (branch_widths) {
      s.w = (*branch_widths)[i];
    } else {
      double dx = static_cast<double>(na.x) - static_cast<double>(nb.x);
      double dy = static_cast<double>(na.y) - static_cast<double>(nb.y);
      double len = std::hypot(dx, dy);
      if (len <= 0.0 || br.resistance <= 0.0 || geo_rho <= 0.0) continue;
      s.w = geo_rho * len / br.resistance;
    }
    ds.samples.push_back(s);
  }
  if (ds.samples.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no extractable interconnects");
  }
  return ds;
}

double r2_score(const std::vector<double>& y_true,
                const std::vector<double>& y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::ShapeMismatch, "r2_score length mismatch");
  }
  if (y_true.size() < 2) {
    throw Error(ErrorCode::EmptyInput, "r2_score needs at least 2 points");
  }
  double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) /
                static_cast<double>(y_true.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    double r = y_true[i] - y_pred[i];
    double t = y_true[i] - mean;
    ss_res += r * r;
    ss_tot += t * t;
  }
  if (ss_tot == 0.0) {
    throw Error(ErrorCode::DegenerateTarget, "zero variance in y_true");
  }
  return 1.0 - ss_res / ss_tot;
}

namespace {

// OLS R^2 of w on the selected (centered) feature columns, intercept
// implicit. Solves the normal equations by Gaussian elimination with partial
// pivoting; near-singular columns are dropped.
double ols_r2(const std::vector<Sample>& s, const std::vector<int>& feats) {
  const std::size_t n = s.size();
  auto value = [&](const Sample& smp, int f) {
    switch (f) {
      case 0: return smp.x;
      case 1: return smp.y;
      default: return smp.i_d;
    }
  };
  const int k = static_cast<int>(feats.size());
  std::vector<double> mean(static_cast<std::size_t>(k), 0.0);
  double wmean = 0.0;
  for (const Sample& smp : s) {
    for (int j = 0; j < k; ++j)
      mean[static_cast<std::size_t>(j)] += value(smp, feats[static_cast<std::size_t>(j)]);
    wmean += smp.w;
  }
  for (int j = 0; j < k; ++j) mean[static_cast<std::size_t>(j)] /= static_cast<double>(n);
  wmean /= static_cast<double>(n);

  std::vector<double> xtx(static_cast<std::size_t>(k * k), 0.0);
  std::vector<double> xty(static_cast<std::size_t>(k), 0.0);
  double syy = 0.0;
  for (const Sample& smp : s) {
    double wy = smp.w - wmean;
    syy += wy * wy;
    for (int a = 0; a < k; ++a) {
      double va = value(smp, feats[static_cast<std::size_t>(a)]) -
                  mean[static_cast<std::size_t>(a)];
      xty[static_cast<std::size_t>(a)] += va * wy;
      for (int b = 0; b <= a; ++b) {
        double vb = value(smp, feats[static_cast<std::size_t>(b)]) -
                    mean[static_cast<std::size_t>(b)];
        xtx[static_cast<std::size_t>(a * k + b)] += va * vb;
      }
    }
  }
  if (syy == 0.0) {
    throw Error(ErrorCode::DegenerateTarget, "zero variance in target");
  }
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      xtx[static_cast<std::size_t>(a * k + b)] =
          xtx[static_cast<std::size_t>(b * k + a)];

  // Explained sum of squares = beta^T X^T y with (X^T X) beta = X^T y.
  std::vector<double> m = xtx;
  std::vector<double> beta = xty;
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int r = col + 1; r < k; ++r) {
      if (std::abs(m[static_cast<std::size_t>(r * k + col)]) >
          std::abs(m[static_cast<std::size_t>(piv * k + col)]))
        piv = r;
    }
    for (int c = 0; c < k; ++c)
      std::swap(m[static_cast<std::size_t>(col * k + c)],
                m[static_cast<std::size_t>(piv * k + c)]);
    std::swap(beta[static_cast<std::size_t>(col)],
              beta[static_cast<std::size_t>(piv)]);
    double d = m[static_cast<std::size_t>(col * k + col)];
    if (std::abs(d) < 1e-300) {  // collapsed feature: contributes nothing
      for (int c = 0; c < k; ++c) m[static_cast<std::size_t>(col * k + c)] = 0.0;
      m[static_cast<std::size_t>(col * k + col)] = 1.0;
      beta[static_cast<std::size_t>(col)] = 0.0;
      continue;
    }
    for (int r = col + 1; r < k; ++r) {
      double f = m[static_cast<std::size_t>(r * k + col)] / d;
      if (f == 0.0) continue;
      for (int c = col; c < k; ++c)
        m[static_cast<std::size_t>(r * k + c)] -=
            f * m[static_cast<std::size_t>(col * k + c)];
      beta[static_cast<std::size_t>(r)] -= f * beta[static_cast<std::size_t>(col)];
    }
  }
  for (int r = k - 1; r >= 0; --r) {
    double sum = beta[static_cast<std::size_t>(r)];
    for (int c = r + 1; c < k; ++c)
      sum -= m[static_cast<std::size_t>(r * k + c)] * beta[static_cast<std::size_t>(c)];
    beta[static_cast<std::size_t>(r)] = sum / m[static_cast<std::size_t>(r * k + r)];
  }
  double explained = 0.0;
  for (int a = 0; a < k; ++a)
    explained += beta[static_cast<std::size_t>(a)] * xty[static_cast<std::size_t>(a)];
  return explained / syy;
}

}  // namespace

FeatureScan feature_scan(const Dataset& ds) {
  if (ds.samples.size() < 2) {
    throw Error(ErrorCode::EmptyDataset, "feature_scan needs >= 2 samples");
  }
  FeatureScan out;
  out.r2_x = ols_r2(ds.samples, {0});
  out.r2_y = ols_r2(ds.samples, {1});
  out.r2_i = ols_r2(ds.samples, {2});
  out.r2_combined = ols_r2(ds.samples, {0, 1, 2});
  return out;
}

PerturbResult perturb(const netlist::PowerGridNetlist& net,
                      const synth::GridGeometry* geometry,
                      const PerturbationSpec& spec) {
  if (spec.gamma < 0.0 || spec.gamma > 1.0) {
    throw Error(ErrorCode::BadConfig, "gamma must lie in [0, 1]");
  }
  if (!spec.branch_current && !spec.node_voltage && !spec.switching_current) {
    throw Error(ErrorCode::BadConfig, "perturbation targets are empty");
  }
  PerturbResult out;
  out.net = net;
  if (geometry) out.geometry = *geometry;
  Rng rng(spec.seed);

  if (spec.branch_current) {
    // Branch current scales by (1+u) when its resistance scales by 1/(1+u).
    for (auto& br : out.net.resistors) {
      double u = rng.uniform(-spec.gamma, spec.gamma);
      if (1.0 + u < 1e-6) u = 1e-6 - 1.0;
      br.resistance /= (1.0 + u);
      br.shorted = br.resistance < netlist::kShortThresholdOhms;
    }
  }
  if (spec.node_voltage) {
    // A node's drop scales with its incident resistances to first order.
    std::vector<double> factor(out.net.nodes.size(), 1.0);
    for (const auto& n : out.net.nodes) {
      if (n.is_ground) continue;
      factor[static_cast<std::size_t>(n.id)] =
          1.0 + rng.uniform(-spec.gamma, spec.gamma);
    }
    for (auto& br : out.net.resistors) {
      br.resistance *= factor[static_cast<std::size_t>(br.a)] *
                       factor[static_cast<std::size_t>(br.b)];
      br.shorted = br.resistance < netlist::kShortThresholdOhms;
    }
  }
  if (spec.switching_current) {
    if (out.geometry && !out.geometry->blocks.empty()) {
      // One factor per block, applied consistently to the block's taps (the
      // netlist loads) and to the recorded floorplan currents.
      std::vector<double> factor(out.geometry->blocks.size(), 1.0);
      for (std::size_t j = 0; j < out.geometry->blocks.size(); ++j) {
        factor[j] = 1.0 + rng.uniform(-spec.gamma, spec.gamma);
        out.geometry->blocks[j].i_d *= factor[j];
      }
      for (auto& tap : out.geometry->taps) {
        if (tap.block >= 0) tap.share *= factor[static_cast<std::size_t>(tap.block)];
      }
      // Generated netlists carry one load per tap, in tap order. If the
      // netlist does not line up with the tap table the loads are left
      // untouched rather than scaled by a guessed mapping.
      if (out.net.loads.size() == out.geometry->taps.size()) {
        for (std::size_t t = 0; t < out.net.loads.size(); ++t) {
          int blk = out.geometry->taps[t].block;
          if (blk >= 0) out.net.loads[t].amps *= factor[static_cast<std::size_t>(blk)];
        }
      }
      // Refresh per-line allocated currents from the scaled taps.
      for (auto& ln : out.geometry->lines) ln.current = 0.0;
      for (const auto& tap : out.geometry->taps) {
        if (tap.line >= 0 &&
            tap.line < static_cast<int>(out.geometry->lines.size())) {
          out.geometry->lines[static_cast<std::size_t>(tap.line)].current +=
              tap.share;
        }
      }
    } else {
      for (auto& l : out.net.loads) {
        l.amps *= 1.0 + rng.uniform(-spec.gamma, spec.gamma);
      }
    }
  }
  return out;
}

solver::GridSolution perturb_solution_in_place(
    const netlist::PowerGridNetlist& net, const solver::GridSolution& sol,
    const PerturbationSpec& spec) {
  if (spec.gamma < 0.0 || spec.gamma > 1.0) {
    throw Error(ErrorCode::BadConfig, "gamma must lie in [0, 1]");
  }
  Rng rng(spec.seed);
  solver::GridSolution out = sol;
  for (const auto& n : net.nodes) {
    if (n.is_ground) continue;
    double u = rng.uniform(-spec.gamma, spec.gamma);
    double drop = net.vdd_nominal - sol.voltages[static_cast<std::size_t>(n.id)];
    out.voltages[static_cast<std::size_t>(n.id)] =
        net.vdd_nominal - drop * (1.0 + u);
  }
  for (std::size_t i = 0; i < net.resistors.size(); ++i) {
    const auto& br = net.resistors[i];
    if (br.shorted || br.resistance <= 0.0) continue;
    out.branch_currents[i] =
        (out.voltages[static_cast<std::size_t>(br.a)] -
         out.voltages[static_cast<std::size_t>(br.b)]) /
        br.resistance;
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  std::uint64_t seed) {
  if (ds.samples.empty()) {
    throw Error(ErrorCode::EmptyDataset, "cannot split an empty dataset");
  }
  if (train_fraction < 0.0 || train_fraction > 1.0) {
    throw Error(ErrorCode::BadConfig, "train fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(ds.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::size_t ntrain = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(ds.samples.size())));
  std::pair<Dataset, Dataset> out;
  out.first.normalizer = ds.normalizer;
  out.second.normalizer = ds.normalizer;
  out.first.source_tag = ds.source_tag;
  out.second.source_tag = ds.source_tag;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < ntrain ? out.first : out.second)
        .samples.push_back(ds.samples[order[i]]);
  }
  return out;
}

Normalizer normalize(Dataset& ds) {
  if (ds.samples.empty()) {
    throw Error(ErrorCode::EmptyDataset, "cannot normalize an empty dataset");
  }
  if (ds.normalizer) {
    throw Error(ErrorCode::NotNormalized, "dataset is already normalized");
  }
  Normalizer n;
  for (int f = 0; f < 4; ++f) {
    n.lo[f] = std::numeric_limits<double>::infinity();
    n.hi[f] = -std::numeric_limits<double>::infinity();
  }
  auto fields = [](Sample& s) {
    return std::array<double*, 4>{&s.x, &s.y, &s.i_d, &s.w};
  };
  for (Sample& s : ds.samples) {
    auto fs = fields(s);
    for (int f = 0; f < 4; ++f) {
      n.lo[f] = std::min(n.lo[f], *fs[static_cast<std::size_t>(f)]);
      n.hi[f] = std::max(n.hi[f], *fs[static_cast<std::size_t>(f)]);
    }
  }
  for (Sample& s : ds.samples) {
    auto fs = fields(s);
    for (int f = 0; f < 4; ++f) {
      *fs[static_cast<std::size_t>(f)] = n.norm(f, *fs[static_cast<std::size_t>(f)]);
    }
  }
  ds.normalizer = n;
  return n;
}

void denormalize(Dataset& ds) {
  if (!ds.normalizer) {
    throw Error(ErrorCode::NotNormalized, "dataset carries no normalizer");
  }
  const Normalizer& n = *ds.normalizer;
  for (Sample& s : ds.samples) {
    s.x = n.denorm(0, s.x);
    s.y = n.denorm(1, s.y);
    s.i_d = n.denorm(2, s.i_d);
    s.w = n.denorm(3, s.w);
  }
  ds.normalizer.reset();
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "x,y,i_d,w\n";
  for (const Sample& s : ds.samples) {
    out << fmt_double(s.x) << ',' << fmt_double(s.y) << ','
        << fmt_double(s.i_d) << ',' << fmt_double(s.w) << '\n';
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  Dataset ds;
  std::string line;
  if (!std::getline(in, line) || line != "x,y,i_d,w") {
    throw Error(ErrorCode::IoError, "bad dataset header in '" + path + "'");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Sample s;
    std::array<double*, 4> f{&s.x, &s.y, &s.i_d, &s.w};
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
      std::size_t comma = i < 3 ? line.find(',', start) : line.size();
      if (comma == std::string::npos) {
        throw Error(ErrorCode::IoError, "bad dataset row '" + line + "'");
      }
      auto v = parse_double(std::string_view(line).substr(start, comma - start));
      if (!v) throw Error(ErrorCode::IoError, "bad dataset value in '" + line + "'");
      *f[static_cast<std::size_t>(i)] = *v;
      start = comma + 1;
    }
    ds.samples.push_back(s);
  }
  if (ds.samples.empty()) {
    throw Error(ErrorCode::EmptyDataset, "'" + path + "' holds no samples");
  }
  return ds;
}

void write_normalizer_csv(const Normalizer& n, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  for (int f = 0; f < 4; ++f) {
    out << fmt_double(n.lo[f]) << ',' << fmt_double(n.hi[f]) << '\n';
  }
}

Normalizer read_normalizer_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  Normalizer n;
  std::string line;
  for (int f = 0; f < 4; ++f) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::IoError, "normalizer file truncated");
    }
    std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::IoError, "bad normalizer row '" + line + "'");
    }
    auto lo = parse_double(std::string_view(line).substr(0, comma));
    auto hi = parse_double(std::string_view(line).substr(comma + 1));
    if (!lo || !hi) {
      throw Error(ErrorCode::IoError, "bad normalizer value in '" + line + "'");
    }
    n.lo[f] = *lo;
    n.hi[f] = *hi;
  }
  return n;
}

}  // namespace pgplan::dataset
