#include "pgplan/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "pgplan/error.hpp"
#include "pgplan/util.hpp"

namespace pgplan::nn {

namespace {

constexpr double kGuardLo = -0.5;
constexpr double kGuardHi = 1.5;
constexpr double kPenaltyWidthFloor = 1e-12;

void check_config(const MlpConfig& c) {
  if (c.input_dim < 1 || c.hidden_layers < 1 || c.hidden_width < 1 ||
      c.output_dim != 1) {
    throw Error(ErrorCode::BadConfig,
                "mlp shape must be input>=1, hidden>=1x1, output=1");
  }
}

void check_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0) || c.beta1 < 0.0 || c.beta1 >= 1.0 ||
      c.beta2 < 0.0 || c.beta2 >= 1.0 || !(c.epsilon > 0.0) ||
      c.lambda < 0.0 || c.batch_size < 1 || c.epochs < 0 || c.patience < 0) {
    throw Error(ErrorCode::BadConfig, "invalid training hyperparameters");
  }
  if (c.lambda > 0.0 && !(c.j_max > 0.0)) {
    throw Error(ErrorCode::BadConfig,
                "density penalty needs j_max > 0 when lambda > 0");
  }
}

void check_guard(double v) {
  if (!(v >= kGuardLo && v <= kGuardHi)) {
    throw Error(ErrorCode::NotNormalized,
                "feature " + fmt_double(v) + " outside the [" +
                    fmt_double(kGuardLo) + ", " + fmt_double(kGuardHi) +
                    "] normalized band");
  }
}

// Per-layer activations for one batch; reused across batches to keep the
// training loop allocation-free.
struct Workspace {
  std::vector<std::vector<double>> act;    // act[0] = input, act[L] = output
  std::vector<std::vector<double>> delta;  // one slot per affine stage
};

void size_workspace(Workspace& ws, const MlpModel& m, std::size_t n) {
  const std::size_t stages = m.layers.size();
  ws.act.resize(stages + 1);
  ws.delta.resize(stages);
  ws.act[0].resize(n * static_cast<std::size_t>(m.config.input_dim));
  for (std::size_t l = 0; l < stages; ++l) {
    ws.act[l + 1].resize(n * static_cast<std::size_t>(m.layers[l].out));
    ws.delta[l].resize(n * static_cast<std::size_t>(m.layers[l].out));
  }
}

// act[0] must hold the batch inputs. ReLU on every stage except the last.
void forward_pass(const MlpModel& m, Workspace& ws, std::size_t n) {
  const std::size_t stages = m.layers.size();
  for (std::size_t l = 0; l < stages; ++l) {
    const Layer& ly = m.layers[l];
    const bool last = l + 1 == stages;
    const std::size_t in = static_cast<std::size_t>(ly.in);
    const std::size_t out = static_cast<std::size_t>(ly.out);
    const std::vector<double>& src = ws.act[l];
    std::vector<double>& dst = ws.act[l + 1];
    for (std::size_t s = 0; s < n; ++s) {
      const double* x = src.data() + s * in;
      double* y = dst.data() + s * out;
      for (std::size_t r = 0; r < out; ++r) {
        const double* wr = ly.w.data() + r * in;
        double acc = ly.b[r];
        for (std::size_t c = 0; c < in; ++c) acc += wr[c] * x[c];
        y[r] = (!last && acc < 0.0) ? 0.0 : acc;
      }
    }
  }
}

// Seeds ws.delta.back() with dL/d(output), fills grads.
void backward_pass(const MlpModel& m, Workspace& ws, std::size_t n,
                   Gradients& grads) {
  const std::size_t stages = m.layers.size();
  for (std::size_t li = stages; li-- > 0;) {
    const Layer& ly = m.layers[li];
    Layer& g = grads.layers[li];
    const std::size_t in = static_cast<std::size_t>(ly.in);
    const std::size_t out = static_cast<std::size_t>(ly.out);
    std::fill(g.w.begin(), g.w.end(), 0.0);
    std::fill(g.b.begin(), g.b.end(), 0.0);
    const std::vector<double>& src = ws.act[li];
    const std::vector<double>& del = ws.delta[li];
    for (std::size_t s = 0; s < n; ++s) {
      const double* x = src.data() + s * in;
      const double* d = del.data() + s * out;
      for (std::size_t r = 0; r < out; ++r) {
        const double dr = d[r];
        if (dr == 0.0) continue;
        g.b[r] += dr;
        double* gw = g.w.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) gw[c] += dr * x[c];
      }
    }
    if (li == 0) break;
    // delta[li-1] = (W^T delta) gated by the ReLU mask of act[li].
    std::vector<double>& dprev = ws.delta[li - 1];
    std::fill(dprev.begin(), dprev.end(), 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const double* d = del.data() + s * out;
      const double* a = src.data() + s * in;
      double* dp = dprev.data() + s * in;
      for (std::size_t r = 0; r < out; ++r) {
        const double dr = d[r];
        if (dr == 0.0) continue;
        const double* wr = ly.w.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) dp[c] += dr * wr[c];
      }
      for (std::size_t c = 0; c < in; ++c) {
        if (a[c] <= 0.0) dp[c] = 0.0;
      }
    }
  }
}

Gradients make_gradients(const MlpModel& m) {
  Gradients g;
  g.layers.reserve(m.layers.size());
  for (const Layer& ly : m.layers) {
    Layer z;
    z.in = ly.in;
    z.out = ly.out;
    z.w.assign(ly.w.size(), 0.0);
    z.b.assign(ly.b.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

// Shared by loss() and the backward seed: hinge of the current-density
// constraint on the denormalized width.
double density_violation(double pred_norm, double i_d,
                         const dataset::Normalizer& nrm, double j_max,
                         double* dvdpred) {
  double wd = nrm.denorm(3, pred_norm);
  if (dvdpred) *dvdpred = 0.0;
  double wd_eff = wd;
  bool clamped = false;
  if (wd_eff < kPenaltyWidthFloor) {
    wd_eff = kPenaltyWidthFloor;
    clamped = true;
  }
  double viol = i_d / wd_eff - j_max;
  if (viol <= 0.0) return 0.0;
  if (dvdpred && !clamped && !nrm.constant(3)) {
    *dvdpred = -(i_d / (wd_eff * wd_eff)) * (nrm.hi[3] - nrm.lo[3]);
  }
  return viol;
}

// Fills ws with a full forward pass and the output-layer delta; returns the
// batch objective.
LossBreakdown run_forward_and_seed(const MlpModel& m, Workspace& ws,
                                   const Batch& batch, const TrainConfig& cfg,
                                   bool want_delta) {
  const std::size_t n = batch.n;
  forward_pass(m, ws, n);
  const std::vector<double>& out = ws.act.back();
  LossBreakdown lb;
  std::vector<double>* seed = want_delta ? &ws.delta.back() : nullptr;
  for (std::size_t s = 0; s < n; ++s) {
    double diff = out[s] - batch.y[s];
    lb.mse += diff * diff;
    double dseed = 2.0 * diff / static_cast<double>(n);
    if (cfg.lambda > 0.0) {
      double dvdp = 0.0;
      double viol = density_violation(out[s], batch.i_d[s], m.normalizer,
                                      cfg.j_max, &dvdp);
      lb.penalty += viol * viol;
      dseed += cfg.lambda * 2.0 * viol * dvdp / static_cast<double>(n);
    }
    if (seed) (*seed)[s] = dseed;
  }
  lb.mse /= static_cast<double>(n);
  lb.penalty /= static_cast<double>(n);
  lb.total = lb.mse + cfg.lambda * lb.penalty;
  return lb;
}

void load_batch_inputs(Workspace& ws, const Batch& batch, int input_dim) {
  if (batch.x.size() != batch.n * static_cast<std::size_t>(input_dim) ||
      batch.y.size() != batch.n ||
      (!batch.i_d.empty() && batch.i_d.size() != batch.n)) {
    throw Error(ErrorCode::ShapeMismatch, "batch arrays disagree on size");
  }
  std::copy(batch.x.begin(), batch.x.end(), ws.act[0].begin());
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t total = 0;
  for (const Layer& ly : layers) total += ly.w.size() + ly.b.size();
  return total;
}

MlpModel init(const MlpConfig& config) {
  check_config(config);
  MlpModel m;
  m.config = config;
  Rng rng(config.seed);
  auto add_layer = [&](int in, int out) {
    Layer ly;
    ly.in = in;
    ly.out = out;
    ly.w.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    ly.b.assign(static_cast<std::size_t>(out), 0.0);
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : ly.w) w = rng.normal() * scale;
    m.layers.push_back(std::move(ly));
  };
  add_layer(config.input_dim, config.hidden_width);
  for (int l = 1; l < config.hidden_layers; ++l) {
    add_layer(config.hidden_width, config.hidden_width);
  }
  add_layer(config.hidden_width, config.output_dim);
  for (int f = 0; f < 4; ++f) {
    m.normalizer.lo[f] = 0.0;
    m.normalizer.hi[f] = 1.0;
  }
  return m;
}

double forward(const MlpModel& model, const double* x_norm) {
  const std::size_t in = static_cast<std::size_t>(model.config.input_dim);
  for (std::size_t c = 0; c < in; ++c) check_guard(x_norm[c]);
  std::vector<double> cur(x_norm, x_norm + in);
  std::vector<double> next;
  const std::size_t stages = model.layers.size();
  for (std::size_t l = 0; l < stages; ++l) {
    const Layer& ly = model.layers[l];
    const bool last = l + 1 == stages;
    next.assign(static_cast<std::size_t>(ly.out), 0.0);
    for (std::size_t r = 0; r < static_cast<std::size_t>(ly.out); ++r) {
      const double* wr = ly.w.data() + r * static_cast<std::size_t>(ly.in);
      double acc = ly.b[r];
      for (std::size_t c = 0; c < static_cast<std::size_t>(ly.in); ++c) {
        acc += wr[c] * cur[c];
      }
      next[r] = (!last && acc < 0.0) ? 0.0 : acc;
    }
    cur.swap(next);
  }
  return cur[0];
}

std::vector<double> forward_batch(const MlpModel& model,
                                  const std::vector<double>& x_norm,
                                  std::size_t n) {
  const std::size_t in = static_cast<std::size_t>(model.config.input_dim);
  if (x_norm.size() != n * in) {
    throw Error(ErrorCode::ShapeMismatch, "batch input size mismatch");
  }
  for (double v : x_norm) check_guard(v);
  Workspace ws;
  size_workspace(ws, model, n);
  std::copy(x_norm.begin(), x_norm.end(), ws.act[0].begin());
  forward_pass(model, ws, n);
  return ws.act.back();
}

double predict_width(const MlpModel& model, double x, double y, double i_d) {
  if (model.config.input_dim != 3) {
    throw Error(ErrorCode::ShapeMismatch,
                "width prediction expects a 3-feature model");
  }
  const dataset::Normalizer& nrm = model.normalizer;
  double xn[3] = {nrm.norm(0, x), nrm.norm(1, y), nrm.norm(2, i_d)};
  return nrm.denorm(3, forward(model, xn));
}

LossBreakdown loss(const std::vector<double>& pred_norm,
                   const std::vector<double>& target_norm,
                   const std::vector<double>& i_d_physical,
                   const dataset::Normalizer& nrm, const TrainConfig& cfg) {
  check_train_config(cfg);
  if (pred_norm.size() != target_norm.size() ||
      (cfg.lambda > 0.0 && i_d_physical.size() != pred_norm.size())) {
    throw Error(ErrorCode::ShapeMismatch, "loss input lengths disagree");
  }
  if (pred_norm.empty()) {
    throw Error(ErrorCode::EmptyInput, "loss over an empty batch");
  }
  LossBreakdown lb;
  for (std::size_t s = 0; s < pred_norm.size(); ++s) {
    double diff = pred_norm[s] - target_norm[s];
    lb.mse += diff * diff;
    if (cfg.lambda > 0.0) {
      double viol = density_violation(pred_norm[s], i_d_physical[s], nrm,
                                      cfg.j_max, nullptr);
      lb.penalty += viol * viol;
    }
  }
  lb.mse /= static_cast<double>(pred_norm.size());
  lb.penalty /= static_cast<double>(pred_norm.size());
  lb.total = lb.mse + cfg.lambda * lb.penalty;
  return lb;
}

Gradients backward(const MlpModel& model, const Batch& batch,
                   const TrainConfig& cfg) {
  check_train_config(cfg);
  if (batch.n == 0) {
    throw Error(ErrorCode::EmptyInput, "backward over an empty batch");
  }
  Workspace ws;
  size_workspace(ws, model, batch.n);
  load_batch_inputs(ws, batch, model.config.input_dim);
  Gradients grads = make_gradients(model);
  run_forward_and_seed(model, ws, batch, cfg, true);
  backward_pass(model, ws, batch.n, grads);
  return grads;
}

AdamState make_adam_state(const MlpModel& model) {
  AdamState st;
  st.m = make_gradients(model).layers;
  st.v = st.m;
  st.t = 0;
  return st;
}

void adam_step(MlpModel& model, AdamState& state, const Gradients& grads,
               const TrainConfig& cfg) {
  check_train_config(cfg);
  if (grads.layers.size() != model.layers.size() ||
      state.m.size() != model.layers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam state/gradient layer count");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Layer& ly = model.layers[l];
    const Layer& g = grads.layers[l];
    Layer& m1 = state.m[l];
    Layer& m2 = state.v[l];
    if (g.w.size() != ly.w.size() || g.b.size() != ly.b.size()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient shape mismatch");
    }
    auto update = [&](std::vector<double>& p, const std::vector<double>& gr,
                      std::vector<double>& m, std::vector<double>& v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gr[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gr[i] * gr[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
      }
    };
    update(ly.w, g.w, m1.w, m2.w);
    update(ly.b, g.b, m1.b, m2.b);
  }
}

TrainResult train(const dataset::Dataset& train_ds,
                  const dataset::Dataset& val_ds, const MlpConfig& mcfg,
                  const TrainConfig& tcfg) {
  check_config(mcfg);
  check_train_config(tcfg);
  if (mcfg.input_dim != 3) {
    throw Error(ErrorCode::BadConfig,
                "training data carries exactly 3 features");
  }
  if (!train_ds.normalizer || !val_ds.normalizer) {
    throw Error(ErrorCode::NotNormalized, "train expects normalized splits");
  }
  if (train_ds.samples.empty()) {
    throw Error(ErrorCode::EmptyDataset, "training split is empty");
  }
  if (val_ds.samples.empty()) {
    throw Error(ErrorCode::EmptyDataset, "validation split is empty");
  }

  const dataset::Normalizer& nrm = *train_ds.normalizer;
  TrainResult res;
  res.model = init(mcfg);
  res.model.normalizer = nrm;
  res.model.train_seed = tcfg.shuffle_seed;
  if (tcfg.epochs == 0) return res;

  const std::size_t n = train_ds.samples.size();
  std::vector<double> tx(n * 3), ty(n), ti(n);
  for (std::size_t s = 0; s < n; ++s) {
    const dataset::Sample& smp = train_ds.samples[s];
    tx[s * 3 + 0] = smp.x;
    tx[s * 3 + 1] = smp.y;
    tx[s * 3 + 2] = smp.i_d;
    ty[s] = smp.w;
    ti[s] = nrm.denorm(2, smp.i_d);
  }
  const std::size_t nv = val_ds.samples.size();
  Batch vb;
  vb.n = nv;
  vb.x.resize(nv * 3);
  vb.y.resize(nv);
  vb.i_d.resize(nv);
  for (std::size_t s = 0; s < nv; ++s) {
    const dataset::Sample& smp = val_ds.samples[s];
    vb.x[s * 3 + 0] = smp.x;
    vb.x[s * 3 + 1] = smp.y;
    vb.x[s * 3 + 2] = smp.i_d;
    vb.y[s] = smp.w;
    vb.i_d[s] = nrm.denorm(2, smp.i_d);
  }

  AdamState adam = make_adam_state(res.model);
  Gradients grads = make_gradients(res.model);
  Rng rng(tcfg.shuffle_seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  const std::size_t bcap = std::min<std::size_t>(
      n, static_cast<std::size_t>(tcfg.batch_size));
  Workspace ws;
  size_workspace(ws, res.model, bcap);
  Workspace vws;
  size_workspace(vws, res.model, nv);
  std::copy(vb.x.begin(), vb.x.end(), vws.act[0].begin());
  Batch batch;
  batch.x.resize(bcap * 3);
  batch.y.resize(bcap);
  batch.i_d.resize(bcap);

  MlpModel best;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    rng.shuffle(order);
    double run_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bcap) {
      const std::size_t bn = std::min(bcap, n - start);
      batch.n = bn;
      for (std::size_t k = 0; k < bn; ++k) {
        const std::size_t idx = order[start + k];
        batch.x[k * 3 + 0] = tx[idx * 3 + 0];
        batch.x[k * 3 + 1] = tx[idx * 3 + 1];
        batch.x[k * 3 + 2] = tx[idx * 3 + 2];
        batch.y[k] = ty[idx];
        batch.i_d[k] = ti[idx];
      }
      std::copy(batch.x.begin(), batch.x.begin() + static_cast<long>(bn * 3),
                ws.act[0].begin());
      LossBreakdown lb = run_forward_and_seed(res.model, ws, batch, tcfg, true);
      if (!std::isfinite(lb.total)) {
        throw Error(ErrorCode::DivergedLoss,
                    "non-finite training loss at epoch " +
                        std::to_string(epoch));
      }
      run_loss += lb.total * static_cast<double>(bn);
      backward_pass(res.model, ws, bn, grads);
      adam_step(res.model, adam, grads, tcfg);
    }
    const double train_loss = run_loss / static_cast<double>(n);

    LossBreakdown vl = run_forward_and_seed(res.model, vws, vb, tcfg, false);
    if (!std::isfinite(vl.total)) {
      throw Error(ErrorCode::DivergedLoss,
                  "non-finite validation loss at epoch " +
                      std::to_string(epoch));
    }
    res.history.push_back({epoch, train_loss, vl.total});

    if (tcfg.patience > 0) {
      if (vl.total < best_val) {
        best_val = vl.total;
        best = res.model;
        stale = 0;
      } else if (++stale >= tcfg.patience) {
        res.model = best;
        return res;
      }
    }
  }
  if (tcfg.patience > 0 && best_val <= res.history.back().val_loss) {
    res.model = best;
  }
  return res;
}

std::vector<double> ir_from_widths(
    const std::vector<reliability::PgLine>& lines,
    const std::vector<double>& currents, const std::vector<double>& widths,
    double rho) {
  if (currents.size() != lines.size() || widths.size() != lines.size()) {
    throw Error(ErrorCode::ShapeMismatch, "per-line arrays disagree on size");
  }
  if (!(rho > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput, "rho must be positive");
  }
  std::vector<double> drops(lines.size(), 0.0);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!(lines[i].length > 0.0)) {
      throw Error(ErrorCode::NonPositiveInput, "line length must be positive");
    }
    if (!(widths[i] > 0.0)) {
      throw Error(ErrorCode::NonPositiveInput, "line width must be positive");
    }
    drops[i] = currents[i] * rho * lines[i].length / widths[i];
  }
  return drops;
}

DlIrResult predict_ir_drop(const MlpModel& model,
                           const std::vector<reliability::PgLine>& lines,
                           const std::vector<reliability::BlockLoad>& blocks,
                           double rho, double w_min) {
  if (model.config.input_dim != 3) {
    throw Error(ErrorCode::ShapeMismatch,
                "width prediction expects a 3-feature model");
  }
  DlIrResult out;
  if (w_min <= 0.0) {
    w_min = model.normalizer.lo[3] > 0.0 ? 0.01 * model.normalizer.lo[3]
                                         : kPenaltyWidthFloor;
  }
  out.w_min = w_min;
  reliability::Allocation alloc =
      reliability::allocate_block_currents(lines, blocks);
  out.currents = alloc.line_current;
  out.widths.resize(lines.size(), 0.0);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const reliability::PgLine& ln = lines[i];
    const double along = ln.length / 2.0;
    const double x = ln.orientation == 'h' ? along : ln.position;
    const double y = ln.orientation == 'h' ? ln.position : along;
    double w = predict_width(model, x, y, out.currents[i]);
    if (w < w_min) {
      w = w_min;
      ++out.clamped;
    }
    out.widths[i] = w;
  }
  out.drops = ir_from_widths(lines, out.currents, out.widths, rho);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (out.drops[i] > out.worst_drop) {
      out.worst_drop = out.drops[i];
      out.worst_line = static_cast<int>(i);
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json model_to_json(const MlpModel& m) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["kind"] = "pgplan-mlp";
  j["config"] = {{"input_dim", m.config.input_dim},
                 {"hidden_layers", m.config.hidden_layers},
                 {"hidden_width", m.config.hidden_width},
                 {"output_dim", m.config.output_dim},
                 {"seed", m.config.seed}};
  j["train_seed"] = m.train_seed;
  j["normalizer"] = {
      {"lo", std::vector<double>(m.normalizer.lo, m.normalizer.lo + 4)},
      {"hi", std::vector<double>(m.normalizer.hi, m.normalizer.hi + 4)}};
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const Layer& ly : m.layers) {
    layers.push_back(
        {{"in", ly.in}, {"out", ly.out}, {"w", ly.w}, {"b", ly.b}});
  }
  j["layers"] = std::move(layers);
  return j;
}

MlpModel model_from_json(const nlohmann::ordered_json& j) {
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1 ||
      j.value("kind", "") != std::string("pgplan-mlp")) {
    throw Error(ErrorCode::BadConfig, "unrecognized model file format");
  }
  MlpModel m;
  const auto& c = j.at("config");
  m.config.input_dim = c.at("input_dim").get<int>();
  m.config.hidden_layers = c.at("hidden_layers").get<int>();
  m.config.hidden_width = c.at("hidden_width").get<int>();
  m.config.output_dim = c.at("output_dim").get<int>();
  m.config.seed = c.at("seed").get<std::uint64_t>();
  m.train_seed = j.value("train_seed", std::uint64_t{0});
  check_config(m.config);
  const auto& nrm = j.at("normalizer");
  auto lo = nrm.at("lo").get<std::vector<double>>();
  auto hi = nrm.at("hi").get<std::vector<double>>();
  if (lo.size() != 4 || hi.size() != 4) {
    throw Error(ErrorCode::BadConfig, "normalizer must carry 4 ranges");
  }
  std::copy(lo.begin(), lo.end(), m.normalizer.lo);
  std::copy(hi.begin(), hi.end(), m.normalizer.hi);
  int expect_in = m.config.input_dim;
  const auto& layers = j.at("layers");
  if (!layers.is_array() ||
      layers.size() !=
          static_cast<std::size_t>(m.config.hidden_layers) + 1) {
    throw Error(ErrorCode::BadConfig, "layer count disagrees with config");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lj = layers[l];
    Layer ly;
    ly.in = lj.at("in").get<int>();
    ly.out = lj.at("out").get<int>();
    ly.w = lj.at("w").get<std::vector<double>>();
    ly.b = lj.at("b").get<std::vector<double>>();
    const int expect_out = l + 1 == layers.size() ? m.config.output_dim
                                                  : m.config.hidden_width;
    if (ly.in != expect_in || ly.out != expect_out ||
        ly.w.size() != static_cast<std::size_t>(ly.in) *
                           static_cast<std::size_t>(ly.out) ||
        ly.b.size() != static_cast<std::size_t>(ly.out)) {
      throw Error(ErrorCode::BadConfig, "layer shape chain is inconsistent");
    }
    for (double v : ly.w) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::BadConfig, "non-finite model parameter");
      }
    }
    for (double v : ly.b) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::BadConfig, "non-finite model parameter");
      }
    }
    expect_in = ly.out;
    m.layers.push_back(std::move(ly));
  }
  return m;
}

}  // namespace

void write_model_file(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << model_to_json(model).dump() << '\n';
}

MlpModel read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError,
                "model file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig,
                "model file '" + path + "' is missing fields: " + e.what());
  }
}

void write_history_csv(const std::vector<EpochStats>& history,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "epoch,train_loss,val_loss\n";
  for (const EpochStats& e : history) {
    out << e.epoch << ',' << fmt_double(e.train_loss) << ','
        << fmt_double(e.val_loss) << '\n';
  }
}

}  // namespace pgplan::nn
