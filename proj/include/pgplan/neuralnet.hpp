#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgplan/dataset.hpp"
#include "pgplan/reliability.hpp"

namespace pgplan::nn {

struct MlpConfig {
  int input_dim = 3;  // (x, y, i_d)
  int hidden_layers = 10;
  int hidden_width = 64;
  int output_dim = 1;
  std::uint64_t seed = 0;
};

// One affine stage: out × in weights (row-major) plus an out-vector of
// biases. Also reused as the gradient / Adam-moment container since the
// shapes mirror the parameters exactly.
struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

struct MlpModel {
  MlpConfig config;
  std::vector<Layer> layers;  // hidden_layers + 1 affine stages
  dataset::Normalizer normalizer;
  std::uint64_t train_seed = 0;  // shuffle seed of the run that produced it

  std::size_t parameter_count() const;
};

struct TrainConfig {
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lambda = 0.0;  // weight of the current-density penalty
  double j_max = 0.0;   // required whenever lambda > 0
  std::uint64_t shuffle_seed = 0;
  int patience = 0;  // early stop after this many stale epochs; 0 disables
};

struct AdamState {
  std::vector<Layer> m;
  std::vector<Layer> v;
  long long t = 0;
};

// Normalized training rows: x is n × input_dim row-major, y the normalized
// targets, i_d the physical currents feeding the density penalty.
struct Batch {
  std::size_t n = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> i_d;
};

struct LossBreakdown {
  double mse = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochStats> history;
};

struct Gradients {
  std::vector<Layer> layers;
};

// Seeded He-style initialization: weights ~ N(0, 2/fan_in), biases zero, the
// normalizer starts as identity (lo 0, hi 1).
MlpModel init(const MlpConfig& config);

// Inputs must be normalized; anything outside the [-0.5, 1.5] guard band
// raises NotNormalized.
double forward(const MlpModel& model, const double* x_norm);
std::vector<double> forward_batch(const MlpModel& model,
                                  const std::vector<double>& x_norm,
                                  std::size_t n);

// Normalizes (x, y, i_d) with the model's normalizer, forwards, denormalizes
// the width.
double predict_width(const MlpModel& model, double x, double y, double i_d);

LossBreakdown loss(const std::vector<double>& pred_norm,
                   const std::vector<double>& target_norm,
                   const std::vector<double>& i_d_physical,
                   const dataset::Normalizer& nrm, const TrainConfig& cfg);

Gradients backward(const MlpModel& model, const Batch& batch,
                   const TrainConfig& cfg);

AdamState make_adam_state(const MlpModel& model);
void adam_step(MlpModel& model, AdamState& state, const Gradients& grads,
               const TrainConfig& cfg);

// Mini-batch loop over the (already normalized) splits: shuffle, forward,
// loss, backward, Adam. Validation loss is recorded each epoch; with
// patience > 0 the best-validation snapshot is returned.
TrainResult train(const dataset::Dataset& train_ds,
                  const dataset::Dataset& val_ds, const MlpConfig& mcfg,
                  const TrainConfig& tcfg);

struct DlIrResult {
  std::vector<double> widths;    // predicted, after the floor clamp
  std::vector<double> currents;  // allocated per line
  std::vector<double> drops;     // per-line IR drop
  double worst_drop = 0.0;
  int worst_line = -1;
  std::size_t clamped = 0;
  double w_min = 0.0;
};

// Width prediction at each line's midpoint feature, then per-line Ohm's-law
// drops from the analytic block-current allocation. No linear solve.
// w_min = 0 selects the default floor: 1% of the training-set minimum width.
DlIrResult predict_ir_drop(const MlpModel& model,
                           const std::vector<reliability::PgLine>& lines,
                           const std::vector<reliability::BlockLoad>& blocks,
                           double rho, double w_min = 0.0);

// The drop computation alone, for externally supplied widths/currents.
std::vector<double> ir_from_widths(const std::vector<reliability::PgLine>& lines,
                                   const std::vector<double>& currents,
                                   const std::vector<double>& widths,
                                   double rho);

void write_model_file(const MlpModel& model, const std::string& path);
MlpModel read_model_file(const std::string& path);

void write_history_csv(const std::vector<EpochStats>& history,
                       const std::string& path);

}  // namespace pgplan::nn
