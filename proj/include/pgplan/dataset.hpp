#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pgplan/netlist.hpp"
#include "pgplan/solver.hpp"
#include "pgplan/synth.hpp"

namespace pgplan::dataset {

struct Sample {
  double x = 0.0;
  double y = 0.0;
  double i_d = 0.0;
  double w = 0.0;
};

// Per-feature min/max over (x, y, i_d, w). A collapsed feature (max == min)
// normalizes to 0 and denormalizes back to its constant.
struct Normalizer {
  double lo[4] = {0, 0, 0, 0};
  double hi[4] = {0, 0, 0, 0};

  bool constant(int f) const { return hi[f] <= lo[f]; }
  double norm(int f, double v) const {
    return constant(f) ? 0.0 : (v - lo[f]) / (hi[f] - lo[f]);
  }
  double denorm(int f, double v) const {
    return constant(f) ? lo[f] : v * (hi[f] - lo[f]) + lo[f];
  }
};

struct Dataset {
  std::vector<Sample> samples;
  std::optional<Normalizer> normalizer;  // set iff samples are normalized
  std::string source_tag;

  std::size_t size() const { return samples.size(); }
};

struct FeatureScan {
  double r2_x = 0.0;
  double r2_y = 0.0;
  double r2_i = 0.0;
  double r2_combined = 0.0;
};

struct PerturbationSpec {
  double gamma = 0.10;
  std::uint64_t seed = 0;
  bool branch_current = true;
  bool node_voltage = true;
  bool switching_current = true;
};

struct PerturbResult {
  netlist::PowerGridNetlist net;
  std::optional<synth::GridGeometry> geometry;
};

// One sample per resistor with coordinate-bearing endpoints: (x, y) is the
// branch midpoint. i_d is the geometry line's allocated current when a
// geometry is given, else the endpoint load sum, else the solved branch
// current magnitude. w is the golden width: the explicit per-branch widths
// when given, else rho*l/R (which reproduces generator widths exactly).
// strict=true raises NoCoordinates instead of skipping pattern-less nodes.
Dataset extract_features(const netlist::PowerGridNetlist& net,
                         const std::vector<double>& voltages,
                         const synth::GridGeometry* geometry,
                         const std::vector<double>* branch_widths,
                         double rho, bool strict = false);

double r2_score(const std::vector<double>& y_true,
                const std::vector<double>& y_pred);

FeatureScan feature_scan(const Dataset& ds);

PerturbResult perturb(const netlist::PowerGridNetlist& net,
                      const synth::GridGeometry* geometry,
                      const PerturbationSpec& spec);

// Flagged alternative to re-solving: scales per-node IR drops (and recomputes
// branch currents) on the existing solution.
solver::GridSolution perturb_solution_in_place(
    const netlist::PowerGridNetlist& net, const solver::GridSolution& sol,
    const PerturbationSpec& spec);

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  std::uint64_t seed);

// In-place min-max normalization to [0,1]; returns the fitted normalizer.
Normalizer normalize(Dataset& ds);
void denormalize(Dataset& ds);

void write_dataset_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(const std::string& path);
void write_normalizer_csv(const Normalizer& n, const std::string& path);
Normalizer read_normalizer_csv(const std::string& path);

}  // namespace pgplan::dataset
