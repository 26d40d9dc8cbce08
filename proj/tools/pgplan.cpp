#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgplan/dataset.hpp"
#include "pgplan/error.hpp"
#include "pgplan/metrics.hpp"
#include "pgplan/netlist.hpp"
#include "pgplan/neuralnet.hpp"
#include "pgplan/reliability.hpp"
#include "pgplan/solver.hpp"
#include "pgplan/synth.hpp"
#include "pgplan/util.hpp"

namespace {

constexpr const char* kToolVersion = "0.1.0";

using nlohmann::ordered_json;
using namespace pgplan;

// Every successful run records how it can be reproduced next to its primary
// output. No clocks: identical invocations write identical manifests.
struct Manifest {
  std::string command;
  ordered_json params = ordered_json::object();

  void set(const std::string& key, const ordered_json& v) { params[key] = v; }

  void write(const std::string& primary_output) const {
    ordered_json j;
    j["format_version"] = 1;
    j["tool"] = "pgplan";
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["parameters"] = params;
    const std::string path = primary_output + ".manifest.json";
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << j.dump(2) << '\n';
  }
};

netlist::PowerGridNetlist load_netlist(const std::string& path) {
  return netlist::parse_netlist_file(path);
}

solver::GridSolution run_solve(const netlist::PowerGridNetlist& net,
                               const solver::LinearSystem& sys, double tol,
                               int threads) {
  return solver::solve(net, sys, tol, 0, threads);
}

// ---------------------------------------------------------------- generate

int cmd_generate(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "generate", "Build a synthetic power grid netlist with golden widths");
  auto spec = std::make_shared<synth::SyntheticGridSpec>();
  auto layout = std::make_shared<synth::RandomLayout>();
  auto out_netlist = std::make_shared<std::string>();
  auto out_geometry = std::make_shared<std::string>();
  auto placement = std::make_shared<std::string>("tap-per-line");

  cmd->add_option("--rows", spec->rows, "Grid rows")->capture_default_str();
  cmd->add_option("--cols", spec->cols, "Grid columns")->capture_default_str();
  cmd->add_option("--pitch", spec->pitch, "Line pitch (coordinate units)")
      ->capture_default_str();
  cmd->add_option("--rho", spec->sheet_resistance, "Sheet resistance (ohm/sq)")
      ->capture_default_str();
  cmd->add_option("--base-width", spec->base_width,
                  "Width of unloaded boundary lines")
      ->capture_default_str();
  cmd->add_option("--core-width", spec->core_width,
                  "Ring width budget (0 disables the check)")
      ->capture_default_str();
  cmd->add_option("--vdd", spec->vdd, "Supply voltage")->capture_default_str();
  cmd->add_option("--seed", spec->seed, "Floorplan seed")
      ->capture_default_str();
  cmd->add_option("--ir-budget", spec->ir_budget,
                  "Per-line IR budget in volts (0 selects 5% of vdd)")
      ->capture_default_str();
  cmd->add_option("--budget-taper", spec->budget_taper,
                  "Positional tightening of the IR budget")
      ->capture_default_str();
  cmd->add_option("--width-step", spec->width_step,
                  "Quantize widths to this step (0 disables)")
      ->capture_default_str();
  cmd->add_option("--load-placement", *placement,
                  "tap-per-line | nearest-node")
      ->check(CLI::IsMember({"tap-per-line", "nearest-node"}))
      ->capture_default_str();
  cmd->add_option("--hot-blocks", layout->hot_blocks, "Clustered strong blocks")
      ->capture_default_str();
  cmd->add_option("--background-blocks", layout->background_blocks,
                  "Weak blocks spread over the die")
      ->capture_default_str();
  cmd->add_option("--hot-span", layout->hot_span_lines,
                  "Hot block edge length in line pitches")
      ->capture_default_str();
  cmd->add_option("--background-span", layout->background_span_lines,
                  "Background block edge length in line pitches")
      ->capture_default_str();
  cmd->add_option("--hot-scale", layout->hot_scale, "Hot current multiplier")
      ->capture_default_str();
  cmd->add_option("--background-scale", layout->background_scale,
                  "Background current multiplier")
      ->capture_default_str();
  cmd->add_option("--current-lo", layout->current_lo,
                  "Block current draw lower bound (amps)")
      ->capture_default_str();
  cmd->add_option("--current-hi", layout->current_hi,
                  "Block current draw upper bound (amps)")
      ->capture_default_str();
  cmd->add_option("--out-netlist", *out_netlist, "Netlist output path")
      ->required();
  cmd->add_option("--out-geometry", *out_geometry,
                  "Geometry sidecar output path")
      ->required();

  cmd->callback([=]() {
    spec->load_placement = *placement == "nearest-node"
                               ? synth::LoadPlacement::nearest_node
                               : synth::LoadPlacement::tap_per_line;
    synth::random_blocks(*spec, *layout);
    synth::SynthResult res = synth::generate_synthetic(*spec);
    netlist::write_netlist_file(res.net, *out_netlist);
    synth::write_geometry_file(res.geometry, *out_geometry);

    Manifest m;
    m.command = "generate";
    m.set("rows", spec->rows);
    m.set("cols", spec->cols);
    m.set("pitch", spec->pitch);
    m.set("rho", spec->sheet_resistance);
    m.set("base_width", spec->base_width);
    m.set("core_width", spec->core_width);
    m.set("vdd", spec->vdd);
    m.set("seed", spec->seed);
    m.set("ir_budget", spec->ir_budget);
    m.set("budget_taper", spec->budget_taper);
    m.set("width_step", spec->width_step);
    m.set("load_placement", *placement);
    m.set("hot_blocks", layout->hot_blocks);
    m.set("background_blocks", layout->background_blocks);
    m.set("hot_span", layout->hot_span_lines);
    m.set("background_span", layout->background_span_lines);
    m.set("hot_scale", layout->hot_scale);
    m.set("background_scale", layout->background_scale);
    m.set("current_lo", layout->current_lo);
    m.set("current_hi", layout->current_hi);
    m.set("out_netlist", *out_netlist);
    m.set("out_geometry", *out_geometry);
    m.write(*out_netlist);

    std::cout << "generated " << res.net.count_nodes() << " nodes, "
              << res.net.count_resistors() << " resistors, "
              << res.net.count_pads() << " pads, " << res.net.count_loads()
              << " loads; " << res.geometry.line_count() << " lines\n";
  });
  return 0;
}

// ----------------------------------------------------------------- analyze

int cmd_analyze(CLI::App& app, const std::shared_ptr<int>& threads) {
  auto* cmd = app.add_subcommand(
      "analyze", "Static IR-drop analysis of a power grid netlist");
  auto in_netlist = std::make_shared<std::string>();
  auto out_solution = std::make_shared<std::string>();
  auto map_csv = std::make_shared<std::string>();
  auto map_pgm = std::make_shared<std::string>();
  auto tol = std::make_shared<double>(solver::kDefaultTol);
  auto resolution = std::make_shared<int>(16);
  auto aggregate = std::make_shared<std::string>("max");

  cmd->add_option("--netlist", *in_netlist, "Netlist input path")->required();
  cmd->add_option("--out-solution", *out_solution, "Solution output path")
      ->required();
  cmd->add_option("--out-map-csv", *map_csv, "IR raster CSV output path");
  cmd->add_option("--out-map-pgm", *map_pgm, "IR raster PGM output path");
  cmd->add_option("--tol", *tol, "CG relative tolerance")
      ->capture_default_str();
  cmd->add_option("--resolution", *resolution, "Raster cells per side")
      ->capture_default_str();
  cmd->add_option("--aggregate", *aggregate, "Raster cell aggregate")
      ->check(CLI::IsMember({"max", "mean"}))
      ->capture_default_str();

  cmd->callback([=]() {
    netlist::PowerGridNetlist net = load_netlist(*in_netlist);
    solver::LinearSystem sys = solver::assemble(net);
    solver::GridSolution sol = run_solve(net, sys, *tol, *threads);
    solver::IrDropResult ir = solver::ir_drop(sol, net);
    solver::KclReport kcl = solver::kcl_check(net, sys, sol);
    solver::write_solution_file(net, sol, ir, *out_solution);
    if (!map_csv->empty() || !map_pgm->empty()) {
      metrics::CellAggregate agg = *aggregate == "mean"
                                       ? metrics::CellAggregate::mean
                                       : metrics::CellAggregate::max;
      metrics::IrMap map =
          metrics::ir_map_from_solution(net, ir.drop, *resolution, agg);
      if (!map_csv->empty()) metrics::write_raster_csv(map, *map_csv);
      if (!map_pgm->empty()) metrics::write_raster_pgm(map, *map_pgm);
    }

    Manifest m;
    m.command = "analyze";
    m.set("netlist", *in_netlist);
    m.set("tol", *tol);
    m.set("resolution", *resolution);
    m.set("aggregate", *aggregate);
    m.set("out_solution", *out_solution);
    if (!map_csv->empty()) m.set("out_map_csv", *map_csv);
    if (!map_pgm->empty()) m.set("out_map_pgm", *map_pgm);
    m.write(*out_solution);

    std::cout << "solved " << sys.dim << " unknowns in " << sol.stats.iterations
              << " iterations (rel residual "
              << fmt_double(sol.stats.relative_residual) << ")\n"
              << "worst-case IR drop " << fmt_double(ir.worst_case) << " V at "
              << (ir.worst_node >= 0 ? net.node(ir.worst_node).name
                                     : std::string("-"))
              << "\nKCL max residual " << fmt_double(kcl.max_residual)
              << " A\n";
  });
  return 0;
}

// ----------------------------------------------------------------- extract

int cmd_extract(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "extract", "Extract (x, y, i_d, w) training rows from a solved grid");
  auto in_netlist = std::make_shared<std::string>();
  auto in_solution = std::make_shared<std::string>();
  auto in_geometry = std::make_shared<std::string>();
  auto out_dataset = std::make_shared<std::string>();
  auto rho = std::make_shared<double>(0.0);
  auto strict = std::make_shared<bool>(false);

  cmd->add_option("--netlist", *in_netlist, "Netlist input path")->required();
  cmd->add_option("--solution", *in_solution,
                  "Solution file (for branch-current fallbacks)");
  cmd->add_option("--geometry", *in_geometry,
                  "Geometry sidecar (line currents + rho)");
  cmd->add_option("--rho", *rho, "Sheet resistance when no geometry is given");
  cmd->add_flag("--strict", *strict,
                "Fail on nodes without coordinate-bearing names");
  cmd->add_option("--out", *out_dataset, "Dataset CSV output path")
      ->required();

  cmd->callback([=]() {
    netlist::PowerGridNetlist net = load_netlist(*in_netlist);
    std::optional<synth::GridGeometry> geo;
    if (!in_geometry->empty()) {
      geo = synth::read_geometry_file(*in_geometry);
    } else if (!(*rho > 0.0)) {
      throw Error(ErrorCode::BadConfig,
                  "--rho must be positive when no --geometry is given");
    }
    std::vector<double> volts;
    if (!in_solution->empty()) {
      volts = solver::read_solution_file(net, *in_solution);
    }
    dataset::Dataset ds = dataset::extract_features(
        net, volts, geo ? &*geo : nullptr, nullptr,
        geo ? geo->rho : *rho, *strict);
    ds.source_tag = *in_netlist;
    dataset::write_dataset_csv(ds, *out_dataset);

    Manifest m;
    m.command = "extract";
    m.set("netlist", *in_netlist);
    if (!in_solution->empty()) m.set("solution", *in_solution);
    if (!in_geometry->empty()) m.set("geometry", *in_geometry);
    m.set("rho", geo ? geo->rho : *rho);
    m.set("strict", *strict);
    m.set("out", *out_dataset);
    m.write(*out_dataset);

    std::cout << "extracted " << ds.size() << " samples\n";
  });
  return 0;
}

// ----------------------------------------------------------------- perturb

int cmd_perturb(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "perturb", "Randomized test-grid variation within a fractional bound");
  auto in_netlist = std::make_shared<std::string>();
  auto in_geometry = std::make_shared<std::string>();
  auto in_solution = std::make_shared<std::string>();
  auto out_netlist = std::make_shared<std::string>();
  auto out_geometry = std::make_shared<std::string>();
  auto out_solution = std::make_shared<std::string>();
  auto spec = std::make_shared<dataset::PerturbationSpec>();
  auto targets = std::make_shared<std::vector<std::string>>();
  auto in_place = std::make_shared<bool>(false);

  cmd->add_option("--netlist", *in_netlist, "Netlist input path")->required();
  cmd->add_option("--geometry", *in_geometry, "Geometry sidecar input path");
  cmd->add_option("--solution", *in_solution,
                  "Solution input (only with --in-place)");
  cmd->add_option("--gamma", spec->gamma, "Fractional perturbation bound")
      ->capture_default_str();
  cmd->add_option("--seed", spec->seed, "Perturbation seed")
      ->capture_default_str();
  cmd->add_option("--targets", *targets,
                  "Subset of {branch_current,node_voltage,switching_current}")
      ->delimiter(',');
  cmd->add_flag("--in-place", *in_place,
                "Scale the existing solution instead of changing the grid");
  cmd->add_option("--out-netlist", *out_netlist, "Perturbed netlist path");
  cmd->add_option("--out-geometry", *out_geometry, "Perturbed geometry path");
  cmd->add_option("--out-solution", *out_solution,
                  "Perturbed solution path (only with --in-place)");

  cmd->callback([=]() {
    if (!targets->empty()) {
      spec->branch_current = false;
      spec->node_voltage = false;
      spec->switching_current = false;
      for (const std::string& t : *targets) {
        if (t == "branch_current") {
          spec->branch_current = true;
        } else if (t == "node_voltage") {
          spec->node_voltage = true;
        } else if (t == "switching_current") {
          spec->switching_current = true;
        } else {
          throw Error(ErrorCode::BadConfig,
                      "unknown perturbation target '" + t + "'");
        }
      }
    }
    netlist::PowerGridNetlist net = load_netlist(*in_netlist);

    Manifest m;
    m.command = "perturb";
    m.set("netlist", *in_netlist);
    m.set("gamma", spec->gamma);
    m.set("seed", spec->seed);
    m.set("branch_current", spec->branch_current);
    m.set("node_voltage", spec->node_voltage);
    m.set("switching_current", spec->switching_current);
    m.set("in_place", *in_place);

    if (*in_place) {
      if (in_solution->empty() || out_solution->empty()) {
        throw Error(ErrorCode::BadConfig,
                    "--in-place needs --solution and --out-solution");
      }
      std::vector<double> volts = solver::read_solution_file(net, *in_solution);
      solver::GridSolution sol;
      sol.voltages = volts;
      sol.branch_currents.assign(net.resistors.size(), 0.0);
      for (std::size_t i = 0; i < net.resistors.size(); ++i) {
        const auto& br = net.resistors[i];
        if (!br.shorted && br.resistance > 0.0) {
          sol.branch_currents[i] =
              (volts[static_cast<std::size_t>(br.a)] -
               volts[static_cast<std::size_t>(br.b)]) /
              br.resistance;
        }
      }
      solver::GridSolution scaled =
          dataset::perturb_solution_in_place(net, sol, *spec);
      solver::IrDropResult ir = solver::ir_drop(scaled, net);
      solver::write_solution_file(net, scaled, ir, *out_solution);
      m.set("solution", *in_solution);
      m.set("out_solution", *out_solution);
      m.write(*out_solution);
      std::cout << "perturbed solution written\n";
      return;
    }

    if (out_netlist->empty()) {
      throw Error(ErrorCode::BadConfig, "--out-netlist is required");
    }
    std::optional<synth::GridGeometry> geo;
    if (!in_geometry->empty()) geo = synth::read_geometry_file(*in_geometry);
    dataset::PerturbResult res =
        dataset::perturb(net, geo ? &*geo : nullptr, *spec);
    netlist::write_netlist_file(res.net, *out_netlist);
    if (!out_geometry->empty()) {
      if (!res.geometry) {
        throw Error(ErrorCode::BadConfig,
                    "--out-geometry needs --geometry on the input side");
      }
      synth::write_geometry_file(*res.geometry, *out_geometry);
    }
    if (!in_geometry->empty()) m.set("geometry", *in_geometry);
    m.set("out_netlist", *out_netlist);
    if (!out_geometry->empty()) m.set("out_geometry", *out_geometry);
    m.write(*out_netlist);
    std::cout << "perturbed netlist written\n";
  });
  return 0;
}

// ------------------------------------------------------------------- train

int cmd_train(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "train", "Fit the width-prediction model on an extracted dataset");
  auto in_dataset = std::make_shared<std::string>();
  auto out_model = std::make_shared<std::string>();
  auto out_history = std::make_shared<std::string>();
  auto mcfg = std::make_shared<nn::MlpConfig>();
  auto tcfg = std::make_shared<nn::TrainConfig>();
  auto split_fraction = std::make_shared<double>(0.8);
  auto split_seed = std::make_shared<std::uint64_t>(1);

  cmd->add_option("--dataset", *in_dataset, "Dataset CSV input path")
      ->required();
  cmd->add_option("--out-model", *out_model, "Model JSON output path")
      ->required();
  cmd->add_option("--out-history", *out_history, "History CSV output path");
  cmd->add_option("--hidden-layers", mcfg->hidden_layers, "Hidden layer count")
      ->capture_default_str();
  cmd->add_option("--hidden-width", mcfg->hidden_width, "Units per hidden layer")
      ->capture_default_str();
  cmd->add_option("--init-seed", mcfg->seed, "Weight initialization seed")
      ->capture_default_str();
  cmd->add_option("--epochs", tcfg->epochs, "Training epochs")
      ->capture_default_str();
  cmd->add_option("--batch", tcfg->batch_size, "Mini-batch size")
      ->capture_default_str();
  cmd->add_option("--lr", tcfg->learning_rate, "Learning rate")
      ->capture_default_str();
  cmd->add_option("--beta1", tcfg->beta1, "Adam first-moment decay")
      ->capture_default_str();
  cmd->add_option("--beta2", tcfg->beta2, "Adam second-moment decay")
      ->capture_default_str();
  cmd->add_option("--eps", tcfg->epsilon, "Adam epsilon")
      ->capture_default_str();
  cmd->add_option("--lambda", tcfg->lambda, "Current-density penalty weight")
      ->capture_default_str();
  cmd->add_option("--j-max", tcfg->j_max,
                  "Max current density (required when lambda > 0)")
      ->capture_default_str();
  cmd->add_option("--shuffle-seed", tcfg->shuffle_seed, "Epoch shuffle seed")
      ->capture_default_str();
  cmd->add_option("--patience", tcfg->patience,
                  "Early-stop patience in epochs (0 disables)")
      ->capture_default_str();
  cmd->add_option("--split", *split_fraction, "Training fraction of the data")
      ->capture_default_str();
  cmd->add_option("--split-seed", *split_seed, "Train/validation split seed")
      ->capture_default_str();

  cmd->callback([=]() {
    dataset::Dataset ds = dataset::read_dataset_csv(*in_dataset);
    dataset::normalize(ds);
    auto [train_ds, val_ds] = dataset::split(ds, *split_fraction, *split_seed);
    nn::TrainResult res = nn::train(train_ds, val_ds, *mcfg, *tcfg);
    nn::write_model_file(res.model, *out_model);
    if (!out_history->empty()) {
      nn::write_history_csv(res.history, *out_history);
    }

    Manifest m;
    m.command = "train";
    m.set("dataset", *in_dataset);
    m.set("hidden_layers", mcfg->hidden_layers);
    m.set("hidden_width", mcfg->hidden_width);
    m.set("init_seed", mcfg->seed);
    m.set("epochs", tcfg->epochs);
    m.set("batch", tcfg->batch_size);
    m.set("lr", tcfg->learning_rate);
    m.set("beta1", tcfg->beta1);
    m.set("beta2", tcfg->beta2);
    m.set("eps", tcfg->epsilon);
    m.set("lambda", tcfg->lambda);
    m.set("j_max", tcfg->j_max);
    m.set("shuffle_seed", tcfg->shuffle_seed);
    m.set("patience", tcfg->patience);
    m.set("split", *split_fraction);
    m.set("split_seed", *split_seed);
    m.set("out_model", *out_model);
    if (!out_history->empty()) m.set("out_history", *out_history);
    m.write(*out_model);

    if (res.history.empty()) {
      std::cout << "trained 0 epochs (initialized model written)\n";
    } else {
      const nn::EpochStats& last = res.history.back();
      std::cout << "trained " << last.epoch << " epochs; final train loss "
                << fmt_double(last.train_loss) << ", val loss "
                << fmt_double(last.val_loss) << '\n';
    }
  });
  return 0;
}

// ----------------------------------------------------------------- predict

int cmd_predict(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "predict", "Predict line widths and IR drop without a linear solve");
  auto in_model = std::make_shared<std::string>();
  auto in_geometry = std::make_shared<std::string>();
  auto in_netlist = std::make_shared<std::string>();
  auto out_widths = std::make_shared<std::string>();
  auto out_report = std::make_shared<std::string>();
  auto map_csv = std::make_shared<std::string>();
  auto map_pgm = std::make_shared<std::string>();
  auto resolution = std::make_shared<int>(16);
  auto w_min = std::make_shared<double>(0.0);

  cmd->add_option("--model", *in_model, "Model JSON input path")->required();
  cmd->add_option("--geometry", *in_geometry, "Geometry sidecar input path")
      ->required();
  cmd->add_option("--netlist", *in_netlist,
                  "Netlist (enables the predicted node-drop raster)");
  cmd->add_option("--out-widths", *out_widths, "Per-line widths CSV path")
      ->required();
  cmd->add_option("--out-report", *out_report, "Prediction report JSON path");
  cmd->add_option("--out-map-csv", *map_csv, "Predicted raster CSV path");
  cmd->add_option("--out-map-pgm", *map_pgm, "Predicted raster PGM path");
  cmd->add_option("--resolution", *resolution, "Raster cells per side")
      ->capture_default_str();
  cmd->add_option("--w-min", *w_min,
                  "Width floor for predictions (0 selects 1% of training min)")
      ->capture_default_str();

  cmd->callback([=]() {
    nn::MlpModel model = nn::read_model_file(*in_model);
    synth::GridGeometry geo = synth::read_geometry_file(*in_geometry);
    nn::DlIrResult res =
        nn::predict_ir_drop(model, geo.lines, geo.blocks, geo.rho, *w_min);
    if (res.clamped > 0) {
      std::cerr << "warning: " << res.clamped
                << " predictions raised to the width floor "
                << fmt_double(res.w_min) << '\n';
    }

    {
      std::ofstream out(*out_widths);
      if (!out) {
        throw Error(ErrorCode::IoError, "cannot write '" + *out_widths + "'");
      }
      out << "index,orientation,position,length,current,golden_width,"
             "predicted_width,ir_drop\n";
      for (std::size_t i = 0; i < geo.lines.size(); ++i) {
        const auto& ln = geo.lines[i];
        out << ln.index << ',' << ln.orientation << ','
            << fmt_double(ln.position) << ',' << fmt_double(ln.length) << ','
            << fmt_double(res.currents[i]) << ',' << fmt_double(ln.width)
            << ',' << fmt_double(res.widths[i]) << ','
            << fmt_double(res.drops[i]) << '\n';
      }
    }

    if (!out_report->empty()) {
      ordered_json j;
      j["format_version"] = 1;
      j["lines"] = geo.lines.size();
      j["worst_drop"] = res.worst_drop;
      j["worst_line"] = res.worst_line;
      j["clamped"] = res.clamped;
      j["w_min"] = res.w_min;
      std::ofstream out(*out_report);
      if (!out) {
        throw Error(ErrorCode::IoError, "cannot write '" + *out_report + "'");
      }
      out << j.dump(2) << '\n';
    }

    if (!map_csv->empty() || !map_pgm->empty()) {
      if (in_netlist->empty()) {
        throw Error(ErrorCode::BadConfig,
                    "raster outputs need --netlist for node coordinates");
      }
      netlist::PowerGridNetlist net = load_netlist(*in_netlist);
      std::vector<double> drops = metrics::dl_node_drops(geo, net, res.widths);
      metrics::IrMap map =
          metrics::ir_map_from_solution(net, drops, *resolution);
      if (!map_csv->empty()) metrics::write_raster_csv(map, *map_csv);
      if (!map_pgm->empty()) metrics::write_raster_pgm(map, *map_pgm);
    }

    Manifest m;
    m.command = "predict";
    m.set("model", *in_model);
    m.set("geometry", *in_geometry);
    if (!in_netlist->empty()) m.set("netlist", *in_netlist);
    m.set("w_min", *w_min);
    m.set("resolution", *resolution);
    m.set("out_widths", *out_widths);
    if (!out_report->empty()) m.set("out_report", *out_report);
    if (!map_csv->empty()) m.set("out_map_csv", *map_csv);
    if (!map_pgm->empty()) m.set("out_map_pgm", *map_pgm);
    m.write(*out_widths);

    std::cout << "predicted " << geo.lines.size() << " line widths; worst IR "
              << fmt_double(res.worst_drop) << " V\n";
  });
  return 0;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(CLI::App& app, const std::shared_ptr<int>& threads) {
  auto* cmd = app.add_subcommand(
      "evaluate", "Score a model against golden widths and the solved grid");
  auto in_model = std::make_shared<std::string>();
  auto in_dataset = std::make_shared<std::string>();
  auto in_netlist = std::make_shared<std::string>();
  auto in_geometry = std::make_shared<std::string>();
  auto out_report = std::make_shared<std::string>();
  auto out_scatter = std::make_shared<std::string>();
  auto out_histogram = std::make_shared<std::string>();
  auto out_map_conv = std::make_shared<std::string>();
  auto out_map_dl = std::make_shared<std::string>();
  auto bins = std::make_shared<int>(50);
  auto resolution = std::make_shared<int>(16);
  auto tol = std::make_shared<double>(solver::kDefaultTol);
  auto report_memory = std::make_shared<bool>(false);

  cmd->add_option("--model", *in_model, "Model JSON input path")->required();
  cmd->add_option("--dataset", *in_dataset, "Dataset CSV with golden widths")
      ->required();
  cmd->add_option("--netlist", *in_netlist,
                  "Netlist (enables the IR-drop comparison)");
  cmd->add_option("--geometry", *in_geometry,
                  "Geometry sidecar (enables the IR-drop comparison)");
  cmd->add_option("--out-report", *out_report, "EvalReport JSON path")
      ->required();
  cmd->add_option("--out-scatter", *out_scatter, "Scatter CSV path");
  cmd->add_option("--out-histogram", *out_histogram, "Histogram CSV path");
  cmd->add_option("--out-map-conventional", *out_map_conv,
                  "Conventional raster CSV path");
  cmd->add_option("--out-map-predicted", *out_map_dl,
                  "Predicted raster CSV path");
  cmd->add_option("--bins", *bins, "Histogram bin count")
      ->capture_default_str();
  cmd->add_option("--resolution", *resolution, "Raster cells per side")
      ->capture_default_str();
  cmd->add_option("--tol", *tol, "CG relative tolerance")
      ->capture_default_str();
  cmd->add_flag("--memory", *report_memory,
                "Include the peak process memory column");

  cmd->callback([=]() {
    nn::MlpModel model = nn::read_model_file(*in_model);
    dataset::Dataset ds = dataset::read_dataset_csv(*in_dataset);
    const dataset::Normalizer& nrm = model.normalizer;

    const std::size_t n = ds.size();
    std::vector<double> xin(n * 3);
    std::vector<double> target_norm(n), target_phys(n);
    for (std::size_t i = 0; i < n; ++i) {
      const dataset::Sample& s = ds.samples[i];
      xin[i * 3 + 0] = nrm.norm(0, s.x);
      xin[i * 3 + 1] = nrm.norm(1, s.y);
      xin[i * 3 + 2] = nrm.norm(2, s.i_d);
      target_norm[i] = nrm.norm(3, s.w);
      target_phys[i] = s.w;
    }
    std::vector<double> pred_norm = nn::forward_batch(model, xin, n);
    std::vector<double> pred_phys(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred_phys[i] = nrm.denorm(3, pred_norm[i]);
    }

    metrics::EvalReport report;
    report.mse_normalized = metrics::mse(target_norm, pred_norm);
    report.mse_physical = metrics::mse(target_phys, pred_phys);
    report.r2 = dataset::r2_score(target_phys, pred_phys);
    report.histogram = metrics::error_histogram(target_phys, pred_phys, *bins);

    const bool with_ir = !in_netlist->empty() && !in_geometry->empty();
    if (with_ir) {
      netlist::PowerGridNetlist net = load_netlist(*in_netlist);
      synth::GridGeometry geo = synth::read_geometry_file(*in_geometry);

      solver::LinearSystem sys = solver::assemble(net);
      solver::GridSolution sol = run_solve(net, sys, *tol, *threads);
      solver::IrDropResult ir = solver::ir_drop(sol, net);
      report.worst_case_ir_conventional = ir.worst_case;

      nn::DlIrResult dl =
          nn::predict_ir_drop(model, geo.lines, geo.blocks, geo.rho);
      std::vector<double> dl_drops = metrics::dl_node_drops(geo, net, dl.widths);
      double dl_worst = 0.0;
      for (double d : dl_drops) dl_worst = std::max(dl_worst, d);
      report.worst_case_ir_predicted = dl_worst;

      if (!out_map_conv->empty()) {
        metrics::write_raster_csv(
            metrics::ir_map_from_solution(net, ir.drop, *resolution),
            *out_map_conv);
      }
      if (!out_map_dl->empty()) {
        metrics::write_raster_csv(
            metrics::ir_map_from_solution(net, dl_drops, *resolution),
            *out_map_dl);
      }
    } else if (!out_map_conv->empty() || !out_map_dl->empty()) {
      throw Error(ErrorCode::BadConfig,
                  "raster outputs need both --netlist and --geometry");
    }

    if (*report_memory) report.peak_memory_mib = peak_memory_mib();
    metrics::write_eval_report(report, *out_report);
    if (!out_scatter->empty()) {
      metrics::write_scatter_csv(target_phys, pred_phys, *out_scatter);
    }
    if (!out_histogram->empty()) {
      metrics::write_histogram_csv(report.histogram, *out_histogram);
    }

    Manifest m;
    m.command = "evaluate";
    m.set("model", *in_model);
    m.set("dataset", *in_dataset);
    if (with_ir) {
      m.set("netlist", *in_netlist);
      m.set("geometry", *in_geometry);
      m.set("tol", *tol);
    }
    m.set("bins", *bins);
    m.set("resolution", *resolution);
    m.set("out_report", *out_report);
    if (!out_scatter->empty()) m.set("out_scatter", *out_scatter);
    if (!out_histogram->empty()) m.set("out_histogram", *out_histogram);
    if (!out_map_conv->empty()) m.set("out_map_conventional", *out_map_conv);
    if (!out_map_dl->empty()) m.set("out_map_predicted", *out_map_dl);
    m.write(*out_report);

    std::cout << "r2 " << fmt_double(report.r2) << ", normalized MSE "
              << fmt_double(report.mse_normalized) << " over " << n
              << " samples\n";
  });
  return 0;
}

// ------------------------------------------------------------------- bench

int cmd_bench(CLI::App& app, const std::shared_ptr<int>& threads) {
  auto* cmd = app.add_subcommand(
      "bench", "Time the conventional solve against the prediction path");
  auto in_netlist = std::make_shared<std::string>();
  auto in_geometry = std::make_shared<std::string>();
  auto in_model = std::make_shared<std::string>();
  auto out_report = std::make_shared<std::string>();
  auto tol = std::make_shared<double>(solver::kDefaultTol);
  auto report_memory = std::make_shared<bool>(false);

  cmd->add_option("--netlist", *in_netlist, "Netlist input path")->required();
  cmd->add_option("--geometry", *in_geometry, "Geometry sidecar input path")
      ->required();
  cmd->add_option("--model", *in_model, "Model JSON input path")->required();
  cmd->add_option("--out", *out_report, "Timing report JSON path")->required();
  cmd->add_option("--tol", *tol, "CG relative tolerance")
      ->capture_default_str();
  cmd->add_flag("--memory", *report_memory,
                "Include the peak process memory column");

  cmd->callback([=]() {
    netlist::PowerGridNetlist net = load_netlist(*in_netlist);
    synth::GridGeometry geo = synth::read_geometry_file(*in_geometry);
    nn::MlpModel model = nn::read_model_file(*in_model);

    Timer conv_timer;
    solver::LinearSystem sys = solver::assemble(net);
    solver::GridSolution sol = run_solve(net, sys, *tol, *threads);
    solver::IrDropResult ir = solver::ir_drop(sol, net);
    const double conv_seconds = conv_timer.seconds();

    Timer dl_timer;
    nn::DlIrResult dl =
        nn::predict_ir_drop(model, geo.lines, geo.blocks, geo.rho);
    const double dl_seconds = dl_timer.seconds();

    metrics::Timing timing = metrics::timing_report(
        std::max(conv_seconds, 1e-9), std::max(dl_seconds, 1e-9));

    ordered_json j;
    j["format_version"] = 1;
    j["unknowns"] = sys.dim;
    j["lines"] = geo.lines.size();
    j["conventional_seconds"] = timing.conventional_seconds;
    j["dl_seconds"] = timing.dl_seconds;
    j["speedup"] = timing.speedup;
    j["conventional_worst_ir"] = ir.worst_case;
    j["dl_worst_ir"] = dl.worst_drop;
    j["cg_iterations"] = sol.stats.iterations;
    if (*report_memory) {
      auto mem = peak_memory_mib();
      if (mem) j["peak_memory_mib"] = *mem;
    }
    std::ofstream out(*out_report);
    if (!out) {
      throw Error(ErrorCode::IoError, "cannot write '" + *out_report + "'");
    }
    out << j.dump(2) << '\n';

    Manifest m;
    m.command = "bench";
    m.set("netlist", *in_netlist);
    m.set("geometry", *in_geometry);
    m.set("model", *in_model);
    m.set("tol", *tol);
    m.set("out", *out_report);
    m.write(*out_report);

    std::cout << "conventional " << fmt_double(timing.conventional_seconds)
              << " s, dl " << fmt_double(timing.dl_seconds) << " s, speedup "
              << fmt_double(timing.speedup) << "x\n";
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power grid planning: conventional IR-drop analysis and a "
               "learned width/IR prediction path"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "Flat key = value configuration file");
  app.require_subcommand(1);
  app.fallthrough();

  auto threads = std::make_shared<int>(1);
  app.add_option("--threads", *threads, "Worker thread count")
      ->envname("PGPLAN_THREADS")
      ->capture_default_str();

  cmd_generate(app);
  cmd_analyze(app, threads);
  cmd_extract(app);
  cmd_perturb(app);
  cmd_train(app);
  cmd_predict(app);
  cmd_evaluate(app, threads);
  cmd_bench(app, threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const pgplan::Error& e) {
    std::cerr << "ERROR " << pgplan::error_code_name(e.code()) << ": "
              << e.detail() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERROR Internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
