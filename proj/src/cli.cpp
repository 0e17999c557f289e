#include "stmtl/cli.hpp"

#include "stmtl/checkpoint.hpp"
#include "stmtl/config.hpp"
#include "stmtl/csv.hpp"
#include "stmtl/error.hpp"
#include "stmtl/experiments.hpp"
#include "stmtl/field_csv.hpp"
#include "stmtl/heatmap.hpp"
#include "stmtl/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace stmtl {

namespace fs = std::filesystem;

namespace {

/// Settings shared by every verb that reads a run configuration.
struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> assignments;
  std::optional<double> lambda;
  std::optional<double> radius;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "Run configuration file")->check(CLI::ExistingFile);
    cmd.add_option("--set", assignments, "Override a configuration value, key=value")
        ->take_all();
    cmd.add_option("--lambda", lambda, "Spatial regularization strength");
    cmd.add_option("--radius", radius, "Neighborhood radius in grid cells");
    cmd.add_option("--epochs", epochs, "Maximum training epochs");
    cmd.add_option("--learning-rate", learning_rate, "Optimizer step size");
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    for (const std::string& a : assignments) apply_assignment(c, a);
    if (lambda) c.lambda = *lambda;
    if (radius) c.radius = *radius;
    if (epochs) c.train.epochs = *epochs;
    if (learning_rate) c.train.learning_rate = *learning_rate;
    return c;
  }
};

std::vector<std::optional<double>> yields_of_task(const FieldDataset& data, std::size_t task) {
  std::vector<std::optional<double>> values(data.grid.region_count());
  for (const Sample& s : data.samples)
    if (s.task == task) values[s.region] = s.yield;
  return values;
}

void check_compatible(const Checkpoint& cp, const FieldDataset& data) {
  if (cp.soil_columns != data.soil_columns)
    throw ValidationError("dataset soil columns differ from the checkpoint");
  if (cp.windows != data.windows)
    throw ValidationError("dataset has " + std::to_string(data.windows) +
                          " weather windows, checkpoint expects " + std::to_string(cp.windows));
  for (const std::string& t : data.tasks)
    if (std::find(cp.model.tasks().begin(), cp.model.tasks().end(), t) == cp.model.tasks().end())
      throw ValidationError("task " + t + " is not in the checkpoint");
}

int cmd_synth(const SynthOptions& opts, const std::string& out_path, std::ostream& out) {
  const SynthField f = synth_field(opts);
  write_field_csv(f.data, out_path);
  out << "wrote " << f.data.samples.size() << " rows to " << out_path << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& config, const std::string& data_path, const std::string& model,
              std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
  const ModelKind kind = parse_model(model);
  if (kind != ModelKind::spatial_mtl && kind != ModelKind::mtl)
    throw std::invalid_argument("train supports spatial_mtl and mtl; use experiment for baselines");
  const FieldDataset raw = load_field_csv(data_path, config.season);
  const PreparedData data = prepare_data(raw, config, seed);
  const TrainResult r = fit_network(data, config, config.sources, kind == ModelKind::spatial_mtl, seed);

  save_checkpoint({r.model, data.norm, raw.soil_columns, raw.windows}, out_dir / "model.ckpt");
  csv::write_text(out_dir / "history.csv", history_csv(r.history, r.model.tasks()));
  const auto preds = network_predictions(r.model, data.test, data.norm);
  csv::write_text(out_dir / "predictions.csv", prediction_csv(preds));
  const auto rows = score_by_task(model, preds, data.test_raw);
  csv::write_text(out_dir / "metrics.csv", metrics_csv(rows));
  csv::write_text(out_dir / "config.txt", run_config_text(config));
  out << "trained " << r.history.epochs.size() << " epochs (best " << r.history.best_epoch
      << "); test RMSE " << csv::format_double(rows.back().report.rmse) << '\n';
  return kExitOk;
}

int cmd_predict(const RunConfig& config, const std::string& checkpoint, const std::string& data_path,
                const std::string& out_path, std::ostream& out) {
  const Checkpoint cp = load_checkpoint(checkpoint);
  const FieldDataset raw = load_field_csv(data_path, config.season);
  check_compatible(cp, raw);
  const FieldDataset normalized = apply_normalization(raw, cp.norm);
  const auto preds = network_predictions(cp.model, normalized, cp.norm);
  csv::write_text(out_path, prediction_csv(preds));
  out << "wrote " << preds.size() << " predictions to " << out_path << '\n';
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config, const std::string& predictions, const std::string& data_path,
                 std::optional<std::uint64_t> split_seed, const std::string& name,
                 const std::string& out_path, std::ostream& out) {
  const FieldDataset raw = load_field_csv(data_path, config.season);
  const FieldDataset truth = split_seed ? prepare_data(raw, config, *split_seed).test_raw : raw;
  const auto rows = score_by_task(name, load_prediction_csv(predictions), truth);
  const std::string text = metrics_csv(rows);
  if (out_path.empty()) out << text;
  else csv::write_text(out_path, text);
  return kExitOk;
}

struct ExperimentOptions {
  std::string kind;
  std::string data_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> models;
  std::vector<double> radii;
  std::vector<double> lambdas;
  std::vector<unsigned> months;
};

int cmd_experiment(const RunConfig& config, const ExperimentOptions& o, std::ostream& out) {
  ExperimentSpec spec;
  spec.kind = parse_experiment(o.kind);
  spec.config = config;
  spec.seeds = o.seeds;
  for (const std::string& m : o.models) spec.models.push_back(parse_model(m));
  if (!o.radii.empty()) spec.radii = o.radii;
  if (!o.lambdas.empty()) spec.lambdas = o.lambdas;
  for (unsigned m : o.months) {
    if (m < 1 || m > 12) throw std::invalid_argument("month must be 1..12");
    spec.months.emplace_back(m);
  }
  const FieldDataset raw = load_field_csv(o.data_path, config.season);
  const ExperimentResult result = run_experiment(spec, raw);
  write_experiment(result, o.out_dir);
  out << rmse_table_csv(result);
  return kExitOk;
}

int cmd_heatmap(const RunConfig& config, const std::string& data_path, const std::string& task,
                const std::string& predictions, const std::string& prefix, std::ostream& out) {
  const FieldDataset data = load_field_csv(data_path, config.season);
  const std::size_t t = task_index(data, task);
  std::vector<std::optional<double>> values;
  if (predictions.empty()) {
    values = yields_of_task(data, t);
  } else {
    values.assign(data.grid.region_count(), std::nullopt);
    for (const Prediction& p : load_prediction_csv(predictions)) {
      if (p.task != task) continue;
      if (p.region >= values.size())
        throw ValidationError("prediction for unknown region " + std::to_string(p.region));
      values[p.region] = p.value;
    }
  }
  export_heatmap(data.grid, values, prefix);
  out << "wrote " << prefix << ".pgm and " << prefix << ".csv\n";
  return kExitOk;
}

} // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatially regularized multi-task yield regression", "stmtl"};
  app.require_subcommand(1);

  // synth
  SynthOptions synth;
  std::string synth_out;
  bool uniform_sources = false;
  CLI::App* s = app.add_subcommand("synth", "Generate a synthetic field dataset");
  s->add_option("--out", synth_out, "Output field CSV")->required();
  s->add_option("--seed", synth.seed, "Generator seed")->required();
  s->add_option("--rows", synth.rows, "Grid rows");
  s->add_option("--cols", synth.cols, "Grid columns");
  s->add_option("--tasks", synth.tasks, "Number of years");
  s->add_option("--spatial-scale", synth.spatial_scale, "Smoothing half-width in cells");
  s->add_option("--noise-sd", synth.noise_sd, "Residual noise in yield units");
  s->add_option("--first-year", synth.first_task_label, "Label of the first task");
  s->add_flag("--uniform-sources", uniform_sources, "Do not make NDVI the dominant source");

  // train
  ConfigOptions train_cfg;
  std::string train_data, train_model = "spatial_mtl", train_out;
  std::uint64_t train_seed = 0;
  CLI::App* t = app.add_subcommand("train", "Train a network and score it on a held-out split");
  train_cfg.attach(*t);
  t->add_option("--data", train_data, "Field CSV")->required();
  t->add_option("--seed", train_seed, "Seed for splits, initialization and dropout")->required();
  t->add_option("--out-dir", train_out, "Directory for checkpoint, history and metrics")->required();
  t->add_option("--model", train_model, "spatial_mtl or mtl");

  // predict
  ConfigOptions predict_cfg;
  std::string predict_ckpt, predict_data, predict_out;
  CLI::App* p = app.add_subcommand("predict", "Predict every row of a dataset from a checkpoint");
  predict_cfg.attach(*p);
  p->add_option("--checkpoint", predict_ckpt, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  p->add_option("--data", predict_data, "Field CSV")->required();
  p->add_option("--out", predict_out, "Prediction CSV")->required();

  // evaluate
  ConfigOptions eval_cfg;
  std::string eval_preds, eval_data, eval_out, eval_name = "external";
  std::optional<std::uint64_t> eval_seed;
  CLI::App* e = app.add_subcommand("evaluate", "Score a prediction CSV against a dataset");
  eval_cfg.attach(*e);
  e->add_option("--predictions", eval_preds, "Prediction CSV")->required();
  e->add_option("--data", eval_data, "Field CSV holding the actual yields")->required();
  e->add_option("--seed", eval_seed, "Score only the test split drawn with this seed");
  e->add_option("--name", eval_name, "Config column value");
  e->add_option("--out", eval_out, "Metrics CSV (stdout when omitted)");

  // experiment
  ConfigOptions exp_cfg;
  ExperimentOptions exp;
  CLI::App* x = app.add_subcommand("experiment", "Run a multi-seed study");
  exp_cfg.attach(*x);
  x->add_option("kind", exp.kind,
                "yearly_comparison, monthly_online, single_source, leave_one_out, "
                "neighborhood_sweep or lambda_sweep")
      ->required();
  x->add_option("--data", exp.data_path, "Field CSV")->required();
  x->add_option("--out-dir", exp.out_dir, "Directory for metrics tables")->required();
  x->add_option("--seed", exp.seeds, "Seeds; the median over them is reported")->required()->delimiter(',');
  x->add_option("--models", exp.models, "Models to run")->delimiter(',');
  x->add_option("--radii", exp.radii, "Radii for neighborhood_sweep")->delimiter(',');
  x->add_option("--lambdas", exp.lambdas, "Values for lambda_sweep")->delimiter(',');
  x->add_option("--months", exp.months, "Months (1..12) for monthly_online")->delimiter(',');

  // heatmap
  ConfigOptions heat_cfg;
  std::string heat_data, heat_task, heat_preds, heat_out;
  CLI::App* h = app.add_subcommand("heatmap", "Render actual or predicted yields of one task");
  heat_cfg.attach(*h);
  h->add_option("--data", heat_data, "Field CSV")->required();
  h->add_option("--task", heat_task, "Task label")->required();
  h->add_option("--predictions", heat_preds, "Prediction CSV; actual yields when omitted");
  h->add_option("--out", heat_out, "Output prefix for .pgm and .csv")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) {
      synth.ndvi_dominant = !uniform_sources;
      return cmd_synth(synth, synth_out, out);
    }
    if (t->parsed()) return cmd_train(train_cfg.resolve(), train_data, train_model, train_seed, train_out, out);
    if (p->parsed()) return cmd_predict(predict_cfg.resolve(), predict_ckpt, predict_data, predict_out, out);
    if (e->parsed())
      return cmd_evaluate(eval_cfg.resolve(), eval_preds, eval_data, eval_seed, eval_name, eval_out, out);
    if (x->parsed()) return cmd_experiment(exp_cfg.resolve(), exp, out);
    if (h->parsed()) return cmd_heatmap(heat_cfg.resolve(), heat_data, heat_task, heat_preds, heat_out, out);
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& ex) {
    err << "numerical failure: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& ex) {
    err << "usage: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::out_of_range& ex) {
    err << "usage: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  }
  return kExitUsage;
}

} // namespace stmtl
