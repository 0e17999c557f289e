#include "stmtl/experiments.hpp"

#include "stmtl/baselines.hpp"
#include "stmtl/csv.hpp"
#include "stmtl/grid.hpp"
#include "stmtl/rng.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace stmtl {

namespace chr = std::chrono;

std::string_view model_name(ModelKind kind) {
  switch (kind) {
  case ModelKind::spatial_mtl: return "spatial_mtl";
  case ModelKind::mtl: return "mtl";
  case ModelKind::independent: return "independent";
  case ModelKind::linear: return "linear";
  case ModelKind::tree: return "tree";
  }
  return "unknown";
}

ModelKind parse_model(std::string_view name) {
  for (ModelKind k : {ModelKind::spatial_mtl, ModelKind::mtl, ModelKind::independent,
                      ModelKind::linear, ModelKind::tree})
    if (model_name(k) == name) return k;
  throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

PreparedData prepare_data(const FieldDataset& raw, const RunConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const std::uint64_t test_seed = rng.fork();
  const std::uint64_t val_seed = rng.fork();
  auto [rest, test] = train_test_split(raw, config.test_fraction, test_seed);
  auto [train, validation] = train_test_split(rest, config.validation_fraction, val_seed);
  PreparedData out;
  out.norm = fit_normalization(train);
  out.train = apply_normalization(train, out.norm);
  out.validation = apply_normalization(validation, out.norm);
  out.test = apply_normalization(test, out.norm);
  out.test_raw = std::move(test);
  return out;
}

TrainResult fit_network(const PreparedData& data, const RunConfig& config,
                        const std::vector<Source>& sources, bool spatial, std::uint64_t seed) {
  Rng rng(seed);
  const std::uint64_t init_seed = rng.fork();
  TrainConfig tc = config.train;
  tc.seed = rng.fork();
  MtlModel model(config.architecture(data.train, sources), data.train.tasks, init_seed);
  LossConfig loss;
  loss.lambda = spatial ? config.lambda : 0.0;
  loss.neighbor_target = config.neighbor_target;
  SpatialWeights weights;
  if (spatial) {
    weights = build_spatial_weights(data.train.grid, config.radius, config.power);
    loss.weights = &weights;
  }
  return train(std::move(model), data.train, &data.validation, loss, tc);
}

std::vector<Prediction> network_predictions(const MtlModel& model, const FieldDataset& target,
                                            const NormParams& norm) {
  std::vector<Prediction> out;
  for (const TaskBatch& b : make_batches(model, target, false)) {
    if (b.size() == 0) continue;
    const RowVector p = predict(model, b);
    for (std::size_t i = 0; i < b.size(); ++i)
      out.push_back({model.tasks()[b.task], b.regions[i],
                     norm.target.denormalize(p(static_cast<Eigen::Index>(i)))});
  }
  return out;
}

namespace {

FeatureMatrix feature_rows(const FieldDataset& data, const std::vector<std::size_t>& ids,
                           const std::vector<Source>& sources) {
  std::size_t width = 0;
  for (Source s : sources) width += data.width(s);
  FeatureMatrix x(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    Eigen::Index c = 0;
    for (Source s : sources)
      for (double v : data.samples[ids[r]].block(s)) x(static_cast<Eigen::Index>(r), c++) = v;
  }
  return x;
}

std::vector<Prediction> baseline_predictions(ModelKind kind, const PreparedData& data,
                                             const RunConfig& config,
                                             const std::vector<Source>& sources) {
  std::vector<Prediction> out;
  for (std::size_t t = 0; t < data.train.tasks.size(); ++t) {
    std::vector<std::size_t> train_ids;
    std::vector<double> targets;
    for (std::size_t i = 0; i < data.train.samples.size(); ++i) {
      const Sample& s = data.train.samples[i];
      if (s.task == t && s.yield) {
        train_ids.push_back(i);
        targets.push_back(*s.yield);
      }
    }
    std::vector<std::size_t> test_ids;
    for (std::size_t i = 0; i < data.test.samples.size(); ++i)
      if (data.test.samples[i].task == t) test_ids.push_back(i);
    if (train_ids.empty() || test_ids.empty()) continue;

    const FeatureMatrix xtr = feature_rows(data.train, train_ids, sources);
    const FeatureMatrix xte = feature_rows(data.test, test_ids, sources);
    std::vector<double> pred;
    if (kind == ModelKind::linear) {
      pred = predict_linear(fit_linear(xtr, targets, config.ridge), xte);
    } else {
      const std::size_t leaf = std::min(config.tree_min_samples_leaf, targets.size());
      pred = predict_tree(fit_tree(xtr, targets, config.tree_max_depth, leaf), xte);
    }
    for (std::size_t i = 0; i < test_ids.size(); ++i)
      out.push_back({data.test.tasks[t], data.test.samples[test_ids[i]].region,
                     data.norm.target.denormalize(pred[i])});
  }
  return out;
}

} // namespace

std::vector<Prediction> run_model(ModelKind kind, const PreparedData& data,
                                  const RunConfig& config, const std::vector<Source>& sources,
                                  std::uint64_t seed) {
  switch (kind) {
  case ModelKind::spatial_mtl:
  case ModelKind::mtl: {
    const TrainResult r = fit_network(data, config, sources, kind == ModelKind::spatial_mtl, seed);
    return network_predictions(r.model, data.test, data.norm);
  }
  case ModelKind::independent: {
    std::vector<Prediction> out;
    for (std::size_t t = 0; t < data.train.tasks.size(); ++t) {
      const std::size_t only[] = {t};
      PreparedData single{select_tasks(data.train, only), select_tasks(data.validation, only),
                          select_tasks(data.test, only), select_tasks(data.test_raw, only), data.norm};
      const TrainResult r = fit_network(single, config, sources, true, seed);
      for (Prediction& p : network_predictions(r.model, single.test, data.norm)) out.push_back(p);
    }
    return out;
  }
  case ModelKind::linear:
  case ModelKind::tree: return baseline_predictions(kind, data, config, sources);
  }
  return {};
}

std::vector<MetricsRow> score_by_task(std::string_view config_name,
                                      const std::vector<Prediction>& predictions,
                                      const FieldDataset& truth) {
  std::vector<MetricsRow> rows;
  for (std::size_t t = 0; t < truth.tasks.size(); ++t) {
    const std::size_t only[] = {t};
    const FieldDataset one = select_tasks(truth, only);
    if (one.labeled_count() == 0) continue;
    rows.push_back({std::string(config_name), truth.tasks[t], score_predictions(predictions, one)});
  }
  rows.push_back({std::string(config_name), "all", score_predictions(predictions, truth)});
  return rows;
}

std::string_view experiment_name(ExperimentKind kind) {
  switch (kind) {
  case ExperimentKind::yearly_comparison: return "yearly_comparison";
  case ExperimentKind::monthly_online: return "monthly_online";
  case ExperimentKind::single_source: return "single_source";
  case ExperimentKind::leave_one_out: return "leave_one_out";
  case ExperimentKind::neighborhood_sweep: return "neighborhood_sweep";
  case ExperimentKind::lambda_sweep: return "lambda_sweep";
  }
  return "unknown";
}

ExperimentKind parse_experiment(std::string_view name) {
  for (ExperimentKind k : {ExperimentKind::yearly_comparison, ExperimentKind::monthly_online,
                           ExperimentKind::single_source, ExperimentKind::leave_one_out,
                           ExperimentKind::neighborhood_sweep, ExperimentKind::lambda_sweep})
    if (experiment_name(k) == name) return k;
  throw std::invalid_argument("unknown experiment '" + std::string(name) + "'");
}

std::vector<ModelKind> default_models(ExperimentKind kind) {
  switch (kind) {
  case ExperimentKind::yearly_comparison:
    return {ModelKind::spatial_mtl, ModelKind::mtl, ModelKind::independent, ModelKind::linear,
            ModelKind::tree};
  case ExperimentKind::monthly_online:
    return {ModelKind::spatial_mtl, ModelKind::mtl, ModelKind::linear, ModelKind::tree};
  default: return {ModelKind::spatial_mtl};
  }
}

namespace {

const char* month_abbrev(chr::month m) {
  static const char* names[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  return names[static_cast<unsigned>(m) - 1];
}

} // namespace

std::vector<Variant> experiment_variants(const ExperimentSpec& spec) {
  const std::vector<ModelKind> models = spec.models.empty() ? default_models(spec.kind) : spec.models;
  const RunConfig& base = spec.config;
  std::vector<Variant> out;
  auto add = [&](const std::string& suffix, RunConfig cfg, std::vector<Source> sources,
                 std::optional<chr::month> month) {
    for (ModelKind m : models) {
      std::string name(model_name(m));
      if (!suffix.empty()) name += "@" + suffix;
      out.push_back({name, m, cfg, sources, month});
    }
  };

  switch (spec.kind) {
  case ExperimentKind::yearly_comparison: add("", base, base.sources, std::nullopt); break;
  case ExperimentKind::monthly_online: {
    std::vector<chr::month> months = spec.months;
    if (months.empty())
      for (unsigned m = static_cast<unsigned>(base.season.start.month());
           m <= static_cast<unsigned>(base.season.end.month()); ++m)
        months.emplace_back(m);
    for (chr::month m : months) add(month_abbrev(m), base, base.sources, m);
    break;
  }
  case ExperimentKind::single_source:
    for (Source s : spec.ablation_sources) add("only_" + std::string(source_name(s)), base, {s}, std::nullopt);
    break;
  case ExperimentKind::leave_one_out:
    for (Source s : spec.ablation_sources) {
      std::vector<Source> rest;
      for (Source o : base.sources)
        if (o != s) rest.push_back(o);
      add("without_" + std::string(source_name(s)), base, rest, std::nullopt);
    }
    break;
  case ExperimentKind::neighborhood_sweep:
    for (double r : spec.radii) {
      if (!(r > 0.0)) throw std::invalid_argument("neighborhood radii must be positive");
      RunConfig cfg = base;
      cfg.radius = r;
      add("radius_" + csv::format_double(r), cfg, base.sources, std::nullopt);
    }
    break;
  case ExperimentKind::lambda_sweep:
    for (double l : spec.lambdas) {
      RunConfig cfg = base;
      cfg.lambda = l;
      add("lambda_" + csv::format_double(l), cfg, base.sources, std::nullopt);
    }
    break;
  }
  return out;
}

const MetricsReport& ExperimentResult::median_for(std::string_view config, std::string_view task) const {
  for (const MetricsRow& r : median)
    if (r.config == config && r.task == task) return r.report;
  throw std::out_of_range("no result for " + std::string(config) + "/" + std::string(task));
}

ExperimentResult run_variants(const std::vector<Variant>& variants, const FieldDataset& raw,
                              const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (variants.empty()) throw std::invalid_argument("no configurations to run");
  ExperimentResult res;
  res.seeds = seeds;
  res.tasks = raw.tasks;
  res.tasks.push_back("all");
  for (const Variant& v : variants) res.configs.push_back(v.name);

  for (std::uint64_t seed : seeds) {
    std::vector<MetricsRow> rows;
    // Variants sharing a truncation month share the split.
    std::map<unsigned, PreparedData> prepared;
    for (const Variant& v : variants) {
      const unsigned key = v.month ? static_cast<unsigned>(*v.month) : 0U;
      auto it = prepared.find(key);
      if (it == prepared.end()) {
        const FieldDataset data = v.month ? truncate_to_month(raw, *v.month) : raw;
        it = prepared.emplace(key, prepare_data(data, v.config, seed)).first;
      }
      const auto preds = run_model(v.model, it->second, v.config, v.sources, seed);
      for (MetricsRow& r : score_by_task(v.name, preds, it->second.test_raw)) rows.push_back(std::move(r));
    }
    res.per_seed.push_back(std::move(rows));
  }

  for (std::size_t i = 0; i < res.per_seed.front().size(); ++i) {
    std::vector<MetricsReport> reports;
    for (const auto& rows : res.per_seed) reports.push_back(rows[i].report);
    const MetricsRow& first = res.per_seed.front()[i];
    res.median.push_back({first.config, first.task, median_report(reports)});
  }
  return res;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const FieldDataset& raw) {
  if (spec.kind == ExperimentKind::yearly_comparison && raw.tasks.size() < 2)
    throw std::invalid_argument("yearly comparison needs at least two tasks");
  return run_variants(experiment_variants(spec), raw, spec.seeds);
}

std::string rmse_table_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "config";
  for (const std::string& t : result.tasks) out << ',' << t;
  out << '\n';
  for (const std::string& c : result.configs) {
    out << c;
    for (const std::string& t : result.tasks) {
      out << ',';
      for (const MetricsRow& r : result.median)
        if (r.config == c && r.task == t) out << csv::format_double(r.report.rmse);
    }
    out << '\n';
  }
  return out.str();
}

void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  csv::write_text(dir / "metrics.csv", metrics_csv(result.median));
  for (std::size_t i = 0; i < result.seeds.size(); ++i)
    csv::write_text(dir / ("metrics_seed" + std::to_string(result.seeds[i]) + ".csv"),
                    metrics_csv(result.per_seed[i]));
  csv::write_text(dir / "rmse_table.csv", rmse_table_csv(result));
}

} // namespace stmtl
