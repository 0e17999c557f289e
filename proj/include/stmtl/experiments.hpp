#pragma once

#include "stmtl/config.hpp"
#include "stmtl/dataset.hpp"
#include "stmtl/metrics.hpp"
#include "stmtl/training.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stmtl {

/// spatial_mtl: the regularized network; mtl: same network, no spatial term;
/// independent: one spatially regularized network per task; linear and tree
/// are fitted per task on the concatenated normalized features.
enum class ModelKind { spatial_mtl, mtl, independent, linear, tree };

std::string_view model_name(ModelKind kind);
ModelKind parse_model(std::string_view name);

/// Normalized train/validation/test splits plus the raw test split for scoring.
struct PreparedData {
  FieldDataset train;
  FieldDataset validation;
  FieldDataset test;
  FieldDataset test_raw;
  NormParams norm;
};

/// Splits off the test fraction per task, then the validation fraction of
/// what remains, and normalizes everything with training statistics.
PreparedData prepare_data(const FieldDataset& raw, const RunConfig& config, std::uint64_t seed);

/// Trains the spatial (or plain, when `spatial` is false) network on prepared data.
TrainResult fit_network(const PreparedData& data, const RunConfig& config,
                        const std::vector<Source>& sources, bool spatial, std::uint64_t seed);

/// Predictions in original units for every sample of `target` (normalized).
std::vector<Prediction> network_predictions(const MtlModel& model, const FieldDataset& target,
                                            const NormParams& norm);

/// Test-split predictions of one model in original units.
std::vector<Prediction> run_model(ModelKind kind, const PreparedData& data,
                                  const RunConfig& config, const std::vector<Source>& sources,
                                  std::uint64_t seed);

/// One row per task plus an `all` row pooling every task.
std::vector<MetricsRow> score_by_task(std::string_view config_name,
                                      const std::vector<Prediction>& predictions,
                                      const FieldDataset& truth);

enum class ExperimentKind {
  yearly_comparison,
  monthly_online,
  single_source,
  leave_one_out,
  neighborhood_sweep,
  lambda_sweep
};

std::string_view experiment_name(ExperimentKind kind);
ExperimentKind parse_experiment(std::string_view name);
/// Models run when ExperimentSpec::models is empty.
std::vector<ModelKind> default_models(ExperimentKind kind);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::yearly_comparison;
  /// Empty selects default_models(kind).
  std::vector<ModelKind> models;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  RunConfig config;
  std::vector<double> radii{1, 2, 3, 4, 5};
  std::vector<double> lambdas{0.01, 0.1, 1.0};
  /// Empty selects every month from season start to season end.
  std::vector<std::chrono::month> months;
  /// Sources varied by the two ablations; weather is shared by all regions
  /// of a task and is left out of the ablations.
  std::vector<Source> ablation_sources{Source::soil, Source::spectral, Source::ndvi};
};

/// One configuration of a study: a model run under modified settings.
struct Variant {
  std::string name;
  ModelKind model = ModelKind::spatial_mtl;
  RunConfig config;
  std::vector<Source> sources;
  std::optional<std::chrono::month> month;
};

std::vector<Variant> experiment_variants(const ExperimentSpec& spec);

struct ExperimentResult {
  std::vector<std::string> configs;
  std::vector<std::string> tasks;
  std::vector<std::uint64_t> seeds;
  /// Per seed, rows in (config, task) order.
  std::vector<std::vector<MetricsRow>> per_seed;
  /// Metric-wise median over seeds, same row order.
  std::vector<MetricsRow> median;

  /// Median row for a config/task pair; throws std::out_of_range if absent.
  const MetricsReport& median_for(std::string_view config, std::string_view task = "all") const;
};

ExperimentResult run_variants(const std::vector<Variant>& variants, const FieldDataset& raw,
                              const std::vector<std::uint64_t>& seeds);
ExperimentResult run_experiment(const ExperimentSpec& spec, const FieldDataset& raw);

/// `config,<task>...,all` table of median RMSE.
std::string rmse_table_csv(const ExperimentResult& result);

/// Writes metrics.csv (medians), metrics_seed<S>.csv and rmse_table.csv.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);

} // namespace stmtl
