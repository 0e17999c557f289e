#pragma once

#include "stmtl/dataset.hpp"
#include "stmtl/grid.hpp"
#include "stmtl/mtl_net.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stmtl {

/// Which value stands in for y_j inside the spatial term.
enum class NeighborTarget { actual, predicted };

struct LossConfig {
  double lambda = 0.1;
  NeighborTarget neighbor_target = NeighborTarget::actual;
  /// Null disables the spatial term entirely.
  const SpatialWeights* weights = nullptr;
};

/// Values indexed by region id; nullopt where the region is not in the batch.
using RegionValues = std::vector<std::optional<double>>;

/// Sum of squared errors (not divided by N).
double mse_data_loss(std::span<const double> targets, std::span<const double> predictions);

/// sum_k sum_{j in G(k)} w(k,j)/|G(k)| * (yhat_k - y_j)^2
double spatial_regularizer(const RegionValues& predictions, const RegionValues& targets,
                           const SpatialWeights& weights,
                           NeighborTarget mode = NeighborTarget::actual);

/// Per-region contribution to spatial_regularizer (entry k is the inner sum for k).
std::vector<double> spatial_regularizer_terms(const RegionValues& predictions,
                                              const RegionValues& targets,
                                              const SpatialWeights& weights,
                                              NeighborTarget mode = NeighborTarget::actual);

/// d(spatial_regularizer)/d(yhat), indexed by region.
std::vector<double> spatial_regularizer_gradient(const RegionValues& predictions,
                                                 const RegionValues& targets,
                                                 const SpatialWeights& weights,
                                                 NeighborTarget mode = NeighborTarget::actual);

struct LossValue {
  double data = 0.0;
  double spatial = 0.0;
  double total = 0.0;
};

/// Data loss over regions present in both vectors plus lambda times the
/// spatial term when weights are configured.
LossValue total_loss(const RegionValues& targets, const RegionValues& predictions,
                     const LossConfig& config);

enum class OptimizerKind { sgd, adam };

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 2000;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamSettings adam;
  std::uint64_t seed = 0;
  /// Epochs without validation improvement before stopping; nullopt disables.
  std::optional<std::size_t> early_stop_patience = 50;

  void validate() const;
};

struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// SGD or bias-corrected Adam. Throws NumericalError naming the first tensor
/// holding a non-finite gradient; the model is left untouched in that case.
void optimizer_step(MtlModel& model, const MtlParameters& gradients, OptimizerState& state,
                    const TrainConfig& config);

struct EpochRecord {
  double total_loss = 0.0;
  double data_loss = 0.0;
  double spatial_reg = 0.0;
  /// Normalized-space RMSE per task; empty without validation data.
  std::vector<double> val_rmse;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  /// Epoch whose parameters were kept (last epoch without early stopping).
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

struct TrainResult {
  MtlModel model;
  TrainHistory history;
};

/// Loss and gradient of every task for one full-batch pass.
struct BatchLoss {
  LossValue loss;
  MtlParameters gradients;
};

/// Evaluates the loss on `batches` with the given dropout masks (one set per
/// batch; empty sets mean infer mode) and returns the exact gradient.
/// `weights_by_task` holds the neighbor lists restricted to each batch.
BatchLoss loss_and_gradient(const MtlModel& model, std::span<const TaskBatch> batches,
                            std::span<const std::vector<Batch>> masks,
                            std::span<const SpatialWeights> weights_by_task,
                            const LossConfig& config);

/// Neighbor lists restricted to the regions of each batch.
std::vector<SpatialWeights> restrict_weights(const SpatialWeights& weights,
                                             std::span<const TaskBatch> batches);

/// Full-batch training over all tasks at once. Datasets must be normalized.
TrainResult train(MtlModel model, const FieldDataset& train_data,
                  const FieldDataset* validation, const LossConfig& loss,
                  const TrainConfig& config);

/// `epoch,total_loss,data_loss,spatial_reg,val_rmse_<task>...`
std::string history_csv(const TrainHistory& history, std::span<const std::string> tasks);

} // namespace stmtl
