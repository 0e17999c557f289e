#include "stmtl/training.hpp"

#include "stmtl/csv.hpp"
#include "stmtl/error.hpp"
#include "stmtl/rng.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace stmtl {

namespace {

void check_coverage(const RegionValues& predictions, const RegionValues& targets,
                    const SpatialWeights& weights, NeighborTarget mode) {
  if (predictions.size() != weights.region_count() || targets.size() != weights.region_count())
    throw std::invalid_argument("region vectors do not match the spatial weights");
  for (std::size_t k = 0; k < weights.region_count(); ++k) {
    if (weights.neighbors(k).empty()) continue;
    if (!predictions[k])
      throw std::invalid_argument("region " + std::to_string(k) +
                                  " has neighbors but is absent from the batch");
    for (const Neighbor& n : weights.neighbors(k)) {
      const auto& other = mode == NeighborTarget::actual ? targets[n.region] : predictions[n.region];
      if (!other)
        throw std::invalid_argument("neighbor region " + std::to_string(n.region) +
                                    " is absent from the batch");
    }
  }
}

double neighbor_value(const RegionValues& predictions, const RegionValues& targets,
                      std::size_t j, NeighborTarget mode) {
  return mode == NeighborTarget::actual ? *targets[j] : *predictions[j];
}

} // namespace

double mse_data_loss(std::span<const double> targets, std::span<const double> predictions) {
  if (targets.size() != predictions.size())
    throw std::invalid_argument("targets and predictions differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = targets[i] - predictions[i];
    sum += e * e;
  }
  return sum;
}

std::vector<double> spatial_regularizer_terms(const RegionValues& predictions,
                                              const RegionValues& targets,
                                              const SpatialWeights& weights,
                                              NeighborTarget mode) {
  check_coverage(predictions, targets, weights, mode);
  std::vector<double> terms(weights.region_count(), 0.0);
  for (std::size_t k = 0; k < weights.region_count(); ++k) {
    const auto nbrs = weights.neighbors(k);
    if (nbrs.empty()) continue;
    const double size = static_cast<double>(nbrs.size());
    double sum = 0.0;
    for (const Neighbor& n : nbrs) {
      const double diff = *predictions[k] - neighbor_value(predictions, targets, n.region, mode);
      sum += n.weight / size * diff * diff;
    }
    terms[k] = sum;
  }
  return terms;
}

double spatial_regularizer(const RegionValues& predictions, const RegionValues& targets,
                           const SpatialWeights& weights, NeighborTarget mode) {
  double sum = 0.0;
  for (double t : spatial_regularizer_terms(predictions, targets, weights, mode)) sum += t;
  return sum;
}

std::vector<double> spatial_regularizer_gradient(const RegionValues& predictions,
                                                 const RegionValues& targets,
                                                 const SpatialWeights& weights,
                                                 NeighborTarget mode) {
  check_coverage(predictions, targets, weights, mode);
  std::vector<double> grad(weights.region_count(), 0.0);
  for (std::size_t k = 0; k < weights.region_count(); ++k) {
    const auto nbrs = weights.neighbors(k);
    if (nbrs.empty()) continue;
    const double size = static_cast<double>(nbrs.size());
    for (const Neighbor& n : nbrs) {
      const double g =
          2.0 * n.weight / size *
          (*predictions[k] - neighbor_value(predictions, targets, n.region, mode));
      grad[k] += g;
      if (mode == NeighborTarget::predicted) grad[n.region] -= g;
    }
  }
  return grad;
}

LossValue total_loss(const RegionValues& targets, const RegionValues& predictions,
                     const LossConfig& config) {
  if (targets.size() != predictions.size())
    throw std::invalid_argument("targets and predictions differ in length");
  if (config.lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  LossValue v;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (!targets[k] || !predictions[k]) continue;
    const double e = *targets[k] - *predictions[k];
    v.data += e * e;
  }
  v.total = v.data;
  if (config.weights) {
    v.spatial = spatial_regularizer(predictions, targets, *config.weights, config.neighbor_target);
    v.total = v.data + config.lambda * v.spatial;
  }
  return v;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (optimizer == OptimizerKind::adam) {
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
      throw std::invalid_argument("Adam betas must lie in [0, 1)");
    if (!(adam.epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
  }
}

void optimizer_step(MtlModel& model, const MtlParameters& gradients, OptimizerState& state,
                    const TrainConfig& config) {
  auto params = model.parameters().tensors();
  const auto grads = gradients.tensors();
  if (params.size() != grads.size())
    throw std::invalid_argument("gradient set does not match the model");
  const auto names = model.tensor_names();
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != params[i].size())
      throw std::invalid_argument("gradient shape mismatch for " + names[i]);
    for (double g : grads[i])
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in " + names[i]);
  }

  const double lr = config.learning_rate;
  if (config.optimizer == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i].size(); ++j) params[i][j] -= lr * grads[i][j];
    ++state.step;
    return;
  }

  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
    state.step = 0;
  }
  ++state.step;
  const auto& a = config.adam;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(a.beta1, t);
  const double correction2 = 1.0 - std::pow(a.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      m[j] = a.beta1 * m[j] + (1.0 - a.beta1) * g;
      v[j] = a.beta2 * v[j] + (1.0 - a.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      params[i][j] -= lr * m_hat / (std::sqrt(v_hat) + a.epsilon);
    }
  }
}

std::vector<SpatialWeights> restrict_weights(const SpatialWeights& weights,
                                             std::span<const TaskBatch> batches) {
  std::vector<SpatialWeights> out;
  for (const TaskBatch& b : batches) {
    std::vector<bool> keep(weights.region_count(), false);
    for (std::size_t r : b.regions) keep.at(r) = true;
    out.push_back(weights.restricted_to(keep));
  }
  return out;
}

BatchLoss loss_and_gradient(const MtlModel& model, std::span<const TaskBatch> batches,
                            std::span<const std::vector<Batch>> masks,
                            std::span<const SpatialWeights> weights_by_task,
                            const LossConfig& config) {
  if (masks.size() != batches.size()) throw std::invalid_argument("one mask set per batch");
  const bool spatial = config.weights != nullptr;
  if (spatial && weights_by_task.size() != batches.size())
    throw std::invalid_argument("one restricted weight set per batch");

  BatchLoss out;
  out.gradients = model.zero_gradients();
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const TaskBatch& batch = batches[b];
    if (batch.size() == 0) continue;
    const ForwardCache cache = masks[b].empty() ? forward(model, batch, Mode::infer, nullptr)
                                                : forward_with_masks(model, batch, masks[b]);
    const auto n = static_cast<Eigen::Index>(batch.size());
    RowVector grad(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = batch.targets(i) - cache.output(i);
      out.loss.data += e * e;
      grad(i) = -2.0 * e;
    }
    if (spatial) {
      const SpatialWeights& w = weights_by_task[b];
      RegionValues pred(w.region_count());
      RegionValues tgt(w.region_count());
      for (Eigen::Index i = 0; i < n; ++i) {
        pred[batch.regions[static_cast<std::size_t>(i)]] = cache.output(i);
        tgt[batch.regions[static_cast<std::size_t>(i)]] = batch.targets(i);
      }
      out.loss.spatial += spatial_regularizer(pred, tgt, w, config.neighbor_target);
      const auto rg = spatial_regularizer_gradient(pred, tgt, w, config.neighbor_target);
      for (Eigen::Index i = 0; i < n; ++i)
        grad(i) += config.lambda * rg[batch.regions[static_cast<std::size_t>(i)]];
    }
    backward(model, batch, cache, grad, out.gradients);
  }
  out.loss.total = spatial ? out.loss.data + config.lambda * out.loss.spatial : out.loss.data;
  return out;
}

namespace {

std::vector<double> validation_rmse(const MtlModel& model, std::span<const TaskBatch> batches) {
  std::vector<double> out;
  for (const TaskBatch& b : batches) {
    if (b.size() == 0) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const RowVector p = predict(model, b);
    out.push_back(std::sqrt((b.targets - p).squaredNorm() / static_cast<double>(b.size())));
  }
  return out;
}

double mean_finite(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

TrainResult train(MtlModel model, const FieldDataset& train_data, const FieldDataset* validation,
                  const LossConfig& loss, const TrainConfig& config) {
  config.validate();
  if (loss.lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  const std::vector<TaskBatch> batches = make_batches(model, train_data, true);
  std::size_t total = 0;
  for (const auto& b : batches) total += b.size();
  if (total == 0) throw ValidationError("training set has no labeled samples");

  std::vector<SpatialWeights> restricted;
  if (loss.weights) {
    if (loss.weights->region_count() != train_data.grid.region_count())
      throw std::invalid_argument("spatial weights do not match the dataset grid");
    restricted = restrict_weights(*loss.weights, batches);
  }

  std::vector<TaskBatch> val_batches;
  if (validation) {
    val_batches = make_batches(model, *validation, true);
    std::size_t nv = 0;
    for (const auto& b : val_batches) nv += b.size();
    if (nv == 0) val_batches.clear();
  }
  const bool early_stop = config.early_stop_patience.has_value() && !val_batches.empty();

  TrainResult result{model, {}};
  Rng dropout_rng(config.seed);
  OptimizerState state;
  MtlParameters best = model.parameters();
  double best_score = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::vector<Batch>> masks;
    for (const TaskBatch& b : batches) masks.push_back(sample_dropout_masks(model, b.size(), dropout_rng));
    BatchLoss step = loss_and_gradient(model, batches, masks, restricted, loss);
    if (!std::isfinite(step.loss.total))
      throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
    optimizer_step(model, step.gradients, state, config);

    EpochRecord rec;
    rec.total_loss = step.loss.total;
    rec.data_loss = step.loss.data;
    rec.spatial_reg = step.loss.spatial;
    if (!val_batches.empty()) rec.val_rmse = validation_rmse(model, val_batches);
    result.history.epochs.push_back(rec);

    if (early_stop) {
      const double score = mean_finite(rec.val_rmse);
      if (score < best_score) {
        best_score = score;
        best = model.parameters();
        result.history.best_epoch = epoch;
      } else if (epoch - result.history.best_epoch >= *config.early_stop_patience) {
        result.history.stopped_early = true;
        break;
      }
    } else {
      result.history.best_epoch = epoch;
    }
  }
  if (early_stop && !result.history.epochs.empty()) model.parameters() = best;
  result.model = std::move(model);
  return result;
}

std::string history_csv(const TrainHistory& history, std::span<const std::string> tasks) {
  std::ostringstream out;
  out << "epoch,total_loss,data_loss,spatial_reg";
  for (const std::string& t : tasks) out << ",val_rmse_" << t;
  out << '\n';
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const EpochRecord& r = history.epochs[e];
    out << e << ',' << csv::format_double(r.total_loss) << ',' << csv::format_double(r.data_loss)
        << ',' << csv::format_double(r.spatial_reg);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      out << ',';
      if (t < r.val_rmse.size() && std::isfinite(r.val_rmse[t])) out << csv::format_double(r.val_rmse[t]);
    }
    out << '\n';
  }
  return out.str();
}

} // namespace stmtl
