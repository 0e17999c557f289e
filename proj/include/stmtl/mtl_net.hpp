#pragma once

#include "stmtl/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stmtl {

class Rng;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
/// Column-per-sample activations.
using Batch = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { sigmoid, linear };

/// Logistic function, stable for large |x|.
double sigmoid(double x);

Vector dense_forward(const Vector& x, const Matrix& weight, const Vector& bias, Activation act);

/// Concatenation in the given order. Throws on an empty list.
Vector concat_features(std::span<const Vector> latents);

struct DenseLayer {
  Matrix weight;
  Vector bias;
};

struct MtlArchitecture {
  /// Active sources in concatenation order.
  std::vector<Source> sources;
  std::vector<std::size_t> input_widths;
  std::size_t extractor_width = 16;
  std::size_t shared_width = 32;
  /// Hidden layers of each task head; each is followed by dropout.
  std::vector<std::size_t> head_widths{32, 16};
  double dropout_rate = 0.2;
  Activation hidden_activation = Activation::sigmoid;

  /// Throws std::invalid_argument on an inconsistent layout.
  void validate() const;
  friend bool operator==(const MtlArchitecture&, const MtlArchitecture&) = default;
};

/// Architecture over `sources` with input widths taken from `data`.
MtlArchitecture architecture_for(const FieldDataset& data, std::vector<Source> sources);

/// Every learnable tensor. Also used, zero-initialized, as a gradient set.
struct MtlParameters {
  std::vector<DenseLayer> extractors;
  DenseLayer shared;
  /// Per task: hidden layers followed by the one-unit linear output.
  std::vector<std::vector<DenseLayer>> heads;

  /// Flat views in a fixed order: extractors, shared layer, then heads by
  /// task and depth; weight before bias.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  void set_zero();
};

class MtlModel {
public:
  MtlModel() = default;
  /// Glorot-uniform weights, zero biases.
  MtlModel(MtlArchitecture arch, std::vector<std::string> tasks, std::uint64_t seed);
  MtlModel(MtlArchitecture arch, std::vector<std::string> tasks, MtlParameters params);

  const MtlArchitecture& architecture() const { return arch_; }
  const std::vector<std::string>& tasks() const { return tasks_; }
  const MtlParameters& parameters() const { return params_; }
  MtlParameters& parameters() { return params_; }

  /// Throws std::invalid_argument for an unknown label.
  std::size_t task_index(std::string_view label) const;
  MtlParameters zero_gradients() const;
  /// Names matching MtlParameters::tensors() order.
  std::vector<std::string> tensor_names() const;

private:
  MtlArchitecture arch_;
  std::vector<std::string> tasks_;
  MtlParameters params_;
};

/// Inputs of one task, one matrix (width x n) per active source.
struct TaskBatch {
  std::size_t task = 0;
  std::vector<Batch> inputs;
  RowVector targets;
  /// Indices into the originating dataset's samples.
  std::vector<std::size_t> sample_ids;
  std::vector<std::size_t> regions;

  std::size_t size() const { return regions.size(); }
};

/// One batch per model task, holding that task's samples from `data`.
std::vector<TaskBatch> make_batches(const MtlModel& model, const FieldDataset& data,
                                    bool labeled_only);

enum class Mode { train, infer };

struct ForwardCache {
  std::size_t task = 0;
  std::size_t batch_size = 0;
  std::vector<Batch> latents;
  Batch concat;
  Batch shared;
  /// Post-activation outputs of each head hidden layer, before dropout.
  std::vector<Batch> hidden;
  /// Inputs to the next head layer (after dropout in train mode).
  std::vector<Batch> dropped;
  /// 0/1 keep masks per hidden layer; empty in infer mode.
  std::vector<Batch> masks;
  RowVector output;
};

/// Keep masks for every hidden head layer, drawn from `rng`.
std::vector<Batch> sample_dropout_masks(const MtlModel& model, std::size_t batch_size, Rng& rng);

/// Train mode draws masks from `rng`, which must then be non-null.
ForwardCache forward(const MtlModel& model, const TaskBatch& batch, Mode mode, Rng* rng);
/// Train-mode forward with caller-supplied keep masks.
ForwardCache forward_with_masks(const MtlModel& model, const TaskBatch& batch,
                                std::vector<Batch> masks);
RowVector predict(const MtlModel& model, const TaskBatch& batch);

/// Infer-mode prediction for a single sample, features listed per active source.
double predict_one(const MtlModel& model, std::span<const std::vector<double>> features,
                   std::string_view task);

/// Backpropagates dLoss/dOutput through the cached pass and accumulates
/// parameter gradients into `grads`.
void backward(const MtlModel& model, const TaskBatch& batch, const ForwardCache& cache,
              const RowVector& output_grad, MtlParameters& grads);

} // namespace stmtl
