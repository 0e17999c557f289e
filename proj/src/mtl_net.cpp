#include "stmtl/mtl_net.hpp"

#include "stmtl/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace stmtl {

namespace {

void activate(Batch& z, Activation act) {
  if (act == Activation::sigmoid) z = z.unaryExpr([](double v) { return sigmoid(v); });
}

// Multiplies `delta` in place by the activation derivative, given outputs `a`.
void activation_backward(Batch& delta, const Batch& a, Activation act) {
  if (act == Activation::sigmoid) delta.array() *= a.array() * (1.0 - a.array());
}

Batch dense_batch(const DenseLayer& layer, const Batch& x, Activation act) {
  Batch z = layer.weight * x;
  z.colwise() += layer.bias;
  activate(z, act);
  return z;
}

void glorot(Matrix& w, Rng& rng) {
  const double fan = static_cast<double>(w.rows() + w.cols());
  const double limit = fan > 0.0 ? std::sqrt(6.0 / fan) : 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
}

DenseLayer make_layer(std::size_t out, std::size_t in) {
  DenseLayer l;
  l.weight = Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  l.bias = Vector::Zero(static_cast<Eigen::Index>(out));
  return l;
}

MtlParameters zero_parameters(const MtlArchitecture& a, std::size_t tasks) {
  MtlParameters p;
  std::size_t concat = 0;
  for (std::size_t w : a.input_widths) {
    p.extractors.push_back(make_layer(a.extractor_width, w));
    concat += a.extractor_width;
  }
  p.shared = make_layer(a.shared_width, concat);
  for (std::size_t t = 0; t < tasks; ++t) {
    std::vector<DenseLayer> head;
    std::size_t in = a.shared_width;
    for (std::size_t w : a.head_widths) {
      head.push_back(make_layer(w, in));
      in = w;
    }
    head.push_back(make_layer(1, in));
    p.heads.push_back(std::move(head));
  }
  return p;
}

bool same_shape(const DenseLayer& a, const DenseLayer& b) {
  return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
         a.bias.size() == b.bias.size();
}

std::span<double> view(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> view(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<const double> view(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> view(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

template <class P, class Out> void collect(P& p, Out& out) {
  for (auto& l : p.extractors) {
    out.push_back(view(l.weight));
    out.push_back(view(l.bias));
  }
  out.push_back(view(p.shared.weight));
  out.push_back(view(p.shared.bias));
  for (auto& head : p.heads)
    for (auto& l : head) {
      out.push_back(view(l.weight));
      out.push_back(view(l.bias));
    }
}

} // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector dense_forward(const Vector& x, const Matrix& weight, const Vector& bias, Activation act) {
  if (weight.cols() != x.size() || weight.rows() != bias.size())
    throw std::invalid_argument("dense layer dimension mismatch");
  Vector z = weight * x + bias;
  if (act == Activation::sigmoid) z = z.unaryExpr([](double v) { return sigmoid(v); });
  return z;
}

Vector concat_features(std::span<const Vector> latents) {
  if (latents.empty()) throw std::invalid_argument("nothing to concatenate");
  Eigen::Index n = 0;
  for (const Vector& v : latents) n += v.size();
  Vector out(n);
  Eigen::Index at = 0;
  for (const Vector& v : latents) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  return out;
}

void MtlArchitecture::validate() const {
  if (sources.empty()) throw std::invalid_argument("architecture needs at least one source");
  if (sources.size() != input_widths.size())
    throw std::invalid_argument("one input width per source is required");
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = i + 1; j < sources.size(); ++j)
      if (sources[i] == sources[j]) throw std::invalid_argument("duplicate source in architecture");
  if (extractor_width == 0 || shared_width == 0)
    throw std::invalid_argument("layer widths must be positive");
  for (std::size_t w : head_widths)
    if (w == 0) throw std::invalid_argument("head widths must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

MtlArchitecture architecture_for(const FieldDataset& data, std::vector<Source> sources) {
  MtlArchitecture a;
  for (Source s : sources) a.input_widths.push_back(data.width(s));
  a.sources = std::move(sources);
  return a;
}

std::vector<std::span<double>> MtlParameters::tensors() {
  std::vector<std::span<double>> out;
  collect(*this, out);
  return out;
}

std::vector<std::span<const double>> MtlParameters::tensors() const {
  std::vector<std::span<const double>> out;
  collect(*this, out);
  return out;
}

void MtlParameters::set_zero() {
  for (auto t : tensors()) std::fill(t.begin(), t.end(), 0.0);
}

MtlModel::MtlModel(MtlArchitecture arch, std::vector<std::string> tasks, std::uint64_t seed)
    : arch_(std::move(arch)), tasks_(std::move(tasks)) {
  arch_.validate();
  if (tasks_.empty()) throw std::invalid_argument("model needs at least one task");
  params_ = zero_parameters(arch_, tasks_.size());
  Rng rng(seed);
  for (auto& l : params_.extractors) glorot(l.weight, rng);
  glorot(params_.shared.weight, rng);
  for (auto& head : params_.heads)
    for (auto& l : head) glorot(l.weight, rng);
}

MtlModel::MtlModel(MtlArchitecture arch, std::vector<std::string> tasks, MtlParameters params)
    : arch_(std::move(arch)), tasks_(std::move(tasks)), params_(std::move(params)) {
  arch_.validate();
  if (tasks_.empty()) throw std::invalid_argument("model needs at least one task");
  const MtlParameters ref = zero_parameters(arch_, tasks_.size());
  bool ok = ref.extractors.size() == params_.extractors.size() &&
            same_shape(ref.shared, params_.shared) && ref.heads.size() == params_.heads.size();
  for (std::size_t i = 0; ok && i < ref.extractors.size(); ++i)
    ok = same_shape(ref.extractors[i], params_.extractors[i]);
  for (std::size_t t = 0; ok && t < ref.heads.size(); ++t) {
    ok = ref.heads[t].size() == params_.heads[t].size();
    for (std::size_t l = 0; ok && l < ref.heads[t].size(); ++l)
      ok = same_shape(ref.heads[t][l], params_.heads[t][l]);
  }
  if (!ok) throw std::invalid_argument("parameter shapes do not match the architecture");
  for (auto t : params_.tensors())
    for (double v : t)
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite model parameter");
}

std::size_t MtlModel::task_index(std::string_view label) const {
  for (std::size_t t = 0; t < tasks_.size(); ++t)
    if (tasks_[t] == label) return t;
  throw std::invalid_argument("unknown task '" + std::string(label) + "'");
}

MtlParameters MtlModel::zero_gradients() const { return zero_parameters(arch_, tasks_.size()); }

std::vector<std::string> MtlModel::tensor_names() const {
  std::vector<std::string> names;
  for (Source s : arch_.sources) {
    names.push_back("extractor." + std::string(source_name(s)) + ".weight");
    names.push_back("extractor." + std::string(source_name(s)) + ".bias");
  }
  names.push_back("shared.weight");
  names.push_back("shared.bias");
  for (const std::string& t : tasks_) {
    for (std::size_t l = 0; l <= arch_.head_widths.size(); ++l) {
      const std::string layer = l == arch_.head_widths.size() ? "output" : std::to_string(l);
      names.push_back("head." + t + "." + layer + ".weight");
      names.push_back("head." + t + "." + layer + ".bias");
    }
  }
  return names;
}

std::vector<TaskBatch> make_batches(const MtlModel& model, const FieldDataset& data,
                                    bool labeled_only) {
  const MtlArchitecture& a = model.architecture();
  for (std::size_t i = 0; i < a.sources.size(); ++i)
    if (data.width(a.sources[i]) != a.input_widths[i])
      throw std::invalid_argument("dataset " + std::string(source_name(a.sources[i])) +
                                  " width does not match the model");
  std::vector<TaskBatch> batches(model.tasks().size());
  std::vector<std::ptrdiff_t> to_model(data.tasks.size(), -1);
  for (std::size_t t = 0; t < data.tasks.size(); ++t)
    for (std::size_t m = 0; m < model.tasks().size(); ++m)
      if (model.tasks()[m] == data.tasks[t]) to_model[t] = static_cast<std::ptrdiff_t>(m);

  std::vector<std::vector<std::size_t>> members(batches.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    if (labeled_only && !s.yield) continue;
    if (to_model[s.task] < 0)
      throw std::invalid_argument("dataset task '" + data.tasks[s.task] + "' unknown to the model");
    members[static_cast<std::size_t>(to_model[s.task])].push_back(i);
  }
  for (std::size_t m = 0; m < batches.size(); ++m) {
    TaskBatch& b = batches[m];
    b.task = m;
    const auto n = static_cast<Eigen::Index>(members[m].size());
    b.targets = RowVector::Zero(n);
    for (std::size_t si = 0; si < a.sources.size(); ++si)
      b.inputs.emplace_back(static_cast<Eigen::Index>(a.input_widths[si]), n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const Sample& s = data.samples[members[m][static_cast<std::size_t>(c)]];
      b.sample_ids.push_back(members[m][static_cast<std::size_t>(c)]);
      b.regions.push_back(s.region);
      if (s.yield) b.targets(c) = *s.yield;
      for (std::size_t si = 0; si < a.sources.size(); ++si) {
        const std::vector<double> block = s.block(a.sources[si]);
        for (std::size_t r = 0; r < block.size(); ++r)
          b.inputs[si](static_cast<Eigen::Index>(r), c) = block[r];
      }
    }
  }
  return batches;
}

std::vector<Batch> sample_dropout_masks(const MtlModel& model, std::size_t batch_size, Rng& rng) {
  const double rate = model.architecture().dropout_rate;
  std::vector<Batch> masks;
  for (std::size_t w : model.architecture().head_widths) {
    Batch m(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(batch_size));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform() < rate ? 0.0 : 1.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

namespace {

ForwardCache run_forward(const MtlModel& model, const TaskBatch& batch,
                         const std::vector<Batch>* masks) {
  const MtlArchitecture& a = model.architecture();
  const MtlParameters& p = model.parameters();
  if (batch.task >= model.tasks().size()) throw std::invalid_argument("batch task out of range");
  if (batch.inputs.size() != a.sources.size())
    throw std::invalid_argument("batch has the wrong number of sources");
  const auto n = static_cast<Eigen::Index>(batch.size());

  ForwardCache c;
  c.task = batch.task;
  c.batch_size = batch.size();
  c.concat.resize(static_cast<Eigen::Index>(a.extractor_width * a.sources.size()), n);
  for (std::size_t s = 0; s < a.sources.size(); ++s) {
    if (batch.inputs[s].rows() != static_cast<Eigen::Index>(a.input_widths[s]) ||
        batch.inputs[s].cols() != n)
      throw std::invalid_argument("batch input shape mismatch");
    c.latents.push_back(dense_batch(p.extractors[s], batch.inputs[s], a.hidden_activation));
    c.concat.middleRows(static_cast<Eigen::Index>(s * a.extractor_width),
                        static_cast<Eigen::Index>(a.extractor_width)) = c.latents.back();
  }
  c.shared = dense_batch(p.shared, c.concat, a.hidden_activation);

  const auto& head = p.heads[batch.task];
  const double keep_scale = 1.0 / (1.0 - a.dropout_rate);
  const Batch* in = &c.shared;
  c.hidden.reserve(a.head_widths.size());
  c.dropped.reserve(a.head_widths.size());
  for (std::size_t l = 0; l < a.head_widths.size(); ++l) {
    c.hidden.push_back(dense_batch(head[l], *in, a.hidden_activation));
    if (masks) {
      const Batch& m = (*masks)[l];
      if (m.rows() != c.hidden.back().rows() || m.cols() != n)
        throw std::invalid_argument("dropout mask shape mismatch");
      c.dropped.push_back(c.hidden.back().cwiseProduct(m) * keep_scale);
    } else {
      c.dropped.push_back(c.hidden.back());
    }
    in = &c.dropped.back();
  }
  Batch out = dense_batch(head.back(), *in, Activation::linear);
  c.output = out.row(0);
  if (masks) c.masks = *masks;
  return c;
}

} // namespace

ForwardCache forward(const MtlModel& model, const TaskBatch& batch, Mode mode, Rng* rng) {
  if (mode == Mode::infer) return run_forward(model, batch, nullptr);
  if (!rng) throw std::invalid_argument("train-mode forward needs a random stream");
  return forward_with_masks(model, batch, sample_dropout_masks(model, batch.size(), *rng));
}

ForwardCache forward_with_masks(const MtlModel& model, const TaskBatch& batch,
                                std::vector<Batch> masks) {
  if (masks.size() != model.architecture().head_widths.size())
    throw std::invalid_argument("one dropout mask per hidden head layer is required");
  return run_forward(model, batch, &masks);
}

RowVector predict(const MtlModel& model, const TaskBatch& batch) {
  return run_forward(model, batch, nullptr).output;
}

double predict_one(const MtlModel& model, std::span<const std::vector<double>> features,
                   std::string_view task) {
  const MtlArchitecture& a = model.architecture();
  if (features.size() != a.sources.size())
    throw std::invalid_argument("one feature block per active source is required");
  TaskBatch b;
  b.task = model.task_index(task);
  b.regions = {0};
  b.targets = RowVector::Zero(1);
  for (std::size_t s = 0; s < features.size(); ++s) {
    if (features[s].size() != a.input_widths[s])
      throw std::invalid_argument("feature block width mismatch");
    b.inputs.push_back(Eigen::Map<const Batch>(features[s].data(),
                                               static_cast<Eigen::Index>(features[s].size()), 1));
  }
  return predict(model, b)(0);
}

void backward(const MtlModel& model, const TaskBatch& batch, const ForwardCache& cache,
              const RowVector& output_grad, MtlParameters& grads) {
  const MtlArchitecture& a = model.architecture();
  const MtlParameters& p = model.parameters();
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (cache.task != batch.task || cache.batch_size != batch.size() || cache.output.size() != n ||
      cache.latents.size() != a.sources.size() || cache.hidden.size() != a.head_widths.size())
    throw std::invalid_argument("forward cache missing or does not belong to this batch");
  if (output_grad.size() != n) throw std::invalid_argument("output gradient size mismatch");

  const auto& head = p.heads[batch.task];
  auto& ghead = grads.heads[batch.task];
  const bool dropout = !cache.masks.empty();
  const double keep_scale = 1.0 / (1.0 - a.dropout_rate);
  const std::size_t depth = a.head_widths.size();

  // Output layer (linear).
  const Batch& last_in = depth == 0 ? cache.shared : cache.dropped.back();
  ghead[depth].weight.noalias() += output_grad * last_in.transpose();
  ghead[depth].bias(0) += output_grad.sum();
  Batch delta = head[depth].weight.transpose() * output_grad;

  for (std::size_t l = depth; l-- > 0;) {
    if (dropout) delta = delta.cwiseProduct(cache.masks[l]) * keep_scale;
    activation_backward(delta, cache.hidden[l], a.hidden_activation);
    const Batch& in = l == 0 ? cache.shared : cache.dropped[l - 1];
    ghead[l].weight.noalias() += delta * in.transpose();
    ghead[l].bias += delta.rowwise().sum();
    delta = head[l].weight.transpose() * delta;
  }

  activation_backward(delta, cache.shared, a.hidden_activation);
  grads.shared.weight.noalias() += delta * cache.concat.transpose();
  grads.shared.bias += delta.rowwise().sum();
  const Batch dconcat = p.shared.weight.transpose() * delta;

  for (std::size_t s = 0; s < a.sources.size(); ++s) {
    Batch ds = dconcat.middleRows(static_cast<Eigen::Index>(s * a.extractor_width),
                                  static_cast<Eigen::Index>(a.extractor_width));
    activation_backward(ds, cache.latents[s], a.hidden_activation);
    grads.extractors[s].weight.noalias() += ds * batch.inputs[s].transpose();
    grads.extractors[s].bias += ds.rowwise().sum();
  }
}

} // namespace stmtl
