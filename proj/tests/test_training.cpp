#include "stmtl/error.hpp"
#include "stmtl/training.hpp"

#include "gradcheck.hpp"
#include "support.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>

using namespace stmtl;

namespace {

// Region 0 has region 1 as its only neighbor at distance 1 (weight 1).
SpatialWeights one_pair(std::size_t regions) {
  std::vector<std::vector<Neighbor>> lists(regions);
  lists[0] = {Neighbor{1, idw_weight(1.0, 2.0)}};
  return SpatialWeights(1.0, 2.0, lists);
}

bool same_parameters(const MtlModel& a, const MtlModel& b) {
  const auto x = a.parameters().tensors();
  const auto y = b.parameters().tensors();
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::equal(x[i].begin(), x[i].end(), y[i].begin(), y[i].end())) return false;
  return true;
}

bool same_history(const TrainHistory& a, const TrainHistory& b, bool compare_spatial = true) {
  if (a.epochs.size() != b.epochs.size() || a.best_epoch != b.best_epoch) return false;
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    const EpochRecord &x = a.epochs[e], &y = b.epochs[e];
    if (x.total_loss != y.total_loss || x.data_loss != y.data_loss ||
        (compare_spatial && x.spatial_reg != y.spatial_reg))
      return false;
    if (x.val_rmse.size() != y.val_rmse.size()) return false;
    for (std::size_t t = 0; t < x.val_rmse.size(); ++t)
      if (x.val_rmse[t] != y.val_rmse[t] && !(std::isnan(x.val_rmse[t]) && std::isnan(y.val_rmse[t])))
        return false;
  }
  return true;
}

FieldDataset normalized_field(std::size_t rows, std::size_t cols, std::size_t tasks, double noise,
                              std::uint64_t seed) {
  return normalize(testing::small_field(rows, cols, tasks, seed, noise)).first;
}

MtlArchitecture compact(const FieldDataset& d) {
  MtlArchitecture a = architecture_for(d, {kAllSources.begin(), kAllSources.end()});
  a.extractor_width = 8;
  a.shared_width = 8;
  a.head_widths = {8};
  return a;
}

} // namespace

TEST_CASE("data loss is a plain sum of squares") {
  const std::vector<double> y{1, 0}, z{0, 0};
  CHECK(mse_data_loss(y, y) == 0.0);
  CHECK(mse_data_loss(y, z) == 1.0);
  CHECK_THROWS_AS(mse_data_loss(y, std::vector<double>{1}), std::invalid_argument);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    CHECK(mse_data_loss(a, b) >= 0.0);
  }
}

TEST_CASE("spatial regularizer hand cases") {
  const SpatialWeights w = one_pair(2);
  const RegionValues pred{0.5, 0.3}, tgt{0.5, 0.3};
  CHECK(spatial_regularizer(pred, tgt, w) == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(std::abs(spatial_regularizer(pred, tgt, w) - 0.04) <= 1e-15);
  CHECK(spatial_regularizer_terms(pred, tgt, w)[0] == spatial_regularizer(pred, tgt, w));

  const RegionValues agree{0.3, 0.3};
  CHECK(spatial_regularizer(agree, agree, w) == 0.0);
  const SpatialWeights empty(1.0, 2.0, {{}, {}});
  CHECK(spatial_regularizer(pred, tgt, empty) == 0.0);

  // Averaging divides by |G(k)|: two neighbors at weight 1 each
  const SpatialWeights two(1.0, 2.0, {{Neighbor{1, 1.0}, Neighbor{2, 1.0}}, {}, {}});
  const RegionValues p3{0.5, 0.0, 0.0}, t3{0.5, 0.3, 0.1};
  CHECK(spatial_regularizer(p3, t3, two) == doctest::Approx((0.04 + 0.16) / 2.0).epsilon(1e-15));

  // neighbor mode uses predictions as y_j
  CHECK(spatial_regularizer(RegionValues{0.5, 0.1}, RegionValues{0.5, 0.3}, w, NeighborTarget::predicted) ==
        doctest::Approx(0.16).epsilon(1e-15));

  // absent neighbor
  CHECK_THROWS_AS(spatial_regularizer(RegionValues{0.5, std::nullopt}, RegionValues{0.5, std::nullopt}, w),
                  std::invalid_argument);
}

TEST_CASE("total loss combines data and spatial terms") {
  const SpatialWeights w = one_pair(3);
  const RegionValues pred{0.5, 0.3, 0.0}, tgt{0.5, 0.3, 1.0};
  const LossValue one = total_loss(tgt, pred, LossConfig{1.0, NeighborTarget::actual, &w});
  CHECK(one.data == 1.0);
  CHECK(one.spatial == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(one.total == doctest::Approx(1.04).epsilon(1e-15));

  const LossValue zero = total_loss(tgt, pred, LossConfig{0.0, NeighborTarget::actual, &w});
  CHECK(zero.total == zero.data);
  const LossValue none = total_loss(tgt, pred, LossConfig{0.7});
  CHECK(none.total == none.data);

  const LossValue a = total_loss(tgt, pred, LossConfig{0.3, NeighborTarget::actual, &w});
  const LossValue b = total_loss(tgt, pred, LossConfig{0.6, NeighborTarget::actual, &w});
  CHECK(b.total - b.data == doctest::Approx(2.0 * (a.total - a.data)).epsilon(1e-14));
  CHECK_THROWS_AS(total_loss(tgt, pred, LossConfig{-1.0}), std::invalid_argument);
}

TEST_CASE("regularizer gradient matches finite differences") {
  const FieldGrid g = build_grid(4, 4, std::vector<bool>(16, true));
  const SpatialWeights w = build_spatial_weights(g, 2.0);
  Rng rng(3);
  RegionValues pred(16), tgt(16);
  for (std::size_t k = 0; k < 16; ++k) {
    pred[k] = rng.uniform();
    tgt[k] = rng.uniform();
  }
  for (NeighborTarget mode : {NeighborTarget::actual, NeighborTarget::predicted}) {
    const auto grad = spatial_regularizer_gradient(pred, tgt, w, mode);
    for (std::size_t k = 0; k < 16; ++k) {
      const double h = 1e-6;
      RegionValues up = pred, down = pred;
      *up[k] += h;
      *down[k] -= h;
      const double numeric =
          (spatial_regularizer(up, tgt, w, mode) - spatial_regularizer(down, tgt, w, mode)) / (2 * h);
      CHECK(std::abs(grad[k] - numeric) < 1e-6);
    }
  }
}

TEST_CASE("optimizer steps") {
  const FieldDataset d = testing::toy_dataset(2, 2, 1, 1);
  const MtlModel start = testing::toy_model(d, 2);

  SUBCASE("sgd hand case") {
    MtlModel m = start;
    m.parameters().shared.bias(0) = 1.0;
    MtlParameters g = m.zero_gradients();
    g.shared.bias(0) = 2.0;
    TrainConfig c;
    c.optimizer = OptimizerKind::sgd;
    c.learning_rate = 0.1;
    OptimizerState s;
    optimizer_step(m, g, s, c);
    CHECK(m.parameters().shared.bias(0) == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("zero gradient is a fixed point") {
    for (OptimizerKind k : {OptimizerKind::sgd, OptimizerKind::adam}) {
      MtlModel m = start;
      TrainConfig c;
      c.optimizer = k;
      OptimizerState s;
      for (int i = 0; i < 3; ++i) optimizer_step(m, m.zero_gradients(), s, c);
      CHECK(same_parameters(m, start));
    }
  }
  SUBCASE("adam first step moves by the learning rate") {
    MtlModel m = start;
    MtlParameters g = m.zero_gradients();
    g.shared.bias(1) = -5.0;
    TrainConfig c;
    c.learning_rate = 0.01;
    OptimizerState s;
    const double before = m.parameters().shared.bias(1);
    optimizer_step(m, g, s, c);
    CHECK(m.parameters().shared.bias(1) - before == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(s.step == 1);
  }
  SUBCASE("non-finite gradient names the tensor") {
    MtlModel m = start;
    MtlParameters g = m.zero_gradients();
    g.heads[0][1].weight(0, 0) = std::nan("");
    TrainConfig c;
    OptimizerState s;
    try {
      optimizer_step(m, g, s, c);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("head.t0.1.weight") != std::string::npos);
    }
    CHECK(same_parameters(m, start));
  }
}

TEST_CASE("training loop basics") {
  const FieldDataset d = normalized_field(4, 4, 2, 20.0, 3);
  const MtlModel m(compact(d), d.tasks, 5);
  const SpatialWeights w = build_spatial_weights(d.grid, 1.5);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.seed = 9;
  c.early_stop_patience.reset();

  SUBCASE("zero epochs returns the model unchanged") {
    c.epochs = 0;
    const TrainResult r = train(m, d, nullptr, LossConfig{0.1, NeighborTarget::actual, &w}, c);
    CHECK(same_parameters(r.model, m));
    CHECK(r.history.epochs.empty());
  }
  SUBCASE("identical runs give identical trajectories") {
    c.epochs = 30;
    const LossConfig l{0.1, NeighborTarget::actual, &w};
    const TrainResult a = train(m, d, &d, l, c);
    const TrainResult b = train(m, d, &d, l, c);
    CHECK(same_history(a.history, b.history));
    CHECK(same_parameters(a.model, b.model));
    CHECK(a.history.epochs.size() == 30);
    for (const EpochRecord& e : a.history.epochs) {
      CHECK(e.spatial_reg >= 0.0);
      CHECK(e.val_rmse.size() == 2);
    }
    c.seed = 10;
    CHECK_FALSE(same_parameters(train(m, d, &d, l, c).model, a.model));
  }
  SUBCASE("lambda zero reduces to the plain loss") {
    c.epochs = 40;
    const TrainResult with = train(m, d, &d, LossConfig{0.0, NeighborTarget::actual, &w}, c);
    const TrainResult without = train(m, d, &d, LossConfig{0.0}, c);
    for (const EpochRecord& e : with.history.epochs) CHECK(std::abs(e.total_loss - e.data_loss) <= 1e-12);
    CHECK(same_history(with.history, without.history, false));
    CHECK(same_parameters(with.model, without.model));
  }
  SUBCASE("empty training set") {
    FieldDataset empty = d;
    for (Sample& s : empty.samples) s.yield.reset();
    CHECK_THROWS_AS(train(m, empty, nullptr, LossConfig{0.0}, c), ValidationError);
  }
  SUBCASE("early stopping restores the best epoch") {
    c.epochs = 400;
    c.learning_rate = 0.05;
    c.early_stop_patience = 5;
    const auto [tr, va] = train_test_split(d, 0.3, 1);
    const TrainResult r = train(m, tr, &va, LossConfig{0.1, NeighborTarget::actual, &w}, c);
    CHECK(r.history.stopped_early);
    CHECK(r.history.epochs.size() == r.history.best_epoch + 6);
    const auto vb = make_batches(r.model, va, true);
    const std::vector<double>& best = r.history.epochs[r.history.best_epoch].val_rmse;
    for (std::size_t t = 0; t < vb.size(); ++t) {
      const RowVector p = predict(r.model, vb[t]);
      const double rmse = std::sqrt((vb[t].targets - p).squaredNorm() / double(vb[t].size()));
      CHECK(rmse == best[t]);
    }
  }
}

TEST_CASE("convex toy case decreases monotonically") {
  const FieldDataset d = normalized_field(3, 3, 1, 10.0, 2);
  MtlArchitecture a = compact(d);
  a.head_widths = {};
  a.hidden_activation = Activation::linear;
  const MtlModel m(a, d.tasks, 1);
  TrainConfig c;
  c.optimizer = OptimizerKind::sgd;
  c.learning_rate = 1e-4;
  c.epochs = 300;
  c.early_stop_patience.reset();
  const TrainResult r = train(m, d, nullptr, LossConfig{0.0}, c);
  for (std::size_t e = 1; e < r.history.epochs.size(); ++e)
    CHECK(r.history.epochs[e].total_loss <= r.history.epochs[e - 1].total_loss + 1e-6);
  CHECK(r.history.epochs.back().total_loss < r.history.epochs.front().total_loss);
}

TEST_CASE("noise-free linear data is fitted closely") {
  const FieldDataset d = normalized_field(6, 6, 1, 0.0, 4);
  MtlArchitecture a = compact(d);
  a.dropout_rate = 0.0;
  const MtlModel m(a, d.tasks, 2);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 1500;
  c.early_stop_patience.reset();
  const TrainResult r = train(m, d, nullptr, LossConfig{0.0}, c);
  const auto b = make_batches(r.model, d, true)[0];
  const RowVector p = predict(r.model, b);
  CHECK(std::sqrt((b.targets - p).squaredNorm() / double(b.size())) < 0.02);
}

TEST_CASE("loss halves on the default synthetic benchmark") {
  const FieldDataset d = normalize(synth_field(SynthOptions{}).data).first;
  MtlModel m(architecture_for(d, {kAllSources.begin(), kAllSources.end()}), d.tasks, 1);
  const SpatialWeights w = build_spatial_weights(d.grid, 5.0);
  TrainConfig c;
  c.epochs = 60;
  c.learning_rate = 0.01;
  c.seed = 1;
  const TrainResult r = train(m, d, nullptr, LossConfig{0.1, NeighborTarget::actual, &w}, c);
  CHECK(r.history.epochs.back().total_loss * 2.0 <= r.history.epochs.front().total_loss);
}

TEST_CASE("history csv") {
  TrainHistory h;
  h.epochs.push_back({1.5, 1.0, 5.0, {0.25, std::nan("")}});
  const std::vector<std::string> tasks{"a", "b"};
  CHECK(history_csv(h, tasks) ==
        "epoch,total_loss,data_loss,spatial_reg,val_rmse_a,val_rmse_b\n0,1.5,1,5,0.25,\n");
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
