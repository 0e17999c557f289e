#include "stmtl/mtl_net.hpp"
#include "stmtl/rng.hpp"

#include "gradcheck.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>

using namespace stmtl;
using stmtl::testing::toy_dataset;
using stmtl::testing::toy_model;

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
  CHECK(sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
  CHECK(sigmoid(-2.0) == doctest::Approx(1.0 - sigmoid(2.0)).epsilon(1e-15));
}

TEST_CASE("dense layer and concatenation") {
  Matrix w(2, 2);
  w << 1, 2, -1, 0.5;
  Vector b(2);
  b << 0.5, 0;
  Vector x(2);
  x << 1, 1;
  const Vector lin = dense_forward(x, w, b, Activation::linear);
  CHECK(lin(0) == 3.5);
  CHECK(lin(1) == -0.5);
  const Vector sig = dense_forward(x, w, b, Activation::sigmoid);
  CHECK(sig(0) == sigmoid(3.5));
  CHECK_THROWS_AS(dense_forward(Vector::Ones(3), w, b, Activation::linear), std::invalid_argument);

  const std::vector<Vector> parts{Vector::Constant(2, 1.0), Vector::Constant(1, 2.0)};
  const Vector c = concat_features(parts);
  REQUIRE(c.size() == 3);
  CHECK(c(0) == 1.0);
  CHECK(c(2) == 2.0);
  CHECK_THROWS_AS(concat_features(std::span<const Vector>{}), std::invalid_argument);
}

TEST_CASE("model layout and initialization") {
  const FieldDataset d = toy_dataset(3, 3, 2, 1);
  const MtlArchitecture a = testing::toy_architecture(d);
  const MtlModel m(a, d.tasks, 42);
  const MtlParameters& p = m.parameters();
  REQUIRE(p.extractors.size() == 4);
  CHECK(p.extractors[0].weight.rows() == 3);
  CHECK(p.extractors[0].weight.cols() == 2);
  CHECK(p.extractors[3].weight.cols() == 4);
  CHECK(p.shared.weight.rows() == 4);
  CHECK(p.shared.weight.cols() == 12);
  REQUIRE(p.heads.size() == 2);
  REQUIRE(p.heads[0].size() == 3);
  CHECK(p.heads[0][2].weight.rows() == 1);
  CHECK(p.heads[0][2].weight.cols() == 3);
  CHECK(m.tensor_names().size() == p.tensors().size());
  CHECK(m.tensor_names().front() == "extractor.soil.weight");
  CHECK(m.tensor_names().back() == "head.t1.output.bias");

  const double limit = std::sqrt(6.0 / (4.0 + 12.0));
  CHECK(p.shared.weight.cwiseAbs().maxCoeff() <= limit);
  CHECK(p.shared.bias.isZero());
  const MtlModel same(a, d.tasks, 42);
  CHECK(same.parameters().shared.weight == p.shared.weight);
  const MtlModel other(a, d.tasks, 43);
  CHECK(other.parameters().shared.weight != p.shared.weight);
}

TEST_CASE("architecture validation") {
  const FieldDataset d = toy_dataset(2, 2, 1, 1);
  MtlArchitecture a = testing::toy_architecture(d);
  a.dropout_rate = 1.0;
  CHECK_THROWS_AS(MtlModel(a, d.tasks, 1), std::invalid_argument);
  a = testing::toy_architecture(d);
  a.sources = {Source::soil, Source::soil, Source::ndvi, Source::weather};
  CHECK_THROWS_AS(MtlModel(a, d.tasks, 1), std::invalid_argument);
  a = testing::toy_architecture(d);
  a.shared_width = 0;
  CHECK_THROWS_AS(MtlModel(a, d.tasks, 1), std::invalid_argument);
  CHECK_THROWS_AS(MtlModel(testing::toy_architecture(d), {}, 1), std::invalid_argument);

  MtlParameters bad = MtlModel(testing::toy_architecture(d), d.tasks, 1).parameters();
  bad.shared.bias.resize(7);
  CHECK_THROWS_AS(MtlModel(testing::toy_architecture(d), d.tasks, bad), std::invalid_argument);
}

TEST_CASE("predict_one agrees with batched inference and batches are independent") {
  const FieldDataset d = toy_dataset(3, 3, 2, 2);
  const MtlModel m = toy_model(d, 5);
  const auto batches = make_batches(m, d, true);
  REQUIRE(batches.size() == 2);
  CHECK(batches[1].size() == 9);
  const RowVector all = predict(m, batches[1]);
  for (std::size_t i = 0; i < 9; ++i) {
    const Sample& s = d.samples[batches[1].sample_ids[i]];
    std::vector<std::vector<double>> feats;
    for (Source src : kAllSources) feats.push_back(s.block(src));
    CHECK(predict_one(m, feats, "t1") == doctest::Approx(all(Eigen::Index(i))).epsilon(1e-14));
  }
}

TEST_CASE("dropout behaviour") {
  const FieldDataset d = toy_dataset(3, 3, 1, 3);
  SUBCASE("rate zero in train mode equals infer mode") {
    MtlArchitecture a = testing::toy_architecture(d);
    a.dropout_rate = 0.0;
    const MtlModel m(a, d.tasks, 9);
    const auto b = make_batches(m, d, true)[0];
    Rng rng(1);
    const ForwardCache train = forward(m, b, Mode::train, &rng);
    CHECK(train.output == predict(m, b));
  }
  SUBCASE("fixed masks equal the scaled surviving subnetwork") {
    const MtlModel m = toy_model(d, 4);
    const auto batches = make_batches(m, d, true);
    TaskBatch one = batches[0];
    for (auto& in : one.inputs) in = in.col(4).eval();
    one.targets = one.targets.segment(4, 1).eval();
    one.regions = {one.regions[4]};
    one.sample_ids = {one.sample_ids[4]};

    std::vector<Batch> masks{Batch(4, 1), Batch(3, 1)};
    masks[0] << 1, 0, 1, 1;
    masks[1] << 0, 1, 1;
    const double s = 1.0 / (1.0 - 0.25);
    const ForwardCache dropped = forward_with_masks(m, one, masks);

    MtlParameters p = m.parameters();
    for (Eigen::Index i = 0; i < 4; ++i) p.heads[0][1].weight.col(i) *= masks[0](i, 0) * s;
    for (Eigen::Index i = 0; i < 3; ++i) p.heads[0][2].weight.col(i) *= masks[1](i, 0) * s;
    const MtlModel sub(m.architecture(), m.tasks(), p);
    CHECK(dropped.output(0) == doctest::Approx(predict(sub, one)(0)).epsilon(1e-14));
    CHECK(dropped.output(0) != doctest::Approx(predict(m, one)(0)).epsilon(1e-6));
  }
  SUBCASE("masks drop roughly the configured share") {
    MtlArchitecture a = testing::toy_architecture(d);
    a.head_widths = {50};
    a.dropout_rate = 0.2;
    const MtlModel m(a, d.tasks, 1);
    Rng rng(5);
    const auto masks = sample_dropout_masks(m, 200, rng);
    REQUIRE(masks.size() == 1);
    const double kept = masks[0].mean();
    CHECK(kept > 0.77);
    CHECK(kept < 0.83);
  }
  SUBCASE("inference is deterministic") {
    const MtlModel m = toy_model(d, 4);
    const auto b = make_batches(m, d, true)[0];
    CHECK(predict(m, b) == predict(m, b));
    CHECK_THROWS_AS(forward(m, b, Mode::train, nullptr), std::invalid_argument);
  }
}

TEST_CASE("single-sample linear model gradient matches the least-squares formula") {
  const FieldDataset full = toy_dataset(1, 1, 1, 8);
  MtlArchitecture a = testing::toy_architecture(full);
  a.head_widths = {};
  a.hidden_activation = Activation::linear;
  const MtlModel m(a, full.tasks, 3);
  const auto batches = make_batches(m, full, true);
  const std::vector<std::vector<Batch>> masks(1);
  const BatchLoss bl = loss_and_gradient(m, batches, masks, {}, LossConfig{0.0});
  const ForwardCache c = forward(m, batches[0], Mode::infer, nullptr);
  const double e = batches[0].targets(0) - c.output(0);
  CHECK(bl.loss.data == doctest::Approx(e * e).epsilon(1e-15));
  const auto& out = bl.gradients.heads[0][0];
  CHECK(out.bias(0) == doctest::Approx(-2.0 * e).epsilon(1e-14));
  for (Eigen::Index i = 0; i < out.weight.cols(); ++i)
    CHECK(out.weight(0, i) == doctest::Approx(-2.0 * e * c.shared(i, 0)).epsilon(1e-13));
  // shared bias gradient = -2e * w_out for a linear network
  for (Eigen::Index i = 0; i < a.shared_width; ++i)
    CHECK(bl.gradients.shared.bias(i) ==
          doctest::Approx(-2.0 * e * m.parameters().heads[0][0].weight(0, i)).epsilon(1e-13));
}

TEST_CASE("analytic gradients match finite differences") {
  const FieldDataset d = toy_dataset(3, 3, 2, 10);
  const MtlModel m = toy_model(d, 11);
  const auto batches = make_batches(m, d, true);
  const SpatialWeights w = build_spatial_weights(d.grid, 1.5);
  const auto restricted = restrict_weights(w, batches);
  Rng rng(12);
  std::vector<std::vector<Batch>> masks;
  for (const auto& b : batches) masks.push_back(sample_dropout_masks(m, b.size(), rng));
  const std::vector<std::vector<Batch>> none(batches.size());

  for (double lambda : {0.0, 0.5}) {
    for (NeighborTarget target : {NeighborTarget::actual, NeighborTarget::predicted}) {
      LossConfig cfg{lambda, target, &w};
      const auto infer = testing::check_gradients(m, batches, none, restricted, cfg);
      CHECK_MESSAGE(infer.max_rel_error < 1e-5, infer.worst_tensor);
      const auto fixed = testing::check_gradients(m, batches, masks, restricted, cfg);
      CHECK_MESSAGE(fixed.max_rel_error < 1e-5, fixed.worst_tensor);
    }
  }
  const auto plain = testing::check_gradients(m, batches, none, {}, LossConfig{0.0});
  CHECK(plain.max_rel_error < 1e-5);
}

TEST_CASE("backward rejects a foreign cache") {
  const FieldDataset d = toy_dataset(2, 2, 2, 1);
  const MtlModel m = toy_model(d, 1);
  const auto batches = make_batches(m, d, true);
  const ForwardCache c = forward(m, batches[0], Mode::infer, nullptr);
  MtlParameters g = m.zero_gradients();
  CHECK_THROWS_AS(backward(m, batches[1], c, RowVector::Zero(4), g), std::invalid_argument);
  CHECK_THROWS_AS(backward(m, batches[0], c, RowVector::Zero(3), g), std::invalid_argument);
}
