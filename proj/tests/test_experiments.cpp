#include "stmtl/error.hpp"
#include "stmtl/experiments.hpp"
#include "stmtl/grid.hpp"

#include "support.hpp"

#include <doctest.h>

#include <stdexcept>

#include <algorithm>

using namespace stmtl;
namespace chr = std::chrono;

namespace {

RunConfig quick_config() {
  RunConfig c;
  c.extractor_width = 4;
  c.shared_width = 4;
  c.head_widths = {4};
  c.dropout = 0.0;
  c.train.epochs = 15;
  c.train.learning_rate = 0.01;
  c.radius = 1.5;
  return c;
}

ExperimentSpec quick_spec(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  s.config = quick_config();
  s.seeds = {1, 2};
  return s;
}

std::vector<std::string> names(const std::vector<Variant>& vs) {
  std::vector<std::string> out;
  for (const Variant& v : vs) out.push_back(v.name);
  return out;
}

} // namespace

TEST_CASE("model and experiment names") {
  for (ModelKind k : {ModelKind::spatial_mtl, ModelKind::mtl, ModelKind::independent, ModelKind::linear,
                      ModelKind::tree})
    CHECK(parse_model(model_name(k)) == k);
  CHECK_THROWS_AS(parse_model("svm"), std::invalid_argument);
  CHECK(parse_experiment("leave_one_out") == ExperimentKind::leave_one_out);
  CHECK_THROWS_AS(parse_experiment("yearly"), std::invalid_argument);
  CHECK(default_models(ExperimentKind::yearly_comparison).size() == 5);
  CHECK(default_models(ExperimentKind::lambda_sweep) == std::vector<ModelKind>{ModelKind::spatial_mtl});
}

TEST_CASE("variant shapes") {
  ExperimentSpec s = quick_spec(ExperimentKind::neighborhood_sweep);
  CHECK(names(experiment_variants(s)) ==
        std::vector<std::string>{"spatial_mtl@radius_1", "spatial_mtl@radius_2", "spatial_mtl@radius_3",
                                 "spatial_mtl@radius_4", "spatial_mtl@radius_5"});
  for (const Variant& v : experiment_variants(s)) CHECK(v.config.lambda == s.config.lambda);
  s.radii = {0.0};
  CHECK_THROWS_AS(experiment_variants(s), std::invalid_argument);

  s = quick_spec(ExperimentKind::monthly_online);
  s.models = {ModelKind::spatial_mtl};
  const auto monthly = experiment_variants(s);
  CHECK(names(monthly) == std::vector<std::string>{"spatial_mtl@May", "spatial_mtl@Jun", "spatial_mtl@Jul",
                                                   "spatial_mtl@Aug", "spatial_mtl@Sep"});
  const FieldDataset d = testing::small_field();
  CHECK(truncate_to_month(d, *monthly.back().month) == d);
  CHECK(truncate_to_month(d, *monthly.front().month).windows < d.windows);

  s = quick_spec(ExperimentKind::single_source);
  const auto single = experiment_variants(s);
  REQUIRE(single.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(single[i].sources == std::vector<Source>{s.ablation_sources[i]});

  s = quick_spec(ExperimentKind::lambda_sweep);
  const auto lambdas = experiment_variants(s);
  REQUIRE(lambdas.size() == 3);
  CHECK(lambdas[1].name == "spatial_mtl@lambda_0.1");
  CHECK(lambdas[2].config.lambda == 1.0);

  s = quick_spec(ExperimentKind::yearly_comparison);
  CHECK(names(experiment_variants(s)) ==
        std::vector<std::string>{"spatial_mtl", "mtl", "independent", "linear", "tree"});
}

TEST_CASE("leave-one-out narrows the network input") {
  const FieldDataset raw = testing::small_field();
  const RunConfig cfg = quick_config();
  const PreparedData data = prepare_data(raw, cfg, 3);
  const auto full = fit_network(data, cfg, cfg.sources, true, 3).model.architecture();
  ExperimentSpec s = quick_spec(ExperimentKind::leave_one_out);
  const std::vector<Variant> variants = experiment_variants(s);
  REQUIRE(variants.size() == s.ablation_sources.size());
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const Variant& v = variants[i];
    const Source removed = s.ablation_sources[i];
    CHECK(std::find(v.sources.begin(), v.sources.end(), removed) == v.sources.end());
    const auto arch = fit_network(data, v.config, v.sources, true, 3).model.architecture();
    CHECK(arch.sources.size() == full.sources.size() - 1);
    std::size_t full_width = 0, width = 0;
    for (auto w : full.input_widths) full_width += w;
    for (auto w : arch.input_widths) width += w;
    CHECK(width == full_width - raw.width(removed));
  }
}

TEST_CASE("prepared splits are disjoint and normalized") {
  const FieldDataset raw = testing::small_field(5, 5, 2, 11);
  const PreparedData data = prepare_data(raw, quick_config(), 9);
  CHECK(data.train.samples.size() + data.validation.samples.size() + data.test.samples.size() ==
        raw.samples.size());
  CHECK(data.test_raw.samples.size() == data.test.samples.size());
  for (const Sample& s : data.train.samples) {
    for (double v : s.soil) CHECK((v >= 0.0 && v <= 1.0));
    CHECK((*s.yield >= 0.0 && *s.yield <= 1.0));
  }
  const PreparedData again = prepare_data(raw, quick_config(), 9);
  CHECK(again.test == data.test);
  CHECK(again.norm == data.norm);
}

TEST_CASE("neighbor pair count grows with radius") {
  const FieldGrid g = testing::small_field(6, 6).grid;
  std::size_t prev = 0;
  for (double r : {1.0, 1.5, 2.0, 3.0, 5.0}) {
    const std::size_t n = build_spatial_weights(g, r).pair_count();
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("yearly comparison runs every model") {
  const FieldDataset raw = testing::small_field(4, 5, 2, 5);
  ExperimentSpec s = quick_spec(ExperimentKind::yearly_comparison);
  const ExperimentResult res = run_experiment(s, raw);
  CHECK(res.configs.size() == 5);
  CHECK(res.tasks == std::vector<std::string>{raw.tasks[0], raw.tasks[1], "all"});
  REQUIRE(res.per_seed.size() == 2);
  CHECK(res.per_seed[0].size() == 15);
  CHECK(res.median.size() == 15);
  CHECK(res.median_for("mtl").rmse != res.median_for("spatial_mtl").rmse);
  CHECK(res.median_for("linear", raw.tasks[1]).n > 0);
  CHECK_THROWS_AS(res.median_for("svm"), std::out_of_range);

  const std::string table = rmse_table_csv(res);
  CHECK(table.starts_with("config," + raw.tasks[0] + "," + raw.tasks[1] + ",all\n"));
  CHECK(std::count(table.begin(), table.end(), '\n') == 6);

  const ExperimentResult again = run_experiment(s, raw);
  CHECK(again.median == res.median);

  const auto dir = testing::temp_dir("experiment");
  write_experiment(res, dir);
  CHECK(parse_metrics_csv(dir / "metrics.csv") == res.median);
  CHECK(parse_metrics_csv(dir / "metrics_seed2.csv") == res.per_seed[1]);
  CHECK(testing::slurp(dir / "rmse_table.csv") == table);

  const FieldDataset one = select_tasks(raw, std::vector<std::size_t>{0});
  CHECK_THROWS_AS(run_experiment(s, one), std::invalid_argument);
}

TEST_CASE("monthly variants share a split per month") {
  const FieldDataset raw = testing::small_field(4, 4, 2, 8);
  ExperimentSpec s = quick_spec(ExperimentKind::monthly_online);
  s.models = {ModelKind::linear};
  s.months = {chr::May, chr::September};
  s.seeds = {4};
  const ExperimentResult res = run_experiment(s, raw);
  CHECK(res.configs == std::vector<std::string>{"linear@May", "linear@Sep"});
  CHECK(res.median_for("linear@May").n == res.median_for("linear@Sep").n);

  ExperimentSpec y = quick_spec(ExperimentKind::yearly_comparison);
  y.models = {ModelKind::linear};
  y.seeds = {4};
  CHECK(run_experiment(y, raw).median_for("linear") == res.median_for("linear@Sep"));
}
