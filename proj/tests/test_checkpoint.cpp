#include "stmtl/checkpoint.hpp"
#include "stmtl/error.hpp"

#include "gradcheck.hpp"
#include "support.hpp"

#include <doctest.h>

#include <stdexcept>

using namespace stmtl;

namespace {

Checkpoint sample_checkpoint() {
  const FieldDataset d = testing::toy_dataset(3, 3, 2, 4);
  Checkpoint cp;
  cp.model = testing::toy_model(d, 8);
  cp.norm = fit_normalization(d);
  cp.norm.target = {812.25, 1533.0 / 7.0};
  cp.soil_columns = d.soil_columns;
  cp.windows = d.windows;
  return cp;
}

} // namespace

TEST_CASE("checkpoint roundtrip is bit exact") {
  const Checkpoint cp = sample_checkpoint();
  const std::string text = checkpoint_text(cp);
  CHECK(text.starts_with("stmtl-checkpoint 1\n"));
  const Checkpoint back = parse_checkpoint(text);
  CHECK(back.model.architecture() == cp.model.architecture());
  CHECK(back.model.tasks() == cp.model.tasks());
  CHECK(back.norm == cp.norm);
  CHECK(back.soil_columns == cp.soil_columns);
  CHECK(back.windows == cp.windows);
  const auto a = cp.model.parameters().tensors();
  const auto b = back.model.parameters().tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::equal(a[i].begin(), a[i].end(), b[i].begin(), b[i].end()));
  CHECK(checkpoint_text(back) == text);

  const auto dir = testing::temp_dir("checkpoint");
  save_checkpoint(cp, dir / "m.ckpt");
  CHECK(testing::slurp(dir / "m.ckpt") == text);
  CHECK(checkpoint_text(load_checkpoint(dir / "m.ckpt")) == text);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string text = checkpoint_text(sample_checkpoint());
  CHECK_THROWS_AS(parse_checkpoint("not-a-checkpoint 1"), ValidationError);
  CHECK_THROWS_AS(parse_checkpoint("stmtl-checkpoint 2\n"), ValidationError);
  CHECK_THROWS_AS(parse_checkpoint(text.substr(0, text.size() / 2)), ValidationError);
  std::string renamed = text;
  renamed.replace(renamed.find("shared.weight"), 13, "shared.wrongs");
  CHECK_THROWS_AS(parse_checkpoint(renamed), ValidationError);
  std::string badnum = text;
  badnum.replace(badnum.find("dropout ") + 8, 1, "z");
  CHECK_THROWS_AS(parse_checkpoint(badnum), ValidationError);
  CHECK_THROWS_AS(load_checkpoint(std::filesystem::path(STMTL_TEST_TMPDIR) / "missing.ckpt"), ValidationError);
}

TEST_CASE("labels with whitespace cannot be stored") {
  Checkpoint cp = sample_checkpoint();
  cp.soil_columns[0] = "soil a";
  CHECK_THROWS_AS(checkpoint_text(cp), std::invalid_argument);
}
