#include "stmtl/error.hpp"
#include "stmtl/heatmap.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace stmtl;

namespace {

std::vector<std::optional<double>> ramp(std::size_t n) {
  std::vector<std::optional<double>> v;
  for (std::size_t k = 0; k < n; ++k) v.push_back(1000.0 + 12.345 * static_cast<double>(k));
  return v;
}

} // namespace

TEST_CASE("heatmap levels") {
  const FieldGrid two = build_grid(2, 1, {true, true});
  CHECK(heatmap_levels(two, {0.0, 800.0}) == std::vector<std::uint8_t>{255, 0});

  const FieldGrid flat = build_grid(3, 3, std::vector<bool>(9, true));
  const auto uniform = heatmap_levels(flat, std::vector<std::optional<double>>(9, 42.0));
  CHECK(std::all_of(uniform.begin(), uniform.end(), [&](auto l) { return l == uniform.front(); }));

  const FieldGrid masked = build_grid(2, 2, {true, false, true, true});
  const auto levels = heatmap_levels(masked, {3.0, 1.0, 2.0});
  CHECK(levels == std::vector<std::uint8_t>{0, 255, 255, 127});
}

TEST_CASE("heatmap rejects missing values") {
  const FieldGrid g = build_grid(2, 2, std::vector<bool>(4, true));
  CHECK_THROWS_AS(heatmap_levels(g, {1.0, 2.0, std::nullopt, 4.0}), ValidationError);
  CHECK_THROWS_AS(heatmap_csv(g, {1.0, 2.0}), ValidationError);
  CHECK_THROWS_AS(heatmap_pgm(g, {1.0, 2.0, NAN, 4.0}), ValidationError);
}

TEST_CASE("heatmap export roundtrip") {
  const FieldGrid g = build_grid(3, 4, {true, true, false, true, true, true, true, true, true, false, true, true});
  const auto values = ramp(g.region_count());
  const auto dir = testing::temp_dir("heatmap");
  export_heatmap(g, values, dir / "map");

  const auto cells = load_heatmap_csv(dir / "map.csv");
  REQUIRE(cells.size() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    REQUIRE(cells[r].size() == 4);
    for (std::size_t c = 0; c < 4; ++c) {
      const auto k = g.region_at(r, c);
      REQUIRE(k.has_value() == cells[r][c].has_value());
      if (k) CHECK(std::abs(*cells[r][c] - *values[*k]) <= 1e-9);
    }
  }

  const std::string pgm = testing::slurp(dir / "map.pgm");
  CHECK(pgm.starts_with("P5\n#"));
  const auto levels = heatmap_levels(g, values);
  REQUIRE(pgm.size() > levels.size());
  CHECK(pgm.substr(pgm.size() - levels.size()) == std::string(levels.begin(), levels.end()));
  CHECK(pgm.find("\n4 3\n255\n") != std::string::npos);
}
