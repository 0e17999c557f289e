#include "stmtl/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stmtl {

FieldGrid::FieldGrid(std::size_t rows, std::size_t cols, const std::vector<bool>& valid,
                     double cell_size)
    : rows_(rows), cols_(cols), cell_size_(cell_size) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("grid dimensions must be positive");
  if (valid.empty()) throw std::invalid_argument("grid mask is empty");
  if (valid.size() != rows * cols)
    throw std::invalid_argument("grid mask has " + std::to_string(valid.size()) +
                                " entries, expected " + std::to_string(rows * cols));
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell size must be positive");
  region_of_cell_.assign(rows * cols, -1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!valid[r * cols + c]) continue;
      region_of_cell_[r * cols + c] = static_cast<std::ptrdiff_t>(cells_.size());
      cells_.push_back({r, c});
    }
  }
  if (cells_.empty()) throw std::invalid_argument("grid mask has no valid cell");
}

bool FieldGrid::valid(std::size_t row, std::size_t col) const {
  return row < rows_ && col < cols_ && region_of_cell_[row * cols_ + col] >= 0;
}

CellIndex FieldGrid::cell(std::size_t region) const {
  if (region >= cells_.size())
    throw std::out_of_range("unknown region id " + std::to_string(region));
  return cells_[region];
}

std::optional<std::size_t> FieldGrid::region_at(std::size_t row, std::size_t col) const {
  if (!valid(row, col)) return std::nullopt;
  return static_cast<std::size_t>(region_of_cell_[row * cols_ + col]);
}

std::vector<bool> FieldGrid::mask() const {
  std::vector<bool> m(rows_ * cols_);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = region_of_cell_[i] >= 0;
  return m;
}

FieldGrid build_grid(std::size_t rows, std::size_t cols, const std::vector<bool>& valid_mask) {
  return FieldGrid(rows, cols, valid_mask);
}

double euclidean_distance(const FieldGrid& grid, std::size_t k, std::size_t j) {
  const CellIndex a = grid.cell(k);
  const CellIndex b = grid.cell(j);
  const double dr = static_cast<double>(a.row) - static_cast<double>(b.row);
  const double dc = static_cast<double>(a.col) - static_cast<double>(b.col);
  return std::sqrt(dr * dr + dc * dc);
}

double idw_weight(double d, double p) {
  if (!(d > 0.0)) throw std::invalid_argument("inverse-distance weight needs d > 0");
  if (!(p > 0.0)) throw std::invalid_argument("inverse-distance power must be positive");
  // Integer powers stay exact for the usual p = 2 case.
  if (p == 2.0) return 1.0 / (d * d);
  return 1.0 / std::pow(d, p);
}

namespace {

double idw_weight_squared(double d2, double p) {
  return p == 2.0 ? 1.0 / d2 : 1.0 / std::pow(d2, 0.5 * p);
}

} // namespace

SpatialWeights::SpatialWeights(double radius, double power,
                               std::vector<std::vector<Neighbor>> lists)
    : radius_(radius), power_(power), lists_(std::move(lists)) {
  for (std::size_t k = 0; k < lists_.size(); ++k) {
    for (const Neighbor& n : lists_[k]) {
      if (n.region == k) throw std::invalid_argument("region listed as its own neighbor");
      if (n.region >= lists_.size()) throw std::invalid_argument("neighbor id out of range");
      if (!(n.weight > 0.0) || !std::isfinite(n.weight))
        throw std::invalid_argument("neighbor weight must be positive and finite");
    }
  }
}

std::size_t SpatialWeights::pair_count() const {
  std::size_t n = 0;
  for (const auto& l : lists_) n += l.size();
  return n;
}

SpatialWeights SpatialWeights::restricted_to(const std::vector<bool>& keep) const {
  if (keep.size() != lists_.size())
    throw std::invalid_argument("restriction mask does not match region count");
  std::vector<std::vector<Neighbor>> out(lists_.size());
  for (std::size_t k = 0; k < lists_.size(); ++k) {
    if (!keep[k]) continue;
    for (const Neighbor& n : lists_[k])
      if (keep[n.region]) out[k].push_back(n);
  }
  return SpatialWeights(radius_, power_, std::move(out));
}

SpatialWeights build_spatial_weights(const FieldGrid& grid, double radius, double power) {
  if (!(radius > 0.0)) throw std::invalid_argument("neighborhood radius must be positive");
  if (!(power > 0.0)) throw std::invalid_argument("inverse-distance power must be positive");
  const auto reach = static_cast<std::ptrdiff_t>(std::floor(radius));
  const auto rows = static_cast<std::ptrdiff_t>(grid.rows());
  const auto cols = static_cast<std::ptrdiff_t>(grid.cols());
  std::vector<std::vector<Neighbor>> lists(grid.region_count());
  for (std::size_t k = 0; k < grid.region_count(); ++k) {
    const CellIndex c = grid.cell(k);
    const auto r0 = static_cast<std::ptrdiff_t>(c.row);
    const auto c0 = static_cast<std::ptrdiff_t>(c.col);
    // Row-major scan of the bounding box yields ascending region ids.
    for (std::ptrdiff_t r = std::max<std::ptrdiff_t>(0, r0 - reach);
         r <= std::min(rows - 1, r0 + reach); ++r) {
      for (std::ptrdiff_t q = std::max<std::ptrdiff_t>(0, c0 - reach);
           q <= std::min(cols - 1, c0 + reach); ++q) {
        if (r == r0 && q == c0) continue;
        const auto j = grid.region_at(static_cast<std::size_t>(r), static_cast<std::size_t>(q));
        if (!j) continue;
        // Squared offsets are exact integers, so p = 2 weights are exact.
        const auto dr = static_cast<double>(r - r0);
        const auto dq = static_cast<double>(q - c0);
        const double d2 = dr * dr + dq * dq;
        if (std::sqrt(d2) <= radius) lists[k].push_back({*j, idw_weight_squared(d2, power)});
      }
    }
  }
  return SpatialWeights(radius, power, std::move(lists));
}

} // namespace stmtl
