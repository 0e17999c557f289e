#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace stmtl {

struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Rectangular field geometry. Valid cells are the regions under study and
/// receive dense ids in row-major order.
class FieldGrid {
public:
  FieldGrid() = default;
  FieldGrid(std::size_t rows, std::size_t cols, const std::vector<bool>& valid,
            double cell_size = 30.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  /// Meters per cell side. Metadata only; distances are in cell units.
  double cell_size() const { return cell_size_; }
  std::size_t region_count() const { return cells_.size(); }

  bool valid(std::size_t row, std::size_t col) const;
  /// Throws std::out_of_range for an unknown region id.
  CellIndex cell(std::size_t region) const;
  std::optional<std::size_t> region_at(std::size_t row, std::size_t col) const;
  std::vector<bool> mask() const;

  friend bool operator==(const FieldGrid&, const FieldGrid&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double cell_size_ = 30.0;
  std::vector<CellIndex> cells_;
  std::vector<std::ptrdiff_t> region_of_cell_;
};

FieldGrid build_grid(std::size_t rows, std::size_t cols, const std::vector<bool>& valid_mask);

/// Euclidean distance between two regions in grid-cell units.
double euclidean_distance(const FieldGrid& grid, std::size_t k, std::size_t j);

/// Inverse-distance weight 1/d^p. Requires d > 0 and p > 0.
double idw_weight(double d, double p);

struct Neighbor {
  std::size_t region = 0;
  double weight = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Neighbor lists G(k) with inverse-distance weights w(k, j).
class SpatialWeights {
public:
  SpatialWeights() = default;
  SpatialWeights(double radius, double power, std::vector<std::vector<Neighbor>> lists);

  double radius() const { return radius_; }
  double power() const { return power_; }
  std::size_t region_count() const { return lists_.size(); }
  std::span<const Neighbor> neighbors(std::size_t k) const { return lists_.at(k); }
  /// Number of directed (k, j) pairs.
  std::size_t pair_count() const;

  /// Drops every region with keep[k] == false, both as an owner and as a
  /// neighbor. |G(k)| shrinks accordingly.
  SpatialWeights restricted_to(const std::vector<bool>& keep) const;

private:
  double radius_ = 0.0;
  double power_ = 2.0;
  std::vector<std::vector<Neighbor>> lists_;
};

/// For each region, every other valid region within `radius` (inclusive),
/// ordered by ascending region id.
SpatialWeights build_spatial_weights(const FieldGrid& grid, double radius, double power = 2.0);

} // namespace stmtl
