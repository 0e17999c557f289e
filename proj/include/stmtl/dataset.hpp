#pragma once

#include "stmtl/grid.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stmtl {

/// Feature sources, in the fixed concatenation order used by the network.
enum class Source : std::uint8_t { soil = 0, spectral = 1, ndvi = 2, weather = 3 };

inline constexpr std::size_t kSourceCount = 4;
inline constexpr std::array<Source, kSourceCount> kAllSources{Source::soil, Source::spectral,
                                                              Source::ndvi, Source::weather};
inline constexpr std::size_t kSpectralBands = 4;
inline constexpr int kWindowDays = 14;

std::string_view source_name(Source s);
/// Throws std::invalid_argument for an unknown name.
Source parse_source(std::string_view name);
inline std::size_t index_of(Source s) { return static_cast<std::size_t>(s); }

/// Growing season as month/day bounds, evaluated in a non-leap reference year.
struct Season {
  std::chrono::month_day start{std::chrono::May / 1};
  std::chrono::month_day end{std::chrono::September / 30};

  std::chrono::sys_days start_date() const;
  std::chrono::sys_days end_date() const;
  std::size_t day_count() const;
  /// Number of biweekly windows covering the season; the last may be partial.
  std::size_t window_count() const;
  /// Last day covered by window i.
  std::chrono::sys_days window_end(std::size_t i) const;

  friend bool operator==(const Season&, const Season&) = default;
};

/// Derive a reference-year date from a month/day.
std::chrono::sys_days reference_date(std::chrono::month_day md);

/// Normalized difference vegetation index (nir - red) / (nir + red).
double ndvi(double nir, double red);

struct DailyWeather {
  std::chrono::sys_days date;
  double temperature = 0.0;
  double rainfall = 0.0;
};

struct BiweeklyWeather {
  std::vector<double> temperature;
  std::vector<double> rainfall;
};

/// Means over consecutive 14-day windows starting at `season_start`. A
/// trailing partial window is averaged over the days it actually holds.
BiweeklyWeather biweekly_aggregate(std::span<const DailyWeather> daily,
                                   std::chrono::sys_days season_start);

struct Sample {
  std::size_t task = 0;
  std::size_t region = 0;
  std::vector<double> soil;
  std::vector<double> spectral;
  std::vector<double> ndvi;
  std::vector<double> temperature;
  std::vector<double> rainfall;
  /// Absent for prediction-only rows.
  std::optional<double> yield;

  /// Feature block for one source; weather is temperature followed by rainfall.
  std::vector<double> block(Source s) const;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct FieldDataset {
  FieldGrid grid;
  std::vector<std::string> tasks;
  std::vector<std::string> soil_columns;
  std::size_t windows = 0;
  Season season;
  /// Sorted by (task, region); at most one sample per pair.
  std::vector<Sample> samples;

  std::size_t width(Source s) const;
  std::vector<std::string> column_names(Source s) const;
  std::size_t labeled_count() const;
  /// Throws ValidationError describing the first broken invariant.
  void validate() const;

  friend bool operator==(const FieldDataset&, const FieldDataset&) = default;
};

struct ColumnRange {
  double min = 0.0;
  double max = 1.0;

  /// max - min, clamped to 1 for constant columns.
  double scale() const { return max > min ? max - min : 1.0; }
  double normalize(double x) const { return (x - min) / scale(); }
  double denormalize(double x) const { return x * scale() + min; }
  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

struct NormParams {
  std::array<std::vector<ColumnRange>, kSourceCount> features;
  ColumnRange target;
  friend bool operator==(const NormParams&, const NormParams&) = default;
};

/// Min-max statistics over every sample of `train` (targets over labeled rows).
NormParams fit_normalization(const FieldDataset& train);
FieldDataset apply_normalization(const FieldDataset& data, const NormParams& params);
/// Fits on `data` itself and applies.
std::pair<FieldDataset, NormParams> normalize(const FieldDataset& data);

double denormalize(double value, const ColumnRange& range);
/// Column-wise inverse; the two spans must have equal length.
std::vector<double> denormalize(std::span<const double> values,
                                std::span<const ColumnRange> ranges);

/// Cuts NDVI and weather sequences to the windows that end by the last day of
/// `month`. Soil and spectral blocks are unchanged.
FieldDataset truncate_to_month(const FieldDataset& data, std::chrono::month month);

/// Per-task random split of labeled regions; round(fraction * n) go to test.
/// Prediction-only rows are placed in the test side.
std::pair<FieldDataset, FieldDataset> train_test_split(const FieldDataset& data,
                                                       double test_fraction,
                                                       std::uint64_t seed);

/// Keeps the listed tasks, relabelled in the given order.
FieldDataset select_tasks(const FieldDataset& data, std::span<const std::size_t> task_indices);

/// Task index for a label; throws ValidationError if absent.
std::size_t task_index(const FieldDataset& data, std::string_view label);

} // namespace stmtl
