#pragma once

#include "stmtl/dataset.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace stmtl {

struct SynthOptions {
  std::size_t rows = 20;
  std::size_t cols = 20;
  std::size_t tasks = 3;
  /// Half-width, in cells, of the box filter applied to white noise.
  double spatial_scale = 2.0;
  /// Standard deviation of the spatially smoothed yield noise, kg/ha.
  double noise_sd = 50.0;
  std::uint64_t seed = 1;
  Season season;
  int first_task_label = 2001;
  /// When false every standardized feature carries equal weight.
  bool ndvi_dominant = true;
};

/// Generating coefficients in original feature units.
struct SynthCoefficients {
  double intercept = 0.0;
  std::array<std::vector<double>, kSourceCount> by_source;
};

struct SynthField {
  FieldDataset data;
  SynthCoefficients coefficients;
};

/// intercept + sum over sources and columns of coefficient * feature.
double linear_yield(const SynthCoefficients& coefficients, const Sample& sample);

/// Spatially autocorrelated field: soil, spectral and NDVI features track a
/// hidden fertility surface; yield is the returned linear combination of the
/// features plus smoothed noise. Deterministic in the seed.
SynthField synth_field(const SynthOptions& options);
SynthField synth_field(std::size_t rows, std::size_t cols, std::size_t tasks,
                       double spatial_scale, double noise_sd, std::uint64_t seed);

/// Box-filtered white noise rescaled to zero mean and unit variance.
std::vector<double> smoothed_noise(std::size_t rows, std::size_t cols, double spatial_scale,
                                   class Rng& rng);

} // namespace stmtl
