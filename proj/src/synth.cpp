#include "stmtl/synth.hpp"

#include "stmtl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace stmtl {

namespace {

void standardize(std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

double column_sd(const std::vector<Sample>& samples, Source s, std::size_t c) {
  double sum = 0.0;
  double sq = 0.0;
  for (const Sample& smp : samples) {
    const double x = smp.block(s)[c];
    sum += x;
    sq += x * x;
  }
  const double n = static_cast<double>(samples.size());
  const double var = std::max(0.0, sq / n - (sum / n) * (sum / n));
  return std::sqrt(var);
}

double column_mean(const std::vector<Sample>& samples, Source s, std::size_t c) {
  double sum = 0.0;
  for (const Sample& smp : samples) sum += smp.block(s)[c];
  return sum / static_cast<double>(samples.size());
}

} // namespace

std::vector<double> smoothed_noise(std::size_t rows, std::size_t cols, double spatial_scale,
                                   Rng& rng) {
  std::vector<double> white(rows * cols);
  for (double& x : white) x = rng.normal();
  const auto half = static_cast<std::ptrdiff_t>(std::lround(std::max(0.0, spatial_scale)));
  std::vector<double> out(rows * cols, 0.0);
  const auto R = static_cast<std::ptrdiff_t>(rows);
  const auto C = static_cast<std::ptrdiff_t>(cols);
  for (std::ptrdiff_t r = 0; r < R; ++r) {
    for (std::ptrdiff_t c = 0; c < C; ++c) {
      double sum = 0.0;
      int n = 0;
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, r - half); i <= std::min(R - 1, r + half); ++i)
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, c - half); j <= std::min(C - 1, c + half); ++j) {
          sum += white[static_cast<std::size_t>(i * C + j)];
          ++n;
        }
      out[static_cast<std::size_t>(r * C + c)] = sum / n;
    }
  }
  standardize(out);
  return out;
}

double linear_yield(const SynthCoefficients& coefficients, const Sample& sample) {
  double y = coefficients.intercept;
  for (Source s : kAllSources) {
    const std::vector<double> b = sample.block(s);
    const auto& coef = coefficients.by_source[index_of(s)];
    for (std::size_t c = 0; c < b.size(); ++c) y += coef[c] * b[c];
  }
  return y;
}

SynthField synth_field(const SynthOptions& o) {
  if (o.tasks == 0) throw std::invalid_argument("synthetic field needs at least one task");
  Rng rng(o.seed);
  const std::size_t n = o.rows * o.cols;
  const double scale = o.spatial_scale;

  FieldDataset data;
  data.grid = FieldGrid(o.rows, o.cols, std::vector<bool>(n, true));
  for (std::size_t t = 0; t < o.tasks; ++t)
    data.tasks.push_back(std::to_string(o.first_task_label + static_cast<int>(t)));
  data.soil_columns = {"soil_elev", "soil_slope", "soil_curv", "soil_eca"};
  data.season = o.season;
  data.windows = o.season.window_count();
  const std::size_t nw = data.windows;

  // Hidden fertility: smooth noise plus a gentle diagonal trend.
  std::vector<double> trend(n);
  for (std::size_t r = 0; r < o.rows; ++r)
    for (std::size_t c = 0; c < o.cols; ++c)
      trend[r * o.cols + c] = static_cast<double>(r) + 0.5 * static_cast<double>(c);
  standardize(trend);
  std::vector<double> fertility = smoothed_noise(o.rows, o.cols, scale, rng);
  for (std::size_t i = 0; i < n; ++i) fertility[i] += 0.5 * trend[i];
  standardize(fertility);

  const auto s1 = smoothed_noise(o.rows, o.cols, scale, rng);
  const auto s2 = smoothed_noise(o.rows, o.cols, scale, rng);
  const auto s3 = smoothed_noise(o.rows, o.cols, scale, rng);
  const auto s4 = smoothed_noise(o.rows, o.cols, scale, rng);

  std::vector<double> phenology(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    const double z = (static_cast<double>(w) - 0.65 * static_cast<double>(nw)) / (0.3 * static_cast<double>(nw));
    phenology[w] = std::exp(-z * z);
  }

  for (std::size_t t = 0; t < o.tasks; ++t) {
    const double task_effect = rng.normal();
    std::array<std::vector<double>, kSpectralBands> band_noise;
    for (auto& b : band_noise) b = smoothed_noise(o.rows, o.cols, scale, rng);
    std::vector<std::vector<double>> anomaly(nw);
    for (auto& a : anomaly) a = smoothed_noise(o.rows, o.cols, scale, rng);

    std::vector<DailyWeather> daily;
    const std::size_t days = o.season.day_count();
    for (std::size_t d = 0; d < days; ++d) {
      const double phase = std::numbers::pi * static_cast<double>(d) / static_cast<double>(days);
      DailyWeather dw;
      dw.date = o.season.start_date() + std::chrono::days{static_cast<long>(d)};
      dw.temperature = 24.0 + 7.0 * std::sin(phase) + 1.5 * task_effect + 1.5 * rng.normal();
      dw.rainfall = std::max(0.0, 1.5 + 0.5 * task_effect + 3.0 * rng.normal());
      daily.push_back(dw);
    }
    const BiweeklyWeather weather = biweekly_aggregate(daily, o.season.start_date());

    for (std::size_t k = 0; k < n; ++k) {
      const double f = fertility[k];
      Sample s;
      s.task = t;
      s.region = k;
      s.soil = {950.0 + 2.0 * trend[k] + 1.5 * s1[k], 1.0 + 0.3 * s2[k], 0.05 * s3[k],
                30.0 + 6.0 * f + 2.0 * s4[k]};
      s.spectral = {0.07 - 0.004 * f + 0.003 * band_noise[0][k] + 0.002 * task_effect,
                    0.09 - 0.005 * f + 0.003 * band_noise[1][k] + 0.002 * task_effect,
                    0.11 - 0.008 * f + 0.004 * band_noise[2][k] + 0.002 * task_effect,
                    0.22 + 0.012 * f + 0.005 * band_noise[3][k] + 0.003 * task_effect};
      for (std::size_t w = 0; w < nw; ++w) {
        const double vigor = std::max(0.05, 1.0 + 0.2 * (0.6 * f + 0.8 * anomaly[w][k]));
        const double nir = 0.18 + 0.32 * phenology[w] * vigor;
        const double red = std::max(0.01, 0.12 * (1.0 - 0.6 * phenology[w] * vigor));
        s.ndvi.push_back(ndvi(nir, red));
      }
      s.temperature = weather.temperature;
      s.rainfall = weather.rainfall;
      data.samples.push_back(std::move(s));
    }
  }

  // Coefficients: a per-column importance in kg/ha per standard deviation.
  SynthCoefficients coef;
  double centered = 0.0;
  for (Source s : kAllSources) {
    const std::size_t w = data.width(s);
    auto& out = coef.by_source[index_of(s)];
    out.assign(w, 0.0);
    for (std::size_t c = 0; c < w; ++c) {
      double importance = 10.0;
      if (o.ndvi_dominant) {
        switch (s) {
        case Source::soil: importance = std::array{12.0, -8.0, 4.0, 30.0}[std::min<std::size_t>(c, 3)]; break;
        case Source::spectral: importance = std::array{-3.0, -3.0, -5.0, 6.0}[c]; break;
        case Source::ndvi: importance = 60.0 * static_cast<double>(c + 1) / static_cast<double>(w); break;
        case Source::weather: importance = 4.0; break;
        }
      }
      const double sd = column_sd(data.samples, s, c);
      out[c] = sd > 0.0 ? importance / sd : 0.0;
      centered += out[c] * column_mean(data.samples, s, c);
    }
  }
  coef.intercept = 1100.0 - centered;

  for (std::size_t t = 0; t < o.tasks; ++t) {
    const std::vector<double> noise = smoothed_noise(o.rows, o.cols, scale, rng);
    for (std::size_t k = 0; k < n; ++k) {
      Sample& s = data.samples[t * n + k];
      s.yield = linear_yield(coef, s) + o.noise_sd * noise[k];
    }
  }
  return {std::move(data), std::move(coef)};
}

SynthField synth_field(std::size_t rows, std::size_t cols, std::size_t tasks,
                       double spatial_scale, double noise_sd, std::uint64_t seed) {
  SynthOptions o;
  o.rows = rows;
  o.cols = cols;
  o.tasks = tasks;
  o.spatial_scale = spatial_scale;
  o.noise_sd = noise_sd;
  o.seed = seed;
  return synth_field(o);
}

} // namespace stmtl
