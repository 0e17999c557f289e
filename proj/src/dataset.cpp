#include "stmtl/dataset.hpp"

#include "stmtl/error.hpp"
#include "stmtl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace stmtl {

namespace chr = std::chrono;

namespace {

constexpr chr::year kReferenceYear{2001};

std::string two_digit(std::size_t i) {
  std::string s = std::to_string(i);
  return s.size() < 2 ? "0" + s : s;
}

std::string sample_label(const FieldDataset& d, const Sample& s) {
  const std::string task = s.task < d.tasks.size() ? d.tasks[s.task] : std::to_string(s.task);
  return "(task " + task + ", region " + std::to_string(s.region) + ")";
}

} // namespace

std::string_view source_name(Source s) {
  switch (s) {
  case Source::soil: return "soil";
  case Source::spectral: return "spectral";
  case Source::ndvi: return "ndvi";
  case Source::weather: return "weather";
  }
  return "unknown";
}

Source parse_source(std::string_view name) {
  for (Source s : kAllSources)
    if (source_name(s) == name) return s;
  throw std::invalid_argument("unknown feature source '" + std::string(name) + "'");
}

chr::sys_days reference_date(chr::month_day md) {
  const chr::year_month_day ymd{kReferenceYear, md.month(), md.day()};
  if (!ymd.ok()) throw std::invalid_argument("invalid season date");
  return chr::sys_days{ymd};
}

chr::sys_days Season::start_date() const { return reference_date(start); }
chr::sys_days Season::end_date() const { return reference_date(end); }

std::size_t Season::day_count() const {
  const auto days = (end_date() - start_date()).count() + 1;
  if (days <= 0) throw std::invalid_argument("season end precedes season start");
  return static_cast<std::size_t>(days);
}

std::size_t Season::window_count() const {
  return (day_count() + kWindowDays - 1) / kWindowDays;
}

chr::sys_days Season::window_end(std::size_t i) const {
  const chr::sys_days first = start_date() + chr::days{kWindowDays * static_cast<long>(i)};
  const chr::sys_days last = first + chr::days{kWindowDays - 1};
  if (first <= end_date() && last > end_date()) return end_date();
  return last;
}

double ndvi(double nir, double red) {
  if (nir < 0.0 || red < 0.0) throw std::invalid_argument("reflectance must be non-negative");
  const double sum = nir + red;
  if (!(sum > 0.0)) throw std::invalid_argument("NDVI undefined for nir + red = 0");
  return (nir - red) / sum;
}

BiweeklyWeather biweekly_aggregate(std::span<const DailyWeather> daily,
                                   chr::sys_days season_start) {
  if (daily.empty()) throw std::invalid_argument("no daily weather records");
  struct Acc {
    double temp = 0.0;
    double rain = 0.0;
    std::size_t n = 0;
  };
  std::vector<Acc> windows;
  for (const DailyWeather& d : daily) {
    const auto offset = (d.date - season_start).count();
    if (offset < 0) throw ValidationError("weather record dated before season start");
    const auto w = static_cast<std::size_t>(offset / kWindowDays);
    if (w >= windows.size()) windows.resize(w + 1);
    windows[w].temp += d.temperature;
    windows[w].rain += d.rainfall;
    ++windows[w].n;
  }
  BiweeklyWeather out;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (windows[w].n == 0)
      throw ValidationError("biweekly window " + std::to_string(w + 1) + " has no records");
    out.temperature.push_back(windows[w].temp / static_cast<double>(windows[w].n));
    out.rainfall.push_back(windows[w].rain / static_cast<double>(windows[w].n));
  }
  return out;
}

std::vector<double> Sample::block(Source s) const {
  switch (s) {
  case Source::soil: return soil;
  case Source::spectral: return spectral;
  case Source::ndvi: return ndvi;
  case Source::weather: {
    std::vector<double> out = temperature;
    out.insert(out.end(), rainfall.begin(), rainfall.end());
    return out;
  }
  }
  return {};
}

std::size_t FieldDataset::width(Source s) const {
  switch (s) {
  case Source::soil: return soil_columns.size();
  case Source::spectral: return kSpectralBands;
  case Source::ndvi: return windows;
  case Source::weather: return 2 * windows;
  }
  return 0;
}

std::vector<std::string> FieldDataset::column_names(Source s) const {
  std::vector<std::string> names;
  switch (s) {
  case Source::soil: names = soil_columns; break;
  case Source::spectral:
    for (std::size_t b = 1; b <= kSpectralBands; ++b) names.push_back("band" + std::to_string(b));
    break;
  case Source::ndvi:
    for (std::size_t w = 1; w <= windows; ++w) names.push_back("ndvi_" + two_digit(w));
    break;
  case Source::weather:
    for (std::size_t w = 1; w <= windows; ++w) names.push_back("temp_" + two_digit(w));
    for (std::size_t w = 1; w <= windows; ++w) names.push_back("rain_" + two_digit(w));
    break;
  }
  return names;
}

std::size_t FieldDataset::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.yield; }));
}

void FieldDataset::validate() const {
  if (tasks.empty()) throw ValidationError("dataset has no tasks");
  std::map<std::size_t, const Sample*> soil_of_region;
  std::map<std::size_t, const Sample*> weather_of_task;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.task >= tasks.size()) throw ValidationError("sample references unknown task");
    if (s.region >= grid.region_count())
      throw ValidationError("sample references unknown region " + std::to_string(s.region));
    if (i > 0) {
      const Sample& p = samples[i - 1];
      if (std::pair(p.task, p.region) >= std::pair(s.task, s.region))
        throw ValidationError("samples not strictly ordered at " + sample_label(*this, s));
    }
    if (s.soil.size() != width(Source::soil) || s.spectral.size() != kSpectralBands ||
        s.ndvi.size() != windows || s.temperature.size() != windows ||
        s.rainfall.size() != windows)
      throw ValidationError("incomplete feature blocks for " + sample_label(*this, s));
    for (Source src : kAllSources)
      for (double v : s.block(src))
        if (!std::isfinite(v)) throw ValidationError("non-finite feature in " + sample_label(*this, s));
    if (s.yield && !std::isfinite(*s.yield))
      throw ValidationError("non-finite yield in " + sample_label(*this, s));

    auto [wit, wnew] = weather_of_task.emplace(s.task, &s);
    if (!wnew && (wit->second->temperature != s.temperature || wit->second->rainfall != s.rainfall))
      throw ValidationError("weather differs across regions within task " + tasks[s.task]);
    auto [sit, snew] = soil_of_region.emplace(s.region, &s);
    if (!snew && sit->second->soil != s.soil)
      throw ValidationError("soil block differs across tasks for region " +
                            std::to_string(s.region));
  }
}

NormParams fit_normalization(const FieldDataset& train) {
  NormParams p;
  for (Source s : kAllSources) {
    const std::size_t w = train.width(s);
    auto& cols = p.features[index_of(s)];
    cols.assign(w, ColumnRange{0.0, 0.0});
    bool first = true;
    for (const Sample& smp : train.samples) {
      const std::vector<double> b = smp.block(s);
      for (std::size_t c = 0; c < w; ++c) {
        if (first) {
          cols[c] = {b[c], b[c]};
        } else {
          cols[c].min = std::min(cols[c].min, b[c]);
          cols[c].max = std::max(cols[c].max, b[c]);
        }
      }
      first = false;
    }
  }
  bool first = true;
  p.target = {0.0, 0.0};
  for (const Sample& smp : train.samples) {
    if (!smp.yield) continue;
    if (first) {
      p.target = {*smp.yield, *smp.yield};
      first = false;
    } else {
      p.target.min = std::min(p.target.min, *smp.yield);
      p.target.max = std::max(p.target.max, *smp.yield);
    }
  }
  return p;
}

FieldDataset apply_normalization(const FieldDataset& data, const NormParams& params) {
  for (Source s : kAllSources)
    if (params.features[index_of(s)].size() != data.width(s))
      throw std::invalid_argument("normalization parameters do not match " +
                                  std::string(source_name(s)) + " width");
  FieldDataset out = data;
  const std::size_t nw = data.windows;
  const auto& weather = params.features[index_of(Source::weather)];
  for (Sample& smp : out.samples) {
    auto map = [](std::vector<double>& v, std::span<const ColumnRange> r) {
      for (std::size_t c = 0; c < v.size(); ++c) v[c] = r[c].normalize(v[c]);
    };
    map(smp.soil, params.features[index_of(Source::soil)]);
    map(smp.spectral, params.features[index_of(Source::spectral)]);
    map(smp.ndvi, params.features[index_of(Source::ndvi)]);
    map(smp.temperature, std::span(weather).subspan(0, nw));
    map(smp.rainfall, std::span(weather).subspan(nw, nw));
    if (smp.yield) smp.yield = params.target.normalize(*smp.yield);
  }
  return out;
}

std::pair<FieldDataset, NormParams> normalize(const FieldDataset& data) {
  NormParams p = fit_normalization(data);
  return {apply_normalization(data, p), p};
}

double denormalize(double value, const ColumnRange& range) { return range.denormalize(value); }

std::vector<double> denormalize(std::span<const double> values,
                                std::span<const ColumnRange> ranges) {
  if (values.size() != ranges.size())
    throw std::invalid_argument("denormalize: " + std::to_string(values.size()) +
                                " values for " + std::to_string(ranges.size()) + " columns");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = ranges[i].denormalize(values[i]);
  return out;
}

FieldDataset truncate_to_month(const FieldDataset& data, chr::month month) {
  if (!month.ok()) throw std::invalid_argument("invalid calendar month");
  if (month < data.season.start.month())
    throw std::invalid_argument("month precedes the season start");
  const chr::sys_days cutoff{chr::year_month_day_last{kReferenceYear, chr::month_day_last{month}}};
  std::size_t keep = 0;
  while (keep < data.windows && data.season.window_end(keep) <= cutoff) ++keep;
  FieldDataset out = data;
  out.windows = keep;
  for (Sample& s : out.samples) {
    s.ndvi.resize(keep);
    s.temperature.resize(keep);
    s.rainfall.resize(keep);
  }
  return out;
}

std::pair<FieldDataset, FieldDataset> train_test_split(const FieldDataset& data,
                                                       double test_fraction,
                                                       std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test fraction must lie in [0, 1)");
  Rng rng(seed);
  std::vector<bool> in_test(data.samples.size(), false);
  for (std::size_t t = 0; t < data.tasks.size(); ++t) {
    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      const Sample& s = data.samples[i];
      if (s.task != t) continue;
      if (s.yield)
        labeled.push_back(i);
      else
        in_test[i] = true;
    }
    rng.shuffle(std::span(labeled));
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(labeled.size())));
    for (std::size_t i = 0; i < n_test; ++i) in_test[labeled[i]] = true;
  }
  FieldDataset train = data;
  FieldDataset test = data;
  train.samples.clear();
  test.samples.clear();
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    (in_test[i] ? test : train).samples.push_back(data.samples[i]);
  return {std::move(train), std::move(test)};
}

FieldDataset select_tasks(const FieldDataset& data, std::span<const std::size_t> task_indices) {
  FieldDataset out = data;
  out.tasks.clear();
  out.samples.clear();
  std::vector<std::ptrdiff_t> remap(data.tasks.size(), -1);
  for (std::size_t i = 0; i < task_indices.size(); ++i) {
    const std::size_t t = task_indices[i];
    if (t >= data.tasks.size()) throw std::invalid_argument("task index out of range");
    remap[t] = static_cast<std::ptrdiff_t>(i);
    out.tasks.push_back(data.tasks[t]);
  }
  for (const Sample& s : data.samples) {
    if (remap[s.task] < 0) continue;
    Sample c = s;
    c.task = static_cast<std::size_t>(remap[s.task]);
    out.samples.push_back(std::move(c));
  }
  std::stable_sort(out.samples.begin(), out.samples.end(), [](const Sample& a, const Sample& b) {
    return std::pair(a.task, a.region) < std::pair(b.task, b.region);
  });
  return out;
}

std::size_t task_index(const FieldDataset& data, std::string_view label) {
  for (std::size_t t = 0; t < data.tasks.size(); ++t)
    if (data.tasks[t] == label) return t;
  throw ValidationError("unknown task label '" + std::string(label) + "'");
}

} // namespace stmtl
