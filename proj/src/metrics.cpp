#include "stmtl/metrics.hpp"

#include "stmtl/csv.hpp"
#include "stmtl/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace stmtl {

MetricsReport compute_metrics(std::span<const double> actual, std::span<const double> forecast) {
  if (actual.size() != forecast.size())
    throw std::invalid_argument("actual and forecast differ in length");
  if (actual.empty()) throw std::invalid_argument("metrics need at least one sample");
  MetricsReport r;
  r.n = actual.size();
  double sq = 0.0;
  double abs = 0.0;
  double pct = 0.0;
  bool mape_ok = true;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = std::abs(actual[i] - forecast[i]);
    sq += e * e;
    abs += e;
    r.max_error = std::max(r.max_error, e);
    if (actual[i] == 0.0)
      mape_ok = false;
    else
      pct += 100.0 * e / std::abs(actual[i]);
  }
  const double n = static_cast<double>(r.n);
  r.mse = sq / n;
  r.rmse = std::sqrt(r.mse);
  r.mae = abs / n;
  if (mape_ok) r.mape = pct / n;
  return r;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string optional_text(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string{};
}

} // namespace

MetricsReport median_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("no reports to aggregate");
  auto pick = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(field(r));
    return median_of(std::move(v));
  };
  MetricsReport out;
  out.mse = pick([](const MetricsReport& r) { return r.mse; });
  out.rmse = pick([](const MetricsReport& r) { return r.rmse; });
  out.mae = pick([](const MetricsReport& r) { return r.mae; });
  out.max_error = pick([](const MetricsReport& r) { return r.max_error; });
  if (std::all_of(reports.begin(), reports.end(), [](const MetricsReport& r) { return r.mape; }))
    out.mape = pick([](const MetricsReport& r) { return *r.mape; });
  out.n = reports.front().n;
  return out;
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::ostringstream out;
  out << "config,task,n,mse,rmse,mae,mape,max_error\n";
  for (const MetricsRow& row : rows) {
    const MetricsReport& r = row.report;
    out << row.config << ',' << row.task << ',' << r.n << ',' << csv::format_double(r.mse) << ','
        << csv::format_double(r.rmse) << ',' << csv::format_double(r.mae) << ','
        << optional_text(r.mape) << ',' << csv::format_double(r.max_error) << '\n';
  }
  return out.str();
}

std::vector<MetricsRow> parse_metrics_csv(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != "config,task,n,mse,rmse,mae,mape,max_error")
    throw ValidationError(path.string() + ": not a metrics CSV");
  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv::split(lines[i]);
    const auto bad = [&] { return ValidationError("line " + std::to_string(i + 1) + ": malformed metrics row"); };
    if (f.size() != 8) throw bad();
    MetricsRow row{f[0], f[1], {}};
    const auto n = csv::parse_int(f[2]);
    const auto mse = csv::parse_double(f[3]);
    const auto rmse = csv::parse_double(f[4]);
    const auto mae = csv::parse_double(f[5]);
    const auto me = csv::parse_double(f[7]);
    if (!n || !mse || !rmse || !mae || !me) throw bad();
    row.report = {*mse, *rmse, *mae, std::nullopt, *me, static_cast<std::size_t>(*n)};
    if (!f[6].empty()) {
      row.report.mape = csv::parse_double(f[6]);
      if (!row.report.mape) throw bad();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string prediction_csv(std::span<const Prediction> rows) {
  std::ostringstream out;
  out << "task,region,prediction\n";
  for (const Prediction& p : rows)
    out << p.task << ',' << p.region << ',' << csv::format_double(p.value) << '\n';
  return out.str();
}

std::vector<Prediction> load_prediction_csv(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw ValidationError(path.string() + " is empty");
  const auto header = csv::split(lines[0]);
  std::map<std::string, std::size_t> cols;
  for (std::size_t i = 0; i < header.size(); ++i) cols[header[i]] = i;
  for (const char* req : {"task", "region", "prediction"})
    if (!cols.contains(req))
      throw ValidationError(path.string() + ": missing column '" + req + "'");
  std::vector<Prediction> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (csv::trim(lines[i]).empty()) continue;
    const auto f = csv::split(lines[i]);
    if (f.size() != header.size())
      throw ValidationError("line " + std::to_string(i + 1) + ": wrong field count");
    const auto region = csv::parse_int(f[cols["region"]]);
    const auto value = csv::parse_double(f[cols["prediction"]]);
    if (!region || *region < 0 || !value)
      throw ValidationError("line " + std::to_string(i + 1) + ": malformed prediction row");
    out.push_back({f[cols["task"]], static_cast<std::size_t>(*region), *value});
  }
  return out;
}

MetricsReport score_predictions(std::span<const Prediction> predictions, const FieldDataset& truth) {
  std::map<std::pair<std::string, std::size_t>, double> by_key;
  for (const Prediction& p : predictions) {
    if (!by_key.emplace(std::pair(p.task, p.region), p.value).second)
      throw ValidationError("duplicate prediction for task " + p.task + ", region " +
                            std::to_string(p.region));
  }
  std::vector<double> actual;
  std::vector<double> forecast;
  std::vector<std::string> missing;
  for (const Sample& s : truth.samples) {
    if (!s.yield) continue;
    const auto it = by_key.find(std::pair(truth.tasks[s.task], s.region));
    if (it == by_key.end()) {
      missing.push_back("(" + truth.tasks[s.task] + ", " + std::to_string(s.region) + ")");
      continue;
    }
    actual.push_back(*s.yield);
    forecast.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string msg = "missing predictions for " + std::to_string(missing.size()) + " (task, region) pairs:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw ValidationError(msg);
  }
  if (actual.empty()) throw ValidationError("no labeled samples to score");
  return compute_metrics(actual, forecast);
}

MetricsReport score_external_predictions(const std::filesystem::path& prediction_csv_path,
                                         const FieldDataset& truth) {
  return score_predictions(load_prediction_csv(prediction_csv_path), truth);
}

} // namespace stmtl
