#pragma once

#include "stmtl/dataset.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stmtl {

/// Error metrics in original yield units. MAPE is a percentage and is absent
/// when any actual value is zero.
struct MetricsReport {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> mape;
  double max_error = 0.0;
  std::size_t n = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport compute_metrics(std::span<const double> actual, std::span<const double> forecast);

/// Metric-wise median; MAPE only when every input carries one.
MetricsReport median_report(std::span<const MetricsReport> reports);

struct MetricsRow {
  std::string config;
  std::string task;
  MetricsReport report;
  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// `config,task,n,mse,rmse,mae,mape,max_error`
std::string metrics_csv(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_metrics_csv(const std::filesystem::path& path);

struct Prediction {
  std::string task;
  std::size_t region = 0;
  double value = 0.0;
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// `task,region,prediction`
std::string prediction_csv(std::span<const Prediction> rows);
std::vector<Prediction> load_prediction_csv(const std::filesystem::path& path);

/// Scores predictions against every labeled sample of `truth` (original
/// units). Rows for samples outside `truth` are ignored; a labeled sample
/// without a prediction is an error listing the missing pairs.
MetricsReport score_predictions(std::span<const Prediction> predictions, const FieldDataset& truth);
MetricsReport score_external_predictions(const std::filesystem::path& prediction_csv,
                                         const FieldDataset& truth);

} // namespace stmtl
