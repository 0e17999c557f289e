#pragma once

#include "stmtl/dataset.hpp"
#include "stmtl/mtl_net.hpp"
#include "stmtl/training.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stmtl {

/// Everything a training or experiment run needs besides data and seed.
/// Stored on disk as `key = value` lines; `#` starts a comment.
///
///   season_start, season_end      MM-DD
///   radius, power, lambda         spatial term
///   neighbor_target               actual | predicted
///   extractor_width, shared_width integers
///   head_widths                   comma-separated integers, may be empty
///   dropout                       [0, 1)
///   hidden_activation             sigmoid | linear
///   optimizer                     adam | sgd
///   learning_rate, beta1, beta2, epsilon, epochs
///   patience                      integer or `none`
///   test_fraction, validation_fraction
///   sources                       comma-separated subset of soil,spectral,ndvi,weather
///   tree_max_depth, tree_min_samples_leaf, ridge
struct RunConfig {
  Season season;
  double radius = 5.0;
  double power = 2.0;
  double lambda = 0.1;
  NeighborTarget neighbor_target = NeighborTarget::actual;
  std::size_t extractor_width = 16;
  std::size_t shared_width = 32;
  std::vector<std::size_t> head_widths{32, 16};
  double dropout = 0.2;
  Activation hidden_activation = Activation::sigmoid;
  TrainConfig train;
  double test_fraction = 0.2;
  double validation_fraction = 0.1;
  std::vector<Source> sources{kAllSources.begin(), kAllSources.end()};
  std::size_t tree_max_depth = 8;
  std::size_t tree_min_samples_leaf = 5;
  double ridge = 1e-8;

  /// Network layout over `sources` for a dataset with the given widths.
  MtlArchitecture architecture(const FieldDataset& data, const std::vector<Source>& sources) const;
  MtlArchitecture architecture(const FieldDataset& data) const { return architecture(data, sources); }
};

/// Throws std::invalid_argument for an unknown key or malformed value.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
/// Parses `key=value` (spaces around `=` allowed).
void apply_assignment(RunConfig& config, std::string_view assignment);
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_text(const RunConfig& config);

} // namespace stmtl
