#pragma once

#include "stmtl/dataset.hpp"
#include "stmtl/rng.hpp"
#include "stmtl/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace stmtl::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(STMTL_TEST_TMPDIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

/// Small seeded synthetic field for tests that need realistic structure.
inline FieldDataset small_field(std::size_t rows = 4, std::size_t cols = 5, std::size_t tasks = 2,
                                std::uint64_t seed = 7, double noise_sd = 20.0) {
  SynthOptions o;
  o.rows = rows;
  o.cols = cols;
  o.tasks = tasks;
  o.seed = seed;
  o.noise_sd = noise_sd;
  o.spatial_scale = 1.0;
  return synth_field(o).data;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace stmtl::testing
