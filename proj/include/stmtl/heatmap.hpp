#pragma once

#include "stmtl/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stmtl {

/// Gray level per cell in row-major order. Values are min-max scaled with
/// darker meaning higher: the maximum maps to 0, the minimum to 255. Masked
/// cells are 255. Throws ValidationError when a valid region has no value.
std::vector<std::uint8_t> heatmap_levels(const FieldGrid& grid,
                                         const std::vector<std::optional<double>>& values);

/// Binary 8-bit portable graymap with the scaling recorded in a comment line.
std::string heatmap_pgm(const FieldGrid& grid, const std::vector<std::optional<double>>& values);
/// One line per grid row; masked cells are empty fields.
std::string heatmap_csv(const FieldGrid& grid, const std::vector<std::optional<double>>& values);

/// Writes `<prefix>.pgm` and `<prefix>.csv`.
void export_heatmap(const FieldGrid& grid, const std::vector<std::optional<double>>& values,
                    const std::filesystem::path& prefix);

/// Reads a heatmap CSV back as row-major cells (nullopt for masked cells).
std::vector<std::vector<std::optional<double>>> load_heatmap_csv(const std::filesystem::path& path);

} // namespace stmtl
