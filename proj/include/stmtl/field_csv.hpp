#pragma once

#include "stmtl/dataset.hpp"

#include <filesystem>
#include <string>

namespace stmtl {

/// Loads the one-row-per-(task, region) field table.
///
/// Required columns: task, region, row, col, yield, band1..band4. Any number
/// of soil_* columns form the soil block; ndvi_NN, temp_NN and rain_NN must
/// share the same window count. Region ids must equal the row-major index of
/// their cell among all cells present in the file. An empty yield marks a
/// prediction-only row. Tasks are sorted ascending (numerically when every
/// label is an integer).
FieldDataset load_field_csv(const std::filesystem::path& path, const Season& season = {});

std::string field_csv_text(const FieldDataset& data);
void write_field_csv(const FieldDataset& data, const std::filesystem::path& path);

} // namespace stmtl
