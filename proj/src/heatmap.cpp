#include "stmtl/heatmap.hpp"

#include "stmtl/csv.hpp"
#include "stmtl/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stmtl {

namespace {

void require_cover(const FieldGrid& grid, const std::vector<std::optional<double>>& values) {
  if (values.size() != grid.region_count())
    throw ValidationError("heatmap needs " + std::to_string(grid.region_count()) +
                          " region values, got " + std::to_string(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!values[k] || !std::isfinite(*values[k]))
      throw ValidationError("heatmap is missing a value for region " + std::to_string(k));
}

std::pair<double, double> value_range(const std::vector<std::optional<double>>& values) {
  double lo = *values.front();
  double hi = lo;
  for (const auto& v : values) {
    lo = std::min(lo, *v);
    hi = std::max(hi, *v);
  }
  return {lo, hi};
}

} // namespace

std::vector<std::uint8_t> heatmap_levels(const FieldGrid& grid,
                                         const std::vector<std::optional<double>>& values) {
  require_cover(grid, values);
  const auto [lo, hi] = value_range(values);
  const double span = hi > lo ? hi - lo : 1.0;
  std::vector<std::uint8_t> levels(grid.rows() * grid.cols(), 255);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const CellIndex c = grid.cell(k);
    const double scaled = std::clamp((*values[k] - lo) / span, 0.0, 1.0);
    levels[c.row * grid.cols() + c.col] = static_cast<std::uint8_t>(255 - std::lround(255.0 * scaled));
  }
  return levels;
}

std::string heatmap_pgm(const FieldGrid& grid, const std::vector<std::optional<double>>& values) {
  const auto levels = heatmap_levels(grid, values);
  const auto [lo, hi] = value_range(values);
  std::ostringstream out;
  out << "P5\n# darker = higher; level 0 = " << csv::format_double(hi) << ", level 255 = "
      << csv::format_double(lo) << "; masked cells = 255\n"
      << grid.cols() << ' ' << grid.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(levels.data()), static_cast<std::streamsize>(levels.size()));
  return out.str();
}

std::string heatmap_csv(const FieldGrid& grid, const std::vector<std::optional<double>>& values) {
  require_cover(grid, values);
  std::ostringstream out;
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      if (c) out << ',';
      if (const auto k = grid.region_at(r, c)) out << csv::format_double(*values[*k]);
    }
    out << '\n';
  }
  return out.str();
}

void export_heatmap(const FieldGrid& grid, const std::vector<std::optional<double>>& values,
                    const std::filesystem::path& prefix) {
  const std::string pgm = heatmap_pgm(grid, values);
  const std::string text = heatmap_csv(grid, values);
  std::filesystem::path pgm_path = prefix;
  pgm_path += ".pgm";
  std::filesystem::path csv_path = prefix;
  csv_path += ".csv";
  csv::write_text(pgm_path, pgm);
  csv::write_text(csv_path, text);
}

std::vector<std::vector<std::optional<double>>> load_heatmap_csv(const std::filesystem::path& path) {
  std::vector<std::vector<std::optional<double>>> cells;
  // An empty line is a single masked cell in a one-column grid.
  for (const std::string& line : csv::read_lines(path)) {
    std::vector<std::optional<double>> row;
    for (const std::string& f : csv::split(line)) {
      if (f.empty()) {
        row.push_back(std::nullopt);
        continue;
      }
      const auto v = csv::parse_double(f);
      if (!v) throw ValidationError(path.string() + ": malformed heatmap value '" + f + "'");
      row.push_back(v);
    }
    cells.push_back(std::move(row));
  }
  return cells;
}

} // namespace stmtl
