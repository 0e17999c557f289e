#include "stmtl/field_csv.hpp"

#include "stmtl/csv.hpp"
#include "stmtl/error.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace stmtl {

namespace {

struct RawRow {
  std::size_t line = 0;
  std::string task;
  std::size_t region = 0;
  CellIndex cell;
  Sample sample;
};

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::size_t count_series(const std::map<std::string, std::size_t>& cols, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& [name, idx] : cols)
    if (name.rfind(prefix, 0) == 0) ++n;
  for (std::size_t w = 1; w <= n; ++w) {
    const std::string name = prefix + (w < 10 ? "0" : "") + std::to_string(w);
    if (!cols.contains(name))
      throw ValidationError("missing column " + name + " (" + prefix + "NN columns must be numbered 01.." +
                            std::to_string(n) + ")");
  }
  return n;
}

bool task_less(const std::string& a, const std::string& b, bool numeric) {
  if (numeric) return *csv::parse_int(a) < *csv::parse_int(b);
  return a < b;
}

} // namespace

namespace {

FieldDataset parse_field_lines(const std::vector<std::string>& lines, const Season& season) {
  if (lines.empty()) throw ValidationError("file is empty");

  const std::vector<std::string> header = csv::split(lines[0]);
  std::map<std::string, std::size_t> cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!cols.emplace(header[i], i).second)
      throw ValidationError("duplicate column '" + header[i] + "'");
  }
  for (const char* req : {"task", "region", "row", "col", "yield", "band1", "band2", "band3", "band4"})
    if (!cols.contains(req)) throw ValidationError(std::string("missing column '") + req + "'");

  std::vector<std::string> soil_columns;
  for (const std::string& h : header)
    if (h.rfind("soil_", 0) == 0) soil_columns.push_back(h);
  const std::size_t nw = count_series(cols, "ndvi_");
  if (count_series(cols, "temp_") != nw || count_series(cols, "rain_") != nw)
    throw ValidationError("ndvi_, temp_ and rain_ column counts differ");
  const std::size_t expected = 9 + soil_columns.size() + 3 * nw;
  if (header.size() != expected) {
    for (const std::string& h : header) {
      const bool known = h == "task" || h == "region" || h == "row" || h == "col" || h == "yield" ||
                         h.rfind("band", 0) == 0 || h.rfind("soil_", 0) == 0 ||
                         h.rfind("ndvi_", 0) == 0 || h.rfind("temp_", 0) == 0 ||
                         h.rfind("rain_", 0) == 0;
      if (!known || (h.rfind("band", 0) == 0 && h.size() != 5))
        throw ValidationError("unexpected column '" + h + "'");
    }
    throw ValidationError("unexpected column layout in header");
  }

  auto series_name = [](const char* prefix, std::size_t w) {
    return std::string(prefix) + (w < 10 ? "0" : "") + std::to_string(w);
  };

  std::vector<RawRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (csv::trim(lines[li]).empty()) continue;
    const std::size_t line_no = li + 1;
    const std::vector<std::string> f = csv::split(lines[li]);
    if (f.size() != header.size())
      throw ValidationError(at_line(line_no) + "expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(f.size()));
    auto number = [&](const std::string& name) {
      const auto v = csv::parse_double(f[cols.at(name)]);
      if (!v) throw ValidationError(at_line(line_no) + "non-numeric value '" + f[cols.at(name)] +
                                    "' in column " + name);
      return *v;
    };
    auto index = [&](const std::string& name) {
      const auto v = csv::parse_int(f[cols.at(name)]);
      if (!v || *v < 0)
        throw ValidationError(at_line(line_no) + "column " + name +
                              " needs a non-negative integer, found '" + f[cols.at(name)] + "'");
      return static_cast<std::size_t>(*v);
    };
    RawRow r;
    r.line = line_no;
    r.task = f[cols.at("task")];
    if (r.task.empty()) throw ValidationError(at_line(line_no) + "empty task label");
    r.region = index("region");
    r.cell = {index("row"), index("col")};
    for (const std::string& s : soil_columns) r.sample.soil.push_back(number(s));
    for (std::size_t b = 1; b <= kSpectralBands; ++b)
      r.sample.spectral.push_back(number("band" + std::to_string(b)));
    for (std::size_t w = 1; w <= nw; ++w) {
      r.sample.ndvi.push_back(number(series_name("ndvi_", w)));
      r.sample.temperature.push_back(number(series_name("temp_", w)));
      r.sample.rainfall.push_back(number(series_name("rain_", w)));
    }
    if (!f[cols.at("yield")].empty()) r.sample.yield = number("yield");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("no data rows");

  // Region <-> cell consistency.
  std::map<std::size_t, std::pair<CellIndex, std::size_t>> cell_of_region;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> region_of_cell;
  std::size_t max_row = 0;
  std::size_t max_col = 0;
  for (const RawRow& r : rows) {
    auto [it, fresh] = cell_of_region.emplace(r.region, std::pair(r.cell, r.line));
    if (!fresh && !(it->second.first == r.cell))
      throw ValidationError(at_line(r.line) + "region " + std::to_string(r.region) +
                            " placed at a different cell than on line " +
                            std::to_string(it->second.second));
    auto [cit, cfresh] = region_of_cell.emplace(std::pair(r.cell.row, r.cell.col), r.region);
    if (!cfresh && cit->second != r.region)
      throw ValidationError(at_line(r.line) + "cell (" + std::to_string(r.cell.row) + "," +
                            std::to_string(r.cell.col) + ") already holds region " +
                            std::to_string(cit->second));
    max_row = std::max(max_row, r.cell.row);
    max_col = std::max(max_col, r.cell.col);
  }
  const std::size_t grid_rows = max_row + 1;
  const std::size_t grid_cols = max_col + 1;
  std::vector<bool> mask(grid_rows * grid_cols, false);
  for (const auto& [cell, region] : region_of_cell) mask[cell.first * grid_cols + cell.second] = true;

  FieldDataset data;
  data.grid = FieldGrid(grid_rows, grid_cols, mask);
  for (const auto& [region, placed] : cell_of_region) {
    const auto dense = data.grid.region_at(placed.first.row, placed.first.col);
    if (*dense != region)
      throw ValidationError(at_line(placed.second) + "region " + std::to_string(region) +
                            " does not match the row-major id " + std::to_string(*dense) +
                            " of its cell");
  }

  std::set<std::string> labels;
  for (const RawRow& r : rows) labels.insert(r.task);
  data.tasks.assign(labels.begin(), labels.end());
  const bool numeric = std::all_of(data.tasks.begin(), data.tasks.end(),
                                   [](const std::string& t) { return csv::parse_int(t).has_value(); });
  std::sort(data.tasks.begin(), data.tasks.end(),
            [numeric](const std::string& a, const std::string& b) { return task_less(a, b, numeric); });

  data.soil_columns = soil_columns;
  data.windows = nw;
  data.season = season;

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  for (RawRow& r : rows) {
    const std::size_t t = static_cast<std::size_t>(
        std::find(data.tasks.begin(), data.tasks.end(), r.task) - data.tasks.begin());
    auto [it, fresh] = seen.emplace(std::pair(t, r.region), r.line);
    if (!fresh)
      throw ValidationError(at_line(r.line) + "duplicate row for task " + r.task + ", region " +
                            std::to_string(r.region) + " (first on line " +
                            std::to_string(it->second) + ")");
    r.sample.task = t;
    r.sample.region = r.region;
    data.samples.push_back(std::move(r.sample));
  }
  std::sort(data.samples.begin(), data.samples.end(), [](const Sample& a, const Sample& b) {
    return std::pair(a.task, a.region) < std::pair(b.task, b.region);
  });
  data.validate();
  return data;
}

} // namespace

FieldDataset load_field_csv(const std::filesystem::path& path, const Season& season) {
  const std::vector<std::string> lines = csv::read_lines(path);
  try {
    return parse_field_lines(lines, season);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string field_csv_text(const FieldDataset& data) {
  std::ostringstream out;
  out << "task,region,row,col,yield";
  for (const std::string& s : data.soil_columns) out << ',' << s;
  for (Source s : {Source::spectral, Source::ndvi, Source::weather})
    for (const std::string& name : data.column_names(s)) out << ',' << name;
  out << '\n';
  for (const Sample& s : data.samples) {
    const CellIndex c = data.grid.cell(s.region);
    out << data.tasks[s.task] << ',' << s.region << ',' << c.row << ',' << c.col << ',';
    if (s.yield) out << csv::format_double(*s.yield);
    for (Source src : kAllSources)
      for (double v : s.block(src)) out << ',' << csv::format_double(v);
    out << '\n';
  }
  return out.str();
}

void write_field_csv(const FieldDataset& data, const std::filesystem::path& path) {
  csv::write_text(path, field_csv_text(data));
}

} // namespace stmtl
