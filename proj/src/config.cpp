#include "stmtl/config.hpp"

#include "stmtl/csv.hpp"
#include "stmtl/error.hpp"

#include <sstream>
#include <stdexcept>

namespace stmtl {

namespace chr = std::chrono;

namespace {

[[noreturn]] void bad(std::string_view key, std::string_view value) {
  throw std::invalid_argument("invalid value '" + std::string(value) + "' for " + std::string(key));
}

double to_double(std::string_view key, std::string_view v) {
  const auto d = csv::parse_double(v);
  if (!d) bad(key, v);
  return *d;
}

std::size_t to_count(std::string_view key, std::string_view v) {
  const auto i = csv::parse_int(v);
  if (!i || *i < 0) bad(key, v);
  return static_cast<std::size_t>(*i);
}

chr::month_day to_month_day(std::string_view key, std::string_view v) {
  const auto dash = v.find('-');
  if (dash == std::string_view::npos) bad(key, v);
  const auto m = csv::parse_int(v.substr(0, dash));
  const auto d = csv::parse_int(v.substr(dash + 1));
  if (!m || !d || *m < 1 || *d < 1) bad(key, v);
  const chr::month_day md{chr::month{static_cast<unsigned>(*m)}, chr::day{static_cast<unsigned>(*d)}};
  if (!md.ok()) bad(key, v);
  return md;
}

std::string month_day_text(chr::month_day md) {
  auto two = [](unsigned x) { return (x < 10 ? "0" : "") + std::to_string(x); };
  return two(static_cast<unsigned>(md.month())) + "-" + two(static_cast<unsigned>(md.day()));
}

template <class T> std::string join(const std::vector<T>& v, auto to_text) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + to_text(v[i]);
  return out;
}

} // namespace

MtlArchitecture RunConfig::architecture(const FieldDataset& data,
                                        const std::vector<Source>& active) const {
  MtlArchitecture a = architecture_for(data, active);
  a.extractor_width = extractor_width;
  a.shared_width = shared_width;
  a.head_widths = head_widths;
  a.dropout_rate = dropout;
  a.hidden_activation = hidden_activation;
  return a;
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  value = csv::trim(value);
  if (key == "season_start") c.season.start = to_month_day(key, value);
  else if (key == "season_end") c.season.end = to_month_day(key, value);
  else if (key == "radius") c.radius = to_double(key, value);
  else if (key == "power") c.power = to_double(key, value);
  else if (key == "lambda") c.lambda = to_double(key, value);
  else if (key == "neighbor_target") {
    if (value == "actual") c.neighbor_target = NeighborTarget::actual;
    else if (value == "predicted") c.neighbor_target = NeighborTarget::predicted;
    else bad(key, value);
  } else if (key == "extractor_width") c.extractor_width = to_count(key, value);
  else if (key == "shared_width") c.shared_width = to_count(key, value);
  else if (key == "head_widths") {
    c.head_widths.clear();
    if (!value.empty())
      for (const std::string& w : csv::split(value)) c.head_widths.push_back(to_count(key, w));
  } else if (key == "dropout") c.dropout = to_double(key, value);
  else if (key == "hidden_activation") {
    if (value == "sigmoid") c.hidden_activation = Activation::sigmoid;
    else if (value == "linear") c.hidden_activation = Activation::linear;
    else bad(key, value);
  } else if (key == "optimizer") {
    if (value == "adam") c.train.optimizer = OptimizerKind::adam;
    else if (value == "sgd") c.train.optimizer = OptimizerKind::sgd;
    else bad(key, value);
  } else if (key == "learning_rate") c.train.learning_rate = to_double(key, value);
  else if (key == "beta1") c.train.adam.beta1 = to_double(key, value);
  else if (key == "beta2") c.train.adam.beta2 = to_double(key, value);
  else if (key == "epsilon") c.train.adam.epsilon = to_double(key, value);
  else if (key == "epochs") c.train.epochs = to_count(key, value);
  else if (key == "patience") {
    if (value == "none") c.train.early_stop_patience.reset();
    else c.train.early_stop_patience = to_count(key, value);
  } else if (key == "test_fraction") c.test_fraction = to_double(key, value);
  else if (key == "validation_fraction") c.validation_fraction = to_double(key, value);
  else if (key == "sources") {
    c.sources.clear();
    for (const std::string& s : csv::split(value)) c.sources.push_back(parse_source(s));
  } else if (key == "tree_max_depth") c.tree_max_depth = to_count(key, value);
  else if (key == "tree_min_samples_leaf") c.tree_min_samples_leaf = to_count(key, value);
  else if (key == "ridge") c.ridge = to_double(key, value);
  else throw std::invalid_argument("unknown configuration key '" + std::string(key) + "'");
}

void apply_assignment(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw std::invalid_argument("expected key=value, got '" + std::string(assignment) + "'");
  apply_setting(config, csv::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    const std::string_view body = csv::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    try {
      apply_assignment(c, body);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(n) + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  for (const std::string& l : csv::read_lines(path)) text += l + "\n";
  return parse_run_config(text);
}

std::string run_config_text(const RunConfig& c) {
  std::ostringstream out;
  out << "season_start = " << month_day_text(c.season.start) << '\n'
      << "season_end = " << month_day_text(c.season.end) << '\n'
      << "radius = " << csv::format_double(c.radius) << '\n'
      << "power = " << csv::format_double(c.power) << '\n'
      << "lambda = " << csv::format_double(c.lambda) << '\n'
      << "neighbor_target = " << (c.neighbor_target == NeighborTarget::actual ? "actual" : "predicted") << '\n'
      << "extractor_width = " << c.extractor_width << '\n'
      << "shared_width = " << c.shared_width << '\n'
      << "head_widths = " << join(c.head_widths, [](std::size_t w) { return std::to_string(w); }) << '\n'
      << "dropout = " << csv::format_double(c.dropout) << '\n'
      << "hidden_activation = " << (c.hidden_activation == Activation::sigmoid ? "sigmoid" : "linear") << '\n'
      << "optimizer = " << (c.train.optimizer == OptimizerKind::adam ? "adam" : "sgd") << '\n'
      << "learning_rate = " << csv::format_double(c.train.learning_rate) << '\n'
      << "beta1 = " << csv::format_double(c.train.adam.beta1) << '\n'
      << "beta2 = " << csv::format_double(c.train.adam.beta2) << '\n'
      << "epsilon = " << csv::format_double(c.train.adam.epsilon) << '\n'
      << "epochs = " << c.train.epochs << '\n'
      << "patience = "
      << (c.train.early_stop_patience ? std::to_string(*c.train.early_stop_patience) : "none") << '\n'
      << "test_fraction = " << csv::format_double(c.test_fraction) << '\n'
      << "validation_fraction = " << csv::format_double(c.validation_fraction) << '\n'
      << "sources = " << join(c.sources, [](Source s) { return std::string(source_name(s)); }) << '\n'
      << "tree_max_depth = " << c.tree_max_depth << '\n'
      << "tree_min_samples_leaf = " << c.tree_min_samples_leaf << '\n'
      << "ridge = " << csv::format_double(c.ridge) << '\n';
  return out.str();
}

} // namespace stmtl
