#include "stmtl/checkpoint.hpp"

#include "stmtl/csv.hpp"
#include "stmtl/error.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace stmtl {

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void require_token(const std::string& s, std::string_view what) {
  if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos)
    throw std::invalid_argument(std::string(what) + " '" + s + "' cannot be stored in a checkpoint");
}

class Reader {
public:
  explicit Reader(std::string_view text) : in_(std::string(text)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw ValidationError("checkpoint truncated");
    return w;
  }
  void expect(std::string_view keyword) {
    const std::string w = word();
    if (w != keyword)
      throw ValidationError("checkpoint: expected '" + std::string(keyword) + "', found '" + w + "'");
  }
  std::size_t count() {
    const std::string w = word();
    const auto v = csv::parse_int(w);
    if (!v || *v < 0) throw ValidationError("checkpoint: bad count '" + w + "'");
    return static_cast<std::size_t>(*v);
  }
  double real() {
    const std::string w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size()) throw ValidationError("checkpoint: bad number '" + w + "'");
    return v;
  }
  std::vector<std::string> words(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(word());
    return out;
  }

private:
  std::istringstream in_;
};

void write_tensor(std::ostringstream& out, const std::string& name, const Matrix& m) {
  out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << hex(m(r, c));
    out << '\n';
  }
}

void write_tensor(std::ostringstream& out, const std::string& name, const Vector& v) {
  out << "tensor " << name << ' ' << v.size() << " 1\n";
  for (Eigen::Index r = 0; r < v.size(); ++r) out << hex(v(r)) << '\n';
}

void read_tensor(Reader& in, const std::string& name, double* data, Eigen::Index rows,
                 Eigen::Index cols) {
  in.expect("tensor");
  const std::string got = in.word();
  if (got != name) throw ValidationError("checkpoint: expected tensor " + name + ", found " + got);
  const std::size_t r = in.count();
  const std::size_t c = in.count();
  if (static_cast<Eigen::Index>(r) != rows || static_cast<Eigen::Index>(c) != cols)
    throw ValidationError("checkpoint: tensor " + name + " has the wrong shape");
  for (Eigen::Index i = 0; i < rows * cols; ++i) data[i] = in.real();
}

} // namespace

std::string checkpoint_text(const Checkpoint& cp) {
  const MtlArchitecture& a = cp.model.architecture();
  for (const std::string& t : cp.model.tasks()) require_token(t, "task label");
  for (const std::string& s : cp.soil_columns) require_token(s, "soil column");

  std::ostringstream out;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "tasks " << cp.model.tasks().size();
  for (const std::string& t : cp.model.tasks()) out << ' ' << t;
  out << "\nsources " << a.sources.size();
  for (Source s : a.sources) out << ' ' << source_name(s);
  out << "\ninput_widths " << a.input_widths.size();
  for (std::size_t w : a.input_widths) out << ' ' << w;
  out << "\nextractor_width " << a.extractor_width << "\nshared_width " << a.shared_width
      << "\nhead_widths " << a.head_widths.size();
  for (std::size_t w : a.head_widths) out << ' ' << w;
  out << "\ndropout " << hex(a.dropout_rate) << "\nhidden_activation "
      << (a.hidden_activation == Activation::sigmoid ? "sigmoid" : "linear") << "\nwindows "
      << cp.windows << "\nsoil_columns " << cp.soil_columns.size();
  for (const std::string& s : cp.soil_columns) out << ' ' << s;
  out << '\n';
  for (Source s : kAllSources) {
    const auto& cols = cp.norm.features[index_of(s)];
    out << "norm " << source_name(s) << ' ' << cols.size() << '\n';
    for (const ColumnRange& r : cols) out << hex(r.min) << ' ' << hex(r.max) << '\n';
  }
  out << "target " << hex(cp.norm.target.min) << ' ' << hex(cp.norm.target.max) << '\n';

  const auto names = cp.model.tensor_names();
  std::size_t i = 0;
  const MtlParameters& p = cp.model.parameters();
  auto layer = [&](const DenseLayer& l) {
    write_tensor(out, names[i++], l.weight);
    write_tensor(out, names[i++], l.bias);
  };
  for (const auto& l : p.extractors) layer(l);
  layer(p.shared);
  for (const auto& head : p.heads)
    for (const auto& l : head) layer(l);
  out << "end\n";
  return out.str();
}

Checkpoint parse_checkpoint(std::string_view text) {
  Reader in(text);
  in.expect(kCheckpointMagic);
  const std::size_t version = in.count();
  if (version != static_cast<std::size_t>(kCheckpointVersion))
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));

  in.expect("tasks");
  std::vector<std::string> tasks = in.words(in.count());
  MtlArchitecture a;
  in.expect("sources");
  for (const std::string& s : in.words(in.count())) {
    try {
      a.sources.push_back(parse_source(s));
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string("checkpoint: ") + e.what());
    }
  }
  in.expect("input_widths");
  for (std::size_t n = in.count(), i = 0; i < n; ++i) a.input_widths.push_back(in.count());
  in.expect("extractor_width");
  a.extractor_width = in.count();
  in.expect("shared_width");
  a.shared_width = in.count();
  in.expect("head_widths");
  a.head_widths.clear();
  for (std::size_t n = in.count(), i = 0; i < n; ++i) a.head_widths.push_back(in.count());
  in.expect("dropout");
  a.dropout_rate = in.real();
  in.expect("hidden_activation");
  const std::string act = in.word();
  if (act == "sigmoid") a.hidden_activation = Activation::sigmoid;
  else if (act == "linear") a.hidden_activation = Activation::linear;
  else throw ValidationError("checkpoint: unknown activation " + act);

  Checkpoint cp;
  in.expect("windows");
  cp.windows = in.count();
  in.expect("soil_columns");
  cp.soil_columns = in.words(in.count());
  for (Source s : kAllSources) {
    in.expect("norm");
    in.expect(source_name(s));
    auto& cols = cp.norm.features[index_of(s)];
    for (std::size_t n = in.count(), i = 0; i < n; ++i) {
      const double lo = in.real();
      const double hi = in.real();
      cols.push_back({lo, hi});
    }
  }
  in.expect("target");
  cp.norm.target.min = in.real();
  cp.norm.target.max = in.real();

  // Shapes come from a model built on the same layout.
  MtlModel shell;
  try {
    shell = MtlModel(a, tasks, std::uint64_t{0});
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  MtlParameters params = shell.zero_gradients();
  const auto names = shell.tensor_names();
  std::size_t i = 0;
  auto layer = [&](DenseLayer& l) {
    read_tensor(in, names[i++], l.weight.data(), l.weight.rows(), l.weight.cols());
    read_tensor(in, names[i++], l.bias.data(), l.bias.size(), 1);
  };
  for (auto& l : params.extractors) layer(l);
  layer(params.shared);
  for (auto& head : params.heads)
    for (auto& l : head) layer(l);
  in.expect("end");
  try {
    cp.model = MtlModel(a, std::move(tasks), std::move(params));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  return cp;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  csv::write_text(path, checkpoint_text(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

} // namespace stmtl
