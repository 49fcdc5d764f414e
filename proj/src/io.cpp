#include "pcir/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace pcir::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  if (!std::isfinite(v)) throw NumericError("cannot serialize non-finite value");
  return fmt::format("{:.17g}", v);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw ConfigError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw ConfigError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw ConfigError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

// nlohmann's own dump prints shortest round-trip floats; files here use a
// fixed 17-digit format instead, so the tree is emitted by hand.
void emit(const json& j, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  if (j.is_number_float()) {
    out += format_double(j.get<double>());
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
      return;
    }
    bool flat = true;
    for (const auto& e : j) flat = flat && e.is_primitive();
    if (flat) {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ", ";
        emit(j[i], out, depth + 1);
      }
      out += ']';
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      out += pad;
      emit(j[i], out, depth + 1);
      out += i + 1 < j.size() ? ",\n" : "\n";
    }
    out += close_pad + "]";
  } else if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    std::size_t i = 0;
    for (const auto& [k, v] : j.items()) {
      out += pad + json(k).dump() + ": ";
      emit(v, out, depth + 1);
      out += ++i < j.size() ? ",\n" : "\n";
    }
    out += close_pad + "}";
  } else {
    out += j.dump();
  }
}

std::string to_text(const json& j) {
  std::string out;
  emit(j, out, 0);
  out += '\n';
  return out;
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string(what) + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": bad value for '" + key + "': " + e.what());
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(where + ": not a number: '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(where + ": not an integer: '" + s + "'");
  return v;
}

json matrix_json(const Matrix& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from(const json& j) {
  const auto rows = field<Index>(j, "rows", "checkpoint matrix");
  const auto cols = field<Index>(j, "cols", "checkpoint matrix");
  const auto data = field<std::vector<double>>(j, "data", "checkpoint matrix");
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    throw ConfigError("checkpoint matrix: data length does not match its shape");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = data[static_cast<std::size_t>(i * cols + j)];
  return m;
}

json mlp_json(const model::Mlp& m) {
  json layers = json::array();
  for (std::size_t l = 0; l < m.weights.size(); ++l)
    layers.push_back(json{{"weight", matrix_json(m.weights[l])}, {"bias", matrix_json(m.biases[l])}});
  return layers;
}

model::Mlp mlp_from(const json& j, model::Activation act) {
  model::Mlp m;
  m.activation = act;
  if (!j.is_array()) throw ConfigError("checkpoint: layers must be an array");
  for (const auto& layer : j) {
    m.weights.push_back(matrix_from(layer.at("weight")));
    m.biases.push_back(matrix_from(layer.at("bias")));
    if (m.biases.back().rows() != 1 || m.biases.back().cols() != m.weights.back().cols())
      throw ConfigError("checkpoint: bias shape does not match its weight");
    if (m.weights.size() > 1 && m.weights[m.weights.size() - 2].cols() != m.weights.back().rows())
      throw ConfigError("checkpoint: consecutive layer shapes do not chain");
  }
  return m;
}

template <typename E>
E enum_from(const std::string& s, std::initializer_list<std::pair<const char*, E>> options, const char* what) {
  for (const auto& [name, value] : options)
    if (s == name) return value;
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

json kernel_json(const KernelConfig& k) {
  return json{{"mode", k.mode == BandwidthMode::Fixed ? "fixed" : "median"},
              {"bandwidths", k.bandwidths},
              {"multipliers", k.multipliers},
              {"weights", k.weights}};
}

KernelConfig kernel_from(const json& j) {
  KernelConfig k;
  k.mode = enum_from<BandwidthMode>(field<std::string>(j, "mode", "kernel"),
                                    {{"fixed", BandwidthMode::Fixed}, {"median", BandwidthMode::MedianHeuristic}},
                                    "kernel mode");
  k.bandwidths = field<std::vector<double>>(j, "bandwidths", "kernel");
  k.multipliers = field<std::vector<double>>(j, "multipliers", "kernel");
  k.weights = field<std::vector<double>>(j, "weights", "kernel");
  k.validate();
  return k;
}

}  // namespace

std::string dataset_csv(const data::Dataset& d) {
  if (static_cast<Index>(d.env.size()) != d.size() || static_cast<Index>(d.label.size()) != d.size())
    throw ConfigError("dataset: env/label columns do not match the feature rows");
  std::string out;
  for (Index j = 0; j < d.dim(); ++j) out += fmt::format("f{},", j);
  out += "env,label\n";
  for (Index i = 0; i < d.size(); ++i) {
    for (Index j = 0; j < d.dim(); ++j) {
      out += format_double(d.features(i, j));
      out += ',';
    }
    out += fmt::format("{},{}\n", d.env[static_cast<std::size_t>(i)], d.label[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::string dataset_metadata_json(const data::Dataset& d) {
  return to_text(json{{"config_digest", d.config_digest},
                      {"seed", d.seed},
                      {"intervention", d.intervention},
                      {"rows", d.size()},
                      {"features", d.dim()}});
}

fs::path metadata_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

void write_dataset(const data::Dataset& d, const fs::path& csv_path) {
  write_file_atomic(csv_path, dataset_csv(d));
  write_file_atomic(metadata_path(csv_path), dataset_metadata_json(d));
}

data::Dataset read_dataset(const fs::path& csv_path) {
  const std::string name = csv_path.string();
  std::istringstream in(read_file(csv_path));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(name + ": empty file");
  const auto header = split(line, ',');
  if (header.size() < 3 || header[header.size() - 2] != "env" || header.back() != "label")
    throw ConfigError(name + ": header must be f0,...,f{d-1},env,label");
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j)
    if (header[j] != fmt::format("f{}", j)) throw ConfigError(name + ": unexpected column '" + header[j] + "'");

  std::vector<std::vector<double>> rows;
  data::Dataset out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = fmt::format("{}:{}", name, lineno);
    if (cells.size() != header.size()) throw ConfigError(where + ": expected " + std::to_string(header.size()) + " fields");
    std::vector<double> r(d);
    for (std::size_t j = 0; j < d; ++j) r[j] = parse_double(cells[j], where);
    rows.push_back(std::move(r));
    out.env.push_back(parse_int(cells[d], where));
    out.label.push_back(parse_int(cells[d + 1], where));
  }
  out.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out.features(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];

  const fs::path meta = metadata_path(csv_path);
  if (fs::exists(meta)) {
    const json j = parse_json(read_file(meta), "dataset metadata");
    out.config_digest = field<std::string>(j, "config_digest", "dataset metadata");
    out.seed = field<std::uint64_t>(j, "seed", "dataset metadata");
    out.intervention = field<std::string>(j, "intervention", "dataset metadata");
  }
  return out;
}

std::string scores_csv(const scoring::Scores& s) {
  if (s.label.size() != s.score.size() || s.env.size() != s.score.size())
    throw ConfigError("scores: column lengths differ");
  std::string out = "index,score,label,env\n";
  for (std::size_t i = 0; i < s.score.size(); ++i)
    out += fmt::format("{},{},{},{}\n", i, format_double(s.score[i]), s.label[i], s.env[i]);
  return out;
}

std::string reps_csv(const Matrix& reps, const std::vector<int>& env) {
  if (static_cast<Index>(env.size()) != reps.rows()) throw ConfigError("reps: env column does not match the rows");
  std::string out;
  for (Index j = 0; j < reps.cols(); ++j) out += fmt::format("z{},", j);
  out += "env\n";
  for (Index i = 0; i < reps.rows(); ++i) {
    for (Index j = 0; j < reps.cols(); ++j) {
      out += format_double(reps(i, j));
      out += ',';
    }
    out += fmt::format("{}\n", env[static_cast<std::size_t>(i)]);
  }
  return out;
}

RepsTable parse_reps_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("reps: empty file");
  const auto header = split(line, ',');
  if (header.size() < 2 || header.back() != "env") throw ConfigError("reps: header must be z0,...,z{k-1},env");
  const std::size_t k = header.size() - 1;
  std::vector<std::vector<double>> rows;
  RepsTable t;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = fmt::format("reps:{}", lineno);
    if (cells.size() != header.size()) throw ConfigError(where + ": wrong number of fields");
    std::vector<double> r(k);
    for (std::size_t j = 0; j < k; ++j) r[j] = parse_double(cells[j], where);
    rows.push_back(std::move(r));
    t.env.push_back(parse_int(cells[k], where));
  }
  t.reps.resize(static_cast<Index>(rows.size()), static_cast<Index>(k));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < k; ++j) t.reps(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return t;
}

std::string checkpoint_json(const model::Detector& m, const std::vector<model::EpochRecord>& history,
                            const std::string& config_digest) {
  const auto& e = m.encoder_cfg;
  const auto& t = m.train_cfg;
  json hist{{"task", json::array()}, {"pcir", json::array()}, {"total", json::array()}};
  for (const auto& h : history) {
    hist["task"].push_back(h.task);
    hist["pcir"].push_back(h.pcir);
    hist["total"].push_back(h.total);
  }
  json center = json::array();
  for (Index i = 0; i < m.center.size(); ++i) center.push_back(m.center(i));
  json j{{"config_digest", config_digest},
         {"encoder_config",
          {{"hidden", e.hidden}, {"rep_dim", e.rep_dim}, {"activation", model::to_string(e.activation)},
           {"seed", e.seed}}},
         {"train_config",
          {{"lambda", t.lambda},
           {"epochs", t.epochs},
           {"batch_per_env", t.batch_per_env},
           {"optimizer", model::to_string(t.optimizer)},
           {"learning_rate", t.learning_rate},
           {"objective", model::to_string(t.objective)},
           {"kernel", kernel_json(t.kernel)},
           {"seed", t.seed},
           {"regularize", t.regularize}}},
         {"center", center},
         {"encoder", mlp_json(m.encoder)},
         {"decoder", mlp_json(m.decoder)},
         {"history", hist}};
  return to_text(j);
}

Checkpoint parse_checkpoint(const std::string& text) {
  const json j = parse_json(text, "checkpoint");
  Checkpoint c;
  try {
    c.config_digest = field<std::string>(j, "config_digest", "checkpoint");
    const json& ej = j.at("encoder_config");
    auto& e = c.model.encoder_cfg;
    e.hidden = field<std::vector<int>>(ej, "hidden", "checkpoint encoder_config");
    e.rep_dim = field<int>(ej, "rep_dim", "checkpoint encoder_config");
    e.activation = enum_from<model::Activation>(field<std::string>(ej, "activation", "checkpoint encoder_config"),
                                                {{"tanh", model::Activation::Tanh}, {"relu", model::Activation::Relu}},
                                                "activation");
    e.seed = field<std::uint64_t>(ej, "seed", "checkpoint encoder_config");

    const json& tj = j.at("train_config");
    auto& t = c.model.train_cfg;
    t.lambda = field<double>(tj, "lambda", "checkpoint train_config");
    t.epochs = field<int>(tj, "epochs", "checkpoint train_config");
    t.batch_per_env = field<int>(tj, "batch_per_env", "checkpoint train_config");
    t.optimizer = enum_from<OptimizerKind>(field<std::string>(tj, "optimizer", "checkpoint train_config"),
                                           {{"adam", OptimizerKind::Adam}, {"sgd", OptimizerKind::Sgd}}, "optimizer");
    t.learning_rate = field<double>(tj, "learning_rate", "checkpoint train_config");
    t.objective = enum_from<model::Objective>(
        field<std::string>(tj, "objective", "checkpoint train_config"),
        {{"compactness", model::Objective::Compactness}, {"autoencoder", model::Objective::Autoencoder}}, "objective");
    t.kernel = kernel_from(tj.at("kernel"));
    t.seed = field<std::uint64_t>(tj, "seed", "checkpoint train_config");
    t.regularize = field<bool>(tj, "regularize", "checkpoint train_config");

    const auto center = field<std::vector<double>>(j, "center", "checkpoint");
    c.model.center = Vector::Map(center.data(), static_cast<Index>(center.size()));
    c.model.encoder = mlp_from(j.at("encoder"), e.activation);
    c.model.decoder = mlp_from(j.at("decoder"), e.activation);

    const json& hj = j.at("history");
    const auto task = field<std::vector<double>>(hj, "task", "checkpoint history");
    const auto pcir = field<std::vector<double>>(hj, "pcir", "checkpoint history");
    const auto total = field<std::vector<double>>(hj, "total", "checkpoint history");
    if (pcir.size() != task.size() || total.size() != task.size())
      throw ConfigError("checkpoint history: column lengths differ");
    for (std::size_t i = 0; i < task.size(); ++i) c.history.push_back({task[i], pcir[i], total[i]});
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("checkpoint: ") + ex.what());
  }
  if (c.model.encoder.empty()) throw ConfigError("checkpoint: encoder has no layers");
  if (c.model.encoder.out_dim() != c.model.encoder_cfg.rep_dim)
    throw ConfigError("checkpoint: encoder output does not match rep_dim");
  return c;
}

Checkpoint load_checkpoint(const fs::path& path) { return parse_checkpoint(read_file(path)); }

std::string report_json(const eval::EvalReport& r) {
  json per_env = json::array();
  for (const auto& e : r.per_env)
    per_env.push_back(json{{"env", e.env},
                           {"auroc_mean", e.auroc_mean},
                           {"auroc_std", e.auroc_std},
                           {"auroc_per_seed", e.auroc_per_seed}});
  return to_text(json{{"config_digest", r.config_digest},
                      {"seeds", r.seeds},
                      {"per_env", per_env},
                      {"invariance_gap", r.invariance_gap},
                      {"invariance_gap_std", r.invariance_gap_std},
                      {"mi_nats", r.mi_nats},
                      {"mi_nats_std", r.mi_nats_std},
                      {"lambda", r.lambda}});
}

eval::EvalReport parse_report(const std::string& text) {
  const json j = parse_json(text, "report");
  eval::EvalReport r;
  r.config_digest = field<std::string>(j, "config_digest", "report");
  r.seeds = field<std::vector<std::uint64_t>>(j, "seeds", "report");
  if (!j.contains("per_env") || !j.at("per_env").is_array()) throw ConfigError("report: per_env must be an array");
  for (const auto& e : j.at("per_env")) {
    eval::EnvSummary s;
    s.env = field<std::string>(e, "env", "report per_env");
    s.auroc_mean = field<double>(e, "auroc_mean", "report per_env");
    s.auroc_std = field<double>(e, "auroc_std", "report per_env");
    if (e.contains("auroc_per_seed")) s.auroc_per_seed = field<std::vector<double>>(e, "auroc_per_seed", "report");
    r.per_env.push_back(std::move(s));
  }
  r.invariance_gap = field<double>(j, "invariance_gap", "report");
  r.mi_nats = field<double>(j, "mi_nats", "report");
  r.lambda = field<double>(j, "lambda", "report");
  if (j.contains("invariance_gap_std")) r.invariance_gap_std = field<double>(j, "invariance_gap_std", "report");
  if (j.contains("mi_nats_std")) r.mi_nats_std = field<double>(j, "mi_nats_std", "report");
  return r;
}

}  // namespace pcir::io
