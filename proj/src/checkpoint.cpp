#include <fstream>

#include "volsynth/error.hpp"
#include "volsynth/json_io.hpp"
#include "volsynth/model.hpp"

namespace volsynth {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "volsynth-checkpoint";
constexpr int kVersion = 1;

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json model_config_to_json(const model::ModelConfig& c) {
  return json{{"variant", std::string(model::to_string(c.variant))},
              {"layers", c.layers},
              {"heads", c.heads},
              {"model_dim", c.model_dim},
              {"seq_len", c.seq_len},
              {"dropout", c.dropout},
              {"input_dim", c.input_dim},
              {"ff_dim", c.ff_dim},
              {"factor_k1", c.factor_k1},
              {"factor_k2", c.factor_k2},
              {"factor_rank", c.factor_rank}};
}

model::ModelConfig model_config_from_json(const json& j, const model::ModelConfig& defaults) {
  model::ModelConfig c = defaults;
  if (j.contains("variant")) {
    auto name = j.at("variant").get<std::string>();
    auto v = model::variant_from_string(name);
    if (!v) throw Error(ErrorCode::kConfig, "unknown attention variant '" + name + "'");
    c.variant = *v;
  }
  read_key(j, "layers", c.layers);
  read_key(j, "heads", c.heads);
  read_key(j, "model_dim", c.model_dim);
  read_key(j, "seq_len", c.seq_len);
  read_key(j, "dropout", c.dropout);
  read_key(j, "input_dim", c.input_dim);
  read_key(j, "ff_dim", c.ff_dim);
  read_key(j, "factor_k1", c.factor_k1);
  read_key(j, "factor_k2", c.factor_k2);
  read_key(j, "factor_rank", c.factor_rank);
  return c;
}

namespace model {

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelWeights& weights) {
  json tensors = json::array();
  weights.visit([&](const std::string& name, const Var& v) {
    const Matrix& m = v.value();
    tensors.push_back(json{{"name", name},
                           {"rows", m.rows()},
                           {"cols", m.cols()},
                           {"data", std::vector<double>(m.data(), m.data() + m.size())}});
  });
  json doc{{"format", kFormat},
           {"version", kVersion},
           {"config", model_config_to_json(config)},
           {"tensors", std::move(tensors)}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  out << doc.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open checkpoint " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, "checkpoint " + path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != kFormat || doc.value("version", 0) != kVersion) {
    throw Error(ErrorCode::kMalformedInput,
                "checkpoint " + path.string() + " has an unsupported format or version");
  }
  Checkpoint ck;
  ck.config = model_config_from_json(doc.at("config"));
  ck.weights = ModelWeights::initialize(ck.config, 0);

  std::size_t filled = 0;
  for (const auto& t : doc.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    Var* v = ck.weights.find(name);
    if (v == nullptr) throw Error(ErrorCode::kMalformedInput, "checkpoint has unknown tensor " + name);
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto data = t.at("data").get<std::vector<double>>();
    if (rows != v->rows() || cols != v->cols() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw Error(ErrorCode::kMalformedInput, "checkpoint tensor " + name + " has the wrong shape");
    }
    std::copy(data.begin(), data.end(), v->mutable_value().data());
    ++filled;
  }
  std::size_t expected = 0;
  ck.weights.visit([&](const std::string&, const Var&) { ++expected; });
  if (filled != expected) {
    throw Error(ErrorCode::kMalformedInput, "checkpoint " + path.string() + " is missing tensors");
  }
  return ck;
}

}  // namespace model
}  // namespace volsynth
