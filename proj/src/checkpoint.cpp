#include "respalloc/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace respalloc {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json model_to_json(const ResponsibilityModel& model) {
  const auto params = model.parameters();
  const MlpShape shape = model.network_shape();
  json doc;
  doc["format"] = "respalloc-model";
  doc["version"] = kCheckpointVersion;
  doc["kind"] = std::string(to_string(model.kind()));
  doc["n_agents"] = model.n_agents();
  doc["context_dim"] = model.context_dim();
  doc["hidden_width"] = shape.hidden_width;
  doc["hidden_layers"] = shape.hidden_layers;
  doc["seed"] = model.seed();
  doc["parameters"] = std::vector<double>(params.begin(), params.end());
  const Standardizer* norm = model.standardizer();
  if (norm && !norm->empty())
    doc["standardizer"] = {{"offset", vec_to_json(norm->offset)}, {"scale", vec_to_json(norm->scale)}};
  else
    doc["standardizer"] = nullptr;
  return doc;
}

ResponsibilityModel model_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "respalloc-model")
      throw CheckpointError("not a respalloc model checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    ModelSpec spec;
    spec.kind = model_kind_from_string(doc.at("kind").get<std::string>());
    spec.n_agents = doc.at("n_agents").get<int>();
    spec.context_dim = doc.at("context_dim").get<int>();
    spec.hidden_width = doc.at("hidden_width").get<int>();
    spec.hidden_layers = doc.at("hidden_layers").get<int>();
    if (const auto& s = doc.at("standardizer"); !s.is_null()) {
      spec.standardizer.offset = vec_from_json(s.at("offset"));
      spec.standardizer.scale = vec_from_json(s.at("scale"));
    }
    const auto seed = doc.at("seed").get<std::uint64_t>();
    ResponsibilityModel model = init_model(spec, seed);

    const auto params = doc.at("parameters").get<std::vector<double>>();
    auto dst = model.parameters();
    if (params.size() != dst.size())
      throw CheckpointError("checkpoint holds " + std::to_string(params.size()) +
                            " parameters, architecture needs " + std::to_string(dst.size()));
    std::copy(params.begin(), params.end(), dst.begin());
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const ResponsibilityModel& model, const std::filesystem::path& path,
                     const json& provenance) {
  json doc = model_to_json(model);
  doc["provenance"] = provenance;
  write_file_atomic(path, doc.dump(2) + "\n");
}

ResponsibilityModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw CheckpointError("cannot parse checkpoint " + path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace respalloc
