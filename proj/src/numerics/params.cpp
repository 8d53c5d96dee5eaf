// SPDX-License-Identifier: Apache-2.0
#include "semlab/numerics/params.hpp"

#include <json.hpp>

#include "semlab/util/blob_io.hpp"

namespace semlab::nn {
namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "semlab-checkpoint";

std::string blob_name(const std::string& layer, const char* which) {
  return layer + "." + which + ".f32";
}

std::size_t volume(const std::vector<std::size_t>& shape) {
  std::size_t n = shape.empty() ? 0 : 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

void save_checkpoint(const ParamSet<float>& params, const std::filesystem::path& dir,
                     const std::string& metadata_json) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["version"] = kCheckpointVersion;
  manifest["layers"] = nlohmann::json::array();
  for (const auto& [name, layer] : params) {
    const auto wfile = blob_name(name, "weights");
    const auto bfile = blob_name(name, "biases");
    util::write_f32_blob(dir / wfile, layer.weights.span());
    util::write_f32_blob(dir / bfile, layer.biases.span());
    manifest["layers"].push_back({
        {"name", name},
        {"weights", {{"shape", layer.weights.shape()}, {"file", wfile}}},
        {"biases", {{"shape", layer.biases.shape()}, {"file", bfile}}},
    });
  }
  try {
    manifest["metadata"] = nlohmann::json::parse(metadata_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  util::write_text_file(dir / "manifest.json", manifest.dump(2));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(util::read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest in '" + dir.string() + "': " + e.what());
  }
  if (manifest.value("format", "") != kCheckpointFormat)
    throw IoError("'" + dir.string() + "' is not a checkpoint directory");
  if (manifest.value("version", -1) != kCheckpointVersion)
    throw IoError("checkpoint version mismatch: expected " +
                  std::to_string(kCheckpointVersion) + ", found " +
                  std::to_string(manifest.value("version", -1)));

  LoadedCheckpoint out;
  try {
    for (const auto& layer : manifest.at("layers")) {
      auto read_tensor = [&](const char* which) {
        const auto& entry = layer.at(which);
        auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        auto data = util::read_f32_blob(dir / entry.at("file").get<std::string>(),
                                        volume(shape));
        return Tensor<float>(std::move(shape), std::move(data));
      };
      out.params.add(layer.at("name").get<std::string>(), read_tensor("weights"),
                     read_tensor("biases"));
    }
    out.metadata_json = manifest.value("metadata", nlohmann::json::object()).dump();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest in '" + dir.string() + "': " + e.what());
  }
  return out;
}

}  // namespace semlab::nn
