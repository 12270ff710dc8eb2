#include "msunet/nn/weights_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "msunet/error.h"

namespace msunet::nn {

static_assert(std::endian::native == std::endian::little);

using nlohmann::json;

void SaveModel(const std::filesystem::path& dir, const MiniSegNet& model) {
  std::filesystem::create_directories(dir);
  const MiniSegNetConfig& c = model.config();
  json params = json::array();
  size_t offset = 0;
  std::ofstream blob(dir / "weights.bin", std::ios::binary | std::ios::trunc);
  if (!blob) throw IoError("cannot write " + (dir / "weights.bin").string());
  for (const Parameter& p : model.weights().params) {
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset},
                      {"trainable", p.trainable}});
    blob.write(reinterpret_cast<const char*>(p.value.data()),
               static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    offset += p.value.size() * sizeof(float);
  }
  if (!blob) throw IoError("write failed: " + (dir / "weights.bin").string());
  json j{{"fingerprint", model.weights().fingerprint},
         {"config",
          {{"in_channels", c.in_channels},
           {"base_channels", c.base_channels},
           {"depth", c.depth},
           {"dropout_rate", c.dropout_rate},
           {"level_dropout_rates", c.level_dropout_rates},
           {"use_attention", c.use_attention}}},
         {"params", params}};
  std::ofstream meta(dir / "weights.json", std::ios::binary | std::ios::trunc);
  meta << j.dump(2) << "\n";
  if (!meta) throw IoError("write failed: " + (dir / "weights.json").string());
}

MiniSegNet LoadModel(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "weights.json", std::ios::binary);
  if (!meta) throw IoError("cannot open " + (dir / "weights.json").string());
  std::ifstream blob(dir / "weights.bin", std::ios::binary);
  if (!blob) throw IoError("cannot open " + (dir / "weights.bin").string());
  std::stringstream bytes;
  bytes << blob.rdbuf();
  const std::string raw = bytes.str();
  try {
    const json j = json::parse(meta);
    MiniSegNetConfig c;
    const json& jc = j.at("config");
    c.in_channels = jc.at("in_channels").get<int>();
    c.base_channels = jc.at("base_channels").get<int>();
    c.depth = jc.at("depth").get<int>();
    c.dropout_rate = jc.at("dropout_rate").get<float>();
    c.level_dropout_rates = jc.at("level_dropout_rates").get<std::vector<float>>();
    c.use_attention = jc.at("use_attention").get<bool>();
    ModelWeights w;
    w.fingerprint = j.at("fingerprint").get<std::string>();
    for (const json& p : j.at("params")) {
      Parameter param;
      param.name = p.at("name").get<std::string>();
      const Shape shape = p.at("shape").get<Shape>();
      const size_t offset = p.at("offset").get<size_t>();
      const size_t n = NumElements(shape);
      if (offset + n * sizeof(float) > raw.size()) {
        throw IoError("weights.bin truncated at parameter " + param.name);
      }
      std::vector<float> data(n);
      std::memcpy(data.data(), raw.data() + offset, n * sizeof(float));
      param.value = Tensor(shape, std::move(data));
      param.trainable = p.at("trainable").get<bool>();
      w.params.push_back(std::move(param));
    }
    return MiniSegNet(c, std::move(w));
  } catch (const json::exception& e) {
    throw IoError("malformed " + (dir / "weights.json").string() + ": " + e.what());
  }
}

}  // namespace msunet::nn
