#include "fudnn/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "fudnn/error.hpp"

namespace fudnn::nn {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& dir, Classifier& model, const TrainConfig& config) {
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["format"] = "fudnn-model";
  j["version"] = 1;
  j["spec"] = model.spec().to_json();
  std::vector<std::string> classes;
  for (auto c : model.classes()) classes.emplace_back(to_string(c));
  j["classes"] = classes;
  j["seed"] = model.seed();
  j["epoch"] = model.epochs_trained();
  j["train"] = config.to_json();
  j["channel_weights"] = model.weights() ? nlohmann::json(model.weights()->w) : nlohmann::json(nullptr);
  auto tensors = nlohmann::json::array();
  std::vector<unsigned char> blob;
  for (const auto& t : model.network().state()) {
    tensors.push_back({{"name", t.name}, {"shape", t.tensor->shape}});
    for (float v : t.tensor->data) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
  }
  j["tensors"] = tensors;
  j["blob_floats"] = blob.size() / 4;

  std::ofstream js(dir / "model.json");
  require(static_cast<bool>(js), ErrorKind::kFormat, "cannot write " + (dir / "model.json").string());
  js << j.dump(2) << '\n';
  std::ofstream bs(dir / "model.bin", std::ios::binary);
  require(static_cast<bool>(bs), ErrorKind::kFormat, "cannot write " + (dir / "model.bin").string());
  bs.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
}

Classifier load_checkpoint(const fs::path& dir) {
  std::ifstream js(dir / "model.json");
  require(static_cast<bool>(js), ErrorKind::kFormat, "cannot read " + (dir / "model.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("model.json: ") + e.what());
  }
  require(j.value("format", "") == "fudnn-model", ErrorKind::kFormat, "model.json: not a fudnn model");
  auto spec = NetworkSpec::from_json(j.at("spec"));
  std::vector<ClassLabel> classes;
  for (const auto& c : j.at("classes")) classes.push_back(parse_class_label(c.get<std::string>()));
  std::optional<ChannelWeights> weights;
  if (!j.at("channel_weights").is_null()) weights = ChannelWeights{j.at("channel_weights").get<std::vector<double>>()};
  Classifier model(std::move(spec), std::move(classes), std::move(weights), j.at("seed").get<std::uint64_t>());
  model.set_epochs_trained(j.at("epoch").get<int>());

  std::ifstream bs(dir / "model.bin", std::ios::binary);
  require(static_cast<bool>(bs), ErrorKind::kFormat, "cannot read " + (dir / "model.bin").string());
  const std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bs)), std::istreambuf_iterator<char>());
  const auto state = model.network().state();
  const auto& table = j.at("tensors");
  require(table.size() == state.size(), ErrorKind::kFormat, "model.json: tensor table does not match the network");
  std::size_t off = 0;
  for (std::size_t k = 0; k < state.size(); ++k) {
    auto& t = *state[k].tensor;
    require(table[k].at("name").get<std::string>() == state[k].name &&
                table[k].at("shape").get<Shape>() == t.shape,
            ErrorKind::kFormat, "model.json: tensor " + state[k].name + " mismatch");
    require(off + 4 * t.size() <= blob.size(), ErrorKind::kFormat, "model.bin is truncated");
    for (auto& v : t.data) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(blob[off++]) << (8 * b);
      v = std::bit_cast<float>(bits);
    }
  }
  require(off == blob.size(), ErrorKind::kFormat, "model.bin has trailing data");
  return model;
}

} // namespace fudnn::nn
