#include "core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "core/errors.hpp"
#include "core/json_io.hpp"

namespace attrivae {

namespace fs = std::filesystem;
using json_io::Json;

namespace {

constexpr char kMagic[8] = {'A', 'V', 'A', 'E', 'W', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little, "weights.bin is written little-endian");

std::vector<std::string> tensor_names(Model<float>& model) {
  std::vector<std::string> names;
  for (auto* p : model.parameters()) names.push_back(p->name);
  const auto buffers = model.buffers();
  for (std::size_t i = 0; i < buffers.size(); ++i) names.push_back("buffer." + std::to_string(i));
  return names;
}

}  // namespace

ModelCheckpoint capture(Model<float>& model, const AttributeMapping& mapping, const LossWeights& weights,
                        const nn::Adam::Settings& adam, std::uint64_t seed, int epoch, const std::string& dataset_hash) {
  ModelCheckpoint c;
  c.model = model.config();
  c.mapping = mapping;
  c.weights = weights;
  c.adam = adam;
  c.seed = seed;
  c.epoch = epoch;
  c.dataset_hash = dataset_hash;
  for (auto* p : model.parameters()) c.tensors.push_back(p->value);
  for (auto* b : model.buffers()) c.tensors.push_back(*b);
  return c;
}

Model<float> restore(const ModelCheckpoint& checkpoint) {
  Model<float> model(checkpoint.model);
  auto params = model.parameters();
  auto buffers = model.buffers();
  if (checkpoint.tensors.size() != params.size() + buffers.size())
    throw std::runtime_error("checkpoint holds " + std::to_string(checkpoint.tensors.size()) + " tensors, model needs " +
                             std::to_string(params.size() + buffers.size()));
  std::size_t t = 0;
  auto copy = [&](std::vector<float>& dst, const std::string& name) {
    const auto& src = checkpoint.tensors[t++];
    if (src.size() != dst.size())
      throw std::runtime_error("checkpoint tensor '" + name + "' has " + std::to_string(src.size()) +
                               " values, expected " + std::to_string(dst.size()));
    dst = src;
  };
  for (auto* p : params) copy(p->value, p->name);
  for (std::size_t i = 0; i < buffers.size(); ++i) copy(*buffers[i], "buffer." + std::to_string(i));
  return model;
}

void save_checkpoint(const ModelCheckpoint& checkpoint, const fs::path& dir) {
  fs::create_directories(dir);
  Model<float> shape_probe(checkpoint.model);
  const auto names = tensor_names(shape_probe);
  if (names.size() != checkpoint.tensors.size()) throw std::runtime_error("checkpoint tensor count mismatch");

  std::ofstream w(dir / "weights.bin", std::ios::binary | std::ios::trunc);
  if (!w) throw std::runtime_error("cannot write " + (dir / "weights.bin").string());
  w.write(kMagic, sizeof(kMagic));
  const std::uint64_t count = checkpoint.tensors.size();
  w.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& t : checkpoint.tensors) {
    const std::uint64_t n = t.size();
    w.write(reinterpret_cast<const char*>(&n), sizeof(n));
    w.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(n * sizeof(float)));
  }
  if (!w) throw std::runtime_error("failed writing " + (dir / "weights.bin").string());

  Json m;
  m["format"] = "attrivae-checkpoint-1";
  m["model"] = json_io::to_json(checkpoint.model);
  m["mapping"] = json_io::to_json(checkpoint.mapping);
  m["loss_weights"] = json_io::to_json(checkpoint.weights);
  m["adam"] = json_io::to_json(checkpoint.adam);
  m["seed"] = checkpoint.seed;
  m["epoch"] = checkpoint.epoch;
  m["dataset_hash"] = checkpoint.dataset_hash;
  Json tensors = Json::array();
  for (std::size_t i = 0; i < names.size(); ++i)
    tensors.push_back(Json{{"name", names[i]}, {"size", checkpoint.tensors[i].size()}});
  m["tensors"] = tensors;
  std::ofstream mf(dir / "manifest.json", std::ios::trunc);
  if (!mf) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  mf << m.dump(2) << "\n";
}

ModelCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ConfigError("checkpoint manifest not found: " + (dir / "manifest.json").string());
  Json m;
  try {
    m = Json::parse(mf);
  } catch (const std::exception& e) {
    throw ConfigError("malformed checkpoint manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }
  ModelCheckpoint c;
  json_io::read(m.at("model"), "model", c.model);
  json_io::read(m.at("mapping"), "mapping", c.mapping);
  json_io::read(m.at("loss_weights"), "loss_weights", c.weights);
  json_io::read(m.at("adam"), "adam", c.adam);
  c.seed = m.at("seed").get<std::uint64_t>();
  c.epoch = m.at("epoch").get<int>();
  c.dataset_hash = m.at("dataset_hash").get<std::string>();

  std::ifstream w(dir / "weights.bin", std::ios::binary);
  if (!w) throw ConfigError("checkpoint weights not found: " + (dir / "weights.bin").string());
  char magic[8];
  w.read(magic, sizeof(magic));
  if (!w || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint weights file: " + (dir / "weights.bin").string());
  std::uint64_t count = 0;
  w.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (std::uint64_t i = 0; i < count && w; ++i) {
    std::uint64_t n = 0;
    w.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (n > (1ull << 32)) throw std::runtime_error("corrupt checkpoint weights");
    std::vector<float> t(n);
    w.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(n * sizeof(float)));
    c.tensors.push_back(std::move(t));
  }
  if (!w) throw std::runtime_error("truncated checkpoint weights: " + (dir / "weights.bin").string());
  return c;
}

}  // namespace attrivae
