#include "san/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "san/errors.hpp"
#include "san/sant_io.hpp"

namespace san::nn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "san-checkpoint";

json shape_json(const Shape3& s) { return json::array({s.channels, s.height, s.width}); }

Shape3 shape_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("checkpoint: shape must be [c,h,w]");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

Tensor load_param(const fs::path& dir, const json& entry, const char* key) {
  const auto& file = entry.at(key);
  Tensor t = read_sant(dir / file.at("file").get<std::string>());
  if (t.shape() != file.at("shape").get<Shape>())
    throw FormatError("checkpoint: tensor " + file.at("file").get<std::string>() +
                      " does not match its manifest shape");
  return t;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Model& model, const CheckpointInfo& info) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = 1;
  manifest["seed"] = info.seed;
  manifest["step"] = info.step;
  manifest["input"] = shape_json(model.input_shape());
  json layers = json::array();
  for (std::size_t l = 0; l < model.size(); ++l) {
    const Layer& layer = model.layer(l);
    json entry;
    entry["type"] = layer_kind(layer);
    auto write = [&](const Tensor& t, const std::string& name) {
      const std::string file = "layer" + std::to_string(l) + "_" + name + ".sant";
      write_sant(dir / file, t);
      entry[name] = {{"file", file}, {"shape", t.shape()}};
    };
    if (const auto* c = std::get_if<ConvCyclic>(&layer)) {
      write(c->weight, "weight");
      write(c->bias, "bias");
    } else if (const auto* d = std::get_if<Dense>(&layer)) {
      write(d->weight, "weight");
      write(d->bias, "bias");
    } else if (const auto* lr = std::get_if<LeakyRelu>(&layer)) {
      entry["slope"] = lr->slope;
    } else if (const auto* r = std::get_if<Reshape>(&layer)) {
      entry["target"] = shape_json(r->target);
    }
    layers.push_back(std::move(entry));
  }
  manifest["layers"] = std::move(layers);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("checkpoint: cannot open " + (dir / "manifest.json").string());
  json manifest;
  try {
    manifest = json::parse(in);
    if (manifest.value("format", "") != kFormat) throw FormatError("checkpoint: unknown format tag");
    std::vector<Layer> layers;
    for (const auto& entry : manifest.at("layers")) {
      const auto type = entry.at("type").get<std::string>();
      if (type == "conv_cyclic")
        layers.emplace_back(ConvCyclic{load_param(dir, entry, "weight"), load_param(dir, entry, "bias")});
      else if (type == "dense")
        layers.emplace_back(Dense{load_param(dir, entry, "weight"), load_param(dir, entry, "bias")});
      else if (type == "relu")
        layers.emplace_back(Relu{});
      else if (type == "leaky_relu")
        layers.emplace_back(LeakyRelu{entry.at("slope").get<double>()});
      else if (type == "tanh")
        layers.emplace_back(Tanh{});
      else if (type == "mean_pool")
        layers.emplace_back(MeanPool{});
      else if (type == "reshape")
        layers.emplace_back(Reshape{shape_from(entry.at("target"))});
      else
        throw FormatError("checkpoint: unknown layer type '" + type + "'");
    }
    LoadedCheckpoint out{Model(shape_from(manifest.at("input")), std::move(layers)), {}};
    out.info.seed = manifest.value("seed", std::uint64_t{0});
    out.info.step = manifest.value("step", 0LL);
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed manifest: ") + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("checkpoint: inconsistent layer shapes: ") + e.what());
  }
}

}  // namespace san::nn
