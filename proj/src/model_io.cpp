#include <bit>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "maskexplain/error.hpp"
#include "maskexplain/model.hpp"

namespace maskexplain {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "NMWT";
constexpr std::size_t kHeaderBytes = 4 + 2 + 4;

[[noreturn]] void manifest_error(const std::string& what) {
  throw Error(ErrorCode::ManifestInvalid, "model manifest: " + what);
}

void expect_keys(const json& obj, std::initializer_list<std::string_view> keys,
                 const std::string& where) {
  if (!obj.is_object()) manifest_error(where + " is not an object");
  for (auto k : keys) {
    if (!obj.contains(std::string(k))) manifest_error(where + " lacks '" + std::string(k) + "'");
  }
  if (obj.size() != keys.size()) {
    for (const auto& [k, v] : obj.items()) {
      bool known = false;
      for (auto want : keys) known = known || want == k;
      if (!known) manifest_error(where + " has unexpected attribute '" + k + "'");
    }
  }
}

json layer_to_json(const LayerSpec& layer) {
  json j;
  j["kind"] = layer_kind(layer);
  if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
    j["kernel"] = c->kernel;
    j["stride"] = c->stride;
    j["padding"] = to_string(c->padding);
    j["out_channels"] = c->out_channels;
  } else if (const auto* p = std::get_if<MaxPool2dLayer>(&layer)) {
    j["window"] = p->window;
    j["stride"] = p->stride;
  } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
    j["out_features"] = d->out_features;
  }
  return j;
}

LayerSpec layer_from_json(const json& j, std::size_t index) {
  const std::string where = "layer " + std::to_string(index);
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    manifest_error(where + " has no kind");
  }
  const auto kind = j["kind"].get<std::string>();
  try {
    if (kind == "conv2d") {
      expect_keys(j, {"kind", "kernel", "stride", "padding", "out_channels"}, where);
      return Conv2dLayer{j["kernel"].get<std::size_t>(), j["stride"].get<std::size_t>(),
                         padding_from_string(j["padding"].get<std::string>()),
                         j["out_channels"].get<std::size_t>()};
    }
    if (kind == "maxpool2d") {
      expect_keys(j, {"kind", "window", "stride"}, where);
      return MaxPool2dLayer{j["window"].get<std::size_t>(), j["stride"].get<std::size_t>()};
    }
    if (kind == "relu") {
      expect_keys(j, {"kind"}, where);
      return ReluLayer{};
    }
    if (kind == "flatten") {
      expect_keys(j, {"kind"}, where);
      return FlattenLayer{};
    }
    if (kind == "dense") {
      expect_keys(j, {"kind", "out_features"}, where);
      return DenseLayer{j["out_features"].get<std::size_t>()};
    }
  } catch (const json::exception& e) {
    manifest_error(where + ": " + e.what());
  } catch (const Error& e) {
    manifest_error(where + ": " + e.what());
  }
  manifest_error(where + " has unknown kind '" + kind + "'");
}

json spec_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) layers.push_back(layer_to_json(l));
  return json{{"input_shape", spec.input_shape},
              {"num_classes", spec.num_classes},
              {"label_names", spec.label_names},
              {"layers", layers}};
}

ModelSpec spec_from_json(const json& j) {
  expect_keys(j, {"input_shape", "num_classes", "label_names", "layers"}, "model");
  ModelSpec spec;
  try {
    spec.input_shape = j["input_shape"].get<Shape>();
    spec.num_classes = j["num_classes"].get<std::size_t>();
    spec.label_names = j["label_names"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    manifest_error(std::string("model: ") + e.what());
  }
  if (!j["layers"].is_array()) manifest_error("model.layers is not an array");
  for (std::size_t i = 0; i < j["layers"].size(); ++i) {
    spec.layers.push_back(layer_from_json(j["layers"][i], i));
  }
  return spec;
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_model(const Model& model) {
  json tensors = json::array();
  std::string blob;
  for (const auto& [name, t] : model.weights()) {
    tensors.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"offset", blob.size()},
                       {"length", t.size() * 4}});
    for (double v : t.data()) put_u32(blob, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  const json manifest{{"model", spec_to_json(model.spec())},
                      {"tensors", tensors},
                      {"blob_bytes", blob.size()}};
  const std::string text = manifest.dump();

  std::string out(kMagic);
  put_u16(out, kModelFileVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += blob;
  return out;
}

Model decode_model(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, 4) != kMagic) {
    throw Error(ErrorCode::BadMagic, "not a model file: missing NMWT magic");
  }
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::Truncated, "model header truncated");
  const auto version = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[4]) |
                                                  (static_cast<unsigned char>(bytes[5]) << 8));
  if (version != kModelFileVersion) {
    throw Error(ErrorCode::VersionMismatch, "model file version " + std::to_string(version) +
                                                ", expected " +
                                                std::to_string(kModelFileVersion));
  }
  const std::size_t manifest_len = get_u32(bytes, 6);
  if (bytes.size() < kHeaderBytes + manifest_len) {
    throw Error(ErrorCode::Truncated, "model manifest truncated");
  }

  json manifest;
  try {
    manifest = json::parse(bytes.substr(kHeaderBytes, manifest_len));
  } catch (const json::exception& e) {
    manifest_error(e.what());
  }
  expect_keys(manifest, {"model", "tensors", "blob_bytes"}, "manifest");
  ModelSpec spec = spec_from_json(manifest["model"]);

  const std::string_view blob = bytes.substr(kHeaderBytes + manifest_len);
  const auto declared = manifest["blob_bytes"].get<std::size_t>();
  if (blob.size() != declared) {
    throw Error(ErrorCode::BlobLengthMismatch,
                "blob length disagreement: manifest declares " + std::to_string(declared) +
                    " bytes, file holds " + std::to_string(blob.size()));
  }

  WeightStore weights;
  if (!manifest["tensors"].is_array()) manifest_error("tensors is not an array");
  for (const auto& entry : manifest["tensors"]) {
    expect_keys(entry, {"name", "shape", "offset", "length"}, "tensor entry");
    const auto name = entry["name"].get<std::string>();
    const auto shape = entry["shape"].get<Shape>();
    const auto offset = entry["offset"].get<std::size_t>();
    const auto length = entry["length"].get<std::size_t>();
    if (length != shape_numel(shape) * 4 || offset + length > blob.size() || offset % 4 != 0) {
      throw Error(ErrorCode::BlobLengthMismatch,
                  "blob length disagreement for tensor " + name + ": shape " +
                      shape_to_string(shape) + " at offset " + std::to_string(offset) +
                      " with length " + std::to_string(length));
    }
    Tensor t(shape);
    for (std::size_t k = 0; k < t.size(); ++k) {
      t[k] = std::bit_cast<float>(get_u32(blob, offset + 4 * k));
    }
    if (!weights.emplace(name, std::move(t)).second) manifest_error("duplicate tensor " + name);
  }
  return Model(std::move(spec), std::move(weights));
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  const std::string bytes = encode_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_model(ss.str());
}

}  // namespace maskexplain
