#include "maskexplain/model.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "maskexplain/error.hpp"

namespace maskexplain {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string layer_name(std::size_t i) { return "layer" + std::to_string(i); }

[[noreturn]] void layer_error(std::size_t i, const LayerSpec& layer, const Shape& in,
                              const std::string& why) {
  throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " (" +
                                            std::string(layer_kind(layer)) + "): input " +
                                            shape_to_string(in) + " " + why);
}

void fnv1a(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

}  // namespace

std::string_view layer_kind(const LayerSpec& layer) {
  return std::visit(overloaded{
                        [](const Conv2dLayer&) { return std::string_view("conv2d"); },
                        [](const MaxPool2dLayer&) { return std::string_view("maxpool2d"); },
                        [](const ReluLayer&) { return std::string_view("relu"); },
                        [](const FlattenLayer&) { return std::string_view("flatten"); },
                        [](const DenseLayer&) { return std::string_view("dense"); },
                    },
                    layer);
}

std::vector<Shape> validate_spec(const ModelSpec& spec) {
  if (spec.input_shape.size() != 3 || shape_numel(spec.input_shape) == 0) {
    throw Error(ErrorCode::ShapeMismatch,
                "input shape must be (H,W,C), got " + shape_to_string(spec.input_shape));
  }
  if (spec.layers.empty()) throw Error(ErrorCode::ShapeMismatch, "model has no layers");
  if (spec.num_classes == 0 || spec.label_names.size() != spec.num_classes) {
    throw Error(ErrorCode::ShapeMismatch,
                "num_classes " + std::to_string(spec.num_classes) + " does not match " +
                    std::to_string(spec.label_names.size()) + " label names");
  }

  std::vector<Shape> outputs;
  Shape cur = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    cur = std::visit(
        overloaded{
            [&](const Conv2dLayer& c) -> Shape {
              if (cur.size() != 3) layer_error(i, layer, cur, "is not (H,W,C)");
              if (c.kernel == 0 || c.stride == 0 || c.out_channels == 0) {
                layer_error(i, layer, cur, "has zero-sized attributes");
              }
              if (c.padding == Padding::Valid) {
                if (cur[0] < c.kernel || cur[1] < c.kernel) {
                  layer_error(i, layer, cur, "is smaller than the kernel");
                }
                return {(cur[0] - c.kernel) / c.stride + 1, (cur[1] - c.kernel) / c.stride + 1,
                        c.out_channels};
              }
              return {(cur[0] - 1) / c.stride + 1, (cur[1] - 1) / c.stride + 1, c.out_channels};
            },
            [&](const MaxPool2dLayer& p) -> Shape {
              if (cur.size() != 3) layer_error(i, layer, cur, "is not (H,W,C)");
              if (p.window == 0 || p.stride == 0) {
                layer_error(i, layer, cur, "has zero-sized attributes");
              }
              if (cur[0] < p.window || cur[1] < p.window) {
                layer_error(i, layer, cur, "is smaller than the pooling window");
              }
              return {(cur[0] - p.window) / p.stride + 1, (cur[1] - p.window) / p.stride + 1,
                      cur[2]};
            },
            [&](const ReluLayer&) -> Shape { return cur; },
            [&](const FlattenLayer&) -> Shape { return {shape_numel(cur)}; },
            [&](const DenseLayer& d) -> Shape {
              if (cur.size() != 1) layer_error(i, layer, cur, "must be flattened first");
              if (d.out_features == 0) layer_error(i, layer, cur, "has zero output features");
              return {d.out_features};
            },
        },
        layer);
    outputs.push_back(cur);
  }
  if (cur != Shape{spec.num_classes}) {
    throw Error(ErrorCode::ShapeMismatch, "final layer output " + shape_to_string(cur) +
                                              " does not match " +
                                              std::to_string(spec.num_classes) + " classes");
  }
  return outputs;
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelSpec& spec) {
  const auto outputs = validate_spec(spec);
  std::vector<std::pair<std::string, Shape>> out;
  Shape cur = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (const auto* c = std::get_if<Conv2dLayer>(&spec.layers[i])) {
      out.emplace_back(layer_name(i) + ".weight", Shape{c->kernel, c->kernel, cur[2], c->out_channels});
      out.emplace_back(layer_name(i) + ".bias", Shape{c->out_channels});
    } else if (const auto* d = std::get_if<DenseLayer>(&spec.layers[i])) {
      out.emplace_back(layer_name(i) + ".weight", Shape{d->out_features, cur[0]});
      out.emplace_back(layer_name(i) + ".bias", Shape{d->out_features});
    }
    cur = outputs[i];
  }
  return out;
}

NodeRef forward_logits(const ModelSpec& spec, Tape& tape, NodeRef x, const ParamNodes& params) {
  auto param = [&](std::size_t i, const char* which) {
    auto it = params.find(layer_name(i) + which);
    if (it == params.end()) {
      throw Error(ErrorCode::ContractViolation,
                  "missing parameter " + layer_name(i) + which);
    }
    return it->second;
  };
  NodeRef cur = x;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    cur = std::visit(overloaded{
                         [&](const Conv2dLayer& c) {
                           return ops::conv2d(tape, cur, param(i, ".weight"), param(i, ".bias"),
                                              c.padding, c.stride);
                         },
                         [&](const MaxPool2dLayer& p) {
                           return ops::maxpool2d(tape, cur, p.window, p.stride);
                         },
                         [&](const ReluLayer&) { return ops::relu(tape, cur); },
                         // dense consumes any shape as a flat vector
                         [&](const FlattenLayer&) { return cur; },
                         [&](const DenseLayer&) {
                           return ops::dense(tape, cur, param(i, ".weight"), param(i, ".bias"));
                         },
                     },
                     spec.layers[i]);
  }
  return cur;
}

Model::Model(ModelSpec spec, WeightStore weights)
    : spec_(std::move(spec)), weights_(std::move(weights)) {
  const auto expected = parameter_shapes(spec_);
  for (auto& [name, t] : weights_) {
    for (double& v : t.data()) v = static_cast<float>(v);
  }
  for (const auto& [name, shape] : expected) {
    auto it = weights_.find(name);
    if (it == weights_.end()) {
      throw Error(ErrorCode::TensorShapeMismatch, "missing tensor " + name);
    }
    if (it->second.shape() != shape) {
      throw Error(ErrorCode::TensorShapeMismatch,
                  "tensor " + name + " has shape " + shape_to_string(it->second.shape()) +
                      ", architecture expects " + shape_to_string(shape));
    }
  }
  if (weights_.size() != expected.size()) {
    for (const auto& [name, t] : weights_) {
      bool known = false;
      for (const auto& e : expected) known = known || e.first == name;
      if (!known) {
        throw Error(ErrorCode::TensorShapeMismatch, "unexpected tensor " + name);
      }
    }
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : weights_) n += t.size();
  return n;
}

void Model::check_input(const Shape& shape) const {
  if (shape != spec_.input_shape) {
    throw Error(ErrorCode::ShapeMismatch, "layer 0: input " + shape_to_string(shape) +
                                              " does not match model input " +
                                              shape_to_string(spec_.input_shape));
  }
}

NodeRef Model::logits(Tape& tape, NodeRef x) const {
  check_input(tape.value(x).shape());
  ParamNodes params;
  for (const auto& [name, t] : weights_) params.emplace(name, tape.constant(t));
  return forward_logits(spec_, tape, x, params);
}

NodeRef Model::probabilities(Tape& tape, NodeRef x) const {
  return ops::softmax(tape, logits(tape, x));
}

Tensor Model::predict_logits(const Tensor& x) const {
  Tape tape;
  return tape.value(logits(tape, tape.constant(x)));
}

Tensor Model::predict(const Tensor& x) const {
  Tape tape;
  return tape.value(probabilities(tape, tape.constant(x)));
}

std::uint64_t Model::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, t] : weights_) {
    fnv1a(h, name.data(), name.size());
    for (std::size_t d : t.shape()) {
      const std::uint64_t d64 = d;
      fnv1a(h, &d64, sizeof d64);
    }
    fnv1a(h, t.data().data(), t.size() * sizeof(double));
  }
  return h;
}

Tensor forward(const Model& model, const Tensor& x) { return model.predict(x); }

NodeRef forward(const Model& model, Tape& tape, NodeRef x) {
  return model.probabilities(tape, x);
}

ModelSpec tiny_cnn_spec(std::size_t image_size, std::vector<std::string> label_names,
                        std::size_t conv1_channels, std::size_t conv2_channels) {
  ModelSpec spec;
  spec.input_shape = {image_size, image_size, 3};
  spec.num_classes = label_names.size();
  spec.label_names = std::move(label_names);
  spec.layers = {
      Conv2dLayer{3, 1, Padding::SameZero, conv1_channels},
      ReluLayer{},
      MaxPool2dLayer{2, 2},
      Conv2dLayer{3, 1, Padding::SameZero, conv2_channels},
      ReluLayer{},
      MaxPool2dLayer{2, 2},
      FlattenLayer{},
      DenseLayer{spec.num_classes},
  };
  validate_spec(spec);
  return spec;
}

WeightStore init_weights(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WeightStore store;
  for (const auto& [name, shape] : parameter_shapes(spec)) {
    Tensor t(shape);
    if (name.ends_with(".weight")) {
      // fan_in: every dim but the last for conv kernels, the input dim for dense.
      const std::size_t fan_in = shape.size() == 4 ? shape[0] * shape[1] * shape[2] : shape[1];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : t.data()) v = static_cast<float>(dist(rng));
    }
    store.emplace(name, std::move(t));
  }
  return store;
}

WeightStore zero_weights(const ModelSpec& spec) {
  WeightStore store;
  for (const auto& [name, shape] : parameter_shapes(spec)) store.emplace(name, Tensor(shape));
  return store;
}

}  // namespace maskexplain
