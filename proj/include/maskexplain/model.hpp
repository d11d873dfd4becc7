#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "maskexplain/autodiff.hpp"
#include "maskexplain/tensor.hpp"

namespace maskexplain {

struct Conv2dLayer {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  Padding padding = Padding::SameZero;
  std::size_t out_channels = 1;
  friend bool operator==(const Conv2dLayer&, const Conv2dLayer&) = default;
};

struct MaxPool2dLayer {
  std::size_t window = 2;
  std::size_t stride = 2;
  friend bool operator==(const MaxPool2dLayer&, const MaxPool2dLayer&) = default;
};

struct ReluLayer {
  friend bool operator==(const ReluLayer&, const ReluLayer&) = default;
};

struct FlattenLayer {
  friend bool operator==(const FlattenLayer&, const FlattenLayer&) = default;
};

struct DenseLayer {
  std::size_t out_features = 1;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

using LayerSpec = std::variant<Conv2dLayer, MaxPool2dLayer, ReluLayer, FlattenLayer, DenseLayer>;

std::string_view layer_kind(const LayerSpec& layer);

struct ModelSpec {
  Shape input_shape;  // (H, W, C)
  std::vector<LayerSpec> layers;
  std::size_t num_classes = 0;
  std::vector<std::string> label_names;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Parameter tensors keyed "layer{i}.weight" / "layer{i}.bias".
using WeightStore = std::map<std::string, Tensor>;

/// Output shape of every layer. Throws ShapeMismatch naming the first layer
/// whose input is incompatible.
std::vector<Shape> validate_spec(const ModelSpec& spec);

/// Expected parameter shapes of a valid spec, in layer order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelSpec& spec);

using ParamNodes = std::map<std::string, NodeRef>;

/// Records the pre-softmax forward pass; parameters come from `params`
/// so the caller decides whether they are constants or leaves.
NodeRef forward_logits(const ModelSpec& spec, Tape& tape, NodeRef x, const ParamNodes& params);

/// Frozen classifier f(x; theta). Immutable once constructed.
class Model {
 public:
  Model(ModelSpec spec, WeightStore weights);

  const ModelSpec& spec() const noexcept { return spec_; }
  const WeightStore& weights() const noexcept { return weights_; }
  std::size_t num_classes() const noexcept { return spec_.num_classes; }
  std::size_t parameter_count() const;

  /// Records the forward pass with the parameters as constants.
  NodeRef logits(Tape& tape, NodeRef x) const;
  NodeRef probabilities(Tape& tape, NodeRef x) const;

  Tensor predict_logits(const Tensor& x) const;
  Tensor predict(const Tensor& x) const;

  /// FNV-1a over names, shapes and values of every parameter.
  std::uint64_t checksum() const;

 private:
  void check_input(const Shape& shape) const;

  ModelSpec spec_;
  WeightStore weights_;
};

/// Probabilities of `x`; with a tape the pass is recorded and gradients
/// reach whatever `x` depends on.
Tensor forward(const Model& model, const Tensor& x);
NodeRef forward(const Model& model, Tape& tape, NodeRef x);

/// Two conv/relu/pool blocks followed by one dense layer.
ModelSpec tiny_cnn_spec(std::size_t image_size, std::vector<std::string> label_names,
                        std::size_t conv1_channels = 8, std::size_t conv2_channels = 16);

/// He-uniform weights, zero biases, rounded to float32.
WeightStore init_weights(const ModelSpec& spec, std::uint64_t seed);
WeightStore zero_weights(const ModelSpec& spec);

// Weight file (.nmwt): "NMWT", u16 LE version 1, u32 LE manifest length,
// UTF-8 JSON manifest, then the tensors as one blob of LE float32.
inline constexpr std::uint16_t kModelFileVersion = 1;

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

std::string encode_model(const Model& model);
Model decode_model(std::string_view bytes);

}  // namespace maskexplain
