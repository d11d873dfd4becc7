#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "maskexplain/tensor.hpp"

namespace maskexplain {

enum class OpKind {
  Conv2d,
  MaxPool2d,
  Dense,
  Relu,
  Sigmoid,
  Softmax,
  ElementwiseMul,
  Add,
  ScalarMul,
  Abs,
  Sum,
  Log,
  BroadcastChannel,
  LaplacianConv,
};

std::string_view to_string(OpKind kind);
/// Throws Error(UnsupportedOperation) for names outside the supported set.
OpKind op_kind_from_string(std::string_view name);

enum class Padding { Valid, SameZero, SameReplicate };

std::string_view to_string(Padding padding);
Padding padding_from_string(std::string_view name);

struct OpAttributes {
  Padding padding = Padding::Valid;
  std::size_t stride = 1;
  std::size_t window = 2;       // maxpool2d
  double scalar = 1.0;          // scalar_mul
  double log_epsilon = 1e-12;   // log computes log(x + log_epsilon)
  std::size_t channels = 3;     // broadcast_channel
};

struct NodeRef {
  std::size_t index = 0;
  friend bool operator==(NodeRef, NodeRef) = default;
};

class Gradients;

// Linear record of a forward computation. Nodes only ever reference earlier
// nodes, so reverse insertion order is a valid topological order.
class Tape {
 public:
  /// Input that never receives a gradient (images, frozen parameters).
  NodeRef constant(Tensor value);
  /// Trainable input; backward reports a gradient for every leaf.
  NodeRef leaf(Tensor value);

  NodeRef apply(OpKind kind, std::span<const NodeRef> inputs,
                const OpAttributes& attrs = {});
  NodeRef apply(OpKind kind, std::initializer_list<NodeRef> inputs,
                const OpAttributes& attrs = {}) {
    return apply(kind, std::span<const NodeRef>(inputs.begin(), inputs.size()), attrs);
  }

  const Tensor& value(NodeRef node) const;
  bool is_leaf(NodeRef node) const;
  std::vector<NodeRef> leaves() const;
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    std::optional<OpKind> kind;  // empty for inputs
    bool leaf = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    OpAttributes attrs;
    Tensor value;
    std::vector<std::size_t> argmax;  // maxpool2d winners, flat input indices
  };

  const Node& node(NodeRef ref) const;

  std::vector<Node> nodes_;

  friend Gradients backward(const Tape& tape, NodeRef loss);
};

/// dLoss/dLeaf for every leaf of a tape.
class Gradients {
 public:
  const Tensor& operator[](NodeRef leaf) const;
  bool contains(NodeRef leaf) const { return by_leaf_.contains(leaf.index); }
  std::size_t size() const noexcept { return by_leaf_.size(); }

 private:
  std::map<std::size_t, Tensor> by_leaf_;
  friend Gradients backward(const Tape& tape, NodeRef loss);
};

/// Reverse-mode pass from a scalar node. Throws ContractViolation when the
/// loss holds more than one element.
Gradients backward(const Tape& tape, NodeRef loss);

// Thin wrappers over Tape::apply.
namespace ops {

NodeRef conv2d(Tape& tape, NodeRef x, NodeRef kernel, std::optional<NodeRef> bias,
               Padding padding = Padding::SameZero, std::size_t stride = 1);
NodeRef maxpool2d(Tape& tape, NodeRef x, std::size_t window, std::size_t stride);
NodeRef dense(Tape& tape, NodeRef x, NodeRef weight, std::optional<NodeRef> bias);
NodeRef relu(Tape& tape, NodeRef x);
NodeRef sigmoid(Tape& tape, NodeRef x);
NodeRef softmax(Tape& tape, NodeRef x);
NodeRef mul(Tape& tape, NodeRef a, NodeRef b);
NodeRef add(Tape& tape, NodeRef a, NodeRef b);
NodeRef scale(Tape& tape, NodeRef x, double factor);
NodeRef abs(Tape& tape, NodeRef x);
NodeRef sum(Tape& tape, NodeRef x);
NodeRef log(Tape& tape, NodeRef x, double epsilon = 1e-12);
NodeRef broadcast_channel(Tape& tape, NodeRef x, std::size_t channels = 3);
NodeRef laplacian(Tape& tape, NodeRef x);

}  // namespace ops

}  // namespace maskexplain
