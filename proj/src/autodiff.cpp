#include "maskexplain/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "maskexplain/error.hpp"

namespace maskexplain {

namespace {

constexpr std::array<std::string_view, 14> kOpNames = {
    "conv2d", "maxpool2d",   "dense", "relu", "sigmoid", "softmax",           "elementwise_mul",
    "add",    "scalar_mul", "abs",   "sum",  "log",     "broadcast_channel", "laplacian_conv"};

// Discrete Laplacian, row-major 3x3.
constexpr std::array<double, 9> kLaplacian = {0, 1, 0, 1, -4, 1, 0, 1, 0};

[[noreturn]] void shape_error(OpKind kind, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::ShapeMismatch, std::string(to_string(kind)) +
                                            ": incompatible shapes " + shape_to_string(a) +
                                            " and " + shape_to_string(b));
}

void expect_arity(OpKind kind, std::size_t got, std::size_t lo, std::size_t hi) {
  if (got < lo || got > hi) {
    throw Error(ErrorCode::ContractViolation, std::string(to_string(kind)) + ": expected " +
                                                  std::to_string(lo) + ".." + std::to_string(hi) +
                                                  " inputs, got " + std::to_string(got));
  }
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return 0;
  if (static_cast<std::size_t>(i) >= n) return n - 1;
  return static_cast<std::size_t>(i);
}

struct ConvGeometry {
  std::size_t in_h, in_w, in_c, k_h, k_w, out_c, out_h, out_w, pad_top, pad_left, stride;
  Padding padding;
};

ConvGeometry conv_geometry(const Shape& x, const Shape& k, const OpAttributes& attrs) {
  if (x.size() != 3 || k.size() != 4 || k[2] != x[2]) shape_error(OpKind::Conv2d, x, k);
  if (attrs.stride == 0) {
    throw Error(ErrorCode::ContractViolation, "conv2d: stride must be positive");
  }
  ConvGeometry g{};
  g.in_h = x[0];
  g.in_w = x[1];
  g.in_c = x[2];
  g.k_h = k[0];
  g.k_w = k[1];
  g.out_c = k[3];
  g.stride = attrs.stride;
  g.padding = attrs.padding;
  if (attrs.padding == Padding::Valid) {
    if (g.in_h < g.k_h || g.in_w < g.k_w) shape_error(OpKind::Conv2d, x, k);
    g.out_h = (g.in_h - g.k_h) / g.stride + 1;
    g.out_w = (g.in_w - g.k_w) / g.stride + 1;
  } else {
    g.pad_top = (g.k_h - 1) / 2;
    g.pad_left = (g.k_w - 1) / 2;
    g.out_h = (g.in_h - 1) / g.stride + 1;
    g.out_w = (g.in_w - 1) / g.stride + 1;
  }
  return g;
}

// Resolves the input pixel read by output (oy, ox) at kernel tap (ky, kx).
// Returns false when the tap lands in zero padding.
bool conv_source(const ConvGeometry& g, std::size_t oy, std::size_t ox, std::size_t ky,
                 std::size_t kx, std::size_t& iy, std::size_t& ix) {
  const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                 static_cast<std::ptrdiff_t>(g.pad_top);
  const auto x = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                 static_cast<std::ptrdiff_t>(g.pad_left);
  const bool inside = y >= 0 && x >= 0 && y < static_cast<std::ptrdiff_t>(g.in_h) &&
                      x < static_cast<std::ptrdiff_t>(g.in_w);
  if (!inside && g.padding != Padding::SameReplicate) return false;
  iy = clamp_index(y, g.in_h);
  ix = clamp_index(x, g.in_w);
  return true;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& k, const Tensor* bias,
                      const OpAttributes& attrs) {
  const auto g = conv_geometry(x.shape(), k.shape(), attrs);
  if (bias && (bias->rank() != 1 || bias->dim(0) != g.out_c)) {
    shape_error(OpKind::Conv2d, k.shape(), bias->shape());
  }
  Tensor out(Shape{g.out_h, g.out_w, g.out_c});
  auto od = out.data();
  const auto xd = x.data();
  const auto kd = k.data();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      double* o = &od[(oy * g.out_w + ox) * g.out_c];
      if (bias) {
        for (std::size_t co = 0; co < g.out_c; ++co) o[co] = (*bias)[co];
      }
      for (std::size_t ky = 0; ky < g.k_h; ++ky) {
        for (std::size_t kx = 0; kx < g.k_w; ++kx) {
          std::size_t iy = 0, ix = 0;
          if (!conv_source(g, oy, ox, ky, kx, iy, ix)) continue;
          const double* xi = &xd[(iy * g.in_w + ix) * g.in_c];
          const double* kk = &kd[(ky * g.k_w + kx) * g.in_c * g.out_c];
          for (std::size_t ci = 0; ci < g.in_c; ++ci) {
            const double v = xi[ci];
            const double* krow = kk + ci * g.out_c;
            for (std::size_t co = 0; co < g.out_c; ++co) o[co] += v * krow[co];
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& x, const Tensor& k, const OpAttributes& attrs,
                     const Tensor& grad, Tensor* gx, Tensor* gk, Tensor* gb) {
  const auto g = conv_geometry(x.shape(), k.shape(), attrs);
  const auto xd = x.data();
  const auto kd = k.data();
  const auto gd = grad.data();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const double* go = &gd[(oy * g.out_w + ox) * g.out_c];
      if (gb) {
        for (std::size_t co = 0; co < g.out_c; ++co) (*gb)[co] += go[co];
      }
      for (std::size_t ky = 0; ky < g.k_h; ++ky) {
        for (std::size_t kx = 0; kx < g.k_w; ++kx) {
          std::size_t iy = 0, ix = 0;
          if (!conv_source(g, oy, ox, ky, kx, iy, ix)) continue;
          const std::size_t xbase = (iy * g.in_w + ix) * g.in_c;
          const std::size_t kbase = (ky * g.k_w + kx) * g.in_c * g.out_c;
          for (std::size_t ci = 0; ci < g.in_c; ++ci) {
            const std::size_t krow = kbase + ci * g.out_c;
            if (gx) {
              double acc = 0.0;
              for (std::size_t co = 0; co < g.out_c; ++co) acc += go[co] * kd[krow + co];
              (*gx)[xbase + ci] += acc;
            }
            if (gk) {
              const double v = xd[xbase + ci];
              for (std::size_t co = 0; co < g.out_c; ++co) (*gk)[krow + co] += v * go[co];
            }
          }
        }
      }
    }
  }
}

Tensor maxpool_forward(const Tensor& x, const OpAttributes& attrs,
                       std::vector<std::size_t>& winners) {
  const auto& s = x.shape();
  const std::size_t win = attrs.window;
  const std::size_t stride = attrs.stride;
  if (s.size() != 3 || win == 0 || stride == 0 || s[0] < win || s[1] < win) {
    shape_error(OpKind::MaxPool2d, s, Shape{win, win});
  }
  const std::size_t oh = (s[0] - win) / stride + 1;
  const std::size_t ow = (s[1] - win) / stride + 1;
  const std::size_t c = s[2];
  Tensor out(Shape{oh, ow, c});
  winners.assign(out.size(), 0);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((oy * stride) * s[1] + ox * stride) * c + ch;
        // Row-major scan with strict comparison: ties go to the first element.
        for (std::size_t wy = 0; wy < win; ++wy) {
          for (std::size_t wx = 0; wx < win; ++wx) {
            const std::size_t idx = ((oy * stride + wy) * s[1] + ox * stride + wx) * c + ch;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (oy * ow + ox) * c + ch;
        out[o] = x[best];
        winners[o] = best;
      }
    }
  }
  return out;
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor* bias) {
  if (w.rank() != 2 || w.dim(1) != x.size()) shape_error(OpKind::Dense, x.shape(), w.shape());
  const std::size_t out_n = w.dim(0);
  const std::size_t in_n = w.dim(1);
  if (bias && (bias->rank() != 1 || bias->dim(0) != out_n)) {
    shape_error(OpKind::Dense, w.shape(), bias->shape());
  }
  Tensor out(Shape{out_n});
  for (std::size_t o = 0; o < out_n; ++o) {
    double acc = bias ? (*bias)[o] : 0.0;
    const double* row = &w.data()[o * in_n];
    for (std::size_t i = 0; i < in_n; ++i) acc += row[i] * x[i];
    out[o] = acc;
  }
  return out;
}

Tensor laplacian_forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) < 3 || x.dim(1) < 3) {
    shape_error(OpKind::LaplacianConv, x.shape(), Shape{3, 3});
  }
  const std::size_t h = x.dim(0), w = x.dim(1);
  Tensor out(Shape{h, w});
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t di = -1; di <= 1; ++di) {
        for (std::ptrdiff_t dj = -1; dj <= 1; ++dj) {
          const double c = kLaplacian[(di + 1) * 3 + (dj + 1)];
          if (c == 0.0) continue;
          acc += c * x.at(clamp_index(static_cast<std::ptrdiff_t>(i) + di, h),
                          clamp_index(static_cast<std::ptrdiff_t>(j) + dj, w));
        }
      }
      out.at(i, j) = acc;
    }
  }
  return out;
}

void laplacian_backward(const Tensor& grad, Tensor& gx) {
  const std::size_t h = grad.dim(0), w = grad.dim(1);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double g = grad.at(i, j);
      for (std::ptrdiff_t di = -1; di <= 1; ++di) {
        for (std::ptrdiff_t dj = -1; dj <= 1; ++dj) {
          const double c = kLaplacian[(di + 1) * 3 + (dj + 1)];
          if (c == 0.0) continue;
          gx.at(clamp_index(static_cast<std::ptrdiff_t>(i) + di, h),
                clamp_index(static_cast<std::ptrdiff_t>(j) + dj, w)) += c * g;
        }
      }
    }
  }
}

template <typename F>
Tensor map_unary(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(OpKind kind) { return kOpNames[static_cast<std::size_t>(kind)]; }

OpKind op_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<OpKind>(i);
  }
  throw Error(ErrorCode::UnsupportedOperation, "unsupported operation '" + std::string(name) + "'");
}

std::string_view to_string(Padding padding) {
  switch (padding) {
    case Padding::Valid: return "valid";
    case Padding::SameZero: return "same-zero";
    case Padding::SameReplicate: return "same-replicate";
  }
  return "valid";
}

Padding padding_from_string(std::string_view name) {
  if (name == "valid") return Padding::Valid;
  if (name == "same-zero") return Padding::SameZero;
  if (name == "same-replicate") return Padding::SameReplicate;
  throw Error(ErrorCode::InvalidArgument, "unknown padding '" + std::string(name) + "'");
}

NodeRef Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return NodeRef{nodes_.size() - 1};
}

NodeRef Tape::leaf(Tensor value) {
  Node n;
  n.leaf = true;
  n.requires_grad = true;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return NodeRef{nodes_.size() - 1};
}

const Tape::Node& Tape::node(NodeRef ref) const {
  if (ref.index >= nodes_.size()) {
    throw Error(ErrorCode::ContractViolation,
                "node reference " + std::to_string(ref.index) + " is not on this tape");
  }
  return nodes_[ref.index];
}

const Tensor& Tape::value(NodeRef ref) const { return node(ref).value; }

bool Tape::is_leaf(NodeRef ref) const { return node(ref).leaf; }

std::vector<NodeRef> Tape::leaves() const {
  std::vector<NodeRef> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].leaf) out.push_back(NodeRef{i});
  }
  return out;
}

NodeRef Tape::apply(OpKind kind, std::span<const NodeRef> inputs, const OpAttributes& attrs) {
  if (static_cast<std::size_t>(kind) >= kOpNames.size()) {
    throw Error(ErrorCode::UnsupportedOperation,
                "unsupported operation kind " + std::to_string(static_cast<int>(kind)));
  }
  std::vector<const Tensor*> in;
  Node n;
  n.kind = kind;
  n.attrs = attrs;
  for (NodeRef r : inputs) {
    const Node& src = node(r);
    in.push_back(&src.value);
    n.inputs.push_back(r.index);
    n.requires_grad = n.requires_grad || src.requires_grad;
  }

  switch (kind) {
    case OpKind::Conv2d:
      expect_arity(kind, in.size(), 2, 3);
      n.value = conv2d_forward(*in[0], *in[1], in.size() == 3 ? in[2] : nullptr, attrs);
      break;
    case OpKind::MaxPool2d:
      expect_arity(kind, in.size(), 1, 1);
      n.value = maxpool_forward(*in[0], attrs, n.argmax);
      break;
    case OpKind::Dense:
      expect_arity(kind, in.size(), 2, 3);
      n.value = dense_forward(*in[0], *in[1], in.size() == 3 ? in[2] : nullptr);
      break;
    case OpKind::Relu:
      expect_arity(kind, in.size(), 1, 1);
      n.value = map_unary(*in[0], [](double v) { return v > 0.0 ? v : 0.0; });
      break;
    case OpKind::Sigmoid:
      expect_arity(kind, in.size(), 1, 1);
      n.value = map_unary(*in[0], sigmoid_scalar);
      break;
    case OpKind::Softmax: {
      expect_arity(kind, in.size(), 1, 1);
      const Tensor& x = *in[0];
      if (x.size() == 0) shape_error(kind, x.shape(), Shape{1});
      const double mx = *std::max_element(x.data().begin(), x.data().end());
      Tensor out(x.shape());
      double total = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - mx);
        total += out[i];
      }
      for (double& v : out.data()) v /= total;
      n.value = std::move(out);
      break;
    }
    case OpKind::ElementwiseMul:
    case OpKind::Add: {
      expect_arity(kind, in.size(), 2, 2);
      if (in[0]->shape() != in[1]->shape()) shape_error(kind, in[0]->shape(), in[1]->shape());
      Tensor out(in[0]->shape());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = kind == OpKind::Add ? (*in[0])[i] + (*in[1])[i] : (*in[0])[i] * (*in[1])[i];
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::ScalarMul: {
      expect_arity(kind, in.size(), 1, 1);
      const double c = attrs.scalar;
      n.value = map_unary(*in[0], [c](double v) { return c * v; });
      break;
    }
    case OpKind::Abs:
      expect_arity(kind, in.size(), 1, 1);
      n.value = map_unary(*in[0], [](double v) { return std::fabs(v); });
      break;
    case OpKind::Sum: {
      expect_arity(kind, in.size(), 1, 1);
      double acc = 0.0;
      for (double v : in[0]->data()) acc += v;
      n.value = Tensor::scalar(acc);
      break;
    }
    case OpKind::Log: {
      expect_arity(kind, in.size(), 1, 1);
      const double eps = attrs.log_epsilon;
      n.value = map_unary(*in[0], [eps](double v) { return std::log(v + eps); });
      break;
    }
    case OpKind::BroadcastChannel: {
      expect_arity(kind, in.size(), 1, 1);
      const Tensor& x = *in[0];
      if (x.rank() != 2 || attrs.channels == 0) {
        shape_error(kind, x.shape(), Shape{0, 0, attrs.channels});
      }
      Tensor out(Shape{x.dim(0), x.dim(1), attrs.channels});
      for (std::size_t p = 0; p < x.size(); ++p) {
        for (std::size_t c = 0; c < attrs.channels; ++c) out[p * attrs.channels + c] = x[p];
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::LaplacianConv:
      expect_arity(kind, in.size(), 1, 1);
      n.value = laplacian_forward(*in[0]);
      break;
  }
  nodes_.push_back(std::move(n));
  return NodeRef{nodes_.size() - 1};
}

const Tensor& Gradients::operator[](NodeRef leaf) const {
  auto it = by_leaf_.find(leaf.index);
  if (it == by_leaf_.end()) {
    throw Error(ErrorCode::ContractViolation,
                "node " + std::to_string(leaf.index) + " is not a leaf of the tape");
  }
  return it->second;
}

Gradients backward(const Tape& tape, NodeRef loss) {
  const auto& nodes = tape.nodes_;
  const auto& loss_node = tape.node(loss);
  if (loss_node.value.size() != 1) {
    throw Error(ErrorCode::ContractViolation,
                "backward: loss must be scalar, got shape " + shape_to_string(loss_node.value.shape()));
  }

  std::vector<std::optional<Tensor>> grads(loss.index + 1);
  grads[loss.index] = Tensor(loss_node.value.shape(), 1.0);

  auto slot = [&](std::size_t idx) -> Tensor* {
    if (!nodes[idx].requires_grad) return nullptr;
    if (!grads[idx]) grads[idx] = Tensor(nodes[idx].value.shape());
    return &*grads[idx];
  };

  for (std::size_t i = loss.index + 1; i-- > 0;) {
    const auto& n = nodes[i];
    if (!grads[i] || !n.kind || !n.requires_grad) continue;
    const Tensor& g = *grads[i];
    const auto& in = n.inputs;
    auto val = [&](std::size_t k) -> const Tensor& { return nodes[in[k]].value; };

    switch (*n.kind) {
      case OpKind::Conv2d: {
        Tensor* gx = slot(in[0]);
        Tensor* gk = slot(in[1]);
        Tensor* gb = in.size() == 3 ? slot(in[2]) : nullptr;
        conv2d_backward(val(0), val(1), n.attrs, g, gx, gk, gb);
        break;
      }
      case OpKind::MaxPool2d:
        if (Tensor* gx = slot(in[0])) {
          for (std::size_t o = 0; o < g.size(); ++o) (*gx)[n.argmax[o]] += g[o];
        }
        break;
      case OpKind::Dense: {
        const Tensor& x = val(0);
        const Tensor& w = val(1);
        const std::size_t out_n = w.dim(0), in_n = w.dim(1);
        if (Tensor* gx = slot(in[0])) {
          for (std::size_t o = 0; o < out_n; ++o) {
            const double* row = &w.data()[o * in_n];
            for (std::size_t k = 0; k < in_n; ++k) (*gx)[k] += g[o] * row[k];
          }
        }
        if (Tensor* gw = slot(in[1])) {
          for (std::size_t o = 0; o < out_n; ++o) {
            double* row = &gw->data()[o * in_n];
            for (std::size_t k = 0; k < in_n; ++k) row[k] += g[o] * x[k];
          }
        }
        if (in.size() == 3) {
          if (Tensor* gb = slot(in[2])) {
            for (std::size_t o = 0; o < out_n; ++o) (*gb)[o] += g[o];
          }
        }
        break;
      }
      case OpKind::Relu:
        if (Tensor* gx = slot(in[0])) {
          const Tensor& x = val(0);
          for (std::size_t k = 0; k < g.size(); ++k) {
            if (x[k] > 0.0) (*gx)[k] += g[k];
          }
        }
        break;
      case OpKind::Sigmoid:
        if (Tensor* gx = slot(in[0])) {
          for (std::size_t k = 0; k < g.size(); ++k) {
            const double s = n.value[k];
            (*gx)[k] += g[k] * s * (1.0 - s);
          }
        }
        break;
      case OpKind::Softmax:
        if (Tensor* gx = slot(in[0])) {
          double dot = 0.0;
          for (std::size_t k = 0; k < g.size(); ++k) dot += g[k] * n.value[k];
          for (std::size_t k = 0; k < g.size(); ++k) (*gx)[k] += n.value[k] * (g[k] - dot);
        }
        break;
      case OpKind::ElementwiseMul: {
        // Both slots are resolved first so that mul(a, a) accumulates twice.
        Tensor* ga = slot(in[0]);
        Tensor* gb = slot(in[1]);
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (ga) (*ga)[k] += g[k] * b[k];
          if (gb) (*gb)[k] += g[k] * a[k];
        }
        break;
      }
      case OpKind::Add:
        for (std::size_t side = 0; side < 2; ++side) {
          if (Tensor* gs = slot(in[side])) {
            for (std::size_t k = 0; k < g.size(); ++k) (*gs)[k] += g[k];
          }
        }
        break;
      case OpKind::ScalarMul:
        if (Tensor* gx = slot(in[0])) {
          for (std::size_t k = 0; k < g.size(); ++k) (*gx)[k] += n.attrs.scalar * g[k];
        }
        break;
      case OpKind::Abs:
        if (Tensor* gx = slot(in[0])) {
          const Tensor& x = val(0);
          for (std::size_t k = 0; k < g.size(); ++k) {
            if (x[k] > 0.0) (*gx)[k] += g[k];
            else if (x[k] < 0.0) (*gx)[k] -= g[k];
          }
        }
        break;
      case OpKind::Sum:
        if (Tensor* gx = slot(in[0])) {
          const double s = g[0];
          for (double& v : gx->data()) v += s;
        }
        break;
      case OpKind::Log:
        if (Tensor* gx = slot(in[0])) {
          const Tensor& x = val(0);
          for (std::size_t k = 0; k < g.size(); ++k) {
            (*gx)[k] += g[k] / (x[k] + n.attrs.log_epsilon);
          }
        }
        break;
      case OpKind::BroadcastChannel:
        if (Tensor* gx = slot(in[0])) {
          const std::size_t c = n.attrs.channels;
          for (std::size_t p = 0; p < gx->size(); ++p) {
            double acc = 0.0;
            for (std::size_t k = 0; k < c; ++k) acc += g[p * c + k];
            (*gx)[p] += acc;
          }
        }
        break;
      case OpKind::LaplacianConv:
        if (Tensor* gx = slot(in[0])) laplacian_backward(g, *gx);
        break;
    }
  }

  Gradients out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].leaf) continue;
    if (i < grads.size() && grads[i]) {
      out.by_leaf_.emplace(i, std::move(*grads[i]));
    } else {
      out.by_leaf_.emplace(i, Tensor(nodes[i].value.shape()));
    }
  }
  return out;
}

namespace ops {

NodeRef conv2d(Tape& tape, NodeRef x, NodeRef kernel, std::optional<NodeRef> bias,
               Padding padding, std::size_t stride) {
  OpAttributes attrs;
  attrs.padding = padding;
  attrs.stride = stride;
  if (bias) return tape.apply(OpKind::Conv2d, {x, kernel, *bias}, attrs);
  return tape.apply(OpKind::Conv2d, {x, kernel}, attrs);
}

NodeRef maxpool2d(Tape& tape, NodeRef x, std::size_t window, std::size_t stride) {
  OpAttributes attrs;
  attrs.window = window;
  attrs.stride = stride;
  return tape.apply(OpKind::MaxPool2d, {x}, attrs);
}

NodeRef dense(Tape& tape, NodeRef x, NodeRef weight, std::optional<NodeRef> bias) {
  if (bias) return tape.apply(OpKind::Dense, {x, weight, *bias});
  return tape.apply(OpKind::Dense, {x, weight});
}

NodeRef relu(Tape& tape, NodeRef x) { return tape.apply(OpKind::Relu, {x}); }
NodeRef sigmoid(Tape& tape, NodeRef x) { return tape.apply(OpKind::Sigmoid, {x}); }
NodeRef softmax(Tape& tape, NodeRef x) { return tape.apply(OpKind::Softmax, {x}); }
NodeRef mul(Tape& tape, NodeRef a, NodeRef b) { return tape.apply(OpKind::ElementwiseMul, {a, b}); }
NodeRef add(Tape& tape, NodeRef a, NodeRef b) { return tape.apply(OpKind::Add, {a, b}); }

NodeRef scale(Tape& tape, NodeRef x, double factor) {
  OpAttributes attrs;
  attrs.scalar = factor;
  return tape.apply(OpKind::ScalarMul, {x}, attrs);
}

NodeRef abs(Tape& tape, NodeRef x) { return tape.apply(OpKind::Abs, {x}); }
NodeRef sum(Tape& tape, NodeRef x) { return tape.apply(OpKind::Sum, {x}); }

NodeRef log(Tape& tape, NodeRef x, double epsilon) {
  OpAttributes attrs;
  attrs.log_epsilon = epsilon;
  return tape.apply(OpKind::Log, {x}, attrs);
}

NodeRef broadcast_channel(Tape& tape, NodeRef x, std::size_t channels) {
  OpAttributes attrs;
  attrs.channels = channels;
  return tape.apply(OpKind::BroadcastChannel, {x}, attrs);
}

NodeRef laplacian(Tape& tape, NodeRef x) { return tape.apply(OpKind::LaplacianConv, {x}); }

}  // namespace ops

}  // namespace maskexplain
