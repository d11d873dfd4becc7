#include "maskexplain/tensor.hpp"

#include <cmath>
#include <numeric>

#include "maskexplain/error.hpp"

namespace maskexplain {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::UnsupportedOperation: return "unsupported-operation";
    case ErrorCode::ContractViolation: return "contract-violation";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::VersionMismatch: return "version-mismatch";
    case ErrorCode::BlobLengthMismatch: return "blob-length-mismatch";
    case ErrorCode::TensorShapeMismatch: return "tensor-shape-mismatch";
    case ErrorCode::ManifestInvalid: return "manifest-invalid";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::BadDimensions: return "bad-dimensions";
    case ErrorCode::Io: return "io";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::TrainingDiverged: return "training-diverged";
    case ErrorCode::OptimizationDiverged: return "optimization-diverged";
  }
  return "unknown";
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "tensor shape " + shape_to_string(shape_) + " does not hold " +
                    std::to_string(data_.size()) + " elements");
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error(ErrorCode::ContractViolation,
                "item() on tensor of shape " + shape_to_string(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double mean(const Tensor& t) {
  if (t.size() == 0) return 0.0;
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return acc / static_cast<double>(t.size());
}

}  // namespace maskexplain
