#include "maskexplain/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "maskexplain/error.hpp"

namespace maskexplain {

namespace {

void finish(HeatmapResult& r) {
  const auto [lo, hi] = std::minmax_element(r.values.data().begin(), r.values.data().end());
  r.min = *lo;
  r.max = *hi;
}

void check_image(const Model& model, const Tensor& image) {
  if (image.shape() != model.spec().input_shape) {
    throw Error(ErrorCode::ShapeMismatch, "image " + shape_to_string(image.shape()) +
                                              " does not match model input " +
                                              shape_to_string(model.spec().input_shape));
  }
}

Tensor input_gradient(const Model& model, const Tensor& image, std::size_t target) {
  Tape tape;
  const NodeRef x = tape.leaf(image);
  const NodeRef logits = model.logits(tape, x);
  Tensor onehot(tape.value(logits).shape());
  onehot[target] = 1.0;
  const NodeRef score = ops::sum(tape, ops::mul(tape, tape.constant(onehot), logits));
  return backward(tape, score)[x];
}

Tensor channel_max_abs(const Tensor& grad) {
  const std::size_t h = grad.dim(0), w = grad.dim(1), c = grad.dim(2);
  Tensor out(Shape{h, w});
  for (std::size_t p = 0; p < h * w; ++p) {
    double best = 0.0;
    for (std::size_t k = 0; k < c; ++k) best = std::max(best, std::fabs(grad[p * c + k]));
    out[p] = best;
  }
  return out;
}

}  // namespace

Tensor HeatmapResult::normalized() const {
  Tensor out(values.shape());
  const double range = max - min;
  if (!(range > 0.0)) return out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    out[k] = std::clamp((values[k] - min) / range, 0.0, 1.0);
  }
  return out;
}

HeatmapResult saliency(const Model& model, const Tensor& image, std::size_t target_class) {
  check_image(model, image);
  if (target_class >= model.num_classes()) {
    throw Error(ErrorCode::InvalidArgument, "target class out of range");
  }
  HeatmapResult r;
  r.method = "saliency";
  r.values = channel_max_abs(input_gradient(model, image, target_class));
  finish(r);
  return r;
}

HeatmapResult saliency(const Model& model, const Tensor& image) {
  check_image(model, image);
  const Tensor logits = model.predict_logits(image);
  return saliency(model, image, argmax(logits.data()));
}

HeatmapResult smoothgrad(const Model& model, const Tensor& image,
                         const SmoothGradOptions& options) {
  check_image(model, image);
  if (options.samples == 0) throw Error(ErrorCode::InvalidArgument, "smoothgrad needs n >= 1");
  if (!(options.sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "smoothgrad sigma must be >= 0");
  const std::size_t target = argmax(model.predict_logits(image).data());

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Tensor acc(Shape{image.dim(0), image.dim(1)});
  for (std::size_t s = 0; s < options.samples; ++s) {
    Tensor noisy = image;
    if (options.sigma > 0.0) {
      for (double& v : noisy.data()) v = std::clamp(v + options.sigma * noise(rng), 0.0, 1.0);
    }
    const Tensor sal = channel_max_abs(input_gradient(model, noisy, target));
    // Running mean: exact when every sample gives the same map.
    const double count = static_cast<double>(s + 1);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += (sal[k] - acc[k]) / count;
  }

  HeatmapResult r;
  r.method = "smoothgrad";
  r.values = std::move(acc);
  finish(r);
  return r;
}

std::vector<std::size_t> occlusion_positions(std::size_t extent, std::size_t patch,
                                             std::size_t stride) {
  if (patch == 0 || patch > extent) {
    throw Error(ErrorCode::InvalidArgument, "occlusion patch " + std::to_string(patch) +
                                                " must lie in [1, " + std::to_string(extent) + "]");
  }
  if (stride == 0 || stride > extent) {
    throw Error(ErrorCode::InvalidArgument, "occlusion stride " + std::to_string(stride) +
                                                " must lie in [1, " + std::to_string(extent) + "]");
  }
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p + patch <= extent; p += stride) out.push_back(p);
  if (out.back() + patch < extent) out.push_back(extent - patch);
  return out;
}

HeatmapResult occlusion(const Model& model, const Tensor& image, const OcclusionOptions& options) {
  check_image(model, image);
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (options.fill_image && options.fill_image->shape() != image.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "occlusion fill image does not match the input");
  }
  const auto rows = occlusion_positions(h, options.patch, options.stride);
  const auto cols = occlusion_positions(w, options.patch, options.stride);

  const Tensor probs = model.predict(image);
  const std::size_t target = argmax(probs.data());
  const double p_orig = probs[target];

  Tensor sum(Shape{h, w});
  Tensor coverage(Shape{h, w});
  HeatmapResult r;
  r.method = "occlusion";
  for (std::size_t r0 : rows) {
    for (std::size_t c0 : cols) {
      Tensor occluded = image;
      for (std::size_t y = r0; y < r0 + options.patch; ++y) {
        for (std::size_t x = c0; x < c0 + options.patch; ++x) {
          for (std::size_t k = 0; k < c; ++k) {
            occluded.at(y, x, k) = options.fill_image ? options.fill_image->at(y, x, k) : options.fill;
          }
        }
      }
      const double drop = std::max(0.0, p_orig - model.predict(occluded)[target]);
      ++r.forward_passes;
      for (std::size_t y = r0; y < r0 + options.patch; ++y) {
        for (std::size_t x = c0; x < c0 + options.patch; ++x) {
          sum.at(y, x) += drop;
          coverage.at(y, x) += 1.0;
        }
      }
    }
  }
  for (std::size_t k = 0; k < sum.size(); ++k) {
    sum[k] = coverage[k] > 0.0 ? sum[k] / coverage[k] : 0.0;
  }
  r.values = std::move(sum);
  finish(r);
  return r;
}

}  // namespace maskexplain
