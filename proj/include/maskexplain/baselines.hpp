#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maskexplain/model.hpp"

namespace maskexplain {

/// Nonnegative (H, W) relevance map produced by a comparison explainer.
struct HeatmapResult {
  Tensor values;
  std::string method;
  double min = 0.0;  // display normalization bounds
  double max = 0.0;
  std::size_t forward_passes = 0;  // occlusion only: occluded evaluations

  /// (v - min) / (max - min); all zeros for a constant map.
  Tensor normalized() const;
};

/// max over channels of |d logit_k / d x|, k = argmax f(x).
HeatmapResult saliency(const Model& model, const Tensor& image);
HeatmapResult saliency(const Model& model, const Tensor& image, std::size_t target_class);

struct SmoothGradOptions {
  std::size_t samples = 25;
  double sigma = 0.1;
  std::uint64_t seed = 0;
};

/// Mean saliency over noisy copies (Gaussian, clipped to [0, 1]); the target
/// class stays argmax f(image) for every copy.
HeatmapResult smoothgrad(const Model& model, const Tensor& image,
                         const SmoothGradOptions& options = {});

struct OcclusionOptions {
  std::size_t patch = 8;
  std::size_t stride = 4;
  double fill = 0.5;
  std::optional<Tensor> fill_image;  // overrides `fill` when set
};

/// Patch origins along one axis: 0, stride, 2*stride, ... plus a final
/// origin flush with the far edge, ceil((extent - patch) / stride) + 1 in all.
std::vector<std::size_t> occlusion_positions(std::size_t extent, std::size_t patch,
                                             std::size_t stride);

/// Per-pixel mean over covering patches of max(0, p_orig - p_occluded) for
/// the original argmax class.
HeatmapResult occlusion(const Model& model, const Tensor& image,
                        const OcclusionOptions& options = {});

}  // namespace maskexplain
