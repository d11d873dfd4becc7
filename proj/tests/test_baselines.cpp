#include <gtest/gtest.h>

#include <cmath>

#include "maskexplain/baselines.hpp"
#include "maskexplain/error.hpp"
#include "support.hpp"

using namespace maskexplain;
using maskexplain::testing::random_tensor;

namespace {

std::size_t closed_form_positions(std::size_t extent, std::size_t patch, std::size_t stride) {
  return (extent - patch + stride - 1) / stride + 1;
}

}  // namespace

TEST(Saliency, LinearModelGradientIsWeightRow) {
  const Model model = maskexplain::testing::linear_model(6, 5, 4, 3);
  const Tensor x = random_tensor(Shape{6, 5, 3}, 4, 0.0, 1.0);
  const std::size_t k = argmax(model.predict_logits(x).data());
  const Tensor& a = model.weights().at("layer1.weight");
  const auto heat = saliency(model, x);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double want = 0.0;
      for (std::size_t c = 0; c < 3; ++c) want = std::max(want, std::fabs(a.at(k, (i * 5 + j) * 3 + c)));
      EXPECT_EQ(heat.values.at(i, j), want);
    }
  }
  EXPECT_EQ(heat.method, "saliency");
}

TEST(Saliency, ExplicitTarget) {
  const Model model = maskexplain::testing::linear_model(4, 4, 3, 3);
  const Tensor x = random_tensor(Shape{4, 4, 3}, 4, 0.0, 1.0);
  const auto heat = saliency(model, x, 2);
  EXPECT_EQ(heat.values.at(0, 0),
            std::max({std::fabs(model.weights().at("layer1.weight").at(2, 0)),
                      std::fabs(model.weights().at("layer1.weight").at(2, 1)),
                      std::fabs(model.weights().at("layer1.weight").at(2, 2))}));
  EXPECT_THROW(saliency(model, x, 3), Error);
}

TEST(Saliency, ZeroModelGivesZeroMap) {
  const auto heat = saliency(maskexplain::testing::zero_model(16),
                             random_tensor(Shape{16, 16, 3}, 1, 0.0, 1.0));
  EXPECT_EQ(heat.values, Tensor(Shape{16, 16}));
  EXPECT_EQ(heat.normalized(), Tensor(Shape{16, 16}));
}

TEST(SmoothGrad, DegenerateEqualsSaliency) {
  const Model model = maskexplain::testing::random_cnn(16, 7);
  const Tensor x = random_tensor(Shape{16, 16, 3}, 8, 0.0, 1.0);
  const auto sg = smoothgrad(model, x, {1, 0.0, 123});
  const auto sal = saliency(model, x);
  EXPECT_EQ(sg.values, sal.values);
  EXPECT_EQ(sg.normalized(), sal.normalized());
}

TEST(SmoothGrad, LinearModelEqualsSaliency) {
  const Model model = maskexplain::testing::linear_model(6, 6, 3, 9);
  const Tensor x = random_tensor(Shape{6, 6, 3}, 10, 0.0, 1.0);
  for (std::size_t n : {1u, 7u, 25u}) {
    for (double sigma : {0.0, 0.1, 0.5}) {
      EXPECT_EQ(smoothgrad(model, x, {n, sigma, 3}).values, saliency(model, x).values)
          << n << " " << sigma;
    }
  }
}

TEST(SmoothGrad, Validation) {
  const Model model = maskexplain::testing::linear_model(4, 4, 3, 9);
  EXPECT_THROW(smoothgrad(model, Tensor(Shape{4, 4, 3}), {0, 0.1, 0}), Error);
  EXPECT_THROW(smoothgrad(model, Tensor(Shape{4, 4, 3}), {3, -0.1, 0}), Error);
}

TEST(Occlusion, PositionsClosedForm) {
  for (std::size_t extent : {8u, 16u, 31u, 32u}) {
    for (std::size_t patch = 1; patch <= extent; patch += 3) {
      for (std::size_t stride = 1; stride <= extent; stride += 2) {
        const auto pos = occlusion_positions(extent, patch, stride);
        ASSERT_EQ(pos.size(), closed_form_positions(extent, patch, stride));
        EXPECT_EQ(pos.front(), 0u);
        EXPECT_EQ(pos.back(), extent - patch);
        for (std::size_t i = 1; i < pos.size(); ++i) EXPECT_GT(pos[i], pos[i - 1]);
      }
    }
  }
  EXPECT_EQ(occlusion_positions(32, 8, 4), (std::vector<std::size_t>{0, 4, 8, 12, 16, 20, 24}));
  EXPECT_EQ(occlusion_positions(32, 8, 5), (std::vector<std::size_t>{0, 5, 10, 15, 20, 24}));
  EXPECT_THROW(occlusion_positions(32, 0, 4), Error);
  EXPECT_THROW(occlusion_positions(32, 33, 4), Error);
  EXPECT_THROW(occlusion_positions(32, 8, 0), Error);
  EXPECT_THROW(occlusion_positions(32, 8, 33), Error);
}

TEST(Occlusion, ConstantModelGivesZeroMap) {
  const auto heat = occlusion(maskexplain::testing::zero_model(16),
                              random_tensor(Shape{16, 16, 3}, 2, 0.0, 1.0));
  EXPECT_EQ(heat.values, Tensor(Shape{16, 16}));
}

TEST(Occlusion, SelfFillIsNoOp) {
  const Model model = maskexplain::testing::random_cnn(16, 7);
  const Tensor x = random_tensor(Shape{16, 16, 3}, 8, 0.0, 1.0);
  OcclusionOptions opts;
  opts.patch = 16;
  opts.stride = 4;
  opts.fill_image = x;
  const auto heat = occlusion(model, x, opts);
  EXPECT_EQ(heat.values, Tensor(Shape{16, 16}));
  EXPECT_EQ(heat.forward_passes, 1u);
}

TEST(Occlusion, ForwardPassCount) {
  const Model model = maskexplain::testing::random_cnn(16, 7);
  const Tensor x = random_tensor(Shape{16, 16, 3}, 8, 0.0, 1.0);
  for (auto [patch, stride] : {std::pair{8u, 4u}, {5u, 3u}, {3u, 16u}, {1u, 1u}}) {
    OcclusionOptions opts;
    opts.patch = patch;
    opts.stride = stride;
    const std::size_t n = closed_form_positions(16, patch, stride);
    EXPECT_EQ(occlusion(model, x, opts).forward_passes, n * n);
  }
}

TEST(Occlusion, NonNegative) {
  const Model model = maskexplain::testing::random_cnn(16, 11);
  const auto heat = occlusion(model, random_tensor(Shape{16, 16, 3}, 12, 0.0, 1.0));
  for (double v : heat.values.data()) EXPECT_GE(v, 0.0);
}

TEST(Baselines, LeaveWeightsUntouched) {
  const Model model = maskexplain::testing::random_cnn(16, 7);
  const auto before = model.checksum();
  const Tensor x = random_tensor(Shape{16, 16, 3}, 8, 0.0, 1.0);
  saliency(model, x);
  smoothgrad(model, x, {3, 0.1, 1});
  occlusion(model, x);
  EXPECT_EQ(model.checksum(), before);
}
