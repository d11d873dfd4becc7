#include <gtest/gtest.h>

#include <cmath>

#include "maskexplain/baselines.hpp"
#include "maskexplain/neuromask.hpp"
#include "support.hpp"

using namespace maskexplain;
using maskexplain::testing::trained_model;

namespace {

const std::vector<ShapesSample>& held_out() {
  static const auto s = generate_shapes(10, 32, 8);
  return s;
}

double density_ratio(const Tensor& v, const BBox& box) {
  double in = 0.0, out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t r = 0; r < v.dim(0); ++r) {
    for (std::size_t c = 0; c < v.dim(1); ++c) {
      if (box.contains(r, c)) {
        in += v.at(r, c);
        ++n_in;
      } else {
        out += v.at(r, c);
        ++n_out;
      }
    }
  }
  return (in / static_cast<double>(n_in)) / (out / static_cast<double>(n_out));
}

double total_variation(const Tensor& m) {
  double tv = 0.0;
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    for (std::size_t c = 0; c < m.dim(1); ++c) {
      if (r + 1 < m.dim(0)) tv += std::fabs(m.at(r + 1, c) - m.at(r, c));
      if (c + 1 < m.dim(1)) tv += std::fabs(m.at(r, c + 1) - m.at(r, c));
    }
  }
  return tv;
}

double area_fraction(const BBox& box) { return static_cast<double>(box.area()) / 1024.0; }

}  // namespace

TEST(TrainedModel, ClassifiesSquares) {
  const Model& model = trained_model();
  std::size_t squares = 0, correct = 0;
  for (const auto& s : held_out()) {
    if (s.label != 0) continue;
    ++squares;
    if (argmax(model.predict(s.image.pixels).data()) == 0) ++correct;
  }
  EXPECT_EQ(argmax(model.predict(held_out()[0].image.pixels).data()), 0u);
  EXPECT_GE(correct, squares - 1);
}

TEST(TrainedModel, SaliencyConcentratesOnObject) {
  const Model& model = trained_model();
  const auto before = model.checksum();
  double mass = 0.0, area = 0.0;
  for (const auto& s : held_out()) {
    const auto heat = saliency(model, s.image.pixels);
    EXPECT_GT(density_ratio(heat.values, s.bbox), 1.0);
    mass += mass_inside_bbox(heat.values, s.bbox);
    area += area_fraction(s.bbox);
  }
  EXPECT_GE(mass, 2.0 * area);
  EXPECT_EQ(model.checksum(), before);
}

TEST(TrainedModel, SmoothGradIsSmootherThanSaliency) {
  const Model& model = trained_model();
  const auto before = model.checksum();
  for (const auto& s : held_out()) {
    const auto sal = saliency(model, s.image.pixels);
    const auto sg = smoothgrad(model, s.image.pixels, {25, 0.1, 0});
    EXPECT_LE(total_variation(sg.values), total_variation(sal.values));
  }
  EXPECT_EQ(model.checksum(), before);
}

TEST(TrainedModel, OcclusionConcentratesOnObject) {
  const Model& model = trained_model();
  const auto before = model.checksum();
  std::size_t hits = 0;
  for (const auto& s : held_out()) {
    const auto heat = occlusion(model, s.image.pixels);
    EXPECT_EQ(heat.forward_passes, 49u);
    if (density_ratio(heat.values, s.bbox) > 1.0) ++hits;
  }
  EXPECT_GE(static_cast<double>(hits), 0.9 * static_cast<double>(held_out().size()));
  EXPECT_EQ(model.checksum(), before);
}

TEST(TrainedModel, RefinedLambdasKeepClass) {
  const Model& model = trained_model();
  const auto before = model.checksum();
  const auto& s = held_out()[1];
  const auto refined = refine_defaults(model, s.image.pixels);
  EXPECT_FALSE(refined.warning);
  EXPECT_EQ(refined.grid.size(), 9u);
  const auto r = explain(model, s.image.pixels, refined.apply(ExplainConfig{}));
  EXPECT_TRUE(r.class_preserved());
  EXPECT_GT(mass_inside_bbox(r.mask, s.bbox), area_fraction(s.bbox));
  EXPECT_EQ(model.checksum(), before);
}
