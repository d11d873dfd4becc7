#include <gtest/gtest.h>

#include <random>

#include "maskexplain/error.hpp"
#include "maskexplain/model.hpp"
#include "support.hpp"

using namespace maskexplain;
using maskexplain::testing::random_tensor;

TEST(Model, ZeroWeightsGiveUniformProbabilities) {
  const Model model = maskexplain::testing::zero_model(32);
  const Tensor p = model.predict(random_tensor(Shape{32, 32, 3}, 1, 0.0, 1.0));
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Model, ForwardIsBitIdentical) {
  const Model model = maskexplain::testing::random_cnn(16, 2);
  const Tensor x = random_tensor(Shape{16, 16, 3}, 3, 0.0, 1.0);
  EXPECT_EQ(model.predict(x), model.predict(x));
  EXPECT_EQ(model.predict_logits(x), model.predict_logits(x));
}

TEST(Model, ProbabilitiesSumToOne) {
  const Model model = maskexplain::testing::random_cnn(16, 4);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Tensor p = model.predict(random_tensor(Shape{16, 16, 3}, 10 + s, 0.0, 1.0));
    double total = 0.0;
    for (double v : p.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Model, TinyCnnLayout) {
  const auto spec = tiny_cnn_spec(32, {"a", "b", "c"});
  const auto shapes = validate_spec(spec);
  EXPECT_EQ(shapes.back(), (Shape{3}));
  const Model model(spec, init_weights(spec, 1));
  EXPECT_EQ(model.parameter_count(), 3u * 3 * 3 * 8 + 8 + 3 * 3 * 8 * 16 + 16 + 3 * 8 * 8 * 16 + 3);
}

TEST(Model, WeightsAreFloat32Representable) {
  const auto spec = tiny_cnn_spec(16, {"a", "b", "c"});
  WeightStore ws = init_weights(spec, 3);
  ws["layer0.weight"][0] = 0.1;  // not a float
  const Model model(spec, ws);
  const double v = model.weights().at("layer0.weight")[0];
  EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(Model, MissingTensorIsNamed) {
  const auto spec = tiny_cnn_spec(16, {"a", "b", "c"});
  WeightStore ws = init_weights(spec, 3);
  ws.erase("layer3.bias");
  try {
    Model m(spec, ws);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TensorShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("layer3.bias"), std::string::npos);
  }
}

TEST(Model, InputShapeChecked) {
  const Model model = maskexplain::testing::random_cnn(16, 2);
  EXPECT_THROW(model.predict(Tensor(Shape{8, 8, 3})), Error);
}

TEST(Model, DenseNeedsFlattenedInput) {
  ModelSpec spec{{8, 8, 3}, {DenseLayer{3}}, 3, {"a", "b", "c"}};
  EXPECT_THROW(validate_spec(spec), Error);
}

TEST(Model, FinalWidthMustMatchClasses) {
  ModelSpec spec{{8, 8, 3}, {FlattenLayer{}, DenseLayer{4}}, 3, {"a", "b", "c"}};
  EXPECT_THROW(validate_spec(spec), Error);
}

TEST(Model, CorruptedSpecsAreRejected) {
  // Each corruption breaks the layer chain or the output width.
  std::mt19937_64 rng(17);
  const auto base = tiny_cnn_spec(16, {"a", "b", "c"});
  ASSERT_NO_THROW(validate_spec(base));
  for (int trial = 0; trial < 200; ++trial) {
    ModelSpec spec = base;
    switch (rng() % 6) {
      case 0:  // drop the flatten
        spec.layers.erase(spec.layers.begin() + 6);
        break;
      case 1:  // dense directly on a feature map
        spec.layers.insert(spec.layers.begin() + static_cast<long>(rng() % 6), DenseLayer{3});
        break;
      case 2:  // wrong class count
        spec.num_classes = 4 + rng() % 5;
        break;
      case 3:  // pooling window larger than the map
        spec.layers.insert(spec.layers.begin() + 6, MaxPool2dLayer{8, 8});
        break;
      case 4:  // valid conv kernel larger than the map
        spec.layers.insert(spec.layers.begin() + 6,
                           Conv2dLayer{9, 1, Padding::Valid, 4});
        break;
      default:  // conv after flatten
        spec.layers.insert(spec.layers.end() - 1, Conv2dLayer{3, 1, Padding::SameZero, 2});
        break;
    }
    EXPECT_THROW(validate_spec(spec), Error) << "trial " << trial;
  }
}

TEST(Model, ChecksumTracksValues) {
  const auto spec = tiny_cnn_spec(16, {"a", "b", "c"});
  const Model a(spec, init_weights(spec, 1));
  const Model b(spec, init_weights(spec, 1));
  const Model c(spec, init_weights(spec, 2));
  EXPECT_EQ(a.checksum(), b.checksum());
  EXPECT_NE(a.checksum(), c.checksum());
}
