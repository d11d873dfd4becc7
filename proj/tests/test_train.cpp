#include <gtest/gtest.h>

#include "maskexplain/error.hpp"
#include "maskexplain/train.hpp"

using namespace maskexplain;

namespace {

const std::vector<ShapesSample>& train_set() {
  static const auto s = generate_shapes(200, 32, 7);
  return s;
}

const std::vector<ShapesSample>& test_set() {
  static const auto s = generate_shapes(50, 32, 8);
  return s;
}

}  // namespace

TEST(Train, ZeroEpochsReturnsInitialization) {
  TrainOptions opts;
  opts.epochs = 0;
  const auto r = train_tiny_cnn(train_set(), test_set(), shape_labels(), opts);
  const auto spec = tiny_cnn_spec(32, shape_labels());
  EXPECT_EQ(r.model.weights(), Model(spec, init_weights(spec, opts.seed)).weights());
  EXPECT_NEAR(r.test_accuracy, 1.0 / 3.0, 0.1);
  EXPECT_TRUE(r.epoch_losses.empty());
}

TEST(Train, SameSeedSameWeights) {
  TrainOptions opts;
  opts.epochs = 3;
  const auto a = train_tiny_cnn(train_set(), test_set(), shape_labels(), opts);
  const auto b = train_tiny_cnn(train_set(), test_set(), shape_labels(), opts);
  EXPECT_EQ(a.model.weights(), b.model.weights());
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_EQ(a.test_accuracy, b.test_accuracy);
}

TEST(Train, RejectsSmallDatasets) {
  const auto small = generate_shapes(20, 32, 1);
  try {
    train_tiny_cnn(small, test_set(), shape_labels());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(Train, DivergenceIsReported) {
  TrainOptions opts;
  opts.epochs = 1;
  opts.learning_rate = 1e12;
  try {
    train_tiny_cnn(train_set(), test_set(), shape_labels(), opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TrainingDiverged);
  }
}
