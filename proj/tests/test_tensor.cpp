#include <gtest/gtest.h>

#include <cmath>

#include "maskexplain/error.hpp"
#include "maskexplain/tensor.hpp"

using namespace maskexplain;

TEST(Tensor, ShapeAndFill) {
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 1.5);
  EXPECT_EQ(shape_to_string(t.shape()), "(2,3)");
}

TEST(Tensor, DataSizeMustMatchShape) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), Error);
}

TEST(Tensor, ItemRequiresOneElement) {
  EXPECT_DOUBLE_EQ(Tensor::scalar(4.0).item(), 4.0);
  try {
    (void)Tensor::zeros(Shape{2}).item();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContractViolation);
  }
}

TEST(Tensor, ArgmaxTakesFirstMaximum) {
  const std::vector<double> v{0.25, 0.25, 0.25, 0.25};
  EXPECT_EQ(argmax(v), 0u);
  const std::vector<double> w{0.1, 0.7, 0.7};
  EXPECT_EQ(argmax(w), 1u);
}

TEST(Tensor, FiniteCheck) {
  Tensor t(Shape{3});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}
