#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "maskexplain/error.hpp"
#include "maskexplain/neuromask.hpp"
#include "support.hpp"

using namespace maskexplain;
using maskexplain::testing::random_tensor;

namespace {

ExplainConfig quick(std::size_t iters) {
  ExplainConfig cfg;
  cfg.iterations = iters;
  return cfg;
}

}  // namespace

TEST(ApplyMask, IdentityZeroAndHalf) {
  const Tensor x = random_tensor(Shape{4, 5, 3}, 1, 0.0, 1.0);
  EXPECT_EQ(apply_mask(x, Tensor(Shape{4, 5}, 1.0)), x);
  EXPECT_EQ(apply_mask(x, Tensor(Shape{4, 5}, 0.0)), Tensor(Shape{4, 5, 3}));
  EXPECT_EQ(apply_mask(Tensor(Shape{4, 5, 3}, 1.0), Tensor(Shape{4, 5}, 0.5)),
            Tensor(Shape{4, 5, 3}, 0.5));
}

TEST(ApplyMask, DimensionMismatch) {
  try {
    apply_mask(Tensor(Shape{4, 4, 3}), Tensor(Shape{4, 5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContractViolation);
  }
}

TEST(PredCost, Examples) {
  const Tensor y(Shape{3}, std::vector<double>{0.7, 0.2, 0.1});
  EXPECT_NEAR(pred_cost(y, Tensor(Shape{3}, std::vector<double>{1.0, 0.0, 0.0})), 0.0, 1e-11);
  EXPECT_NEAR(pred_cost(y, Tensor(Shape{3}, 1.0 / 3.0)), 1.0986122886681098, 1e-9);
  // Four-way tie resolves to class 0.
  EXPECT_NEAR(pred_cost(Tensor(Shape{4}, 0.25), Tensor(Shape{4}, 0.25)), 1.3862943611198906, 1e-9);
  EXPECT_NEAR(pred_cost(Tensor(Shape{4}, 0.25),
                        Tensor(Shape{4}, std::vector<double>{0.5, 0.5, 0.0, 0.0})),
              0.6931471805599453, 1e-9);
}

TEST(SparseCost, Examples) {
  EXPECT_EQ(sparse_cost(Tensor(Shape{3, 3}, -20.0), 20.0), 0.0);
  EXPECT_EQ(sparse_cost(Tensor(Shape{2, 2}, std::vector<double>{0, -20, -20, -20}), 20.0), 20.0);
  EXPECT_EQ(sparse_cost(Tensor(Shape{4, 4}), 20.0), 320.0);
  EXPECT_EQ(sparse_cost(Tensor(Shape{2, 2}, std::vector<double>{1, -2, 0, 3}), 20.0,
                        SparseForm::Unshifted),
            6.0);
}

TEST(SmoothCost, Examples) {
  EXPECT_EQ(smooth_cost(Tensor(Shape{6, 4}, 3.7)), 0.0);
  Tensor spike(Shape{5, 5});
  spike.at(2, 2) = 1.0;
  EXPECT_EQ(smooth_cost(spike), 8.0);

  Tensor ramp(Shape{5, 5});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) ramp.at(i, j) = static_cast<double>(i);
  // Top row: (0 + 1 + 0 + 0) - 4*0 = 1 per column.
  // Bottom row: (3 + 4 + 4 + 4) - 4*4 = -1 per column.
  // Interior rows: (i-1) + (i+1) + 2i - 4i = 0.
  EXPECT_EQ(smooth_cost(ramp), 5.0 * 1.0 + 5.0 * 1.0);
}

TEST(SmoothCost, TooSmall) {
  try {
    smooth_cost(Tensor(Shape{2, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContractViolation);
  }
}

TEST(Rmsprop, MatchesHandUpdate) {
  ExplainConfig cfg;
  MaskState s{Tensor(Shape{2}, std::vector<double>{1.0, -1.0}), Tensor(Shape{2}), 0};
  const Tensor g(Shape{2}, std::vector<double>{2.0, -0.5});
  rmsprop_step(s, g, cfg);
  const double v0 = 0.1 * 4.0, v1 = 0.1 * 0.25;
  EXPECT_DOUBLE_EQ(s.velocity[0], v0);
  EXPECT_DOUBLE_EQ(s.velocity[1], v1);
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0 - 0.05 * 2.0 / (std::sqrt(v0) + 1e-8));
  EXPECT_DOUBLE_EQ(s.weights[1], -1.0 + 0.05 * 0.5 / (std::sqrt(v1) + 1e-8));
  EXPECT_EQ(s.step, 1u);
}

TEST(Config, Validation) {
  auto rejects = [](auto mutate, const std::string& field) {
    ExplainConfig cfg;
    mutate(cfg);
    try {
      cfg.validate();
      ADD_FAILURE() << field;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  rejects([](ExplainConfig& c) { c.lambda_sp = -1; }, "lambda-sp");
  rejects([](ExplainConfig& c) { c.lambda_sm = -0.1; }, "lambda-sm");
  rejects([](ExplainConfig& c) { c.lambda_p = std::nan(""); }, "lambda-p");
  rejects([](ExplainConfig& c) { c.beta = 1.0; }, "beta");
  rejects([](ExplainConfig& c) { c.alpha = 0.0; }, "alpha");
  rejects([](ExplainConfig& c) { c.epsilon = 0.0; }, "epsilon");
  rejects([](ExplainConfig& c) { c.tau = 10.0; }, "tau");
  EXPECT_NO_THROW(ExplainConfig{}.validate());
}

TEST(Explain, ZeroIterationsKeepsInitialMask) {
  const Model model = maskexplain::testing::random_cnn(16, 1);
  const Tensor x = random_tensor(Shape{16, 16, 3}, 2, 0.0, 1.0);
  const ExplainConfig cfg = quick(0);
  const auto r = explain(model, x, cfg);
  EXPECT_EQ(r.mask, relevance_mask(init_mask_state(16, 16, cfg).weights));
  EXPECT_TRUE(r.loss_history.empty());
}

TEST(Explain, PredictionOnlyDescends) {
  const Model model = maskexplain::testing::random_cnn(16, 3);
  const Tensor x = random_tensor(Shape{16, 16, 3}, 4, 0.0, 1.0);
  ExplainConfig cfg = quick(400);
  cfg.lambda_sp = 0.0;
  cfg.lambda_sm = 0.0;
  const auto r = explain(model, x, cfg);
  EXPECT_LE(pred_cost(r.original_probabilities, r.masked_probabilities), r.loss_history.front().pred);
  EXPECT_TRUE(r.class_preserved());
}

TEST(Explain, SparseOnlyDrivesMaskToZero) {
  const Model model = maskexplain::testing::random_cnn(16, 3);
  const Tensor x = random_tensor(Shape{16, 16, 3}, 4, 0.0, 1.0);
  ExplainConfig cfg = quick(500);
  cfg.lambda_p = 0.0;
  cfg.lambda_sp = 1.0;
  cfg.lambda_sm = 0.0;
  const auto r = explain(model, x, cfg);
  EXPECT_LT(mean(r.mask), 0.01);
}

TEST(Explain, SnapshotsAtRequestedSteps) {
  const Model model = maskexplain::testing::random_cnn(16, 3);
  const Tensor x = random_tensor(Shape{16, 16, 3}, 4, 0.0, 1.0);
  ExplainConfig cfg = quick(25);
  cfg.snapshot_every = 10;
  const auto r = explain(model, x, cfg);
  std::vector<std::size_t> steps;
  for (const auto& s : r.snapshots) steps.push_back(s.step);
  EXPECT_EQ(steps, (std::vector<std::size_t>{0, 10, 20, 25}));
  EXPECT_EQ(r.snapshots.back().mask, r.mask);
  EXPECT_EQ(r.loss_history.size(), 25u);
}

TEST(Explain, DivergenceKeepsHistory) {
  const Model model = maskexplain::testing::random_cnn(16, 3);
  const Tensor x = random_tensor(Shape{16, 16, 3}, 4, 0.0, 1.0);
  ExplainConfig cfg = quick(10);
  cfg.alpha = 1e308;
  try {
    explain(model, x, cfg);
    FAIL();
  } catch (const DivergedError& e) {
    EXPECT_EQ(e.code(), ErrorCode::OptimizationDiverged);
    EXPECT_EQ(e.history().size(), e.step());
    EXPECT_GE(e.step(), 1u);
  }
}

TEST(Explain, ImageShapeChecked) {
  const Model model = maskexplain::testing::random_cnn(16, 3);
  EXPECT_THROW(explain(model, Tensor(Shape{8, 8, 3}), quick(1)), Error);
}

TEST(Refine, SinglePointGrid) {
  const Model model = maskexplain::testing::random_cnn(16, 3);
  RefineOptions opts;
  opts.lambda_sp_grid = {0.05};
  opts.lambda_sm_grid = {0.002};
  opts.iterations = 20;
  const auto r = refine_defaults(model, random_tensor(Shape{16, 16, 3}, 4, 0.0, 1.0), opts);
  EXPECT_EQ(r.lambda_sp, 0.05);
  EXPECT_EQ(r.lambda_sm, 0.002);
  EXPECT_EQ(r.lambda_p, 1.0);
  EXPECT_EQ(r.grid.size(), 1u);
}

TEST(Refine, BlackImagePicksSmallestLambdas) {
  // A black image is unchanged by any mask, so every point keeps the class.
  const Model model = maskexplain::testing::random_cnn(16, 3);
  RefineOptions opts;
  opts.iterations = 30;
  const auto r = refine_defaults(model, Tensor(Shape{16, 16, 3}), opts);
  for (const auto& p : r.grid) EXPECT_TRUE(p.class_preserved);
  EXPECT_FALSE(r.warning);
  EXPECT_EQ(r.lambda_sp, 1e-4);
  EXPECT_EQ(r.lambda_sm, 1e-4);
}

TEST(Refine, EmptyGrid) {
  const Model model = maskexplain::testing::random_cnn(16, 3);
  RefineOptions opts;
  opts.lambda_sm_grid.clear();
  EXPECT_THROW(refine_defaults(model, Tensor(Shape{16, 16, 3}), opts), Error);
}

TEST(Explain, StepZeroMaskLooksLikeNoise) {
  // A single 32x32 mask gives an entropy estimate with ~3% spread, so the
  // histogram pools the step-0 snapshots of 16 seeds.
  const Model model = maskexplain::testing::random_cnn(32, 3);
  const Tensor image = random_tensor(Shape{32, 32, 3}, 4, 0.0, 1.0);
  constexpr int kBins = 16;
  std::vector<double> counts(kBins, 0.0);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    ExplainConfig cfg = quick(0);
    cfg.snapshot_every = 1;
    cfg.seed = seed;
    const auto r = explain(model, image, cfg);
    ASSERT_EQ(r.snapshots.size(), 1u);
    for (double v : r.snapshots[0].mask.data()) {
      counts[std::min(kBins - 1, static_cast<int>(v * kBins))] += 1.0;
      total += 1.0;
    }
  }
  double empirical = 0.0;
  for (double c : counts) {
    if (c > 0) empirical -= (c / total) * std::log(c / total);
  }
  // Bin probabilities of sigmoid(U(-tau, tau)): P(m <= t) = (logit(t) + tau) / (2 tau).
  const double tau = ExplainConfig{}.tau;
  auto cdf = [&](double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return std::clamp((std::log(t / (1.0 - t)) + tau) / (2.0 * tau), 0.0, 1.0);
  };
  double expected = 0.0;
  for (int k = 0; k < kBins; ++k) {
    const double p = cdf((k + 1.0) / kBins) - cdf(static_cast<double>(k) / kBins);
    if (p > 0) expected -= p * std::log(p);
  }
  EXPECT_NEAR(empirical, expected, 0.02 * expected);
}
