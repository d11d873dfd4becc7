#pragma once

#include <cstdint>
#include <vector>

#include "maskexplain/autodiff.hpp"
#include "maskexplain/error.hpp"
#include "maskexplain/model.hpp"

namespace maskexplain {

enum class SparseForm {
  Shifted,    // sum |W + tau|: pulls weights to -tau, mask to ~0
  Unshifted,  // sum |W|: kept for comparison only
};

struct ExplainConfig {
  double lambda_p = 1.0;
  double lambda_sp = 0.01;
  double lambda_sm = 0.01;
  double tau = 20.0;
  std::size_t iterations = 1000;
  double alpha = 0.05;
  double beta = 0.9;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t snapshot_every = 0;  // 0 = no snapshots
  SparseForm sparse_form = SparseForm::Shifted;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

/// Mask weights W, RMSProp accumulator v and the number of updates applied.
struct MaskState {
  Tensor weights;
  Tensor velocity;
  std::size_t step = 0;
};

struct LossTerms {
  double total = 0.0;
  double pred = 0.0;
  double sparse = 0.0;
  double smooth = 0.0;
};

struct MaskSnapshot {
  std::size_t step = 0;
  Tensor mask;
};

struct ExplanationResult {
  Tensor mask;  // (H, W) relevance in [0, 1]
  std::vector<LossTerms> loss_history;
  std::size_t original_class = 0;
  std::size_t masked_class = 0;
  Tensor original_probabilities;
  Tensor masked_probabilities;
  std::vector<MaskSnapshot> snapshots;

  bool class_preserved() const { return original_class == masked_class; }
};

/// Raised when the loss turns non-finite; keeps the history up to that step.
class DivergedError : public Error {
 public:
  DivergedError(std::size_t step, std::vector<LossTerms> history);
  std::size_t step() const noexcept { return step_; }
  const std::vector<LossTerms>& history() const noexcept { return history_; }

 private:
  std::size_t step_;
  std::vector<LossTerms> history_;
};

/// Elementwise sigmoid of the mask weights.
Tensor relevance_mask(const Tensor& weights);

/// out[i,j,c] = m[i,j] * x[i,j,c].
Tensor apply_mask(const Tensor& image, const Tensor& mask);

// Cost terms. The tape versions are what the optimizer differentiates; the
// scalar versions evaluate them on a throwaway tape.
NodeRef pred_cost(Tape& tape, const Tensor& original_probs, NodeRef masked_probs);
NodeRef sparse_cost(Tape& tape, NodeRef weights, double tau,
                    SparseForm form = SparseForm::Shifted);
NodeRef smooth_cost(Tape& tape, NodeRef weights);

double pred_cost(const Tensor& original_probs, const Tensor& masked_probs);
double sparse_cost(const Tensor& weights, double tau, SparseForm form = SparseForm::Shifted);
double smooth_cost(const Tensor& weights);

struct LossNodes {
  NodeRef total, pred, sparse, smooth, masked_probs;
};

/// Records L_total for mask weights `weights` against the cached
/// prediction `original_probs` of the unmasked image.
LossNodes record_total_loss(Tape& tape, const Model& model, const Tensor& image,
                            const Tensor& original_probs, NodeRef weights,
                            const ExplainConfig& config);

/// W ~ Uniform(-tau, tau), v = 0.
MaskState init_mask_state(std::size_t height, std::size_t width, const ExplainConfig& config);

/// v <- beta v + (1 - beta) g^2;  W <- W - alpha g / (sqrt(v) + epsilon).
void rmsprop_step(MaskState& state, const Tensor& grad, const ExplainConfig& config);

ExplanationResult explain(const Model& model, const Tensor& image, const ExplainConfig& config);

struct RefineOptions {
  std::vector<double> lambda_sp_grid = {1e-4, 1e-3, 1e-2};
  std::vector<double> lambda_sm_grid = {1e-4, 1e-3, 1e-2};
  std::size_t iterations = 300;
  double min_mask_mean = 0.05;
  double max_mask_mean = 0.4;
  ExplainConfig base;  // everything but the lambdas
};

struct RefinePoint {
  double lambda_sp = 0.0;
  double lambda_sm = 0.0;
  bool class_preserved = false;
  double mask_mean = 0.0;
  double final_pred = 0.0;
};

struct RefineResult {
  double lambda_p = 1.0;
  double lambda_sp = 0.0;
  double lambda_sm = 0.0;
  bool warning = false;  // no grid point preserved the class
  std::vector<RefinePoint> grid;

  ExplainConfig apply(ExplainConfig config) const;
};

/// Grid search over (lambda_sp, lambda_sm) with lambda_p = 1. Prefers points
/// that keep the class and land the mask mean in range, then points that
/// keep the class; ties go to the smallest lambdas. Without any class-keeping
/// point, returns the lowest final L_pred and sets `warning`.
RefineResult refine_defaults(const Model& model, const Tensor& image,
                             const RefineOptions& options = {});

}  // namespace maskexplain
