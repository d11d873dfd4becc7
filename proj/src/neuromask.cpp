#include "maskexplain/neuromask.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace maskexplain {

namespace {

[[noreturn]] void bad_config(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::InvalidArgument, field + " " + why);
}

std::string diverged_message(std::size_t step, const std::vector<LossTerms>& history) {
  std::ostringstream ss;
  ss << "optimization diverged at step " << step;
  if (!history.empty()) {
    const auto& last = history.back();
    ss << "; last finite losses: total=" << last.total << " pred=" << last.pred
       << " sparse=" << last.sparse << " smooth=" << last.smooth;
  }
  return ss.str();
}

void check_image(const Model& model, const Tensor& image) {
  if (image.shape() != model.spec().input_shape) {
    throw Error(ErrorCode::ShapeMismatch, "image " + shape_to_string(image.shape()) +
                                              " does not match model input " +
                                              shape_to_string(model.spec().input_shape));
  }
}

}  // namespace

void ExplainConfig::validate() const {
  if (!(lambda_p >= 0.0)) bad_config("lambda-p", "must be nonnegative");
  if (!(lambda_sp >= 0.0)) bad_config("lambda-sp", "must be nonnegative");
  if (!(lambda_sm >= 0.0)) bad_config("lambda-sm", "must be nonnegative");
  if (!(alpha > 0.0)) bad_config("alpha", "must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) bad_config("beta", "must lie in [0,1)");
  if (!(epsilon > 0.0)) bad_config("epsilon", "must be positive");
  // sigmoid(-tau) < 1e-6  <=>  tau > ln(1e6 - 1)
  if (!(tau > std::log(1e6 - 1.0)) || !std::isfinite(tau)) {
    bad_config("tau", "must exceed 13.82 so that sigmoid(-tau) < 1e-6");
  }
}

DivergedError::DivergedError(std::size_t step, std::vector<LossTerms> history)
    : Error(ErrorCode::OptimizationDiverged, diverged_message(step, history)),
      step_(step),
      history_(std::move(history)) {}

Tensor relevance_mask(const Tensor& weights) {
  Tape tape;
  return tape.value(ops::sigmoid(tape, tape.constant(weights)));
}

Tensor apply_mask(const Tensor& image, const Tensor& mask) {
  if (image.rank() != 3 || mask.rank() != 2 || image.dim(0) != mask.dim(0) ||
      image.dim(1) != mask.dim(1)) {
    throw Error(ErrorCode::ContractViolation, "apply_mask: image " +
                                                  shape_to_string(image.shape()) + " vs mask " +
                                                  shape_to_string(mask.shape()));
  }
  Tape tape;
  const NodeRef m = ops::broadcast_channel(tape, tape.constant(mask), image.dim(2));
  return tape.value(ops::mul(tape, m, tape.constant(image)));
}

NodeRef pred_cost(Tape& tape, const Tensor& original_probs, NodeRef masked_probs) {
  const Tensor& y_hat = tape.value(masked_probs);
  if (original_probs.rank() != 1 || y_hat.shape() != original_probs.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "pred_cost: " + shape_to_string(original_probs.shape()) +
                                              " vs " + shape_to_string(y_hat.shape()));
  }
  Tensor onehot(original_probs.shape());
  onehot[argmax(original_probs.data())] = 1.0;
  const NodeRef picked =
      ops::sum(tape, ops::mul(tape, tape.constant(onehot), ops::log(tape, masked_probs)));
  return ops::scale(tape, picked, -1.0);
}

NodeRef sparse_cost(Tape& tape, NodeRef weights, double tau, SparseForm form) {
  NodeRef shifted = weights;
  if (form == SparseForm::Shifted) {
    shifted = ops::add(tape, weights, tape.constant(Tensor(tape.value(weights).shape(), tau)));
  }
  return ops::sum(tape, ops::abs(tape, shifted));
}

NodeRef smooth_cost(Tape& tape, NodeRef weights) {
  const Tensor& w = tape.value(weights);
  if (w.rank() != 2 || w.dim(0) < 3 || w.dim(1) < 3) {
    throw Error(ErrorCode::ContractViolation,
                "smooth_cost needs at least 3x3 weights, got " + shape_to_string(w.shape()));
  }
  return ops::sum(tape, ops::abs(tape, ops::laplacian(tape, weights)));
}

double pred_cost(const Tensor& original_probs, const Tensor& masked_probs) {
  Tape tape;
  return tape.value(pred_cost(tape, original_probs, tape.constant(masked_probs))).item();
}

double sparse_cost(const Tensor& weights, double tau, SparseForm form) {
  Tape tape;
  return tape.value(sparse_cost(tape, tape.constant(weights), tau, form)).item();
}

double smooth_cost(const Tensor& weights) {
  Tape tape;
  return tape.value(smooth_cost(tape, tape.constant(weights))).item();
}

LossNodes record_total_loss(Tape& tape, const Model& model, const Tensor& image,
                            const Tensor& original_probs, NodeRef weights,
                            const ExplainConfig& config) {
  const NodeRef mask = ops::sigmoid(tape, weights);
  const NodeRef masked = ops::mul(tape, ops::broadcast_channel(tape, mask, image.dim(2)),
                                  tape.constant(image));
  LossNodes n{};
  n.masked_probs = model.probabilities(tape, masked);
  n.pred = pred_cost(tape, original_probs, n.masked_probs);
  n.sparse = sparse_cost(tape, weights, config.tau, config.sparse_form);
  n.smooth = smooth_cost(tape, weights);
  n.total = ops::add(tape,
                     ops::add(tape, ops::scale(tape, n.pred, config.lambda_p),
                              ops::scale(tape, n.sparse, config.lambda_sp)),
                     ops::scale(tape, n.smooth, config.lambda_sm));
  return n;
}

MaskState init_mask_state(std::size_t height, std::size_t width, const ExplainConfig& config) {
  MaskState state{Tensor(Shape{height, width}), Tensor(Shape{height, width}), 0};
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> dist(-config.tau, config.tau);
  for (double& w : state.weights.data()) w = dist(rng);
  return state;
}

void rmsprop_step(MaskState& state, const Tensor& grad, const ExplainConfig& config) {
  if (grad.shape() != state.weights.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "rmsprop_step: gradient " +
                                              shape_to_string(grad.shape()) + " vs weights " +
                                              shape_to_string(state.weights.shape()));
  }
  for (std::size_t k = 0; k < grad.size(); ++k) {
    const double g = grad[k];
    double& v = state.velocity[k];
    v = config.beta * v + (1.0 - config.beta) * g * g;
    state.weights[k] -= config.alpha * g / (std::sqrt(v) + config.epsilon);
  }
  ++state.step;
}

ExplanationResult explain(const Model& model, const Tensor& image, const ExplainConfig& config) {
  config.validate();
  check_image(model, image);
  const std::size_t h = image.dim(0), w = image.dim(1);

  ExplanationResult result;
  // The unmasked copy's output never changes, so it is evaluated once.
  result.original_probabilities = model.predict(image);
  result.original_class = argmax(result.original_probabilities.data());

  MaskState state = init_mask_state(h, w, config);
  result.loss_history.reserve(config.iterations);

  auto take_snapshot = [&] {
    if (config.snapshot_every == 0) return;
    if (state.step % config.snapshot_every == 0 || state.step == config.iterations) {
      result.snapshots.push_back({state.step, relevance_mask(state.weights)});
    }
  };

  take_snapshot();
  for (std::size_t it = 0; it < config.iterations; ++it) {
    Tape tape;
    const NodeRef weights = tape.leaf(state.weights);
    const LossNodes loss =
        record_total_loss(tape, model, image, result.original_probabilities, weights, config);
    const LossTerms terms{tape.value(loss.total).item(), tape.value(loss.pred).item(),
                          tape.value(loss.sparse).item(), tape.value(loss.smooth).item()};
    if (!std::isfinite(terms.total)) throw DivergedError(it, std::move(result.loss_history));
    result.loss_history.push_back(terms);

    const Gradients grads = backward(tape, loss.total);
    const Tensor& g = grads[weights];
    if (!g.all_finite()) throw DivergedError(it, std::move(result.loss_history));
    rmsprop_step(state, g, config);
    take_snapshot();
  }

  result.mask = relevance_mask(state.weights);
  result.masked_probabilities = model.predict(apply_mask(image, result.mask));
  result.masked_class = argmax(result.masked_probabilities.data());
  return result;
}

ExplainConfig RefineResult::apply(ExplainConfig config) const {
  config.lambda_p = lambda_p;
  config.lambda_sp = lambda_sp;
  config.lambda_sm = lambda_sm;
  return config;
}

RefineResult refine_defaults(const Model& model, const Tensor& image,
                             const RefineOptions& options) {
  if (options.lambda_sp_grid.empty() || options.lambda_sm_grid.empty()) {
    throw Error(ErrorCode::InvalidArgument, "refine_defaults: empty lambda grid");
  }
  auto sp_grid = options.lambda_sp_grid;
  auto sm_grid = options.lambda_sm_grid;
  std::sort(sp_grid.begin(), sp_grid.end());
  std::sort(sm_grid.begin(), sm_grid.end());

  RefineResult out;
  for (double sp : sp_grid) {
    for (double sm : sm_grid) {
      ExplainConfig cfg = options.base;
      cfg.lambda_p = 1.0;
      cfg.lambda_sp = sp;
      cfg.lambda_sm = sm;
      cfg.iterations = options.iterations;
      cfg.snapshot_every = 0;
      RefinePoint p{sp, sm, false, 0.0, INFINITY};
      try {
        const auto r = explain(model, image, cfg);
        p.class_preserved = r.class_preserved();
        p.mask_mean = mean(r.mask);
        p.final_pred = pred_cost(r.original_probabilities, r.masked_probabilities);
      } catch (const DivergedError&) {
        // stays unpreserved with infinite L_pred
      }
      out.grid.push_back(p);
    }
  }

  auto in_range = [&](const RefinePoint& p) {
    return p.class_preserved && p.mask_mean >= options.min_mask_mean &&
           p.mask_mean <= options.max_mask_mean;
  };
  // Grid order is ascending in (lambda_sp, lambda_sm), so the first match is
  // the smallest-lambda point of its tier.
  auto chosen = std::find_if(out.grid.begin(), out.grid.end(), in_range);
  if (chosen == out.grid.end()) {
    chosen = std::find_if(out.grid.begin(), out.grid.end(),
                          [](const RefinePoint& p) { return p.class_preserved; });
  }
  if (chosen == out.grid.end()) {
    out.warning = true;
    chosen = std::min_element(out.grid.begin(), out.grid.end(), [](const auto& a, const auto& b) {
      return a.final_pred < b.final_pred;
    });
  }
  out.lambda_sp = chosen->lambda_sp;
  out.lambda_sm = chosen->lambda_sm;
  return out;
}

}  // namespace maskexplain
