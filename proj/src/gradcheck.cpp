#include "maskexplain/gradcheck.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <random>

#include "maskexplain/error.hpp"

namespace maskexplain {

namespace {

double evaluate(const LossBuilder& builder, const std::vector<Tensor>& leaves) {
  Tape tape;
  std::vector<NodeRef> refs;
  refs.reserve(leaves.size());
  for (const auto& t : leaves) refs.push_back(tape.leaf(t));
  return tape.value(builder(tape, refs)).item();
}

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t wanted, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (wanted == 0 || wanted >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(wanted);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::size_t GradcheckReport::checked() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return !e.kink; }));
}

std::size_t GradcheckReport::kinks() const { return entries.size() - checked(); }

std::size_t GradcheckReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.failed; }));
}

double GradcheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& e : entries) {
    if (!e.kink) worst = std::max(worst, e.relative_error);
  }
  return worst;
}

GradcheckReport gradcheck(const LossBuilder& loss_builder, std::span<const Tensor> leaves,
                          const GradcheckOptions& options) {
  if (!(options.step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "gradcheck: step must be positive");
  }
  std::vector<Tensor> point(leaves.begin(), leaves.end());

  Tape tape;
  std::vector<NodeRef> refs;
  for (const auto& t : point) refs.push_back(tape.leaf(t));
  const NodeRef loss = loss_builder(tape, refs);
  const Gradients grads = backward(tape, loss);
  const double f0 = tape.value(loss).item();

  GradcheckReport report;
  std::mt19937_64 rng(options.seed);
  const double h = options.step;

  for (std::size_t li = 0; li < point.size(); ++li) {
    const Tensor& analytic = grads[refs[li]];
    for (std::size_t k : pick_entries(point[li].size(), options.samples_per_leaf, rng)) {
      GradcheckEntry e;
      e.leaf = li;
      e.index = k;
      e.analytic = analytic[k];

      const double w = point[li][k];
      auto at = [&](double offset) {
        point[li][k] = w + offset;
        const double v = evaluate(loss_builder, point);
        point[li][k] = w;
        return v;
      };
      const double fp = at(h), fm = at(-h);
      const double fp2 = at(h / 2), fm2 = at(-h / 2);

      if (!std::isfinite(f0) || !std::isfinite(fp) || !std::isfinite(fm) ||
          !std::isfinite(fp2) || !std::isfinite(fm2)) {
        e.non_finite = true;
        e.failed = true;
        e.numeric = std::nan("");
        e.relative_error = INFINITY;
        report.entries.push_back(e);
        continue;
      }

      e.numeric = (fp - fm) / (2 * h);

      // Second one-sided differences: ~h*f'' for smooth f, O(1) across a kink.
      const double d_full = ((fp - f0) - (f0 - fm)) / h;
      const double d_half = ((fp2 - f0) - (f0 - fm2)) / (h / 2);
      const double scale = std::max({std::fabs(f0), std::fabs(fp), std::fabs(fm), 1.0});
      const double noise = 1e-9 + 256.0 * DBL_EPSILON * scale / h;
      e.kink = std::fabs(d_full - 2.0 * d_half) > std::max(0.25 * std::fabs(d_full), noise);

      const double magnitude = std::max(std::fabs(e.analytic), std::fabs(e.numeric));
      e.relative_error =
          magnitude < options.abs_floor ? 0.0 : std::fabs(e.analytic - e.numeric) / magnitude;
      e.failed = !e.kink && e.relative_error > options.tolerance;
      report.entries.push_back(e);
    }
  }
  report.passed = std::none_of(report.entries.begin(), report.entries.end(),
                               [](const auto& e) { return e.failed; });
  return report;
}

}  // namespace maskexplain
