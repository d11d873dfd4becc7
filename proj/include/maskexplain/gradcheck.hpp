#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "maskexplain/autodiff.hpp"

namespace maskexplain {

/// Builds a scalar loss on `tape` from the given leaf nodes. Must be
/// deterministic: it is re-run at every perturbed point.
using LossBuilder = std::function<NodeRef(Tape& tape, std::span<const NodeRef> leaves)>;

struct GradcheckOptions {
  double step = 1e-3;        // central-difference half width h
  double tolerance = 1e-3;   // max relative error
  double abs_floor = 1e-8;   // |analytic| and |numeric| both below: counted as agreement
  std::size_t samples_per_leaf = 0;  // 0 checks every entry
  std::uint64_t seed = 0;            // picks the sampled entries
};

struct GradcheckEntry {
  std::size_t leaf = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
  bool kink = false;        // non-differentiable within +-h; excluded from the verdict
  bool non_finite = false;  // loss was NaN/Inf at a perturbed point
  bool failed = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool passed = true;

  std::size_t checked() const;  // entries that count toward the verdict
  std::size_t kinks() const;
  std::size_t failures() const;
  double max_relative_error() const;  // over non-kink entries
};

/// Compares reverse-mode gradients against central finite differences.
///
/// An entry is flagged as a kink when the one-sided difference quotients
/// disagree in a way that does not shrink linearly with the step, which is
/// what a slope discontinuity within [w-h, w+h] produces (|.| at 0, relu at
/// 0, maxpool ties).
GradcheckReport gradcheck(const LossBuilder& loss_builder, std::span<const Tensor> leaves,
                          const GradcheckOptions& options = {});

}  // namespace maskexplain
