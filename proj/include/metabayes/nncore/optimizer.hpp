#pragma once

#include <cstdint>

#include "metabayes/nncore/meta_params.hpp"

namespace metabayes {

enum class OptimizerKind { adam, sgd };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  void validate() const;
};

struct OptimizerState {
  OptimizerSettings settings;
  MetaParams first_moment;
  MetaParams second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_params(const MetaParams& params, const OptimizerSettings& settings);
};

/// Bias-corrected adaptive-moment descent on a loss gradient. A gradient that
/// is exactly zero everywhere only decays the moments and advances the step
/// counter; parameters stay bitwise unchanged. Throws NumericalError naming the
/// first tensor with a non-finite gradient, before anything is modified.
void adam_step(MetaParams& params, const MetaParams& grads, OptimizerState& state);

/// Plain gradient descent with the configured learning rate.
void sgd_step(MetaParams& params, const MetaParams& grads, OptimizerState& state);

/// Dispatches on state.settings.kind.
void optimizer_step(MetaParams& params, const MetaParams& grads, OptimizerState& state);

}  // namespace metabayes
