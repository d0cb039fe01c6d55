#include "metabayes/nncore/optimizer.hpp"

#include <cmath>

#include "metabayes/errors.hpp"

namespace metabayes {

namespace {

void check_step_inputs(const MetaParams& params, const MetaParams& grads, const OptimizerState& state) {
  if (!params.same_layout(grads)) throw ContractViolation("gradient layout does not match parameters");
  if (state.settings.kind == OptimizerKind::adam &&
      (!params.same_layout(state.first_moment) || !params.same_layout(state.second_moment))) {
    throw ContractViolation("optimizer moments do not match parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) {
      throw NumericalError("non-finite gradient in parameter '" + grads.name(i) + "'");
    }
  }
}

bool all_zero(const MetaParams& grads) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if ((grads[i].array() != 0.0).any()) return false;
  }
  return true;
}

}  // namespace

void OptimizerSettings::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("optim.lr must be > 0");
  if (!(epsilon > 0.0)) throw ValidationError("optim.eps must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("optim.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("optim.beta2 must lie in [0, 1)");
}

OptimizerState OptimizerState::for_params(const MetaParams& params, const OptimizerSettings& settings) {
  settings.validate();
  OptimizerState state;
  state.settings = settings;
  state.first_moment = params.zeros_like();
  state.second_moment = params.zeros_like();
  return state;
}

void adam_step(MetaParams& params, const MetaParams& grads, OptimizerState& state) {
  check_step_inputs(params, grads, state);
  const auto& s = state.settings;
  state.step += 1;
  const bool frozen = all_zero(grads);
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(s.beta1, t);
  const double correction2 = 1.0 - std::pow(s.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = state.first_moment.data(i);
    auto v = state.second_moment.data(i);
    m = s.beta1 * m + (1.0 - s.beta1) * grads[i];
    v = s.beta2 * v + (1.0 - s.beta2) * grads[i].cwiseProduct(grads[i]);
    if (frozen) continue;
    auto p = params.data(i);
    p.array() -= s.learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + s.epsilon);
  }
  if (!frozen) params.bump_version();
}

void sgd_step(MetaParams& params, const MetaParams& grads, OptimizerState& state) {
  check_step_inputs(params, grads, state);
  state.step += 1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    params.data(i) -= state.settings.learning_rate * grads[i];
  }
  params.bump_version();
}

void optimizer_step(MetaParams& params, const MetaParams& grads, OptimizerState& state) {
  switch (state.settings.kind) {
    case OptimizerKind::adam:
      adam_step(params, grads, state);
      return;
    case OptimizerKind::sgd:
      sgd_step(params, grads, state);
      return;
  }
}

}  // namespace metabayes
