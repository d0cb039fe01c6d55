#include "metabayes/metasl/model.hpp"

#include <cmath>
#include <string>

#include "metabayes/errors.hpp"

namespace metabayes {

AmortizedModel amortized_model_layout(int hidden_size) {
  if (hidden_size < 1) throw ValidationError("hidden_size must be >= 1");
  AmortizedModel m;
  m.hidden_size = hidden_size;
  m.encoder = add_dense(m.params, "encoder", 1, hidden_size);
  m.cell = add_gru(m.params, "gru", hidden_size, hidden_size);
  m.initial_state = m.params.add("gru.initial_state", hidden_size, 1);
  m.head = add_dense(m.params, "head", hidden_size, 2);
  return m;
}

AmortizedModel make_amortized_model(int hidden_size, SeededRng& rng) {
  AmortizedModel m = amortized_model_layout(hidden_size);
  glorot_uniform_init(m.params, rng);
  return m;
}

TapePredictions forward_batch(Tape& tape, const AmortizedModel& model, const MetaParams& params,
                              const Matrix& inputs) {
  if (!params.same_layout(model.params)) throw ContractViolation("parameters do not match the model layout");
  if (!inputs.allFinite()) throw ContractViolation("model inputs must be finite");
  const Eigen::Index n = inputs.cols();
  TapePredictions out;
  out.means.reserve(static_cast<std::size_t>(inputs.rows() + 1));
  out.sds.reserve(static_cast<std::size_t>(inputs.rows() + 1));
  auto emit = [&](Var state) {
    Var o = dense_forward(tape, params, model.head, state);
    out.means.push_back(rows(o, 0, 1));
    out.sds.push_back(add_scalar(softplus(rows(o, 1, 1)), kPredictiveSdFloor));
  };

  Var h = add_colwise(tape.constant(Matrix::Zero(model.hidden_size, n)), tape.parameter(params, model.initial_state));
  emit(h);
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    Var x = dense_forward(tape, params, model.encoder, tape.constant(inputs.row(t)));
    h = gru_step(tape, params, model.cell, x, h);
    if (!h.value().allFinite()) throw NumericalError("non-finite activation at step " + std::to_string(t + 1));
    emit(h);
  }
  return out;
}

Predictions predict(const AmortizedModel& model, const Matrix& inputs) {
  Tape tape;
  TapePredictions tp = forward_batch(tape, model, model.params, inputs);
  Predictions p{Matrix(inputs.rows() + 1, inputs.cols()), Matrix(inputs.rows() + 1, inputs.cols())};
  for (std::size_t t = 0; t < tp.means.size(); ++t) {
    p.mean.row(static_cast<Eigen::Index>(t)) = tp.means[t].value();
    p.sd.row(static_cast<Eigen::Index>(t)) = tp.sds[t].value();
  }
  return p;
}

PredictiveTrace model_forward(const AmortizedModel& model, std::span<const double> sequence) {
  Matrix inputs(static_cast<Eigen::Index>(sequence.size()), 1);
  for (std::size_t k = 0; k < sequence.size(); ++k) inputs(static_cast<Eigen::Index>(k), 0) = sequence[k];
  Predictions p = predict(model, inputs);
  PredictiveTrace trace;
  for (Eigen::Index t = 0; t < p.mean.rows(); ++t) trace.entries.push_back({p.mean(t, 0), p.sd(t, 0)});
  return trace;
}

double nll_loss(const PredictiveTrace& trace, std::span<const double> sequence) {
  if (trace.entries.size() != sequence.size() || sequence.empty()) {
    throw ContractViolation("trace has " + std::to_string(trace.entries.size()) + " entries for a sequence of " +
                            std::to_string(sequence.size()));
  }
  double total = 0.0;
  for (std::size_t t = 0; t < sequence.size(); ++t) total -= trace.entries[t].log_density(sequence[t]);
  return total / static_cast<double>(sequence.size());
}

Var batch_nll(Tape& tape, const AmortizedModel& model, const MetaParams& params, const Matrix& observations,
              bool final_prefix_only) {
  if (observations.rows() < 1) throw ContractViolation("batch_nll needs at least one target row");
  TapePredictions p = forward_batch(tape, model, params, observations.topRows(observations.rows() - 1));
  if (final_prefix_only) {
    return mean(gaussian_nll(p.means.back(), p.sds.back(), observations.bottomRows(1)));
  }
  std::vector<Var> terms;
  terms.reserve(p.means.size());
  for (std::size_t t = 0; t < p.means.size(); ++t) {
    terms.push_back(gaussian_nll(p.means[t], p.sds[t], observations.row(static_cast<Eigen::Index>(t))));
  }
  return mean(vstack(terms));
}

}  // namespace metabayes
