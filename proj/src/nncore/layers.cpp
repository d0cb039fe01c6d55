#include "metabayes/nncore/layers.hpp"

#include <cmath>

#include "metabayes/errors.hpp"
#include "metabayes/tasks/rng.hpp"

namespace metabayes {

DenseLayer add_dense(MetaParams& params, const std::string& prefix, Eigen::Index in, Eigen::Index out) {
  DenseLayer layer;
  layer.weight = params.add(prefix + ".weight", out, in);
  layer.bias = params.add(prefix + ".bias", out, 1);
  return layer;
}

GruCell add_gru(MetaParams& params, const std::string& prefix, Eigen::Index in, Eigen::Index hidden) {
  GruCell cell;
  cell.weight_input = params.add(prefix + ".weight_input", 3 * hidden, in);
  cell.weight_hidden = params.add(prefix + ".weight_hidden", 3 * hidden, hidden);
  cell.bias_input = params.add(prefix + ".bias_input", 3 * hidden, 1);
  cell.bias_hidden = params.add(prefix + ".bias_hidden", 3 * hidden, 1);
  return cell;
}

Var dense_forward(Tape& tape, const MetaParams& params, const DenseLayer& layer, Var input) {
  const Matrix& w = params[layer.weight];
  if (input.rows() != w.cols()) {
    throw ContractViolation("dense_forward: layer '" + params.name(layer.weight) + "' expects input of length " +
                            std::to_string(w.cols()) + ", got " + std::to_string(input.rows()));
  }
  return add_colwise(matmul(tape.parameter(params, layer.weight), input), tape.parameter(params, layer.bias));
}

Var gru_step(Tape& tape, const MetaParams& params, const GruCell& cell, Var input, Var state) {
  const Matrix& wi = params[cell.weight_input];
  const Eigen::Index hidden = params[cell.weight_hidden].cols();
  if (input.rows() != wi.cols()) {
    throw ContractViolation("gru_step: expected input of length " + std::to_string(wi.cols()) + ", got " +
                            std::to_string(input.rows()));
  }
  if (state.rows() != hidden || state.cols() != input.cols()) {
    throw ContractViolation("gru_step: expected state of length " + std::to_string(hidden) + " with " +
                            std::to_string(input.cols()) + " columns");
  }

  Var gi = add_colwise(matmul(tape.parameter(params, cell.weight_input), input),
                       tape.parameter(params, cell.bias_input));
  Var gh = add_colwise(matmul(tape.parameter(params, cell.weight_hidden), state),
                       tape.parameter(params, cell.bias_hidden));

  Var reset = sigmoid(rows(gi, 0, hidden) + rows(gh, 0, hidden));
  Var update = sigmoid(rows(gi, hidden, hidden) + rows(gh, hidden, hidden));
  Var candidate = tanh(rows(gi, 2 * hidden, hidden) + cwise_product(reset, rows(gh, 2 * hidden, hidden)));
  return cwise_product(one_minus(update), candidate) + cwise_product(update, state);
}

void glorot_uniform_init(MetaParams& params, SeededRng& rng) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params.data(i);
    const std::string& name = params.name(i);
    const auto dot = name.rfind('.');
    if (name.compare(dot == std::string::npos ? 0 : dot + 1, 6, "weight") != 0) {
      w.setZero();
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    // Column-major fill order keeps the stream layout fixed.
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      w.data()[k] = limit * (2.0 * rng.uniform() - 1.0);
    }
  }
  params.bump_version();
}

}  // namespace metabayes
