#pragma once

#include <cstddef>
#include <string>

#include "metabayes/nncore/meta_params.hpp"
#include "metabayes/nncore/tape.hpp"

namespace metabayes {

class SeededRng;

/// Tensor indices of an affine layer inside a MetaParams.
struct DenseLayer {
  std::size_t weight = 0;  // out x in
  std::size_t bias = 0;    // out x 1
};

/// Tensor indices of a gated recurrent cell. Gate blocks are stacked in the
/// order reset, update, candidate (3*hidden rows).
struct GruCell {
  std::size_t weight_input = 0;   // 3H x in
  std::size_t weight_hidden = 0;  // 3H x H
  std::size_t bias_input = 0;     // 3H x 1
  std::size_t bias_hidden = 0;    // 3H x 1
};

DenseLayer add_dense(MetaParams& params, const std::string& prefix, Eigen::Index in, Eigen::Index out);
GruCell add_gru(MetaParams& params, const std::string& prefix, Eigen::Index in, Eigen::Index hidden);

/// output = W * input + b, batched over the columns of `input`.
Var dense_forward(Tape& tape, const MetaParams& params, const DenseLayer& layer, Var input);

/// One GRU update:
///   r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
///   z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
///   n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
///   h' = (1 - z) * n + z * h
Var gru_step(Tape& tape, const MetaParams& params, const GruCell& cell, Var input, Var state);

/// Uniform(+-sqrt(6 / (rows + cols))) for every tensor whose last name
/// component starts with "weight"; zeros for everything else (biases,
/// initial states).
void glorot_uniform_init(MetaParams& params, SeededRng& rng);

}  // namespace metabayes
