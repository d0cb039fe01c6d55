#pragma once

#include <span>
#include <vector>

#include "metabayes/nncore/layers.hpp"
#include "metabayes/nncore/meta_params.hpp"
#include "metabayes/nncore/tape.hpp"
#include "metabayes/oracles/gaussian.hpp"
#include "metabayes/tasks/rng.hpp"

namespace metabayes {

/// Added to softplus(raw) so the predictive sd never reaches zero.
inline constexpr double kPredictiveSdFloor = 1e-4;

/// Scalar encoder (1 -> H), GRU (H -> H) with a learned initial state, and a
/// head (H -> 2) emitting (mean, raw sd). Observations are fed raw.
struct AmortizedModel {
  MetaParams params;
  int hidden_size = 0;
  DenseLayer encoder;
  GruCell cell;
  std::size_t initial_state = 0;
  DenseLayer head;
};

/// Layout only, all parameters zero.
AmortizedModel amortized_model_layout(int hidden_size);
/// Layout plus Glorot-uniform weights.
AmortizedModel make_amortized_model(int hidden_size, SeededRng& rng);

/// One predictive per prefix length 0..t.
struct PredictiveTrace {
  std::vector<Gaussian> entries;
};

/// Per-prefix predictions on the tape; entry t is a 1 x N row for prefix t.
struct TapePredictions {
  std::vector<Var> means;
  std::vector<Var> sds;
};

/// `inputs` is t x N (row k holds x_{k+1} of every sequence); produces t + 1
/// predictions. `params` must share the model's layout.
TapePredictions forward_batch(Tape& tape, const AmortizedModel& model, const MetaParams& params,
                              const Matrix& inputs);

struct Predictions {
  Matrix mean;  // (t + 1) x N
  Matrix sd;
};

Predictions predict(const AmortizedModel& model, const Matrix& inputs);

PredictiveTrace model_forward(const AmortizedModel& model, std::span<const double> sequence);

/// Mean over prefixes of -log N(x_{t+1}; m_{t+1}, s_{t+1}). The trace must hold
/// one entry per element of `sequence`.
double nll_loss(const PredictiveTrace& trace, std::span<const double> sequence);

/// Batched training objective on (T + 1) x N observations: mean NLL over all
/// prefixes and sequences, or over the last prefix only.
Var batch_nll(Tape& tape, const AmortizedModel& model, const MetaParams& params, const Matrix& observations,
              bool final_prefix_only = false);

}  // namespace metabayes
