#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "metabayes/nncore/meta_params.hpp"
#include "metabayes/nncore/tape.hpp"

namespace metabayes {

class NonDeterminismError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds a scalar loss on the tape from the given parameters.
using LossBuilder = std::function<Var(Tape&, const MetaParams&)>;

struct GradientCheckOptions {
  double perturbation = 1e-5;
  double tolerance = 1e-4;
  // Gradient magnitudes below this are compared absolutely.
  double magnitude_floor = 1e-4;
  std::size_t max_checked = 10000;
  std::uint64_t seed = 0;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Compares reverse-mode gradients against central finite differences,
/// |g - fd| / max(|g|, |fd|, floor). Every entry is checked unless the model
/// has more than max_checked entries, in which case a seeded subsample is used.
GradientCheckReport gradient_check(const LossBuilder& loss, const MetaParams& params,
                                   const GradientCheckOptions& options = {});

}  // namespace metabayes
