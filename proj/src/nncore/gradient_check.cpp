#include "metabayes/nncore/gradient_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "metabayes/errors.hpp"
#include "metabayes/tasks/rng.hpp"

namespace metabayes {

namespace {

double evaluate(const LossBuilder& loss, const MetaParams& params) {
  Tape tape;
  const double value = loss(tape, params).scalar();
  if (!std::isfinite(value)) throw NumericalError("gradient_check: loss is not finite");
  return value;
}

}  // namespace

GradientCheckReport gradient_check(const LossBuilder& loss, const MetaParams& params,
                                   const GradientCheckOptions& options) {
  MetaParams grads;
  double base = 0.0;
  {
    Tape tape;
    Var l = loss(tape, params);
    base = l.scalar();
    grads = tape.backward(l);
  }
  if (!grads.same_layout(params)) {
    // Loss never touched a parameter; the tape had nothing to bind.
    grads = params.zeros_like();
  }
  if (std::bit_cast<std::uint64_t>(evaluate(loss, params)) != std::bit_cast<std::uint64_t>(base)) {
    throw NonDeterminismError("gradient_check: two forward passes at identical parameters disagree");
  }

  std::vector<std::pair<std::size_t, Eigen::Index>> entries;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (Eigen::Index k = 0; k < params[i].size(); ++k) entries.emplace_back(i, k);
  }
  if (entries.size() > options.max_checked) {
    SeededRng rng(options.seed, 0x6772616463686bULL);
    // Partial Fisher-Yates: the first max_checked entries form the sample.
    for (std::size_t k = 0; k < options.max_checked; ++k) {
      const auto j = k + static_cast<std::size_t>(rng.uniform_index(entries.size() - k));
      std::swap(entries[k], entries[j]);
    }
    entries.resize(options.max_checked);
    std::sort(entries.begin(), entries.end());
  }

  GradientCheckReport report;
  MetaParams probe = params;
  const double h = options.perturbation;
  for (const auto& [i, k] : entries) {
    const double original = params[i].data()[k];
    probe.data(i).data()[k] = original + h;
    const double up = evaluate(loss, probe);
    probe.data(i).data()[k] = original - h;
    const double down = evaluate(loss, probe);
    probe.data(i).data()[k] = original;

    const double numeric = (up - down) / (2.0 * h);
    const double analytic = grads[i].data()[k];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), options.magnitude_floor});
    const double err = std::abs(numeric - analytic) / denom;
    if (err > report.max_relative_error || report.checked == 0) {
      report.max_relative_error = err;
      report.worst_parameter = params.name(i);
      report.worst_row = k % params[i].rows();
      report.worst_col = k / params[i].rows();
    }
    ++report.checked;
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace metabayes
