#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string_view>
#include <vector>

#include "metabayes/nncore/meta_params.hpp"

namespace metabayes {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
};

/// Ordered record of the primitive operations of one forward pass. Each node
/// keeps its value and a closure that pushes the upstream gradient to its
/// inputs; backward() replays the closures in reverse recording order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to tensor `index` of `params`. Repeated calls for the same
  /// tensor return the same node. All parameter leaves on one tape must come
  /// from the same MetaParams object.
  Var parameter(const MetaParams& params, std::size_t index);
  Var parameter(const MetaParams& params, std::string_view name);
  /// Records a derived node. `backward` receives dLoss/dValue and must call
  /// accumulate() for each input it depends on.
  Var record(Matrix value, BackwardFn backward);
  /// As record(), for rules that are cheapest in terms of the node's own output.
  using OutputBackwardFn = std::function<void(Tape&, const Matrix& upstream, const Matrix& output)>;
  Var record_with_output(Matrix value, OutputBackwardFn backward);

  const Matrix& value(Var v) const;
  void accumulate(Var v, const Matrix& grad);

  /// Reverse accumulation from a 1x1 loss node. Returns a gradient per tensor
  /// of the bound MetaParams; tensors never touched get exact zeros.
  MetaParams backward(Var loss, double seed = 1.0);

  std::size_t size() const noexcept { return nodes_.size(); }
  const MetaParams* bound_params() const noexcept { return params_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    std::ptrdiff_t param = -1;
    bool has_grad = false;
  };

  Var make(Matrix value, BackwardFn backward, std::ptrdiff_t param);
  void check(Var v) const;

  std::deque<Node> nodes_;
  const MetaParams* params_ = nullptr;
  std::vector<std::ptrdiff_t> param_nodes_;
  bool consumed_ = false;
};

// Differentiable primitives. Column j of a batched value is sample j.

Var matmul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
/// Adds a column vector to every column of `m` (bias broadcast).
Var add_colwise(Var m, Var column);
Var cwise_product(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var one_minus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
/// log(1 + exp(a)), computed without overflow.
Var softplus(Var a);
Var exp(Var a);
/// 1 x N row of column sums.
Var colwise_sum(Var a);
Var square(Var a);
/// max(0, a) elementwise.
Var hinge(Var a);
Var rows(Var a, Eigen::Index start, Eigen::Index count);
/// Stacks values vertically (same column count).
Var vstack(const std::vector<Var>& parts);
/// Sum of all elements as a 1x1 node.
Var sum(Var a);
Var mean(Var a);
/// Column-wise log-softmax.
Var log_softmax(Var logits);
/// Same value, no gradient flows back through it.
Var detach(Var a);
/// Elementwise Gaussian negative log-likelihood of `target` under N(mean, sd).
Var gaussian_nll(Var mean, Var sd, const Matrix& target);

}  // namespace metabayes
