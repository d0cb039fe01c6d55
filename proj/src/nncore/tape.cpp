#include "metabayes/nncore/tape.hpp"

#include <cmath>
#include <string>

#include "metabayes/errors.hpp"

namespace metabayes {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " +
                            shape(b.value()));
  }
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw ContractViolation("variable is not bound to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ContractViolation("variables live on different tapes");
  return tape_of(a);
}

}  // namespace

const Matrix& Var::value() const { return tape_of(*this).value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractViolation("expected a 1x1 value, got " + shape(v));
  return v(0, 0);
}

Var Tape::make(Matrix value, BackwardFn backward, std::ptrdiff_t param) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(backward);
  node.param = param;
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::check(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw ContractViolation("variable does not belong to this tape");
  }
}

Var Tape::constant(Matrix value) { return make(std::move(value), nullptr, -1); }

Var Tape::parameter(const MetaParams& params, std::size_t index) {
  if (params_ == nullptr) {
    params_ = &params;
    param_nodes_.assign(params.size(), -1);
  } else if (params_ != &params) {
    throw ContractViolation("tape already bound to a different parameter set");
  }
  if (index >= params.size()) throw ContractViolation("parameter index out of range");
  if (param_nodes_[index] >= 0) {
    return Var{this, static_cast<std::size_t>(param_nodes_[index])};
  }
  Var v = make(params[index], nullptr, static_cast<std::ptrdiff_t>(index));
  param_nodes_[index] = static_cast<std::ptrdiff_t>(v.id);
  return v;
}

Var Tape::parameter(const MetaParams& params, std::string_view name) {
  return parameter(params, params.index_of(name));
}

Var Tape::record(Matrix value, BackwardFn backward) { return make(std::move(value), std::move(backward), -1); }

Var Tape::record_with_output(Matrix value, OutputBackwardFn backward) {
  const std::size_t id = nodes_.size();
  return make(
      std::move(value),
      [id, fn = std::move(backward)](Tape& tp, const Matrix& g) { fn(tp, g, tp.nodes_[id].value); }, -1);
}

const Matrix& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

void Tape::accumulate(Var v, const Matrix& grad) {
  check(v);
  Node& node = nodes_[v.id];
  if (grad.rows() != node.value.rows() || grad.cols() != node.value.cols()) {
    throw ContractViolation("gradient shape " + shape(grad) + " does not match value " + shape(node.value));
  }
  if (node.has_grad) {
    node.grad += grad;
  } else {
    node.grad = grad;
    node.has_grad = true;
  }
}

MetaParams Tape::backward(Var loss, double seed) {
  check(loss);
  if (nodes_[loss.id].value.size() != 1) {
    throw ContractViolation("backward requires a scalar loss, got " + shape(nodes_[loss.id].value));
  }
  if (consumed_) throw ContractViolation("tape has already been replayed");
  consumed_ = true;

  MetaParams grads = params_ != nullptr ? params_->zeros_like() : MetaParams{};
  accumulate(loss, Matrix::Constant(1, 1, seed));
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad) continue;
    if (node.param >= 0) {
      grads.data(static_cast<std::size_t>(node.param)) += node.grad;
    } else if (node.backward) {
      node.backward(*this, node.grad);
    }
    node.grad.resize(0, 0);
    node.has_grad = false;
  }
  return grads;
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul: inner dimensions differ " + shape(a.value()) + " * " + shape(b.value()));
  }
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g * tp.value(b).transpose());
    tp.accumulate(b, tp.value(a).transpose() * g);
  });
}

Var operator+(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "add");
  return t.record(a.value() + b.value(), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var operator-(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "subtract");
  return t.record(a.value() - b.value(), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

Var add_colwise(Var m, Var column) {
  Tape& t = tape_of(m, column);
  if (column.cols() != 1 || column.rows() != m.rows()) {
    throw ContractViolation("add_colwise: expected " + std::to_string(m.rows()) + "x1 column, got " +
                            shape(column.value()));
  }
  Matrix out = m.value().colwise() + column.value().col(0);
  return t.record(std::move(out), [m, column](Tape& tp, const Matrix& g) {
    tp.accumulate(m, g);
    tp.accumulate(column, g.rowwise().sum());
  });
}

Var cwise_product(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "cwise_product");
  return t.record(a.value().cwiseProduct(b.value()), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(tp.value(b)));
    tp.accumulate(b, g.cwiseProduct(tp.value(a)));
  });
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  return t.record(a.value() * factor, [a, factor](Tape& tp, const Matrix& g) { tp.accumulate(a, g * factor); });
}

Var add_scalar(Var a, double c) {
  Tape& t = tape_of(a);
  return t.record(a.value().array() + c, [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g); });
}

Var one_minus(Var a) {
  Tape& t = tape_of(a);
  return t.record(1.0 - a.value().array(), [a](Tape& tp, const Matrix& g) { tp.accumulate(a, -g); });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return t.record_with_output(std::move(out), [a](Tape& tp, const Matrix& g, const Matrix& s) {
    tp.accumulate(a, g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().tanh();
  return t.record_with_output(std::move(out), [a](Tape& tp, const Matrix& g, const Matrix& y) {
    tp.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var softplus(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  return t.record(std::move(out), [a](Tape& tp, const Matrix& g) {
    Matrix d = tp.value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().exp();
  return t.record_with_output(std::move(out), [a](Tape& tp, const Matrix& g, const Matrix& e) {
    tp.accumulate(a, g.cwiseProduct(e));
  });
}

Var colwise_sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().colwise().sum();
  return t.record(std::move(out), [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.replicate(tp.value(a).rows(), 1));
  });
}

Var square(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().array().square(), [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, 2.0 * g.cwiseProduct(tp.value(a)));
  });
}

Var hinge(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().cwiseMax(0.0), [a](Tape& tp, const Matrix& g) {
    Matrix mask = (tp.value(a).array() > 0.0).cast<double>();
    tp.accumulate(a, g.cwiseProduct(mask));
  });
}

Var rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count <= 0 || start + count > a.rows()) {
    throw ContractViolation("rows: slice [" + std::to_string(start) + ", " + std::to_string(start + count) +
                            ") out of range for " + shape(a.value()));
  }
  return t.record(a.value().middleRows(start, count), [a, start, count](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(tp.value(a).rows(), tp.value(a).cols());
    full.middleRows(start, count) = g;
    tp.accumulate(a, full);
  });
}

Var vstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("vstack: no inputs");
  Tape& t = tape_of(parts.front());
  Eigen::Index total = 0;
  for (Var p : parts) {
    tape_of(parts.front(), p);
    if (p.cols() != parts.front().cols()) throw ContractViolation("vstack: column counts differ");
    total += p.rows();
  }
  Matrix out(total, parts.front().cols());
  Eigen::Index offset = 0;
  for (Var p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return t.record(std::move(out), [parts](Tape& tp, const Matrix& g) {
    Eigen::Index off = 0;
    for (Var p : parts) {
      const Eigen::Index r = tp.value(p).rows();
      tp.accumulate(p, g.middleRows(off, r));
      off += r;
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  return t.record(Matrix::Constant(1, 1, a.value().sum()), [a](Tape& tp, const Matrix& g) {
    const Matrix& v = tp.value(a);
    tp.accumulate(a, Matrix::Constant(v.rows(), v.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var log_softmax(Var logits) {
  Tape& t = tape_of(logits);
  const Matrix& z = logits.value();
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double mx = z.col(j).maxCoeff();
    const double lse = mx + std::log((z.col(j).array() - mx).exp().sum());
    out.col(j) = z.col(j).array() - lse;
  }
  return t.record_with_output(std::move(out), [logits](Tape& tp, const Matrix& g, const Matrix& y) {
    const Matrix p = y.array().exp();
    Matrix d = g - (p.array().rowwise() * g.colwise().sum().array()).matrix();
    tp.accumulate(logits, d);
  });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

Var gaussian_nll(Var mean_v, Var sd_v, const Matrix& target) {
  Tape& t = tape_of(mean_v, sd_v);
  require_same_shape(mean_v, sd_v, "gaussian_nll");
  if (target.rows() != mean_v.rows() || target.cols() != mean_v.cols()) {
    throw ContractViolation("gaussian_nll: target shape " + shape(target) + " does not match " +
                            shape(mean_v.value()));
  }
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const auto& m = mean_v.value().array();
  const auto& s = sd_v.value().array();
  Matrix out = kHalfLog2Pi + s.log() + (target.array() - m).square() / (2.0 * s.square());
  return t.record(std::move(out), [mean_v, sd_v, target](Tape& tp, const Matrix& g) {
    const auto& mm = tp.value(mean_v).array();
    const auto& ss = tp.value(sd_v).array();
    const Eigen::ArrayXXd r = target.array() - mm;
    tp.accumulate(mean_v, (g.array() * (-r / ss.square())).matrix());
    tp.accumulate(sd_v, (g.array() * (1.0 / ss - r.square() / ss.cube())).matrix());
  });
}

}  // namespace metabayes
