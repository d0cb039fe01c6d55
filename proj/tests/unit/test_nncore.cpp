#include <cmath>

#include "doctest.h"
#include "metabayes/errors.hpp"
#include "metabayes/nncore/gradient_check.hpp"
#include "metabayes/nncore/layers.hpp"
#include "metabayes/nncore/optimizer.hpp"
#include "metabayes/nncore/tape.hpp"
#include "metabayes/tasks/rng.hpp"
#include "support/finite_diff.hpp"

using namespace metabayes;

namespace {

Matrix column(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

struct GruFixture {
  MetaParams params;
  DenseLayer encoder;
  GruCell cell;
  DenseLayer head;
  std::size_t initial = 0;
};

GruFixture make_gru_fixture(Eigen::Index hidden, std::uint64_t seed) {
  GruFixture f;
  f.encoder = add_dense(f.params, "encoder", 1, hidden);
  f.cell = add_gru(f.params, "gru", hidden, hidden);
  f.initial = f.params.add("gru.initial_state", hidden, 1);
  f.head = add_dense(f.params, "head", hidden, 2);
  SeededRng rng(seed);
  // Random values everywhere, including biases, so no gradient path is trivially zero.
  for (std::size_t i = 0; i < f.params.size(); ++i) {
    auto d = f.params.data(i);
    for (Eigen::Index k = 0; k < d.size(); ++k) d.data()[k] = 0.5 * rng.normal();
  }
  return f;
}

// Mean Gaussian NLL of a GRU run over `seq` (rows: time, cols: batch).
Var gru_nll(Tape& tape, const GruFixture& f, const MetaParams& p, const Matrix& seq) {
  const Eigen::Index hidden = p[f.initial].rows();
  Var h = add_colwise(tape.constant(Matrix::Zero(hidden, seq.cols())), tape.parameter(p, f.initial));
  std::vector<Var> terms;
  for (Eigen::Index t = 0; t + 1 < seq.rows(); ++t) {
    Var x = tape.constant(seq.row(t));
    h = gru_step(tape, p, f.cell, dense_forward(tape, p, f.encoder, x), h);
    Var out = dense_forward(tape, p, f.head, h);
    Var sd = add_scalar(softplus(rows(out, 1, 1)), 1e-4);
    terms.push_back(gaussian_nll(rows(out, 0, 1), sd, seq.row(t + 1)));
  }
  return mean(vstack(terms));
}

}  // namespace

TEST_CASE("dense_forward computes W x + b") {
  MetaParams p;
  DenseLayer layer = add_dense(p, "d", 2, 2);

  SUBCASE("identity") {
    p.assign(layer.weight, Matrix::Identity(2, 2));
    Tape tape;
    Var y = dense_forward(tape, p, layer, tape.constant(column({3, -1})));
    CHECK(y.value()(0, 0) == 3.0);
    CHECK(y.value()(1, 0) == -1.0);
  }
  SUBCASE("hand multiply") {
    Matrix w(2, 2);
    w << 1, 2, 3, 4;
    p.assign(layer.weight, w);
    Tape tape;
    Var y = dense_forward(tape, p, layer, tape.constant(column({1, 1})));
    CHECK(y.value()(0, 0) == 3.0);
    CHECK(y.value()(1, 0) == 7.0);
  }
  SUBCASE("dimension mismatch") {
    Tape tape;
    CHECK_THROWS_AS(dense_forward(tape, p, layer, tape.constant(column({1, 2, 3}))), ContractViolation);
  }
}

TEST_CASE("dense_forward with zero weights passes the bias") {
  MetaParams p;
  DenseLayer layer = add_dense(p, "d", 3, 1);
  p.assign(layer.bias, column({5}));
  Tape tape;
  Var y = dense_forward(tape, p, layer, tape.constant(column({0.3, -7, 2})));
  CHECK(y.value()(0, 0) == 5.0);
}

TEST_CASE("gru_step zero-weight algebra") {
  MetaParams p;
  GruCell cell = add_gru(p, "gru", 2, 3);
  Tape tape;
  Matrix old = column({0.4, -0.8, 0.1});
  Var h = gru_step(tape, p, cell, tape.constant(column({1.5, -2})), tape.constant(old));
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(h.value()(i, 0) == doctest::Approx(0.5 * old(i, 0)).epsilon(1e-15));
}

TEST_CASE("gru_step has a fixed point at the origin when biases vanish") {
  GruFixture f = make_gru_fixture(4, 3);
  for (std::size_t idx : {f.cell.bias_input, f.cell.bias_hidden}) f.params.data(idx).setZero();
  Tape tape;
  Var h = gru_step(tape, f.params, f.cell, tape.constant(Matrix::Zero(4, 1)), tape.constant(Matrix::Zero(4, 1)));
  CHECK(h.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gru_step keeps states inside (-1, 1)") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    GruFixture f = make_gru_fixture(6, seed);
    SeededRng rng(seed + 1000);
    Matrix state(6, 8), input(6, 8);
    for (Eigen::Index k = 0; k < state.size(); ++k) {
      state.data()[k] = 2.0 * rng.uniform() - 1.0;
      input.data()[k] = 3.0 * rng.normal();
    }
    Tape tape;
    Var h = gru_step(tape, f.params, f.cell, tape.constant(input), tape.constant(state));
    CHECK(h.value().cwiseAbs().maxCoeff() < 1.0);
  }
}

TEST_CASE("gru_step rejects mismatched shapes") {
  MetaParams p;
  GruCell cell = add_gru(p, "gru", 2, 3);
  Tape tape;
  CHECK_THROWS_AS(gru_step(tape, p, cell, tape.constant(Matrix::Zero(3, 1)), tape.constant(Matrix::Zero(3, 1))),
                  ContractViolation);
  CHECK_THROWS_AS(gru_step(tape, p, cell, tape.constant(Matrix::Zero(2, 1)), tape.constant(Matrix::Zero(2, 1))),
                  ContractViolation);
}

TEST_CASE("backward on elementary losses") {
  MetaParams p;
  const std::size_t theta = p.add("theta", 1, 1);
  const std::size_t unused = p.add("unused", 2, 2);
  p.assign(theta, Matrix::Constant(1, 1, 3.0));

  SUBCASE("quadratic") {
    Tape tape;
    MetaParams g = tape.backward(sum(square(tape.parameter(p, theta))));
    CHECK(g[theta](0, 0) == 6.0);
    CHECK(g[unused].cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("constant function") {
    Tape tape;
    tape.parameter(p, theta);
    MetaParams g = tape.backward(sum(tape.constant(Matrix::Constant(1, 1, 4.0))));
    CHECK(g[theta](0, 0) == 0.0);
  }
  SUBCASE("non-scalar loss is a contract violation") {
    Tape tape;
    Var v = tape.parameter(p, unused);
    CHECK_THROWS_AS(tape.backward(v), ContractViolation);
  }
}

TEST_CASE("backward through an 8-unit GRU matches central finite differences") {
  GruFixture f = make_gru_fixture(8, 11);
  SeededRng rng(5);
  Matrix seq(6, 3);  // 5 recurrent steps, 3 sequences
  for (Eigen::Index k = 0; k < seq.size(); ++k) seq.data()[k] = rng.normal(10.0, 3.0);

  Tape tape;
  MetaParams analytic = tape.backward(gru_nll(tape, f, f.params, seq));
  MetaParams numeric = testing::finite_difference_gradient(
      [&](const MetaParams& p) {
        Tape t;
        return gru_nll(t, f, p, seq).scalar();
      },
      f.params, 1e-5);
  CHECK(testing::max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("forward and backward are bitwise deterministic") {
  GruFixture f = make_gru_fixture(5, 2);
  Matrix seq = Matrix::Constant(4, 2, 9.0);
  seq(1, 0) = 13.0;
  Tape t1, t2;
  Var l1 = gru_nll(t1, f, f.params, seq);
  Var l2 = gru_nll(t2, f, f.params, seq);
  CHECK(l1.scalar() == l2.scalar());
  CHECK(bitwise_equal(t1.backward(l1), t2.backward(l2)));
}

TEST_CASE("elementwise primitives match finite differences") {
  MetaParams p;
  const std::size_t a = p.add("a", 3, 4);
  const std::size_t b = p.add("b", 3, 4);
  SeededRng rng(9);
  for (std::size_t i : {a, b}) {
    auto d = p.data(i);
    for (Eigen::Index k = 0; k < d.size(); ++k) d.data()[k] = rng.normal();
  }
  auto loss = [&](Tape& t, const MetaParams& q) {
    Var x = t.parameter(q, a);
    Var y = t.parameter(q, b);
    Var z = cwise_product(log_softmax(x), softplus(y)) + scale(hinge(x - y), 0.7) + one_minus(sigmoid(y));
    Var w = cwise_product(exp(scale(y, 0.3)), x);
    return mean(cwise_product(z, tanh(x))) + sum(colwise_sum(cwise_product(w, tanh(y))));
  };
  Tape tape;
  MetaParams analytic = tape.backward(loss(tape, p));
  MetaParams numeric = testing::finite_difference_gradient(
      [&](const MetaParams& q) {
        Tape t;
        return loss(t, q).scalar();
      },
      p);
  CHECK(testing::max_relative_error(analytic, numeric) < 1e-6);
}

TEST_CASE("adam_step") {
  MetaParams p;
  const std::size_t w = p.add("w", 2, 2);
  p.assign(w, (Matrix(2, 2) << 1.0, -2.0, 0.5, 3.0).finished());
  OptimizerState opt = OptimizerState::for_params(p, {});

  SUBCASE("zero gradient leaves parameters bitwise unchanged and decays moments") {
    MetaParams g = p.zeros_like();
    g.data(w) << 0.3, -0.1, 0.2, 0.0;
    adam_step(p, g, opt);
    const MetaParams before = p;
    const Matrix m_before = opt.first_moment[w];
    const Matrix v_before = opt.second_moment[w];
    adam_step(p, p.zeros_like(), opt);
    CHECK(bitwise_equal(p, before));
    CHECK((opt.first_moment[w] - 0.9 * m_before).cwiseAbs().maxCoeff() == 0.0);
    CHECK((opt.second_moment[w] - 0.999 * v_before).cwiseAbs().maxCoeff() == 0.0);
    CHECK(opt.step == 2);
  }
  SUBCASE("first step moves each entry by lr against the gradient sign") {
    const MetaParams before = p;
    MetaParams g = p.zeros_like();
    g.data(w) << 0.3, -0.1, 2e-3, -50.0;
    adam_step(p, g, opt);
    for (Eigen::Index k = 0; k < 4; ++k) {
      const double delta = p[w].data()[k] - before[w].data()[k];
      const double sign = g[w].data()[k] > 0 ? 1.0 : -1.0;
      CHECK(delta == doctest::Approx(-1e-3 * sign).epsilon(1e-4));
    }
  }
  SUBCASE("constant gradient: second step no larger than the first") {
    MetaParams g = p.zeros_like();
    g.data(w) << 0.3, -0.1, 0.2, 1.0;
    const MetaParams p0 = p;
    adam_step(p, g, opt);
    const MetaParams p1 = p;
    adam_step(p, g, opt);
    const double first = (p1[w] - p0[w]).cwiseAbs().maxCoeff();
    const double second = (p[w] - p1[w]).cwiseAbs().maxCoeff();
    CHECK(second <= first * 1.01);
  }
  SUBCASE("NaN gradient aborts the step and names the parameter") {
    const MetaParams before = p;
    MetaParams g = p.zeros_like();
    g.data(w)(1, 0) = std::nan("");
    try {
      adam_step(p, g, opt);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("'w'") != std::string::npos);
    }
    CHECK(bitwise_equal(p, before));
    CHECK(opt.step == 0);
  }
}

TEST_CASE("sgd_step is plain descent") {
  MetaParams p;
  const std::size_t w = p.add("w", 1, 2);
  p.assign(w, (Matrix(1, 2) << 1.0, 2.0).finished());
  OptimizerSettings s;
  s.kind = OptimizerKind::sgd;
  s.learning_rate = 0.5;
  OptimizerState opt = OptimizerState::for_params(p, s);
  MetaParams g = p.zeros_like();
  g.data(w) << 2.0, -4.0;
  optimizer_step(p, g, opt);
  CHECK(p[w](0, 0) == 0.0);
  CHECK(p[w](0, 1) == 4.0);
}

TEST_CASE("gradient_check") {
  SUBCASE("linear model is exact") {
    MetaParams p;
    DenseLayer layer = add_dense(p, "lin", 3, 2);
    SeededRng rng(1);
    glorot_uniform_init(p, rng);
    const Matrix x = (Matrix(3, 2) << 1, 2, -1, 0.5, 3, 1).finished();
    auto report = gradient_check(
        [&](Tape& t, const MetaParams& q) { return sum(dense_forward(t, q, layer, t.constant(x))); }, p,
        {.tolerance = 1e-10});
    CHECK(report.passed);
    CHECK(report.max_relative_error < 1e-10);
    CHECK(report.checked == p.parameter_count());
  }
  SUBCASE("GRU with Gaussian head") {
    GruFixture f = make_gru_fixture(8, 4);
    SeededRng rng(8);
    Matrix seq(6, 4);
    for (Eigen::Index k = 0; k < seq.size(); ++k) seq.data()[k] = rng.normal(10.0, 3.0);
    auto report =
        gradient_check([&](Tape& t, const MetaParams& q) { return gru_nll(t, f, q, seq); }, f.params);
    CHECK(report.passed);
    CHECK(report.max_relative_error < 1e-4);
  }
  SUBCASE("a corrupted backward rule is caught and localized") {
    MetaParams p;
    DenseLayer inner = add_dense(p, "inner", 2, 3);
    DenseLayer outer = add_dense(p, "outer", 3, 1);
    SeededRng rng(2);
    glorot_uniform_init(p, rng);
    const Matrix x = (Matrix(2, 3) << 0.3, -1.2, 2.0, 1.1, 0.4, -0.7).finished();
    auto broken_sigmoid = [](Var a) {
      Matrix out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      // Wrong rule: drops the (1 - s) factor.
      return a.tape->record_with_output(std::move(out), [a](Tape& tp, const Matrix& g, const Matrix& s) {
        tp.accumulate(a, g.cwiseProduct(s));
      });
    };
    auto report = gradient_check(
        [&](Tape& t, const MetaParams& q) {
          Var hdn = broken_sigmoid(dense_forward(t, q, inner, t.constant(x)));
          return sum(dense_forward(t, q, outer, hdn));
        },
        p);
    CHECK_FALSE(report.passed);
    CHECK(report.max_relative_error > 1e-2);
    CHECK(report.worst_parameter.rfind("inner.", 0) == 0);
  }
  SUBCASE("non-determinism is reported") {
    MetaParams p;
    const std::size_t w = p.add("w", 1, 1);
    int calls = 0;
    CHECK_THROWS_AS(gradient_check(
                        [&](Tape& t, const MetaParams& q) {
                          ++calls;
                          return add_scalar(sum(t.parameter(q, w)), 1e-3 * calls);
                        },
                        p),
                    NonDeterminismError);
  }
}

TEST_CASE("glorot init: bounded matrices, zero biases, deterministic") {
  MetaParams a, b;
  for (MetaParams* p : {&a, &b}) {
    add_dense(*p, "d", 4, 6);
    add_gru(*p, "g", 6, 6);
  }
  SeededRng r1(7), r2(7);
  glorot_uniform_init(a, r1);
  glorot_uniform_init(b, r2);
  CHECK(bitwise_equal(a, b));
  CHECK(a[0].cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 10.0));
  CHECK(a[1].cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.parameter_count() == 6 * 4 + 6 + 18 * 6 * 2 + 18 * 2);
}
