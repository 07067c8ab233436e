#include <cmath>

#include "doctest.h"
#include "seqcls/ops.hpp"
#include "seqcls/optim.hpp"
#include "test_support.hpp"

using namespace seqcls;
using seqcls::testing::max_relative_error;
using seqcls::testing::random_tensor;

namespace {

Tensor<double> seq(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>({1, n, 1}, std::move(v));
}

ConvSpec single(std::size_t k, std::size_t d) { return ConvSpec{1, 1, k, d, true, false}; }

// Gradient of sum(op(x) * probe) with respect to x, tape vs central differences.
template <typename Op>
double op_grad_error(const Tensor<double>& x, Op op) {
  Rng rng(99);
  Tape<double> probe_tape;
  const Tensor<double> out_shape_probe = probe_tape.value(op(probe_tape, probe_tape.constant(x)));
  const Tensor<double> probe = random_tensor<double>(out_shape_probe.shape(), rng);

  auto loss = [&](Tape<double>& tape, Var in) {
    return ops::sum(tape, ops::mul(tape, op(tape, in), tape.constant(probe)));
  };
  Tape<double> tape;
  Var in = tape.parameter(x);
  tape.backward(loss(tape, in));
  const Tensor<double> analytic = tape.grad(in);

  auto f = [&](const Tensor<double>& v) {
    Tape<double> t;
    return t.value(loss(t, t.constant(v))).item();
  };
  return max_relative_error(analytic, finite_difference_gradient<double>(f, x, 1e-6));
}

}  // namespace

TEST_CASE("causal dilated conv matches hand-evaluated examples") {
  const Tensor<double> ones({1, 1, 3}, 1.0);
  const Tensor<double> zero_bias({1}, 0.0);
  auto out = ops::causal_dilated_conv1d(seq({1, 0, 0, 0, 0}), single(3, 2), ones, &zero_bias);
  CHECK(out.vec() == std::vector<double>{1, 0, 1, 0, 1});

  const Tensor<double> current_tap({1, 1, 3}, std::vector<double>{0, 0, 1});
  const auto x = seq({0.5, -1, 2, 3.25, 7});
  for (std::size_t d : {1, 3, 8}) CHECK(ops::causal_dilated_conv1d(x, single(3, d), current_tap) == x);

  const Tensor<double> bias({1}, 0.5);
  Rng rng(1);
  auto w = random_tensor<double>({1, 1, 3}, rng);
  auto biased = ops::causal_dilated_conv1d(seq({0, 0, 0, 0}), single(3, 4), w, &bias);
  for (double v : biased.vec()) CHECK(v == 0.5);
}

TEST_CASE("causal conv keeps length and never looks ahead") {
  Rng rng(2);
  const ConvSpec spec{3, 5, 3, 4, true, false};
  auto w = random_tensor<double>(spec.weight_shape(), rng);
  auto x = random_tensor<double>({2, 40, 3}, rng);
  const auto base = ops::causal_dilated_conv1d(x, spec, w);
  CHECK(base.shape() == Shape{2, 40, 5});
  auto bumped = x;
  bumped.at(1, 20, 2) += 10.0;
  const auto moved = ops::causal_dilated_conv1d(bumped, spec, w);
  for (std::size_t t = 0; t < 40; ++t)
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(moved.at(0, t, c) == base.at(0, t, c));
      const bool reachable = t == 20 || t == 24 || t == 28;
      if (!reachable) CHECK(moved.at(1, t, c) == base.at(1, t, c));
    }
}

TEST_CASE("conv rejects bad specs and mismatched weights") {
  const Tensor<double> w({1, 1, 3}, 1.0);
  CHECK_THROWS_AS(ops::causal_dilated_conv1d(seq({1, 2}), single(3, 0), w), ConfigError);
  CHECK_THROWS_AS(ops::causal_dilated_conv1d(seq({1, 2}), single(2, 1), w), ConfigError);
  ConvSpec acausal = single(3, 1);
  acausal.causal = false;
  CHECK_THROWS_AS(ops::causal_dilated_conv1d(seq({1, 2}), acausal, w), ConfigError);
}

TEST_CASE("swish values") {
  const Tensor<double> x({3}, std::vector<double>{0, 1, -20});
  const auto y = ops::swish(x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(0.7310585786).epsilon(1e-9));
  CHECK(y[2] == doctest::Approx(-4.1223072e-8).epsilon(1e-6));
  CHECK(y[2] < 0);
}

TEST_CASE("weight normalization") {
  const Tensor<double> dir({1, 1, 2}, std::vector<double>{3, 4});
  const auto w = ops::weight_normalized_weights(dir, Tensor<double>({1}, 1.0));
  CHECK(w[0] == doctest::Approx(0.6));
  CHECK(w[1] == doctest::Approx(0.8));
  const auto scaled = ops::weight_normalized_weights(dir, Tensor<double>({1}, 10.0));
  CHECK(scaled[0] == doctest::Approx(6.0));
  CHECK(scaled[1] == doctest::Approx(8.0));
  const Tensor<double> unit({1, 1, 2}, std::vector<double>{0.6, 0.8});
  const auto same = ops::weight_normalized_weights(unit, Tensor<double>({1}, 1.0));
  CHECK(max_relative_error(same, unit) < 1e-15);

  Rng rng(3);
  auto many = random_tensor<double>({6, 4, 3}, rng);
  auto gains = random_tensor<double>({6}, rng);
  const auto eff = ops::weight_normalized_weights(many, gains);
  for (std::size_t o = 0; o < 6; ++o) {
    double sq = 0;
    for (std::size_t i = 0; i < 12; ++i) sq += eff[o * 12 + i] * eff[o * 12 + i];
    CHECK(std::sqrt(sq) == doctest::Approx(std::abs(gains[o])).epsilon(1e-6));
  }

  const Tensor<double> zero({1, 1, 2}, 0.0);
  CHECK_THROWS_AS(ops::weight_normalized_weights(zero, Tensor<double>({1}, 1.0)), DegenerateParameterError);
}

TEST_CASE("layer norm") {
  const Tensor<double> ones({1, 1, 3}, 1.0), g1({3}, 1.0), b0({3}, 0.0);
  for (double v : ops::layer_norm(ones, g1, b0).vec()) CHECK(v == 0.0);

  const Tensor<double> pair({1, 1, 2}, std::vector<double>{1, 3});
  const auto y = ops::layer_norm(pair, Tensor<double>({2}, 1.0), Tensor<double>({2}, 0.0), 0.0);
  CHECK(y[0] == doctest::Approx(-1.0));
  CHECK(y[1] == doctest::Approx(1.0));

  Rng rng(4);
  const auto x = random_tensor<double>({2, 3, 4}, rng);
  for (double v : ops::layer_norm(x, Tensor<double>({4}, 0.0), Tensor<double>({4}, 5.0)).vec()) CHECK(v == 5.0);
}

TEST_CASE("dropout") {
  Rng rng(5);
  const auto x = random_tensor<double>({1000}, rng);
  CHECK(ops::dropout(x, 0.0, true, rng) == x);
  CHECK(ops::dropout(x, 0.7, false, rng) == x);
  CHECK_THROWS_AS(ops::dropout(x, 1.0, true, rng), ConfigError);
  CHECK_THROWS_AS(ops::dropout(x, -0.1, true, rng), ConfigError);

  for (double rate : {0.2, 0.5}) {
    const Tensor<double> ones({100000}, 1.0);
    Rng r(6);
    const auto y = ops::dropout(ones, rate, true, r);
    double mean = 0;
    std::size_t zeros = 0;
    for (double v : y.vec()) {
      mean += v;
      zeros += v == 0.0;
      if (v != 0.0) CHECK(v == doctest::Approx(1.0 / (1.0 - rate)));
    }
    mean /= 100000.0;
    CHECK(std::abs(mean - 1.0) < 0.01);
    CHECK(std::abs(static_cast<double>(zeros) / 100000.0 - rate) < 0.01);
  }
}

TEST_CASE("global average pool") {
  CHECK(ops::global_average_pool(seq({1, 2, 3})).item() == doctest::Approx(2.0));
  CHECK(ops::global_average_pool(seq({4.5, 4.5, 4.5, 4.5})).item() == doctest::Approx(4.5));
  CHECK(ops::global_average_pool(seq({-1, 1})).item() == 0.0);
  Tensor<double> x({2, 2, 3});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const auto p = ops::global_average_pool(x);
  CHECK(p.shape() == Shape{2, 3});
  CHECK(p.vec() == std::vector<double>{1.5, 2.5, 3.5, 7.5, 8.5, 9.5});
}

TEST_CASE("softmax") {
  const auto u = ops::softmax(Tensor<double>({1, 4}, 0.0));
  for (double v : u.vec()) CHECK(v == doctest::Approx(0.25));

  const auto big = ops::softmax(Tensor<double>({1, 4}, std::vector<double>{1000, 0, 0, 0}));
  CHECK(big.all_finite());
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] < 1e-300);

  Rng rng(7);
  const auto x = random_tensor<double>({5, 4}, rng, 3.0);
  auto shifted = x;
  for (auto& v : shifted.data()) v += 17.25;
  const auto a = ops::softmax(x), b = ops::softmax(shifted);
  CHECK(max_relative_error(a, b) < 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      s += a.at(r, c);
      CHECK(a.at(r, c) >= 0.0);
      CHECK(a.at(r, c) <= 1.0);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }

  const auto f = ops::softmax(Tensor<float>({1, 3}, std::vector<float>{88.f, -88.f, 3.f}));
  CHECK(f.all_finite());
}

TEST_CASE("tape backward basics") {
  Tape<double> tape;
  const Tensor<double> xv({3}, std::vector<double>{1.5, -2, 4});
  Var w = tape.parameter(Tensor<double>({3}, std::vector<double>{0.3, 0.1, -0.7}));
  Var x = tape.constant(xv);
  Var loss = ops::sum(tape, ops::mul(tape, w, x));
  tape.backward(loss);
  CHECK(tape.grad(w) == xv);
  CHECK(tape.grad(loss).item() == 1.0);

  Tape<double> t2;
  Var z = t2.parameter(Tensor<double>::scalar(0.0));
  Var s = ops::swish(t2, z);
  t2.backward(s);
  CHECK(t2.grad(z).item() == doctest::Approx(0.5));

  Tape<double> t3;
  Var v = t3.parameter(Tensor<double>({2}, 1.0));
  CHECK_THROWS_AS(t3.backward(v), ContractError);
  CHECK_THROWS_AS(t3.grad(v), ContractError);
}

TEST_CASE("finite differences") {
  auto square = [](const Tensor<double>& x) { return x[0] * x[0]; };
  const auto g = finite_difference_gradient<double>(square, Tensor<double>::scalar(3.0), 1e-4);
  CHECK(std::abs(g.item() - 6.0) < 1e-6);
  auto constant = [](const Tensor<double>&) { return 42.0; };
  for (double v : finite_difference_gradient<double>(constant, Tensor<double>({4}, 1.0), 1e-3).vec())
    CHECK(v == 0.0);
  CHECK_THROWS_AS(finite_difference_gradient<double>(constant, Tensor<double>({1}, 1.0), 0.0), ConfigError);
}

TEST_CASE("per-op gradients agree with central differences") {
  Rng rng(8);
  const auto x = random_tensor<double>({2, 9, 3}, rng);

  SUBCASE("conv input, weights and bias") {
    const ConvSpec spec{3, 4, 3, 2, true, false};
    const auto w = random_tensor<double>(spec.weight_shape(), rng);
    const auto b = random_tensor<double>({4}, rng);
    CHECK(op_grad_error(x, [&](Tape<double>& t, Var in) {
            return ops::conv1d(t, in, t.constant(w), t.constant(b), spec);
          }) < 1e-7);
    CHECK(op_grad_error(w, [&](Tape<double>& t, Var in) {
            return ops::conv1d(t, t.constant(x), in, t.constant(b), spec);
          }) < 1e-7);
    CHECK(op_grad_error(b, [&](Tape<double>& t, Var in) {
            return ops::conv1d(t, t.constant(x), t.constant(w), in, spec);
          }) < 1e-7);
  }
  SUBCASE("weight norm direction and gain") {
    const auto dir = random_tensor<double>({4, 3, 2}, rng);
    const auto gain = random_tensor<double>({4}, rng);
    CHECK(op_grad_error(dir, [&](Tape<double>& t, Var in) { return ops::weight_norm(t, in, t.constant(gain)); }) <
          1e-7);
    CHECK(op_grad_error(gain, [&](Tape<double>& t, Var in) { return ops::weight_norm(t, t.constant(dir), in); }) <
          1e-7);
  }
  SUBCASE("activations") {
    CHECK(op_grad_error(x, [](Tape<double>& t, Var in) { return ops::swish(t, in); }) < 1e-7);
    CHECK(op_grad_error(x, [](Tape<double>& t, Var in) { return ops::relu(t, in); }) < 1e-7);
  }
  SUBCASE("layer norm") {
    const auto g = random_tensor<double>({3}, rng), b = random_tensor<double>({3}, rng);
    CHECK(op_grad_error(x, [&](Tape<double>& t, Var in) {
            return ops::layer_norm(t, in, t.constant(g), t.constant(b));
          }) < 1e-6);
    CHECK(op_grad_error(g, [&](Tape<double>& t, Var in) {
            return ops::layer_norm(t, t.constant(x), in, t.constant(b));
          }) < 1e-7);
    CHECK(op_grad_error(b, [&](Tape<double>& t, Var in) {
            return ops::layer_norm(t, t.constant(x), t.constant(g), in);
          }) < 1e-7);
  }
  SUBCASE("dropout, pooling, softmax, focal loss") {
    CHECK(op_grad_error(x, [](Tape<double>& t, Var in) {
            Rng r(3);
            return ops::dropout(t, in, 0.3, true, r);
          }) < 1e-7);
    CHECK(op_grad_error(x, [](Tape<double>& t, Var in) { return ops::global_average_pool(t, in); }) < 1e-7);
    const auto logits = random_tensor<double>({3, 4}, rng);
    CHECK(op_grad_error(logits, [](Tape<double>& t, Var in) { return ops::softmax(t, in); }) < 1e-7);
    FocalLossConfig cfg;
    cfg.alpha = {0.5, 1.0, 1.5, 2.0};
    const std::vector<int> labels{2, 0, 3};
    CHECK(op_grad_error(logits, [&](Tape<double>& t, Var in) {
            return ops::focal_loss(t, ops::softmax(t, in), labels, cfg);
          }) < 1e-6);
  }
}

TEST_CASE("two-layer stack under focal loss matches central differences") {
  Rng rng(9);
  const ConvSpec s1{1, 4, 3, 1, true, false}, s2{4, 4, 3, 2, true, false};
  const auto x = random_tensor<double>({2, 16, 1}, rng);
  const auto w1 = random_tensor<double>(s1.weight_shape(), rng, 0.5);
  const auto w2 = random_tensor<double>(s2.weight_shape(), rng, 0.5);
  FocalLossConfig cfg;
  cfg.alpha = {1.0, 2.0, 0.5, 1.5};
  const std::vector<int> labels{1, 3};

  auto build = [&](Tape<double>& t, Var a, Var b) {
    Var h = ops::swish(t, ops::conv1d(t, t.constant(x), a, std::nullopt, s1));
    Var logits = ops::global_average_pool(t, ops::conv1d(t, h, b, std::nullopt, s2));
    return ops::focal_loss(t, ops::softmax(t, logits), labels, cfg);
  };
  Tape<double> tape;
  Var a = tape.parameter(w1), b = tape.parameter(w2);
  tape.backward(build(tape, a, b));
  auto f1 = [&](const Tensor<double>& v) {
    Tape<double> t;
    return t.value(build(t, t.constant(v), t.constant(w2))).item();
  };
  auto f2 = [&](const Tensor<double>& v) {
    Tape<double> t;
    return t.value(build(t, t.constant(w1), t.constant(v))).item();
  };
  CHECK(max_relative_error(tape.grad(a), finite_difference_gradient<double>(f1, w1, 1e-6)) < 1e-4);
  CHECK(max_relative_error(tape.grad(b), finite_difference_gradient<double>(f2, w2, 1e-6)) < 1e-4);
}

TEST_CASE("float forward is deterministic") {
  Rng rng(10);
  const ConvSpec spec{2, 3, 3, 4, true, false};
  const auto w = random_tensor<float>(spec.weight_shape(), rng);
  const auto x = random_tensor<float>({2, 50, 2}, rng);
  CHECK(ops::causal_dilated_conv1d(x, spec, w) == ops::causal_dilated_conv1d(x, spec, w));
}
