#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "seqforge/adam.hpp"
#include "seqforge/tensor.hpp"

using namespace seqforge;

TEST_CASE("matmul matches hand-computed products") {
  auto eye = Tensor::from({{1, 0}, {0, 1}});
  auto a = Tensor::from({{1, 2}, {3, 4}});
  CHECK(matmul(eye, a).value() == a.value());
  CHECK(matmul(a, eye).value() == a.value());

  auto b = Tensor::from({{5}, {6}});
  auto c = matmul(a, b);
  CHECK(c.value()(0, 0) == 17.0);
  CHECK(c.value()(1, 0) == 39.0);

  CHECK_THROWS_AS(matmul(a, Tensor::from({{1, 2, 3}})), DimensionError);
  try {
    matmul(a, Tensor::from({{1, 2, 3}}));
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x2)") != std::string::npos);
    CHECK(msg.find("(1x3)") != std::string::npos);
  }
}

TEST_CASE("matmul backward accumulates dA = dC B^T and dB = A^T dC") {
  auto a = Tensor::from({{1, 2}, {3, 4}}, true);
  auto b = Tensor::from({{5}, {6}}, true);
  auto loss = sum(matmul(a, b));
  backward(loss);
  CHECK(a.grad()(0, 0) == 5);
  CHECK(a.grad()(0, 1) == 6);
  CHECK(a.grad()(1, 0) == 5);
  CHECK(b.grad()(0, 0) == 4);  // column sums of A
  CHECK(b.grad()(1, 0) == 6);

  // Repeated backward without reset accumulates.
  auto loss2 = sum(matmul(a, b));
  backward(loss2);
  CHECK(a.grad()(0, 0) == 10);
}

TEST_CASE("softmax normalizes, stabilizes and shift-invariates") {
  auto flat = softmax(Tensor::vec({3.7, 3.7, 3.7, 3.7}));
  for (Index i = 0; i < 4; ++i) CHECK(flat.value()(i) == doctest::Approx(0.25).epsilon(1e-15));

  auto s = softmax(Tensor::vec({0.0, std::log(3.0)}));
  CHECK(s.value()(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s.value()(1) == doctest::Approx(0.75).epsilon(1e-12));

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixOf<double> v(5, 1);
    for (Index i = 0; i < 5; ++i) v(i) = rng.normal() * 10;
    auto base = softmax(Tensor::constant(v));
    auto shifted = softmax(Tensor::constant((v.array() + 10.0).matrix()));
    CHECK(std::abs(base.value().sum() - 1.0) < 1e-12);
    for (Index i = 0; i < 5; ++i) CHECK(base.value()(i) == doctest::Approx(shifted.value()(i)).epsilon(1e-14));
  }

  // Huge magnitudes stay finite thanks to max subtraction.
  auto big = softmax(Tensor::vec({1e4, 1e4 - 1}));
  CHECK(all_finite(big));

  CHECK_THROWS_AS(softmax(Tensor::zeros(0, 1)), std::domain_error);
}

TEST_CASE("sparse cross entropy values") {
  SUBCASE("uniform logits give ln(C)") {
    for (int c : {2, 7, 31}) {
      auto logits = Tensor::constant(MatrixOf<double>::Constant(c, 1, 0.42));
      CHECK(sparse_cross_entropy(logits, c / 2).scalar() == doctest::Approx(std::log(c)).epsilon(1e-12));
    }
  }
  SUBCASE("certainty drives the loss to zero") {
    MatrixOf<double> logits = MatrixOf<double>::Zero(5, 1);
    logits(3) = 1e6;
    CHECK(sparse_cross_entropy(Tensor::constant(logits), 3).scalar() < 1e-6);
  }
  SUBCASE("hand value for [1, 2] target 0") {
    auto loss = sparse_cross_entropy(Tensor::vec({1.0, 2.0}), 0);
    CHECK(loss.scalar() == doctest::Approx(1.3132616875182228).epsilon(1e-14));
  }
  SUBCASE("masked positions contribute nothing") {
    auto logits = Tensor::vec({1.0, 2.0}, true);
    auto loss = sparse_cross_entropy(logits, 0, /*masked=*/true);
    CHECK(loss.scalar() == 0.0);
    CHECK_FALSE(loss.requires_grad());
  }
  SUBCASE("out-of-range target") {
    CHECK_THROWS_AS(sparse_cross_entropy(Tensor::vec({1.0, 2.0}), 2), std::out_of_range);
    CHECK_THROWS_AS(sparse_cross_entropy(Tensor::vec({1.0, 2.0}), -1), std::out_of_range);
  }
  SUBCASE("loss is nonnegative on random logits") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
      MatrixOf<double> v(6, 1);
      for (Index i = 0; i < 6; ++i) v(i) = rng.normal() * 3;
      CHECK(sparse_cross_entropy(Tensor::constant(v), static_cast<Index>(rng.uniform_int(6))).scalar() >= 0.0);
    }
  }
}

TEST_CASE("backward contracts") {
  auto w = Tensor::from({{1, 2}, {3, 4}}, true);
  SUBCASE("sum gives all-ones gradient") {
    backward(sum(w));
    for (Index i = 0; i < 4; ++i) CHECK(w.grad().data()[i] == 1.0);
  }
  SUBCASE("quadratic rule") {
    auto v = Tensor::from({{1, 2}}, true);
    backward(sum(cmul(v, v)));
    CHECK(v.grad()(0, 0) == 2.0);
    CHECK(v.grad()(0, 1) == 4.0);
  }
  SUBCASE("non-scalar loss is rejected") { CHECK_THROWS_AS(backward(w), ContractError); }
}

TEST_CASE("gradient check: every primitive against finite differences") {
  Rng rng(101);
  const auto randm = [&](Index r, Index c) {
    MatrixOf<double> m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
  };

  auto a = Tensor::param(randm(3, 4));
  auto b = Tensor::param(randm(4, 2));
  auto c = Tensor::param(randm(3, 2));
  auto v = Tensor::param(randm(5, 1));

  std::vector<std::pair<std::string, Tensor*>> params = {{"a", &a}, {"b", &b}, {"c", &c}, {"v", &v}};

  const auto check = [&](const char* what, std::function<Tensor()> fn) {
    auto r = testing::gradient_check(params, fn);
    INFO(what, " worst=", r.worst_param);
    CHECK(r.max_rel_err < 1e-4);
  };

  check("matmul+add", [&] { return sum(matmul(a, b) + c); });
  check("sub/cmul/scale", [&] { return sum(cmul(scale(c, 1.7), matmul(a, b) - c)); });
  check("sigmoid", [&] { return sum(sigmoid(matmul(a, b))); });
  check("tanh", [&] { return sum(tanh(matmul(a, b))); });
  check("transpose", [&] { return sum(matmul(transpose(b), transpose(a))); });
  check("softmax", [&] { return sum(cmul(softmax(v), Tensor::vec({1, 2, 3, 4, 5}))); });
  check("masked_softmax", [&] {
    auto w = masked_softmax(v, {true, false, true, true, false});
    return sum(cmul(w, Tensor::vec({1, 2, 3, 4, 5})));
  });
  check("cross_entropy", [&] { return sparse_cross_entropy(v, 2); });
}

TEST_CASE("gradient check: gather, stack and concat ops") {
  Rng rng(202);
  const auto randm = [&](Index r, Index c) {
    MatrixOf<double> m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
  };
  auto table = Tensor::param(randm(6, 4));
  auto v = Tensor::param(randm(4, 1));
  std::vector<std::pair<std::string, Tensor*>> params = {{"table", &table}, {"v", &v}};

  auto fn = [&] {
    auto rows = gather_rows(table, {1, 3, 1});  // repeated id accumulates
    auto col = transpose(gather_rows(table, {5}));
    auto stacked = stack_rows(std::vector<Tensor>{col, v, cmul(col, v)});
    auto tiled = rep_rows(v, 3);
    return sum(cmul(hconcat(rows, stacked), hconcat(tiled, tiled))) + sum(vconcat(col, v));
  };
  auto r = testing::gradient_check(params, fn);
  INFO("worst=", r.worst_param);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("gather gradient equals the dense one-hot oracle") {
  Rng rng(303);
  MatrixOf<double> tv(6, 4);
  for (Index i = 0; i < tv.size(); ++i) tv.data()[i] = rng.normal();
  const std::vector<TokenId> ids = {2, 5, 2};

  auto table_a = Tensor::param(tv);
  auto loss_a = sum(cmul(gather_rows(table_a, ids), gather_rows(table_a, ids)));
  backward(loss_a);

  // One-hot matmul route: G = onehot * table.
  MatrixOf<double> onehot = MatrixOf<double>::Zero(3, 6);
  for (std::size_t i = 0; i < ids.size(); ++i) onehot(static_cast<Index>(i), ids[i]) = 1.0;
  auto table_b = Tensor::param(tv);
  auto gathered = matmul(Tensor::constant(onehot), table_b);
  auto loss_b = sum(cmul(gathered, gathered));
  backward(loss_b);

  CHECK(loss_a.scalar() == doctest::Approx(loss_b.scalar()).epsilon(1e-15));
  for (Index i = 0; i < tv.size(); ++i)
    CHECK(table_a.grad().data()[i] == doctest::Approx(table_b.grad().data()[i]).epsilon(1e-12));
}

TEST_CASE("forward passes stay finite on random finite inputs") {
  Rng rng(404);
  for (int trial = 0; trial < 30; ++trial) {
    MatrixOf<double> m(4, 3), n(3, 4);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * 50;
    for (Index i = 0; i < n.size(); ++i) n.data()[i] = rng.normal() * 50;
    auto a = Tensor::param(m);
    auto b = Tensor::param(n);
    auto y = sum(sigmoid(matmul(a, b)) + tanh(matmul(a, b)));
    CHECK(all_finite(y));
    backward(y);
    CHECK(a.grad().allFinite());
    CHECK(b.grad().allFinite());
  }
}

TEST_CASE("adam with zero gradients is the identity") {
  auto p = Tensor::from({{1.5, -2.5}, {3.5, 0.0}}, true);
  const MatrixOf<double> before = p.value();
  auto st = AdamState::zeros_like(p);
  p.grad_ref().setZero();
  for (int i = 0; i < 25; ++i) adam_step(p, st);
  CHECK(p.value() == before);
  CHECK(st.step_count == 25);
}

TEST_CASE("adam first step moves by about the learning rate") {
  for (double g : {0.3, -4.0, 123.0}) {
    auto p = Tensor::from({{1.0}}, true);
    auto st = AdamState::zeros_like(p, 0.01);
    p.grad_ref()(0, 0) = g;
    adam_step(p, st);
    const double update = 1.0 - p.scalar();
    // First-step algebra: update = lr * g / (|g| + eps / sqrt(1 - beta2)).
    CHECK(std::abs(update) == doctest::Approx(0.01).epsilon(1e-4));
    CHECK(std::signbit(update) == std::signbit(g));
  }
}

TEST_CASE("adam on a 1-d quadratic tracks the reference recurrences") {
  // Reference run of the Adam recurrences on f(w) = w^2, w0 = 1, lr = 0.1.
  // That run shows |w| falling strictly until the iterate crosses zero at
  // step 12, where momentum carries it past the minimum, so the strict
  // decrease is asserted over the first 11 steps and the whole trajectory is
  // matched against the recurrences directly.
  auto w = Tensor::from({{1.0}}, true);
  auto st = AdamState::zeros_like(w, 0.1);

  double ref_w = 1.0, ref_m = 0.0, ref_v = 0.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double prev = 1.0;
  for (int t = 1; t <= 20; ++t) {
    w.zero_grad();
    auto loss = cmul(w, w);
    backward(loss);
    adam_step(w, st);

    const double g = 2.0 * ref_w;
    ref_m = b1 * ref_m + (1 - b1) * g;
    ref_v = b2 * ref_v + (1 - b2) * g * g;
    ref_w -= 0.1 * (ref_m / (1 - std::pow(b1, t))) / (std::sqrt(ref_v / (1 - std::pow(b2, t))) + eps);

    CHECK(w.scalar() == doctest::Approx(ref_w).epsilon(1e-12));
    if (t <= 11) {
      CHECK(std::abs(w.scalar()) < prev);
      prev = std::abs(w.scalar());
    }
  }
}

TEST_CASE("adam contract errors") {
  auto p = Tensor::from({{1.0}}, true);
  auto st = AdamState::zeros_like(p);
  CHECK_THROWS_AS(adam_step(p, st), ContractError);  // no grad yet
  p.grad_ref()(0, 0) = 1.0;
  st.m = MatrixOf<double>::Zero(2, 2);
  CHECK_THROWS_AS(adam_step(p, st), DimensionError);
}

TEST_CASE("dropout scales surviving units and is identity in eval") {
  Rng rng(7);
  auto x = Tensor::constant(MatrixOf<double>::Constant(8, 1, 2.0));
  SUBCASE("rate zero and eval mode are identities") {
    CHECK(dropout(x, 0.0, rng, true).value() == x.value());
    CHECK(dropout(x, 0.7, rng, false).value() == x.value());
  }
  SUBCASE("train mode zeroes or scales by 1/(1-rate)") {
    auto y = dropout(x, 0.5, rng, true);
    for (Index i = 0; i < y.size(); ++i) {
      const double v = y.value()(i);
      CHECK((v == 0.0 || v == doctest::Approx(4.0)));
    }
  }
  SUBCASE("rate outside [0,1) is rejected") {
    CHECK_THROWS_AS(dropout(x, 1.0, rng, true), ConfigError);
    CHECK_THROWS_AS(dropout(x, -0.1, rng, true), ConfigError);
  }
}
