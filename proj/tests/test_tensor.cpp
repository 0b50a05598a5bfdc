#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "tbm/errors.hpp"
#include "tbm/nn.hpp"
#include "tbm/tensor.hpp"

using namespace tbm;

TEST_CASE("linear identity weight") {
  Tensor x = Tensor::matrix(1, 2, {1, 2});
  Tensor w = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor b = Tensor::vector({0, 0});
  Tensor y = linear(x, w, b);
  CHECK(y.values() == std::vector<double>{1, 2});
}

TEST_CASE("linear hand dot product") {
  Tensor x = Tensor::matrix(1, 2, {1, 1});
  Tensor w = Tensor::matrix(2, 1, {2, 3});
  Tensor b = Tensor::vector({1});
  CHECK(linear(x, w, b).item() == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("linear matches direct-summation oracle") {
  std::mt19937_64 rng(7);
  const auto xv = oracle::random_vector(3 * 4, rng);
  const auto wv = oracle::random_vector(4 * 2, rng);
  const auto bv = oracle::random_vector(2, rng);
  Tensor y = linear(Tensor(Shape{3, 4}, xv), Tensor(Shape{4, 2}, wv), Tensor(Shape{2}, bv));
  const auto expect = oracle::linear(xv, 3, 4, wv, 2, bv);
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("linear shape mismatch") {
  Tensor x = Tensor::matrix(1, 3, {1, 2, 3});
  Tensor w = Tensor::matrix(2, 1, {2, 3});
  CHECK_THROWS_AS(linear(x, w, Tensor::vector({0})), ShapeMismatch);
}

TEST_CASE("conv1d identity kernel") {
  Tensor x(Shape{1, 1, 3}, {1, 2, 3});
  Tensor k(Shape{1, 1, 1}, {1});
  Tensor y = conv1d(x, k, Tensor::vector({0}));
  CHECK(y.values() == std::vector<double>{1, 2, 3});
}

TEST_CASE("conv1d adjacent sums") {
  Tensor x(Shape{1, 1, 3}, {1, 2, 3});
  Tensor k(Shape{1, 1, 2}, {1, 1});
  Tensor y = conv1d(x, k, Tensor::vector({0}));
  CHECK(y.shape() == Shape{1, 1, 2});
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[1] == doctest::Approx(5.0));
}

TEST_CASE("conv1d matches direct-summation oracle") {
  std::mt19937_64 rng(11);
  const auto xv = oracle::random_vector(2 * 3 * 8, rng);
  const auto kv = oracle::random_vector(4 * 3 * 3, rng);
  const auto bv = oracle::random_vector(4, rng);
  Tensor y = conv1d(Tensor(Shape{2, 3, 8}, xv), Tensor(Shape{4, 3, 3}, kv), Tensor(Shape{4}, bv));
  const auto expect = oracle::conv1d(xv, 2, 3, 8, kv, 4, 3, bv);
  REQUIRE(y.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("conv1d kernel too long") {
  Tensor x(Shape{1, 1, 3}, {1, 2, 3});
  Tensor k(Shape{1, 1, 4}, {1, 1, 1, 1});
  CHECK_THROWS_AS(conv1d(x, k, Tensor::vector({0})), KernelTooLong);
}

TEST_CASE("relu") {
  Tensor y = relu(Tensor::vector({-1, 0, 2}));
  CHECK(y.values() == std::vector<double>{0, 0, 2});
  CHECK(relu(Tensor::vector({-5, -1})).values() == std::vector<double>{0, 0});
  const std::vector<double> pos{0.5, 1, 7};
  CHECK(relu(Tensor::vector(pos)).values() == pos);
}

TEST_CASE("dropout p=0 and inference are the identity") {
  std::mt19937_64 rng(3);
  Tensor x = Tensor::vector({1, 2, 3});
  CHECK(dropout(x, 0.0, true, rng).values() == x.values());
  CHECK(dropout(x, 0.9, false, rng).values() == x.values());
}

TEST_CASE("dropout keeps the mean under the law of large numbers") {
  std::mt19937_64 rng(1234);
  Tensor x(Shape{10000}, 1.0);
  Tensor y = dropout(x, 0.5, true, rng);
  double mean = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) mean += y[i];
  mean /= static_cast<double>(y.size());
  CHECK(mean > 0.95);
  CHECK(mean < 1.05);
}

TEST_CASE("dropout determinism and error path") {
  Tensor x(Shape{64}, 1.0);
  std::mt19937_64 a(9), b(9);
  CHECK(dropout(x, 0.3, true, a).values() == dropout(x, 0.3, true, b).values());
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), InvalidProbability);
  CHECK_THROWS_AS(dropout(x, -0.1, true, rng), InvalidProbability);
}

TEST_CASE("softmax closed forms") {
  Tensor y = softmax(Tensor::vector({0, 0}));
  CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-12));
  Tensor z = softmax(Tensor::vector({std::log(1.0), std::log(3.0)}));
  CHECK(z[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(z[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance and normalization") {
  std::mt19937_64 rng(5);
  const auto xv = oracle::random_vector(4 * 6, rng, -3, 3);
  auto shifted = xv;
  for (double& v : shifted) v += 17.5;
  Tensor a = softmax(Tensor(Shape{4, 6}, xv));
  Tensor b = softmax(Tensor(Shape{4, 6}, shifted));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    CHECK(a[i] > 0.0);
    CHECK(a[i] < 1.0);
  }
  for (std::size_t row = 0; row < 4; ++row) {
    double total = 0.0;
    for (std::size_t i = 0; i < 6; ++i) total += a[row * 6 + i];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("channel attention with uniform scores is the identity") {
  std::mt19937_64 rng(21);
  const auto xv = oracle::random_vector(2 * 3 * 5, rng);
  Tensor x(Shape{2, 3, 5}, xv);
  Tensor w1(Shape{3, 2}, 0.0);
  Tensor w2(Shape{2, 3}, 0.0);
  Tensor y = channel_attention(x, w1, w2);
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(y[i] == doctest::Approx(xv[i]).epsilon(1e-12));
}

TEST_CASE("channel attention on a single channel is the identity") {
  std::mt19937_64 rng(22);
  const auto xv = oracle::random_vector(2 * 1 * 4, rng);
  Tensor x(Shape{2, 1, 4}, xv);
  std::mt19937_64 init(1);
  Tensor w1 = xavier_uniform(Shape{1, 2}, 1, 2, init);
  Tensor w2 = xavier_uniform(Shape{2, 1}, 2, 1, init);
  Tensor y = channel_attention(x, w1, w2);
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(y[i] == doctest::Approx(xv[i]).epsilon(1e-12));
}

TEST_CASE("channel attention scores sum to one per batch row") {
  std::mt19937_64 rng(23);
  auto xv = oracle::random_vector(3 * 4 * 6, rng, 0.5, 2.0);  // positive so scores are recoverable
  Tensor x(Shape{3, 4, 6}, xv);
  std::mt19937_64 init(2);
  Tensor w1 = xavier_uniform(Shape{4, 2}, 4, 2, init);
  Tensor w2 = xavier_uniform(Shape{2, 4}, 2, 4, init);
  Tensor y = channel_attention(x, w1, w2);
  for (std::size_t b = 0; b < 3; ++b) {
    double total = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      const std::size_t i = (b * 4 + c) * 6;
      total += y[i] / xv[i] / 4.0;  // recover s[b,c] from out = in * s * channels
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

namespace {

LstmWeights constant_lstm(std::size_t d_in, std::size_t hidden, double value) {
  LstmWeights w;
  w.w_i = Tensor(Shape{d_in, hidden}, value);
  w.u_i = Tensor(Shape{hidden, hidden}, value);
  w.b_i = Tensor(Shape{hidden}, value);
  w.w_f = Tensor(Shape{d_in, hidden}, value);
  w.u_f = Tensor(Shape{hidden, hidden}, value);
  w.b_f = Tensor(Shape{hidden}, value);
  w.w_g = Tensor(Shape{d_in, hidden}, value);
  w.u_g = Tensor(Shape{hidden, hidden}, value);
  w.b_g = Tensor(Shape{hidden}, value);
  w.w_o = Tensor(Shape{d_in, hidden}, value);
  w.u_o = Tensor(Shape{hidden, hidden}, value);
  w.b_o = Tensor(Shape{hidden}, value);
  return w;
}

LstmWeights random_lstm(std::size_t d_in, std::size_t hidden, std::mt19937_64& rng) {
  LstmWeights w;
  w.w_i = xavier_uniform(Shape{d_in, hidden}, d_in, hidden, rng);
  w.u_i = xavier_uniform(Shape{hidden, hidden}, hidden, hidden, rng);
  w.b_i = xavier_uniform(Shape{hidden}, hidden, 1, rng);
  w.w_f = xavier_uniform(Shape{d_in, hidden}, d_in, hidden, rng);
  w.u_f = xavier_uniform(Shape{hidden, hidden}, hidden, hidden, rng);
  w.b_f = xavier_uniform(Shape{hidden}, hidden, 1, rng);
  w.w_g = xavier_uniform(Shape{d_in, hidden}, d_in, hidden, rng);
  w.u_g = xavier_uniform(Shape{hidden, hidden}, hidden, hidden, rng);
  w.b_g = xavier_uniform(Shape{hidden}, hidden, 1, rng);
  w.w_o = xavier_uniform(Shape{d_in, hidden}, d_in, hidden, rng);
  w.u_o = xavier_uniform(Shape{hidden, hidden}, hidden, hidden, rng);
  w.b_o = xavier_uniform(Shape{hidden}, hidden, 1, rng);
  return w;
}

}  // namespace

TEST_CASE("lstm_step with zero weights and state yields zeros") {
  LstmWeights w = constant_lstm(3, 4, 0.0);
  LstmState s = lstm_zero_state(4);
  LstmState next = lstm_step(Tensor::vector({5, -2, 1}), s, w);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(next.hidden[i] == doctest::Approx(0.0));
    CHECK(next.cell[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("lstm_step saturated forget gate preserves the cell") {
  LstmWeights w = constant_lstm(2, 3, 0.0);
  w.b_f = Tensor(Shape{3}, 20.0);  // +inf surrogate
  LstmState s{Tensor(Shape{3}, 0.0), Tensor(Shape{3}, 1.0)};
  LstmState next = lstm_step(Tensor::vector({0.3, -0.7}), s, w);
  for (std::size_t i = 0; i < 3; ++i) CHECK(next.cell[i] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lstm_step matches the scalar oracle") {
  std::mt19937_64 rng(31);
  const std::size_t d_in = 3, hidden = 5;
  LstmWeights w = random_lstm(d_in, hidden, rng);
  const auto xv = oracle::random_vector(d_in, rng);
  const auto hv = oracle::random_vector(hidden, rng);
  const auto cv = oracle::random_vector(hidden, rng);
  LstmState s{Tensor(Shape{hidden}, hv), Tensor(Shape{hidden}, cv)};
  LstmState next = lstm_step(Tensor(Shape{d_in}, xv), s, w);
  const auto expect = oracle::lstm_cell(
      xv, hv, cv, d_in, hidden, w.w_i.values(), w.u_i.values(), w.b_i.values(), w.w_f.values(),
      w.u_f.values(), w.b_f.values(), w.w_g.values(), w.u_g.values(), w.b_g.values(),
      w.w_o.values(), w.u_o.values(), w.b_o.values());
  for (std::size_t i = 0; i < hidden; ++i) {
    CHECK(next.hidden[i] == doctest::Approx(expect.h_next[i]).epsilon(1e-12));
    CHECK(next.cell[i] == doctest::Approx(expect.c_next[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward of sum is all ones; squared sum doubles") {
  Tensor w(Shape{2, 3}, {1, -2, 0.5, 3, -1, 2}, true);
  sum_all(w).backward();
  for (double g : w.grad()) CHECK(g == doctest::Approx(1.0));

  Tensor v(Shape{2}, {1, 2}, true);
  sum_all(mul(v, v)).backward();
  CHECK(v.grad()[0] == doctest::Approx(2.0));
  CHECK(v.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward requires a scalar and accumulates until cleared") {
  Tensor w(Shape{2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(mul(w, w).backward(), NotScalar);
  sum_all(w).backward();
  sum_all(w).backward();
  CHECK(w.grad()[0] == doctest::Approx(2.0));  // two sweeps accumulate
  w.zero_grad();
  CHECK(w.grad()[0] == 0.0);
}

TEST_CASE("gradients match central finite differences for every layer") {
  std::mt19937_64 rng(101);

  SUBCASE("linear") {
    Tensor x(Shape{3, 4}, oracle::random_vector(12, rng), true);
    Tensor w(Shape{4, 2}, oracle::random_vector(8, rng), true);
    Tensor b(Shape{2}, oracle::random_vector(2, rng), true);
    auto loss = [&] { return mean_all(tanh(linear(x, w, b))); };
    CHECK(oracle::max_grad_error({x, w, b}, loss, rng) < 1e-4);
  }
  SUBCASE("conv1d") {
    Tensor x(Shape{2, 3, 7}, oracle::random_vector(42, rng), true);
    Tensor k(Shape{4, 3, 3}, oracle::random_vector(36, rng), true);
    Tensor b(Shape{4}, oracle::random_vector(4, rng), true);
    auto loss = [&] { return mean_all(sigmoid(conv1d(x, k, b))); };
    CHECK(oracle::max_grad_error({x, k, b}, loss, rng) < 1e-4);
  }
  SUBCASE("relu away from the kink") {
    auto values = oracle::random_vector(10, rng);
    for (double& v : values) v += v >= 0 ? 0.2 : -0.2;
    Tensor x(Shape{10}, values, true);
    auto loss = [&] { return mean_all(relu(x)); };
    CHECK(oracle::max_grad_error({x}, loss, rng) < 1e-4);
  }
  SUBCASE("softmax") {
    Tensor x(Shape{2, 5}, oracle::random_vector(10, rng), true);
    Tensor pick(Shape{2, 5}, oracle::random_vector(10, rng));
    auto loss = [&] { return sum_all(mul(softmax(x), pick)); };
    CHECK(oracle::max_grad_error({x}, loss, rng) < 1e-4);
  }
  SUBCASE("dropout with a frozen mask") {
    Tensor x(Shape{20}, oracle::random_vector(20, rng), true);
    auto loss = [&] {
      std::mt19937_64 mask_rng(77);  // same mask on every evaluation
      return mean_all(dropout(x, 0.4, true, mask_rng));
    };
    CHECK(oracle::max_grad_error({x}, loss, rng) < 1e-4);
  }
  SUBCASE("channel attention") {
    Tensor x(Shape{2, 3, 5}, oracle::random_vector(30, rng), true);
    Tensor w1(Shape{3, 2}, oracle::random_vector(6, rng), true);
    Tensor w2(Shape{2, 3}, oracle::random_vector(6, rng), true);
    auto loss = [&] { return mean_all(channel_attention(x, w1, w2)); };
    CHECK(oracle::max_grad_error({x, w1, w2}, loss, rng) < 1e-4);
  }
  SUBCASE("lstm step") {
    const std::size_t d_in = 3, hidden = 4;
    LstmWeights w = random_lstm(d_in, hidden, rng);
    for (Tensor* t : {&w.w_i, &w.u_i, &w.b_i, &w.w_f, &w.u_f, &w.b_f, &w.w_g, &w.u_g, &w.b_g,
                      &w.w_o, &w.u_o, &w.b_o})
      t->set_requires_grad(true);
    Tensor x(Shape{d_in}, oracle::random_vector(d_in, rng), true);
    auto loss = [&] {
      LstmState s = lstm_zero_state(hidden);
      LstmState a = lstm_step(x, s, w);
      LstmState b = lstm_step(x, a, w);  // two steps exercise the recurrence
      return mean_all(b.hidden);
    };
    CHECK(oracle::max_grad_error({x, w.w_i, w.u_f, w.b_g, w.w_o, w.u_o}, loss, rng) < 1e-4);
  }
  SUBCASE("reductions and shape ops") {
    Tensor x(Shape{3, 4}, oracle::random_vector(12, rng), true);
    Tensor y(Shape{3, 2}, oracle::random_vector(6, rng), true);
    auto loss = [&] {
      Tensor joined = concat_lastdim(x, y);                 // [3, 6]
      Tensor cropped = crop_tail(joined, 5);                // [3, 5]
      Tensor pooled = mean_lastdim(reshape(cropped, Shape{3, 5}));
      return sum_all(mul(pooled, pooled));
    };
    CHECK(oracle::max_grad_error({x, y}, loss, rng) < 1e-4);
  }
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
  Parameter p("w", Tensor(Shape{3}, {1, 2, 3}));
  p.tensor.zero_grad();
  adam_step({&p});
  CHECK(p.tensor.values() == std::vector<double>{1, 2, 3});
  CHECK(p.step_count == 1);
}

TEST_CASE("adam first step moves by about lr") {
  Parameter p("w", Tensor::scalar(1.0));
  sum_all(p.tensor).backward();  // grad = 1
  adam_step({&p}, 0.05);
  CHECK(p.tensor.item() == doctest::Approx(1.0 - 0.05).epsilon(1e-6));
  CHECK_FALSE(p.tensor.grad()[0] != 0.0);  // cleared
}

TEST_CASE("adam converges on a convex quadratic") {
  Parameter p("w", Tensor::scalar(0.0));
  for (int step = 0; step < 100; ++step) {
    Tensor residual = sub(p.tensor, Tensor::scalar(3.0));
    mul(residual, residual).backward();
    adam_step({&p}, 0.1);
  }
  CHECK(std::abs(p.tensor.item() - 3.0) < 0.5);
}

TEST_CASE("adam requires gradients") {
  Parameter p("w", Tensor::scalar(1.0));
  CHECK_THROWS_AS(adam_step({&p}), EmptyGradient);
}

TEST_CASE("seeded initializers are bit-identical") {
  std::mt19937_64 a(42), b(42);
  Tensor t1 = xavier_uniform(Shape{4, 5}, 4, 5, a);
  Tensor t2 = xavier_uniform(Shape{4, 5}, 4, 5, b);
  CHECK(t1.values() == t2.values());
}
