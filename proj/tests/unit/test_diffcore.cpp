#include <cmath>
#include <random>

#include "doctest.h"
#include "hit/errors.hpp"
#include "hit/tensor.hpp"
#include "oracles.hpp"

using namespace hit;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Scalar probe: sum of w .* op(x) with fixed pseudo-random weights.
double probe(const Tensor& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) s += (0.5 + 0.37 * static_cast<double>(i % 7)) * y[i];
  return s;
}

Tensor probe_tensor(const Tensor& y) {
  std::vector<double> w(y.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.37 * static_cast<double>(i % 7);
  return reduce_sum(y * Tensor::from(y.shape(), w));
}

void expect_grad_matches(const std::function<Tensor(const Tensor&)>& op, Tensor x, double tol = 1e-6) {
  x.zero_grad();
  probe_tensor(op(x)).backward();
  const std::vector<double> analytic(x.grad().begin(), x.grad().end());
  NoGradGuard ng;
  const auto numeric = oracle::numeric_gradient([&] { return probe(op(x)); }, x);
  CHECK(oracle::max_rel_error(analytic, numeric) < tol);
}

}  // namespace

TEST_SUITE("diffcore") {

TEST_CASE("matmul forward matches hand product") {
  const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
  CHECK(values(matmul(a, b)) == std::vector<double>{58, 64, 139, 154});
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("broadcasting aligns trailing dimensions") {
  const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor row = Tensor::from({1, 3}, {10, 20, 30});
  const Tensor col = Tensor::from({2, 1}, {100, 200});
  CHECK(values(a + row) == std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK(values(a + col) == std::vector<double>{101, 102, 103, 204, 205, 206});
  CHECK_THROWS_AS(a + Tensor::from({2}, {1, 2}), DimensionError);
}

TEST_CASE("reductions and their axes") {
  const Tensor a = Tensor::from({2, 3}, {1, 5, 3, 4, 2, 6});
  CHECK(reduce_sum(a).item() == 21);
  CHECK(values(reduce_sum(a, 0)) == std::vector<double>{5, 7, 9});
  CHECK(values(reduce_mean(a, 1)) == std::vector<double>{3, 4});
  CHECK(values(reduce_max(a, 1)) == std::vector<double>{5, 6});
  CHECK(values(reduce_min(a, 0)) == std::vector<double>{1, 2, 3});
  CHECK(reduce_sum(a, 1, true).shape() == Shape{2, 1});
}

TEST_CASE("logsumexp is stable for large inputs") {
  const Tensor x = Tensor::from({1, 3}, {1000.0, 1000.0, 1000.0});
  CHECK(logsumexp(x).item() == doctest::Approx(1000.0 + std::log(3.0)).epsilon(1e-15));
  const Tensor y = Tensor::from({1, 2}, {-1000.0, -1e9});
  CHECK(std::isfinite(logsumexp(y).item()));
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_leaf({5, 7}, rng, -30, 30);
  const Tensor s = softmax_rows(x);
  for (std::size_t r = 0; r < 5; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 7; ++c) sum += s[r * 7 + c];
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("max ties send the gradient to the lowest index") {
  const Tensor x = Tensor::from({4}, {0.5, 2.0, 2.0, 1.0}, true);
  reduce_max(x).backward();
  CHECK(values(Tensor::from({4}, {x.grad().begin(), x.grad().end()})) == std::vector<double>{0, 1, 0, 0});
}

TEST_CASE("shared subexpressions accumulate once per use") {
  const Tensor x = Tensor::from({1}, {3.0}, true);
  const Tensor y = x * x;
  (y + y).backward();  // d/dx 2x^2 = 4x
  CHECK(x.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("stop_gradient blocks the backward path") {
  const Tensor x = Tensor::from({1}, {2.0}, true);
  (x * stop_gradient(x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("no-grad guard records nothing") {
  const Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  {
    NoGradGuard ng;
    CHECK_FALSE(grad_enabled());
    CHECK_FALSE(exp(x).requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(exp(x).requires_grad());
}

TEST_CASE("tape is topologically ordered") {
  const Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  const Tensor y = reduce_sum(exp(x) * sin(x));
  const auto tape = build_tape(y);
  REQUIRE(!tape.empty());
  CHECK(tape.back() == y.node().get());
  for (std::size_t i = 0; i < tape.size(); ++i)
    for (const auto& in : tape[i]->inputs)
      for (std::size_t j = i; j < tape.size(); ++j) CHECK(tape[j] != in.get());
}

TEST_CASE("segment_mean leaves empty segments at zero") {
  const Tensor x = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> seg{0, 2, 0};
  CHECK(values(segment_mean(x, seg, 3)) == std::vector<double>{3, 4, 0, 0, 3, 4});
}

TEST_CASE("unary ops agree with central differences") {
  std::mt19937_64 rng(11);
  expect_grad_matches([](const Tensor& x) { return exp(x); }, oracle::random_leaf({3, 3}, rng));
  expect_grad_matches([](const Tensor& x) { return log(x); }, oracle::random_leaf({3, 3}, rng, 0.3, 2));
  expect_grad_matches([](const Tensor& x) { return sqrt(x); }, oracle::random_leaf({3, 3}, rng, 0.3, 2));
  expect_grad_matches([](const Tensor& x) { return sigmoid(x); }, oracle::random_leaf({3, 3}, rng, -4, 4));
  expect_grad_matches([](const Tensor& x) { return softplus(x); }, oracle::random_leaf({3, 3}, rng, -4, 4));
  expect_grad_matches([](const Tensor& x) { return sin(x) * cos(x); }, oracle::random_leaf({3, 3}, rng, -3, 3));
  expect_grad_matches([](const Tensor& x) { return softmax_rows(x); }, oracle::random_leaf({3, 4}, rng, -2, 2));
  expect_grad_matches([](const Tensor& x) { return logsumexp(x); }, oracle::random_leaf({3, 4}, rng, -2, 2));
  expect_grad_matches([](const Tensor& x) { return matmul(x, transpose(x)); }, oracle::random_leaf({3, 4}, rng));
  expect_grad_matches([](const Tensor& x) { return x / (square(x) + 1.0); }, oracle::random_leaf({2, 5}, rng));
  expect_grad_matches([](const Tensor& x) { return concat({x, slice(x, 1, 1, 3)}, 1); },
                      oracle::random_leaf({3, 4}, rng));
  expect_grad_matches([](const Tensor& x) { return bmm(x, transpose(x)); }, oracle::random_leaf({2, 3, 2}, rng));
}

TEST_CASE("backward requires a scalar") {
  const Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  CHECK_THROWS(exp(x).backward());
}

}  // TEST_SUITE
