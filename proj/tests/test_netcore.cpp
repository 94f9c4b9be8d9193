#include <doctest.h>

#include <bit>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "d4am/errors.hpp"
#include "d4am/network.hpp"
#include "d4am/param_vector.hpp"
#include "test_util.hpp"

using namespace d4am;

TEST_CASE("init_params is deterministic and sized by the layer dims") {
  const auto spec = NetworkSpec::mlp({2, 2}, Activation::Tanh);
  CHECK(init_params(spec, 7) == init_params(spec, 7));
  CHECK_FALSE(init_params(spec, 7) == init_params(spec, 8));

  const auto s = NetworkSpec::mlp({4, 8, 4}, Activation::Relu);
  CHECK(s.param_count() == 76);
  CHECK(init_params(s, 3).size() == 76);
}

TEST_CASE("init_params scales weights by fan-in and zeroes biases") {
  const auto spec = NetworkSpec::mlp({400, 300, 2}, Activation::Tanh);
  const auto p = init_params(spec, 11);
  double s2 = 0.0;
  const std::size_t nw = 400 * 300;
  for (std::size_t i = 0; i < nw; ++i) s2 += p[i] * p[i];
  CHECK(s2 / nw == doctest::Approx(1.0 / 400).epsilon(0.02));
  for (std::size_t i = nw; i < nw + 300; ++i) CHECK(p[i] == 0.0);
}

TEST_CASE("a 1-1 identity network is the affine map w x + b") {
  const auto spec = NetworkSpec::mlp({1, 1}, Activation::Identity);
  const ParamVector p{2.5, -0.75};
  const double x = 1.2;
  CHECK(forward(spec, p, std::vector<double>{x})[0] == doctest::Approx(2.5 * 1.2 - 0.75));
}

TEST_CASE("identity weights and zero bias reproduce the input") {
  const auto spec = NetworkSpec::mlp({3, 3}, Activation::Identity);
  ParamVector p(spec.param_count());
  for (std::size_t i = 0; i < 3; ++i) p[i * 3 + i] = 1.0;
  const std::vector<double> x{0.3, -1.7, 4.0};
  CHECK(forward(spec, p, x) == x);
}

TEST_CASE("softmax head on zero logits is uniform") {
  const auto spec = NetworkSpec::mlp({1, 2}, Activation::Identity, OutputActivation::Softmax);
  const ParamVector p(spec.param_count(), 0.0);
  const auto y = forward(spec, p, std::vector<double>{3.0});
  CHECK(y[0] == 0.5);
  CHECK(y[1] == 0.5);
}

TEST_CASE("forward matches a straight-line evaluator") {
  std::mt19937_64 rng(5);
  const Activation acts[] = {Activation::Tanh, Activation::Relu, Activation::Identity};
  for (int trial = 0; trial < 30; ++trial) {
    const auto act = acts[trial % 3];
    const auto head = trial % 2 ? OutputActivation::Softmax : OutputActivation::Identity;
    const auto spec = NetworkSpec::mlp({5, 7, 3 + static_cast<std::size_t>(trial % 4)}, act, head);
    const auto p = testutil::gaussian(spec.param_count(), rng);
    const auto x = testutil::gaussian(5, rng).values();
    const auto got = forward(spec, p, x);
    const auto want = testutil::naive_forward(spec, p, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
  }
}

TEST_CASE("softmax outputs form a probability vector") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto spec = NetworkSpec::mlp({4, 6, 5}, Activation::Tanh, OutputActivation::Softmax);
    const auto p = testutil::gaussian(spec.param_count(), rng, 3.0);
    const auto y = forward(spec, p, testutil::gaussian(4, rng, 5.0).values());
    double s = 0.0;
    for (double v : y) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("backward matches central differences") {
  std::mt19937_64 rng(21);
  const Activation acts[] = {Activation::Tanh, Activation::Relu, Activation::Identity};
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t in = 2 + trial % 4, hid = 3 + trial % 5, out = 2 + trial % 3;
    const auto head = trial % 2 ? OutputActivation::Softmax : OutputActivation::Identity;
    const auto spec = NetworkSpec::mlp({in, hid, out}, acts[trial % 3], head);
    const auto p = testutil::gaussian(spec.param_count(), rng);
    const auto x = testutil::gaussian(in, rng).values();
    const auto u = testutil::gaussian(out, rng).values();
    auto f = [&](const ParamVector& q) {
      const auto y = forward(spec, q, x);
      return std::inner_product(y.begin(), y.end(), u.begin(), 0.0);
    };
    const auto fd = testutil::central_diff(f, p, 1e-5);
    const auto bw = backward(spec, p, x, u);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      CHECK(testutil::close_rel(bw.param_grad[i], fd[i], 1e-4, 1e-6));
    }
    auto fx = [&](const ParamVector& xv) {
      const auto y = forward(spec, p, xv.values());
      return std::inner_product(y.begin(), y.end(), u.begin(), 0.0);
    };
    const auto fdx = testutil::central_diff(fx, ParamVector(x), 1e-5);
    for (std::size_t i = 0; i < in; ++i) CHECK(testutil::close_rel(bw.input_grad[i], fdx[i], 1e-4, 1e-6));
  }
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  std::mt19937_64 rng(2);
  const auto spec = NetworkSpec::mlp({3, 4, 2}, Activation::Tanh, OutputActivation::Softmax);
  const auto p = testutil::gaussian(spec.param_count(), rng);
  const auto bw = backward(spec, p, std::vector<double>{1, 2, 3}, std::vector<double>{0, 0});
  for (double g : bw.param_grad) CHECK(g == 0.0);
  for (double g : bw.input_grad) CHECK(g == 0.0);
}

TEST_CASE("linear network gradient is the outer product of upstream and input") {
  const auto spec = NetworkSpec::mlp({3, 2}, Activation::Identity);
  std::mt19937_64 rng(4);
  const auto p = testutil::gaussian(spec.param_count(), rng);
  const std::vector<double> x{1.5, -2.0, 0.25};
  const std::vector<double> u{0.5, -3.0};
  const auto bw = backward(spec, p, x, u);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t i = 0; i < 3; ++i) CHECK(bw.param_grad[o * 3 + i] == u[o] * x[i]);
    CHECK(bw.param_grad[6 + o] == u[o]);
  }
}

TEST_CASE("shape and spec errors") {
  const auto spec = NetworkSpec::mlp({3, 2}, Activation::Identity);
  const ParamVector p(spec.param_count());
  CHECK_THROWS_AS(forward(spec, p, std::vector<double>{1, 2}), ShapeError);
  CHECK_THROWS_AS(forward(spec, ParamVector(3), std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(backward(spec, p, std::vector<double>{1, 2, 3}, std::vector<double>{1}), ShapeError);

  NetworkSpec bad;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(init_params(bad, 0), ConfigError);
  NetworkSpec zero{{3, 0, 2}, {Activation::Tanh}, OutputActivation::Identity};
  CHECK_THROWS_AS(zero.validate(), ConfigError);
  NetworkSpec mismatch{{3, 4, 2}, {}, OutputActivation::Identity};
  CHECK_THROWS_AS(mismatch.validate(), ConfigError);
}

TEST_CASE("vector algebra examples") {
  CHECK(dot(ParamVector{1, 2}, ParamVector{3, 4}) == 11.0);
  CHECK(norm_sq(ParamVector{3, 4}) == 25.0);
  CHECK(axpy(2.0, ParamVector{1, 0}, ParamVector{0, 1}) == ParamVector{2, 1});
  ParamVector y{1, 1};
  axpy_inplace(-1.0, ParamVector{1, 2}, y);
  CHECK(y == ParamVector{0, -1});
  CHECK_THROWS_AS(dot(ParamVector{1}, ParamVector{1, 2}), ShapeError);
  CHECK_THROWS_AS(axpy(1.0, ParamVector{1}, ParamVector{1, 2}), ShapeError);
}

TEST_CASE("dot is symmetric and norm_sq equals dot(a, a)") {
  std::mt19937_64 rng(8);
  for (std::size_t n : {1u, 7u, 8192u, 8193u, 50000u}) {
    const auto a = testutil::gaussian(n, rng), b = testutil::gaussian(n, rng);
    CHECK(dot(a, b) == dot(b, a));
    CHECK(norm_sq(a) == dot(a, a));
    CHECK(norm_sq(a) >= 0.0);
  }
}

TEST_CASE("blocked dot agrees with the serial reference") {
  std::mt19937_64 rng(12);
  for (std::size_t n : {3u, 8191u, 8192u, 100000u, 300001u}) {
    const auto a = testutil::gaussian(n, rng), b = testutil::gaussian(n, rng);
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) abs_sum += std::abs(a[i] * b[i]);
    CHECK(std::abs(dot(a, b) - reference::dot(a, b)) <= 1e-13 * abs_sum);
  }
}

TEST_CASE("reductions are bit-identical across thread counts") {
  std::mt19937_64 rng(13);
  const auto a = testutil::gaussian(200003, rng), b = testutil::gaussian(200003, rng);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const double d1 = dot(a, b), n1 = norm_sq(a);
  omp_set_num_threads(4);
  const double d4 = dot(a, b), n4 = norm_sq(a);
  omp_set_num_threads(saved);
  CHECK(std::bit_cast<std::uint64_t>(d1) == std::bit_cast<std::uint64_t>(d4));
  CHECK(std::bit_cast<std::uint64_t>(n1) == std::bit_cast<std::uint64_t>(n4));
}

TEST_CASE("all_finite") {
  CHECK(ParamVector{1, 2}.all_finite());
  CHECK_FALSE(ParamVector{1, std::nan("")}.all_finite());
  CHECK_FALSE(ParamVector{INFINITY}.all_finite());
}
