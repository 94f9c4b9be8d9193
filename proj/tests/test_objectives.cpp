#include <doctest.h>

#include <bit>
#include <cmath>

#include <omp.h>

#include "d4am/errors.hpp"
#include "d4am/objectives.hpp"
#include "test_util.hpp"

using namespace d4am;

namespace {

struct Setup {
  NetworkSpec enh;
  ParamVector theta;
  ProxyModel proxy;
  RegBatch reg;
  ClsBatch cls;
};

Setup make_setup(std::size_t batch, std::uint64_t seed, Activation act = Activation::Tanh) {
  std::mt19937_64 rng(seed);
  const auto enh = NetworkSpec::mlp({4, 6, 4}, act);
  const auto pspec = NetworkSpec::mlp({4, 5, 3}, Activation::Tanh, OutputActivation::Softmax);
  Setup s{enh, testutil::gaussian(enh.param_count(), rng, 0.7),
          ProxyModel(pspec, testutil::gaussian(pspec.param_count(), rng)), {}, {}};
  s.reg.noisy = testutil::gaussian_matrix(batch, 4, rng);
  s.reg.clean = testutil::gaussian_matrix(batch, 4, rng);
  s.cls.noisy = testutil::gaussian_matrix(batch, 4, rng);
  for (std::size_t i = 0; i < batch; ++i) s.cls.labels.push_back(static_cast<int>((i * 7 + seed) % 3));
  return s;
}

}  // namespace

TEST_CASE("identity enhancer on clean input has zero regression loss") {
  const auto enh = NetworkSpec::mlp({3, 3}, Activation::Identity);
  ParamVector theta(enh.param_count());
  for (std::size_t i = 0; i < 3; ++i) theta[i * 3 + i] = 1.0;
  std::mt19937_64 rng(1);
  RegBatch b;
  b.noisy = testutil::gaussian_matrix(5, 3, rng);
  b.clean = b.noisy;
  const auto r = reg_loss_and_grad(enh, theta, b);
  CHECK(r.loss == 0.0);
  for (double g : r.grad) CHECK(g == 0.0);
}

TEST_CASE("one-dimensional linear enhancer has the hand derivative") {
  const auto enh = NetworkSpec::mlp({1, 1}, Activation::Identity);
  const double w = 1.7, x = 0.8, c = 2.0;
  const ParamVector theta{w, 0.0};
  RegBatch b{Matrix(1, 1, x), Matrix(1, 1, c)};
  const auto r = reg_loss_and_grad(enh, theta, b);
  CHECK(r.loss == doctest::Approx((w * x - c) * (w * x - c)));
  CHECK(r.grad[0] == doctest::Approx(2 * x * (w * x - c)));
  CHECK(r.grad[1] == doctest::Approx(2 * (w * x - c)));
}

TEST_CASE("regression gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto s = make_setup(5, seed);
    const auto r = reg_loss_and_grad(s.enh, s.theta, s.reg);
    const auto fd = testutil::central_diff(
        [&](const ParamVector& t) { return reg_loss_and_grad(s.enh, t, s.reg).loss; }, s.theta, 1e-5);
    for (std::size_t i = 0; i < fd.size(); ++i) CHECK(testutil::close_rel(r.grad[i], fd[i], 1e-4, 1e-6));
    CHECK(r.loss >= 0.0);
  }
}

TEST_CASE("classification gradient matches finite differences through the proxy") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto s = make_setup(5, seed, seed % 2 ? Activation::Relu : Activation::Tanh);
    const auto r = cls_loss_and_grad(s.enh, s.theta, s.proxy, s.cls);
    const auto fd = testutil::central_diff(
        [&](const ParamVector& t) { return cls_loss_and_grad(s.enh, t, s.proxy, s.cls).loss; }, s.theta,
        1e-5);
    for (std::size_t i = 0; i < fd.size(); ++i) CHECK(testutil::close_rel(r.grad[i], fd[i], 1e-4, 1e-6));
    CHECK(r.loss >= 0.0);
  }
}

TEST_CASE("a proxy that ignores its input gives loss ln K and zero gradient") {
  auto s = make_setup(6, 3);
  const auto pspec = NetworkSpec::mlp({4, 3}, Activation::Identity, OutputActivation::Softmax);
  const ProxyModel flat(pspec, ParamVector(pspec.param_count(), 0.0));
  const auto r = cls_loss_and_grad(s.enh, s.theta, flat, s.cls);
  CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  for (double g : r.grad) CHECK(g == 0.0);
}

TEST_CASE("two classes with constant probability p on the true class give -ln p") {
  // Zero weights, biases (b, 0): p(class 0) = sigmoid(b) for every input.
  const auto pspec = NetworkSpec::mlp({2, 2}, Activation::Identity, OutputActivation::Softmax);
  const double b = 0.9;
  ParamVector pp(pspec.param_count(), 0.0);
  pp[4] = b;
  const ProxyModel proxy(pspec, pp);
  const auto enh = NetworkSpec::mlp({2, 2}, Activation::Tanh);
  std::mt19937_64 rng(3);
  ClsBatch c{testutil::gaussian_matrix(4, 2, rng), {0, 0, 0, 0}};
  const double p = 1.0 / (1.0 + std::exp(-b));
  const auto r = cls_loss_and_grad(enh, testutil::gaussian(enh.param_count(), rng), proxy, c);
  CHECK(r.loss == doctest::Approx(-std::log(p)).epsilon(1e-14));
}

TEST_CASE("proxy parameters are untouched by gradient calls") {
  auto s = make_setup(9, 4);
  const ParamVector before = s.proxy.params();
  for (int i = 0; i < 5; ++i) (void)cls_loss_and_grad(s.enh, s.theta, s.proxy, s.cls);
  CHECK(s.proxy.params() == before);
}

TEST_CASE("parallel losses agree with the serial reference") {
  for (std::size_t batch : {1u, 7u, 8u, 9u, 33u, 130u}) {
    auto s = make_setup(batch, batch);
    const auto rp = reg_loss_and_grad(s.enh, s.theta, s.reg);
    const auto rr = reference::reg_loss_and_grad(s.enh, s.theta, s.reg);
    CHECK(rp.loss == doctest::Approx(rr.loss).epsilon(1e-13));
    for (std::size_t i = 0; i < rp.grad.size(); ++i) {
      CHECK(testutil::close_rel(rp.grad[i], rr.grad[i], 1e-12, 1e-14));
    }
    const auto cp = cls_loss_and_grad(s.enh, s.theta, s.proxy, s.cls);
    const auto cr = reference::cls_loss_and_grad(s.enh, s.theta, s.proxy, s.cls);
    CHECK(cp.loss == doctest::Approx(cr.loss).epsilon(1e-13));
    for (std::size_t i = 0; i < cp.grad.size(); ++i) {
      CHECK(testutil::close_rel(cp.grad[i], cr.grad[i], 1e-12, 1e-14));
    }
  }
}

TEST_CASE("batch gradients are bit-identical across thread counts") {
  auto s = make_setup(77, 5);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto r1 = reg_loss_and_grad(s.enh, s.theta, s.reg);
  const auto c1 = cls_loss_and_grad(s.enh, s.theta, s.proxy, s.cls);
  omp_set_num_threads(3);
  const auto r3 = reg_loss_and_grad(s.enh, s.theta, s.reg);
  const auto c3 = cls_loss_and_grad(s.enh, s.theta, s.proxy, s.cls);
  omp_set_num_threads(saved);
  CHECK(std::bit_cast<std::uint64_t>(r1.loss) == std::bit_cast<std::uint64_t>(r3.loss));
  CHECK(std::bit_cast<std::uint64_t>(c1.loss) == std::bit_cast<std::uint64_t>(c3.loss));
  CHECK(r1.grad == r3.grad);
  CHECK(c1.grad == c3.grad);
}

TEST_CASE("losses are deterministic") {
  auto s = make_setup(10, 6);
  CHECK(cls_loss_and_grad(s.enh, s.theta, s.proxy, s.cls).grad ==
        cls_loss_and_grad(s.enh, s.theta, s.proxy, s.cls).grad);
  CHECK(reg_loss_and_grad(s.enh, s.theta, s.reg).grad == reg_loss_and_grad(s.enh, s.theta, s.reg).grad);
}

TEST_CASE("bad batches are rejected") {
  auto s = make_setup(4, 7);
  ClsBatch bad = s.cls;
  bad.labels[2] = 3;
  CHECK_THROWS_AS(cls_loss_and_grad(s.enh, s.theta, s.proxy, bad), DataError);
  bad.labels[2] = -1;
  CHECK_THROWS_AS(cls_loss_and_grad(s.enh, s.theta, s.proxy, bad), DataError);

  RegBatch r = s.reg;
  r.clean = Matrix(3, 4);
  CHECK_THROWS_AS(reg_loss_and_grad(s.enh, s.theta, r), ShapeError);
  RegBatch empty{Matrix(0, 4), Matrix(0, 4)};
  CHECK_THROWS(reg_loss_and_grad(s.enh, s.theta, empty));
  CHECK_THROWS_AS(reg_loss_and_grad(s.enh, ParamVector(3), s.reg), ShapeError);

  const auto linear = NetworkSpec::mlp({4, 3}, Activation::Identity);
  CHECK_THROWS_AS(FrozenClassifier(linear, ParamVector(linear.param_count())), ConfigError);
}
