// Straight per-sample loops with a single accumulator. No OpenMP.
#include <cmath>

#include "d4am/errors.hpp"
#include "d4am/objectives.hpp"

namespace d4am::reference {

LossAndGrad reg_loss_and_grad(const NetworkSpec& enhancer, const ParamVector& theta,
                              const RegBatch& batch) {
  batch.validate();
  const std::size_t B = batch.noisy.rows;
  const std::size_t D = batch.clean.cols;
  LossAndGrad out{0.0, ParamVector(theta.size(), 0.0)};
  for (std::size_t i = 0; i < B; ++i) {
    const std::vector<double> e = forward(enhancer, theta, batch.noisy.row(i));
    if (e.size() != D) throw ShapeError("enhancer output dim mismatch");
    std::vector<double> up(D);
    for (std::size_t j = 0; j < D; ++j) {
      const double diff = e[j] - batch.clean(i, j);
      out.loss += diff * diff;
      up[j] = 2.0 * diff / static_cast<double>(B * D);
    }
    const BackwardResult g = backward(enhancer, theta, batch.noisy.row(i), up);
    axpy_inplace(1.0, g.param_grad, out.grad);
  }
  out.loss /= static_cast<double>(B * D);
  return out;
}

LossAndGrad cls_loss_and_grad(const NetworkSpec& enhancer, const ParamVector& theta,
                              const ProxyModel& proxy, const ClsBatch& batch) {
  batch.validate(proxy.num_classes());
  const std::size_t B = batch.noisy.rows;
  LossAndGrad out{0.0, ParamVector(theta.size(), 0.0)};
  for (std::size_t i = 0; i < B; ++i) {
    const std::vector<double> e = forward(enhancer, theta, batch.noisy.row(i));
    const std::vector<double> p = forward(proxy.spec(), proxy.params(), e);
    const auto y = static_cast<std::size_t>(batch.labels[i]);
    out.loss -= std::log(p[y]);
    // Upstream of -log p_y / B through the softmax output.
    std::vector<double> up(p.size(), 0.0);
    up[y] = -1.0 / (p[y] * static_cast<double>(B));
    const BackwardResult gp = backward(proxy.spec(), proxy.params(), e, up);
    const BackwardResult ge = backward(enhancer, theta, batch.noisy.row(i), gp.input_grad);
    axpy_inplace(1.0, ge.param_grad, out.grad);
  }
  out.loss /= static_cast<double>(B);
  return out;
}

}  // namespace d4am::reference
