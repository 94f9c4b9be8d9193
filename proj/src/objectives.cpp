#include "d4am/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "d4am/errors.hpp"

namespace d4am {

namespace {

// Samples per accumulation chunk. Chunk partials are summed in chunk order,
// which fixes the floating-point summation order independently of threads.
constexpr std::size_t kChunk = 8;

void check_enhancer(const NetworkSpec& enhancer, const ParamVector& theta, std::size_t cols) {
  enhancer.validate();
  if (theta.size() != enhancer.param_count()) {
    throw ShapeError("enhancer parameters have length " + std::to_string(theta.size()) +
                     ", expected " + std::to_string(enhancer.param_count()));
  }
  if (cols != enhancer.input_dim()) {
    throw ShapeError("batch feature dim " + std::to_string(cols) + " != enhancer input dim " +
                     std::to_string(enhancer.input_dim()));
  }
}

/// Runs `per_sample(i, grad_accum)` for every sample, accumulating gradient
/// contributions chunk-wise, and returns the summed per-sample losses.
template <class PerSample>
double chunked_accumulate(std::size_t n, ParamVector& grad, PerSample&& per_sample) {
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  const std::size_t P = grad.size();
  std::vector<double> loss_part(nchunks, 0.0);
  std::vector<double> grad_part(nchunks > 1 ? nchunks * P : 0, 0.0);
  const auto nc = static_cast<std::ptrdiff_t>(nchunks);
#pragma omp parallel for schedule(static) if (nchunks > 1)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    std::span<double> acc = nchunks > 1 ? std::span<double>(grad_part.data() + cu * P, P)
                                        : grad.span();
    const std::size_t lo = cu * kChunk;
    const std::size_t hi = std::min(n, lo + kChunk);
    double l = 0.0;
    for (std::size_t i = lo; i < hi; ++i) l += per_sample(i, acc);
    loss_part[cu] = l;
  }
  if (nchunks > 1) {
    double* g = grad.data();
    for (std::size_t c = 0; c < nchunks; ++c) {
      const double* src = grad_part.data() + c * P;
      for (std::size_t k = 0; k < P; ++k) g[k] += src[k];
    }
  }
  double total = 0.0;
  for (double l : loss_part) total += l;
  return total;
}

}  // namespace

void RegBatch::validate() const {
  if (noisy.rows == 0) throw ShapeError("regression batch is empty");
  if (noisy.rows != clean.rows || noisy.cols != clean.cols) {
    throw ShapeError("regression batch noisy/clean shapes differ");
  }
}

void ClsBatch::validate(std::size_t num_classes) const {
  if (noisy.rows == 0) throw ShapeError("classification batch is empty");
  if (labels.size() != noisy.rows) throw ShapeError("classification batch label count mismatch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
  }
}

FrozenClassifier::FrozenClassifier(NetworkSpec spec, ParamVector params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (spec_.output_activation != OutputActivation::Softmax) {
    throw ConfigError("classifier needs a softmax head");
  }
  if (params_.size() != spec_.param_count()) {
    throw ShapeError("classifier parameter length mismatch");
  }
}

LossAndGrad reg_loss_and_grad(const NetworkSpec& enhancer, const ParamVector& theta,
                              const RegBatch& batch) {
  batch.validate();
  check_enhancer(enhancer, theta, batch.noisy.cols);
  if (enhancer.output_dim() != batch.clean.cols) {
    throw ShapeError("enhancer output dim does not match clean feature dim");
  }
  const std::size_t B = batch.noisy.rows;
  const std::size_t D = batch.clean.cols;
  const double scale = 1.0 / static_cast<double>(B * D);

  LossAndGrad out{0.0, ParamVector(theta.size(), 0.0)};
  const double total = chunked_accumulate(B, out.grad, [&](std::size_t i, std::span<double> acc) {
    detail::Tape tape;
    detail::forward_tape(enhancer, theta.data(), batch.noisy.row(i), tape);
    const std::vector<double>& e = tape.acts.back();
    auto c = batch.clean.row(i);
    std::vector<double> d(D);
    double l = 0.0;
    for (std::size_t j = 0; j < D; ++j) {
      const double diff = e[j] - c[j];
      l += diff * diff;
      d[j] = 2.0 * scale * diff;
    }
    detail::backprop(enhancer, theta.data(), tape, d, acc, {});
    return l;
  });
  out.loss = total * scale;
  return out;
}

LossAndGrad cls_loss_and_grad(const NetworkSpec& enhancer, const ParamVector& theta,
                              const ProxyModel& proxy, const ClsBatch& batch) {
  batch.validate(proxy.num_classes());
  check_enhancer(enhancer, theta, batch.noisy.cols);
  if (enhancer.output_dim() != proxy.spec().input_dim()) {
    throw ShapeError("enhancer output dim does not match proxy input dim");
  }
  const std::size_t B = batch.noisy.rows;
  const std::size_t K = proxy.num_classes();
  const double scale = 1.0 / static_cast<double>(B);
  const NetworkSpec& pspec = proxy.spec();
  const double* pparams = proxy.params().data();

  LossAndGrad out{0.0, ParamVector(theta.size(), 0.0)};
  const double total = chunked_accumulate(B, out.grad, [&](std::size_t i, std::span<double> acc) {
    detail::Tape etape;
    detail::forward_tape(enhancer, theta.data(), batch.noisy.row(i), etape);
    detail::Tape ptape;
    detail::forward_tape(pspec, pparams, etape.acts.back(), ptape);
    std::vector<double> z = ptape.acts.back();
    const int y = batch.labels[i];
    const double l = detail::log_sum_exp(z) - z[static_cast<std::size_t>(y)];
    detail::softmax_inplace(z);
    z[static_cast<std::size_t>(y)] -= 1.0;
    for (std::size_t k = 0; k < K; ++k) z[k] *= scale;
    std::vector<double> de(enhancer.output_dim(), 0.0);
    detail::backprop(pspec, pparams, ptape, z, {}, de);
    detail::backprop(enhancer, theta.data(), etape, de, acc, {});
    return l;
  });
  out.loss = total * scale;
  return out;
}

Matrix enhance(const NetworkSpec& enhancer, const ParamVector& theta, const Matrix& inputs) {
  check_enhancer(enhancer, theta, inputs.cols);
  Matrix out(inputs.rows, enhancer.output_dim());
  const auto n = static_cast<std::ptrdiff_t>(inputs.rows);
#pragma omp parallel for schedule(static) if (inputs.rows > 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    detail::Tape tape;
    detail::forward_tape(enhancer, theta.data(), inputs.row(iu), tape);
    std::copy(tape.acts.back().begin(), tape.acts.back().end(), out.row(iu).begin());
  }
  return out;
}

double mse(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("mse: shape mismatch");
  if (a.data.empty()) throw ShapeError("mse: empty input");
  double s = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    const double d = a.data[k] - b.data[k];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

namespace {

std::vector<double> per_sample_ce(const FrozenClassifier& clf, const Matrix& inputs,
                                  std::span<const int> labels, std::vector<int>* argmax) {
  if (inputs.cols != clf.spec().input_dim()) throw ShapeError("classifier input dim mismatch");
  if (!labels.empty() && labels.size() != inputs.rows) throw ShapeError("label count mismatch");
  std::vector<double> losses(inputs.rows, 0.0);
  if (argmax) argmax->assign(inputs.rows, 0);
  const auto n = static_cast<std::ptrdiff_t>(inputs.rows);
#pragma omp parallel for schedule(static) if (inputs.rows > 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    detail::Tape tape;
    detail::forward_tape(clf.spec(), clf.params().data(), inputs.row(iu), tape);
    const std::vector<double>& z = tape.acts.back();
    if (!labels.empty()) {
      losses[iu] = detail::log_sum_exp(z) - z[static_cast<std::size_t>(labels[iu])];
    }
    if (argmax) {
      (*argmax)[iu] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    }
  }
  return losses;
}

void check_labels(std::span<const int> labels, std::size_t k) {
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw DataError("label " + std::to_string(y) + " out of range");
    }
  }
}

}  // namespace

double mean_cross_entropy(const FrozenClassifier& clf, const Matrix& inputs,
                          std::span<const int> labels) {
  if (inputs.rows == 0) throw ShapeError("mean_cross_entropy: empty input");
  if (labels.size() != inputs.rows) throw ShapeError("label count mismatch");
  check_labels(labels, clf.num_classes());
  const std::vector<double> losses = per_sample_ce(clf, inputs, labels, nullptr);
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

std::vector<int> predict(const FrozenClassifier& clf, const Matrix& inputs) {
  std::vector<int> out;
  per_sample_ce(clf, inputs, {}, &out);
  return out;
}

double error_rate(const FrozenClassifier& clf, const Matrix& inputs, std::span<const int> labels) {
  if (inputs.rows == 0) throw ShapeError("error_rate: empty input");
  if (labels.size() != inputs.rows) throw ShapeError("label count mismatch");
  const std::vector<int> pred = predict(clf, inputs);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

}  // namespace d4am
