#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "d4am/matrix.hpp"
#include "d4am/network.hpp"
#include "d4am/param_vector.hpp"

namespace d4am {

/// Noisy/clean feature pairs for the regression objective.
struct RegBatch {
  Matrix noisy;
  Matrix clean;

  void validate() const;
};

/// Noisy features with class labels for the classification objective.
struct ClsBatch {
  Matrix noisy;
  std::vector<int> labels;

  void validate(std::size_t num_classes) const;
};

/// Held-out split: noisy inputs with their clean targets and labels.
struct LabeledSet {
  Matrix noisy;
  Matrix clean;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// A trained classifier whose parameters never change after construction.
class FrozenClassifier {
 public:
  FrozenClassifier(NetworkSpec spec, ParamVector params);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const ParamVector& params() const noexcept { return params_; }
  std::size_t num_classes() const { return spec_.output_dim(); }

 private:
  NetworkSpec spec_;
  ParamVector params_;
};

/// The classifier through which the classification gradient flows.
using ProxyModel = FrozenClassifier;

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean squared error between enhance(noisy) and clean, averaged over all
/// B*D entries, and its gradient with respect to the enhancer parameters.
LossAndGrad reg_loss_and_grad(const NetworkSpec& enhancer, const ParamVector& theta,
                              const RegBatch& batch);

/// Mean cross-entropy of the labels under proxy(enhance(noisy)); gradient
/// with respect to the enhancer parameters only.
LossAndGrad cls_loss_and_grad(const NetworkSpec& enhancer, const ParamVector& theta,
                              const ProxyModel& proxy, const ClsBatch& batch);

// Loss-only evaluation helpers used for validation and test metrics.

Matrix enhance(const NetworkSpec& enhancer, const ParamVector& theta, const Matrix& inputs);

double mse(const Matrix& a, const Matrix& b);

double mean_cross_entropy(const FrozenClassifier& clf, const Matrix& inputs,
                          std::span<const int> labels);

std::vector<int> predict(const FrozenClassifier& clf, const Matrix& inputs);

double error_rate(const FrozenClassifier& clf, const Matrix& inputs, std::span<const int> labels);

/// Serial, per-sample implementations kept as test oracles for the batched
/// kernels above.
namespace reference {

LossAndGrad reg_loss_and_grad(const NetworkSpec& enhancer, const ParamVector& theta,
                              const RegBatch& batch);

LossAndGrad cls_loss_and_grad(const NetworkSpec& enhancer, const ParamVector& theta,
                              const ProxyModel& proxy, const ClsBatch& batch);

}  // namespace reference

}  // namespace d4am
