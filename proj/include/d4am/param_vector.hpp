#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace d4am {

/// Flat float64 container for network parameters and their gradients.
///
/// Layout is layer-major: for each dense layer, the weight matrix in
/// row-major (out x in) order followed by its bias vector.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  ParamVector(std::initializer_list<double> init) : values_(init) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

// Reductions use fixed-size blocks whose partial sums are combined in block
// order, so results do not depend on the OpenMP thread count.
double dot(const ParamVector& a, const ParamVector& b);
double norm_sq(const ParamVector& a);

/// Returns y + alpha * x.
ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y);

/// y += alpha * x
void axpy_inplace(double alpha, const ParamVector& x, ParamVector& y);

namespace reference {
double dot(const ParamVector& a, const ParamVector& b);
}

}  // namespace d4am
