#include "d4am/param_vector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "d4am/errors.hpp"

namespace d4am {

namespace {

constexpr std::size_t kBlock = 8192;

void require_same_length(const ParamVector& a, const ParamVector& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  }
}

double blocked_dot(const double* a, const double* b, std::size_t n) {
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  if (blocks <= 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }
  std::vector<double> partial(blocks, 0.0);
  const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < nb; ++k) {
    const std::size_t lo = static_cast<std::size_t>(k) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    partial[static_cast<std::size_t>(k)] = s;
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

}  // namespace

bool ParamVector::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b, "dot");
  return blocked_dot(a.data(), b.data(), a.size());
}

double norm_sq(const ParamVector& a) { return blocked_dot(a.data(), a.data(), a.size()); }

ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y) {
  ParamVector out = y;
  axpy_inplace(alpha, x, out);
  return out;
}

void axpy_inplace(double alpha, const ParamVector& x, ParamVector& y) {
  require_same_length(x, y, "axpy");
  const std::size_t n = x.size();
  const double* px = x.data();
  double* py = y.data();
  for (std::size_t i = 0; i < n; ++i) py[i] += alpha * px[i];
}

namespace reference {

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace reference

}  // namespace d4am
