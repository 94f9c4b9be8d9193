#include "d4am/combiner.hpp"

#include <algorithm>
#include <cmath>

#include "d4am/errors.hpp"

namespace d4am {

void CombinerConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("combiner.beta must be > 0");
  if (update_period < 1) throw ConfigError("combiner.update_period must be >= 1");
  if (!(clamp_lo < clamp_hi)) throw ConfigError("combiner.clamp_lo must be < combiner.clamp_hi");
  if (!std::isfinite(alpha_srpr_init)) throw ConfigError("combiner.alpha_srpr_init must be finite");
  if (!(eps_guard >= 0.0)) throw ConfigError("combiner.eps_guard must be >= 0");
}

double criterion(const ParamVector& g_cls, const ParamVector& g_reg) { return dot(g_cls, g_reg); }

double alpha_gclb(const ParamVector& g_cls, const ParamVector& g_reg, double eps_guard) {
  const double c = criterion(g_cls, g_reg);
  const double nn = norm_sq(g_reg);
  if (nn <= eps_guard || !(c < 0.0)) return 0.0;
  return -c / nn;
}

Calibrated calibrate(const ParamVector& g_cls, const ParamVector& g_reg, double eps_guard) {
  const double c = criterion(g_cls, g_reg);
  const double nn = norm_sq(g_reg);
  if (nn <= eps_guard || !(c < 0.0)) return {g_cls, 0.0};
  double alpha = -c / nn;
  ParamVector g_star = axpy(alpha, g_reg, g_cls);
  // Cancellation can leave <g*, g_reg> a few ulps negative when g_cls is
  // nearly anti-parallel to g_reg; one refinement step removes the residue.
  const double residual = dot(g_star, g_reg);
  if (residual < 0.0) {
    const double fix = -residual / nn;
    axpy_inplace(fix, g_reg, g_star);
    alpha += fix;
  }
  return {std::move(g_star), alpha};
}

double alpha_srpr_grad(double c, double reg_norm_sq, double alpha_gclb, double alpha_srpr) {
  return -2.0 * c - 2.0 * (alpha_gclb - alpha_srpr) * reg_norm_sq;
}

double alpha_srpr_grad(const ParamVector& g_cls, const ParamVector& g_reg, double alpha_gclb,
                       double alpha_srpr) {
  return alpha_srpr_grad(criterion(g_cls, g_reg), norm_sq(g_reg), alpha_gclb, alpha_srpr);
}

double clamp_alpha_grad(double g_alpha, const CombinerConfig& cfg) {
  return std::clamp(g_alpha, cfg.clamp_lo, cfg.clamp_hi);
}

CombinerState accumulate_and_update_alpha(CombinerState state, double g_alpha_clamped,
                                          const CombinerConfig& cfg) {
  state.accum_alpha_grad += g_alpha_clamped;
  state.steps_since_alpha_update += 1;
  if (state.steps_since_alpha_update >= cfg.update_period) {
    state.alpha_srpr -= cfg.beta * (state.accum_alpha_grad / cfg.update_period);
    state.accum_alpha_grad = 0.0;
    state.steps_since_alpha_update = 0;
  }
  return state;
}

}  // namespace d4am
