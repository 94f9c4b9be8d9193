#pragma once

#include "d4am/param_vector.hpp"

namespace d4am {

/// Hyperparameters of the calibration / auxiliary-weighting scheme.
struct CombinerConfig {
  double beta = 0.05;           ///< step size for alpha_srpr
  int update_period = 16;       ///< alpha_srpr is updated once per this many steps
  double clamp_lo = -1.0;
  double clamp_hi = 1.0;
  double alpha_srpr_init = 1.0;
  double eps_guard = 1e-12;     ///< ||g_reg||^2 at or below this disables calibration

  void validate() const;  // throws ConfigError
};

struct CombinerState {
  double alpha_srpr = 1.0;
  double accum_alpha_grad = 0.0;
  int steps_since_alpha_update = 0;

  static CombinerState initial(const CombinerConfig& cfg) { return {cfg.alpha_srpr_init, 0.0, 0}; }

  friend bool operator==(const CombinerState&, const CombinerState&) = default;
};

/// Inner product of the classification and regression gradients.
double criterion(const ParamVector& g_cls, const ParamVector& g_reg);

/// Coefficient that projects g_cls onto the half-space <g, g_reg> >= 0:
/// -C / ||g_reg||^2 when C < 0, otherwise 0. Zero whenever ||g_reg||^2 is
/// at or below `eps_guard`.
double alpha_gclb(const ParamVector& g_cls, const ParamVector& g_reg, double eps_guard);

struct Calibrated {
  ParamVector g_star;
  double alpha_gclb = 0.0;
};

/// g* = g_cls + alpha_gclb * g_reg. Returns g_cls unchanged (bit-exact) when
/// the gradients already agree.
Calibrated calibrate(const ParamVector& g_cls, const ParamVector& g_reg, double eps_guard);

/// d/d(alpha_srpr) of ||g_cls + (alpha_gclb - alpha_srpr) * g_reg||^2.
double alpha_srpr_grad(const ParamVector& g_cls, const ParamVector& g_reg, double alpha_gclb,
                       double alpha_srpr);

/// Scalar form used when the inner products are already known.
double alpha_srpr_grad(double criterion, double reg_norm_sq, double alpha_gclb, double alpha_srpr);

double clamp_alpha_grad(double g_alpha, const CombinerConfig& cfg);

/// Adds one clamped alpha gradient to the buffer. On every
/// `update_period`-th call, alpha_srpr moves by -beta times the buffer mean
/// and the buffer resets. alpha_srpr is not confined to any interval.
CombinerState accumulate_and_update_alpha(CombinerState state, double g_alpha_clamped,
                                          const CombinerConfig& cfg);

}  // namespace d4am
