#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "d4am/combiner.hpp"
#include "d4am/errors.hpp"
#include "d4am/network.hpp"
#include "d4am/objectives.hpp"
#include "d4am/param_vector.hpp"

namespace d4am {

/// Training arm. InitPretrain is regression-only pre-training; the rest are
/// joint fine-tuning variants that differ in the coefficient on g_reg:
///   Clso        0
///   Gclb        alpha_gclb
///   Srpr        alpha_srpr (adapted)
///   D4am        alpha_gclb + alpha_srpr (adapted)
///   FixedWeight w
enum class Mode { InitPretrain, Clso, Srpr, Gclb, D4am, FixedWeight };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);  // accepts INIT, CLSO, SRPR, GCLB, D4AM, FIXED

struct EpsilonSchedule {
  enum class Kind { Constant, LinearDecay };
  Kind kind = Kind::Constant;
  double start = 1e-3;
  double end = 1e-3;  ///< used by LinearDecay only

  static EpsilonSchedule constant(double eps) { return {Kind::Constant, eps, eps}; }
  static EpsilonSchedule linear_decay(double eps0, double eps_t) {
    return {Kind::LinearDecay, eps0, eps_t};
  }

  double at(std::int64_t t, std::int64_t total_steps) const;
};

struct TrainerConfig {
  Mode mode = Mode::D4am;
  double fixed_weight = 0.0;  ///< FixedWeight only
  std::int64_t total_steps = 1000;
  EpsilonSchedule epsilon = EpsilonSchedule::constant(1e-3);
  /// Unset: on for Srpr/D4am, off otherwise.
  std::optional<bool> langevin;
  /// Variance multiplier on the N(0, 2 eps_t) noise. The losses here are
  /// per-sample means, so 1.0 samples a posterior tempered by the dataset
  /// size; smaller values cool it.
  double langevin_temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t batch_size_cls = 16;
  std::size_t batch_size_reg = 16;
  CombinerConfig combiner;
  std::int64_t eval_every = 100;

  bool langevin_enabled() const;
  bool adapts_alpha() const { return mode == Mode::Srpr || mode == Mode::D4am; }
  bool calibrates() const { return mode == Mode::Gclb || mode == Mode::D4am; }
  void validate() const;  // throws ConfigError
  /// "D4AM", "CLSO", ... or "FIXED_<w>".
  std::string label() const;
};

struct StepRecord {
  std::int64_t step = 0;
  double cls_loss = 0.0;
  double reg_loss = 0.0;
  double alpha_gclb = 0.0;
  double alpha_srpr = 0.0;      ///< value used in this step's update
  double criterion = 0.0;
  double reg_norm_sq = 0.0;
  double calibrated_inner = 0.0;  ///< <g_cls + alpha_gclb g_reg, g_reg>
  double coefficient = 0.0;       ///< total weight applied to g_reg
  double epsilon = 0.0;
  double alpha_grad = 0.0;        ///< unclamped d/d alpha_srpr (0 when not adapting)
  bool noise_applied = false;
};

struct EvalRecord {
  std::int64_t step = 0;  ///< number of updates applied before evaluation
  double val_cls_loss = 0.0;  ///< under the proxy
  double val_reg_loss = 0.0;
  std::vector<double> evaluator_cls_loss;
};

struct RunReport {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  ParamVector final_theta;
  CombinerState final_state;
  std::string checkpoint_path;
};

/// Run aborted by a checkpoint write failure; carries what was completed.
class RunError : public IoError {
 public:
  RunError(const std::string& what, RunReport partial)
      : IoError(what), partial_(std::move(partial)) {}
  const RunReport& partial() const noexcept { return partial_; }

 private:
  RunReport partial_;
};

/// i.i.d. N(0, 2 * epsilon_t) entries.
ParamVector langevin_noise(std::size_t dim, double epsilon_t, std::mt19937_64& rng);

struct StepOutcome {
  ParamVector theta;
  CombinerState state;
  StepRecord record;
};

/// One fine-tuning update from precomputed gradients:
///   theta' = theta - eps_t (g_cls + coefficient * g_reg) + eta_t
/// followed by the alpha_srpr bookkeeping for adapting modes. The alpha
/// gradient is evaluated at theta (the same gradients as the update).
/// Throws NumericalError if either gradient holds a non-finite value.
StepOutcome apply_update(const ParamVector& theta, const ParamVector& g_cls,
                         const ParamVector& g_reg, CombinerState state, const TrainerConfig& cfg,
                         std::int64_t t, std::mt19937_64& rng);

StepOutcome joint_step(const NetworkSpec& enhancer, const ParamVector& theta,
                       const ProxyModel& proxy, const RegBatch& reg_batch,
                       const ClsBatch& cls_batch, CombinerState state, const TrainerConfig& cfg,
                       std::int64_t t, std::mt19937_64& rng);

/// Plain gradient descent on the regression loss alone; minibatches of
/// cfg.batch_size_reg drawn with replacement. cfg.mode must be InitPretrain.
ParamVector pretrain(const NetworkSpec& enhancer, const ParamVector& theta0,
                     const RegBatch& dataset, const TrainerConfig& cfg);

/// Same, starting from init_params(enhancer, cfg.seed).
ParamVector pretrain(const NetworkSpec& enhancer, const RegBatch& dataset,
                     const TrainerConfig& cfg);

/// Everything a fine-tuning run reads. Pointed-to data must outlive the run
/// and is never modified, so one bundle may back several concurrent runs.
struct TaskBundle {
  NetworkSpec enhancer;
  ParamVector theta0;
  const ProxyModel* proxy = nullptr;
  const RegBatch* reg_train = nullptr;
  const ClsBatch* cls_train = nullptr;
  const LabeledSet* val = nullptr;                     ///< optional
  std::vector<const FrozenClassifier*> val_classifiers;  ///< optional, scored on val
};

/// Executes cfg.total_steps joint steps from bundle.theta0, evaluating on
/// the validation split at step 0, every eval_every steps, and at the end.
/// Writes the final parameters to `checkpoint` when non-empty.
RunReport run(const TrainerConfig& cfg, const TaskBundle& bundle,
              const std::filesystem::path& checkpoint = {});

}  // namespace d4am
