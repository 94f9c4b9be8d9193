#include "d4am/trainer.hpp"

#include <cmath>
#include <sstream>

#include "d4am/checkpoint.hpp"

namespace d4am {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::InitPretrain: return "INIT";
    case Mode::Clso: return "CLSO";
    case Mode::Srpr: return "SRPR";
    case Mode::Gclb: return "GCLB";
    case Mode::D4am: return "D4AM";
    case Mode::FixedWeight: return "FIXED";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "INIT" || s == "INIT_PRETRAIN") return Mode::InitPretrain;
  if (s == "CLSO") return Mode::Clso;
  if (s == "SRPR") return Mode::Srpr;
  if (s == "GCLB") return Mode::Gclb;
  if (s == "D4AM") return Mode::D4am;
  if (s == "FIXED" || s == "FIXED_WEIGHT") return Mode::FixedWeight;
  throw ConfigError("unknown mode '" + s + "'");
}

double EpsilonSchedule::at(std::int64_t t, std::int64_t total_steps) const {
  if (kind == Kind::Constant || total_steps <= 1) return start;
  const double frac = static_cast<double>(t) / static_cast<double>(total_steps - 1);
  return start + (end - start) * frac;
}

bool TrainerConfig::langevin_enabled() const {
  if (langevin) return *langevin;
  return mode == Mode::Srpr || mode == Mode::D4am;
}

void TrainerConfig::validate() const {
  if (total_steps < 0) throw ConfigError("trainer.total_steps must be >= 0");
  if (!(epsilon.start > 0.0) || !(epsilon.end > 0.0)) {
    throw ConfigError("trainer.epsilon values must be > 0");
  }
  if (mode == Mode::FixedWeight && !(fixed_weight >= 0.0)) {
    throw ConfigError("FIXED_WEIGHT requires a weight >= 0");
  }
  if (!(langevin_temperature >= 0.0)) throw ConfigError("trainer.langevin_temperature must be >= 0");
  if (batch_size_cls < 1 || batch_size_reg < 1) throw ConfigError("trainer batch sizes must be >= 1");
  if (eval_every < 1) throw ConfigError("trainer.eval_every must be >= 1");
  combiner.validate();
}

std::string TrainerConfig::label() const {
  if (mode != Mode::FixedWeight) return to_string(mode);
  std::ostringstream os;
  os << "FIXED_" << fixed_weight;
  return os.str();
}

ParamVector langevin_noise(std::size_t dim, double epsilon_t, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 * epsilon_t));
  ParamVector eta(dim);
  for (double& v : eta) v = normal(rng);
  return eta;
}

StepOutcome apply_update(const ParamVector& theta, const ParamVector& g_cls,
                         const ParamVector& g_reg, CombinerState state, const TrainerConfig& cfg,
                         std::int64_t t, std::mt19937_64& rng) {
  if (!g_cls.all_finite()) throw NumericalError("non-finite classification gradient", t);
  if (!g_reg.all_finite()) throw NumericalError("non-finite regression gradient", t);

  const CombinerConfig& cc = cfg.combiner;
  StepRecord rec;
  rec.step = t;
  rec.criterion = criterion(g_cls, g_reg);
  rec.reg_norm_sq = norm_sq(g_reg);
  rec.alpha_srpr = state.alpha_srpr;
  rec.epsilon = cfg.epsilon.at(t, cfg.total_steps);

  if (cfg.calibrates()) {
    const Calibrated cal = calibrate(g_cls, g_reg, cc.eps_guard);
    rec.alpha_gclb = cal.alpha_gclb;
    rec.calibrated_inner = dot(cal.g_star, g_reg);
  } else {
    rec.calibrated_inner = rec.criterion;
  }

  switch (cfg.mode) {
    case Mode::D4am: rec.coefficient = rec.alpha_gclb + state.alpha_srpr; break;
    case Mode::Gclb: rec.coefficient = rec.alpha_gclb; break;
    case Mode::Srpr: rec.coefficient = state.alpha_srpr; break;
    case Mode::FixedWeight: rec.coefficient = cfg.fixed_weight; break;
    case Mode::Clso: rec.coefficient = 0.0; break;
    case Mode::InitPretrain:
      throw ConfigError("apply_update needs a joint fine-tuning mode");
  }

  StepOutcome out;
  const ParamVector direction = axpy(rec.coefficient, g_reg, g_cls);
  out.theta = axpy(-rec.epsilon, direction, theta);
  if (cfg.langevin_enabled() && cfg.langevin_temperature > 0.0) {
    ParamVector eta = langevin_noise(theta.size(), rec.epsilon, rng);
    axpy_inplace(std::sqrt(cfg.langevin_temperature), eta, out.theta);
    rec.noise_applied = true;
  }
  if (!out.theta.all_finite()) throw NumericalError("non-finite parameters after update", t);

  if (cfg.adapts_alpha()) {
    if (rec.reg_norm_sq > cc.eps_guard) {
      rec.alpha_grad =
          alpha_srpr_grad(rec.criterion, rec.reg_norm_sq, rec.alpha_gclb, state.alpha_srpr);
    }
    state = accumulate_and_update_alpha(state, clamp_alpha_grad(rec.alpha_grad, cc), cc);
  }
  out.state = state;
  out.record = rec;
  return out;
}

StepOutcome joint_step(const NetworkSpec& enhancer, const ParamVector& theta,
                       const ProxyModel& proxy, const RegBatch& reg_batch,
                       const ClsBatch& cls_batch, CombinerState state, const TrainerConfig& cfg,
                       std::int64_t t, std::mt19937_64& rng) {
  const LossAndGrad cls = cls_loss_and_grad(enhancer, theta, proxy, cls_batch);
  const LossAndGrad reg = reg_loss_and_grad(enhancer, theta, reg_batch);
  StepOutcome out = apply_update(theta, cls.grad, reg.grad, state, cfg, t, rng);
  out.record.cls_loss = cls.loss;
  out.record.reg_loss = reg.loss;
  return out;
}

namespace {

std::vector<std::size_t> draw_indices(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

RegBatch sample_reg(const RegBatch& data, std::size_t count, std::mt19937_64& rng) {
  const auto idx = draw_indices(data.noisy.rows, count, rng);
  return RegBatch{data.noisy.gather(idx), data.clean.gather(idx)};
}

ClsBatch sample_cls(const ClsBatch& data, std::size_t count, std::mt19937_64& rng) {
  const auto idx = draw_indices(data.noisy.rows, count, rng);
  ClsBatch b{data.noisy.gather(idx), std::vector<int>(count)};
  for (std::size_t k = 0; k < count; ++k) b.labels[k] = data.labels[idx[k]];
  return b;
}

EvalRecord evaluate_step(const TaskBundle& bundle, const ParamVector& theta, std::int64_t step) {
  EvalRecord e;
  e.step = step;
  const Matrix enhanced = enhance(bundle.enhancer, theta, bundle.val->noisy);
  e.val_reg_loss = mse(enhanced, bundle.val->clean);
  e.val_cls_loss = mean_cross_entropy(*bundle.proxy, enhanced, bundle.val->labels);
  for (const FrozenClassifier* c : bundle.val_classifiers) {
    e.evaluator_cls_loss.push_back(mean_cross_entropy(*c, enhanced, bundle.val->labels));
  }
  return e;
}

}  // namespace

ParamVector pretrain(const NetworkSpec& enhancer, const ParamVector& theta0,
                     const RegBatch& dataset, const TrainerConfig& cfg) {
  if (cfg.mode != Mode::InitPretrain) throw ConfigError("pretrain requires mode INIT");
  cfg.validate();
  dataset.validate();
  std::mt19937_64 rng(cfg.seed);
  ParamVector theta = theta0;
  for (std::int64_t t = 0; t < cfg.total_steps; ++t) {
    const RegBatch batch = sample_reg(dataset, cfg.batch_size_reg, rng);
    const LossAndGrad reg = reg_loss_and_grad(enhancer, theta, batch);
    if (!reg.grad.all_finite()) throw NumericalError("non-finite regression gradient", t);
    axpy_inplace(-cfg.epsilon.at(t, cfg.total_steps), reg.grad, theta);
  }
  return theta;
}

ParamVector pretrain(const NetworkSpec& enhancer, const RegBatch& dataset,
                     const TrainerConfig& cfg) {
  return pretrain(enhancer, init_params(enhancer, cfg.seed), dataset, cfg);
}

RunReport run(const TrainerConfig& cfg, const TaskBundle& bundle,
              const std::filesystem::path& checkpoint) {
  cfg.validate();
  if (cfg.mode == Mode::InitPretrain) throw ConfigError("run requires a fine-tuning mode");
  if (!bundle.proxy || !bundle.reg_train || !bundle.cls_train) {
    throw ConfigError("task bundle is missing proxy or training data");
  }
  if (bundle.theta0.size() != bundle.enhancer.param_count()) {
    throw ShapeError("initial parameters do not match the enhancer");
  }

  RunReport report;
  report.label = cfg.label();
  report.seed = cfg.seed;
  report.steps.reserve(static_cast<std::size_t>(cfg.total_steps));

  std::mt19937_64 rng(cfg.seed);
  ParamVector theta = bundle.theta0;
  CombinerState state = CombinerState::initial(cfg.combiner);

  if (bundle.val) report.evals.push_back(evaluate_step(bundle, theta, 0));
  for (std::int64_t t = 0; t < cfg.total_steps; ++t) {
    const RegBatch reg_batch = sample_reg(*bundle.reg_train, cfg.batch_size_reg, rng);
    const ClsBatch cls_batch = sample_cls(*bundle.cls_train, cfg.batch_size_cls, rng);
    StepOutcome o = joint_step(bundle.enhancer, theta, *bundle.proxy, reg_batch, cls_batch, state,
                               cfg, t, rng);
    theta = std::move(o.theta);
    state = o.state;
    report.steps.push_back(o.record);
    const std::int64_t done = t + 1;
    if (bundle.val && (done % cfg.eval_every == 0 || done == cfg.total_steps)) {
      report.evals.push_back(evaluate_step(bundle, theta, done));
    }
  }
  report.final_theta = std::move(theta);
  report.final_state = state;

  if (!checkpoint.empty()) {
    try {
      save_checkpoint(report.final_theta, checkpoint);
    } catch (const IoError& e) {
      throw RunError(e.what(), std::move(report));
    }
    report.checkpoint_path = checkpoint.string();
  }
  return report;
}

}  // namespace d4am
