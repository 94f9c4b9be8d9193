#include "d4am/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "d4am/errors.hpp"

namespace d4am {

namespace {

// Independent streams per purpose, derived from one task seed.
enum Stream : std::uint64_t {
  kStructure = 1,
  kCleanPool,
  kRegNoise,
  kClsNoise,
  kVal,
  kTest,
};

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

}  // namespace

std::string to_string(CleanGenerator g) {
  return g == CleanGenerator::GaussianClasses ? "gaussian_classes" : "sinusoid_bank";
}

std::string to_string(NoiseGenerator g) {
  switch (g) {
    case NoiseGenerator::Gaussian: return "gaussian";
    case NoiseGenerator::Impulsive: return "impulsive";
    case NoiseGenerator::Structured: return "structured";
  }
  return "?";
}

CleanGenerator parse_clean_generator(const std::string& s) {
  if (s == "gaussian_classes") return CleanGenerator::GaussianClasses;
  if (s == "sinusoid_bank") return CleanGenerator::SinusoidBank;
  throw ConfigError("unknown clean generator '" + s + "'");
}

NoiseGenerator parse_noise_generator(const std::string& s) {
  if (s == "gaussian") return NoiseGenerator::Gaussian;
  if (s == "impulsive") return NoiseGenerator::Impulsive;
  if (s == "structured") return NoiseGenerator::Structured;
  throw ConfigError("unknown noise generator '" + s + "'");
}

void TaskSpec::validate() const {
  if (feature_dim < 2) throw ConfigError("task.feature_dim must be >= 2");
  if (num_classes < 2) throw ConfigError("task.num_classes must be >= 2");
  if (!(snr_low_db <= snr_high_db)) throw ConfigError("task.snr_low_db must be <= task.snr_high_db");
  if (train_size < 1 || val_size < 1 || test_size < 1) {
    throw ConfigError("task split sizes must be >= 1");
  }
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
    throw ConfigError("task.label_fraction must lie in (0, 1]");
  }
  if (subspace_rank < 1 || subspace_rank > feature_dim) {
    throw ConfigError("task.subspace_rank must lie in [1, feature_dim]");
  }
  if (!(class_separation > 0.0)) throw ConfigError("task.class_separation must be > 0");
  if (!(within_class_scale >= 0.0)) throw ConfigError("task.within_class_scale must be >= 0");
}

ClassStructure make_class_structure(const TaskSpec& spec) {
  spec.validate();
  const std::size_t D = spec.feature_dim;
  const std::size_t K = spec.num_classes;
  const std::size_t r = spec.subspace_rank;
  auto rng = stream_rng(spec.seed, kStructure);
  std::normal_distribution<double> normal(0.0, 1.0);

  ClassStructure cs;
  cs.centres.resize(K, std::vector<double>(D));
  for (auto& c : cs.centres) {
    double n2 = 0.0;
    for (double& v : c) {
      v = normal(rng);
      n2 += v * v;
    }
    const double s = spec.class_separation / std::sqrt(n2);
    for (double& v : c) v *= s;
  }
  cs.bases.resize(spec.shared_subspace ? 1 : K, Matrix(D, r));
  for (auto& b : cs.bases) {
    // Gram-Schmidt on Gaussian columns.
    for (std::size_t j = 0; j < r; ++j) {
      std::vector<double> col(D);
      for (double& v : col) v = normal(rng);
      for (std::size_t p = 0; p < j; ++p) {
        double proj = 0.0;
        for (std::size_t i = 0; i < D; ++i) proj += col[i] * b(i, p);
        for (std::size_t i = 0; i < D; ++i) col[i] -= proj * b(i, p);
      }
      double n2 = 0.0;
      for (double v : col) n2 += v * v;
      const double inv = 1.0 / std::sqrt(n2);
      for (std::size_t i = 0; i < D; ++i) b(i, j) = col[i] * inv;
    }
  }
  cs.frequencies.resize(K);
  for (std::size_t k = 0; k < K; ++k) cs.frequencies[k] = static_cast<double>(k + 1);
  return cs;
}

CleanSamples gen_clean(const TaskSpec& spec, std::size_t n, std::mt19937_64& rng) {
  return gen_clean(spec, make_class_structure(spec), n, rng);
}

CleanSamples gen_clean(const TaskSpec& spec, const ClassStructure& cs, std::size_t n,
                       std::mt19937_64& rng) {
  if (n < 1) throw ConfigError("gen_clean: n must be >= 1");
  const std::size_t D = spec.feature_dim;
  const std::size_t K = spec.num_classes;
  const std::size_t r = spec.subspace_rank;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  CleanSamples out{Matrix(n, D), std::vector<int>(n)};
  std::vector<double> z(r);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % K;
    out.labels[i] = static_cast<int>(k);
    auto x = out.features.row(i);
    if (spec.clean_generator == CleanGenerator::GaussianClasses) {
      for (double& v : z) v = spec.within_class_scale * normal(rng);
      const Matrix& b = cs.bases[cs.bases.size() == 1 ? 0 : k];
      for (std::size_t d = 0; d < D; ++d) {
        double s = cs.centres[k][d];
        for (std::size_t j = 0; j < r; ++j) s += b(d, j) * z[j];
        x[d] = s;
      }
    } else {
      // Random amplitude and phase of a class-specific frequency.
      const double amp = spec.class_separation * (0.75 + 0.5 * unit(rng));
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      const double f = cs.frequencies[k];
      for (std::size_t d = 0; d < D; ++d) {
        const double t = 2.0 * std::numbers::pi * f * static_cast<double>(d) /
                         static_cast<double>(D);
        x[d] = amp * std::sin(t + phase) + spec.within_class_scale * 0.1 * normal(rng);
      }
    }
  }
  return out;
}

std::vector<double> gen_noise(const TaskSpec& spec, std::mt19937_64& rng) {
  const std::size_t D = spec.feature_dim;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> n(D);
  switch (spec.noise_generator) {
    case NoiseGenerator::Gaussian:
      for (double& v : n) v = normal(rng);
      break;
    case NoiseGenerator::Impulsive:
      for (double& v : n) {
        v = 0.1 * normal(rng);
        if (unit(rng) < 0.1) v += 3.0 * normal(rng);
      }
      break;
    case NoiseGenerator::Structured: {
      const double f1 = 1.0 + 3.0 * unit(rng);
      const double f2 = 1.0 + 3.0 * unit(rng);
      const double p1 = 2.0 * std::numbers::pi * unit(rng);
      const double p2 = 2.0 * std::numbers::pi * unit(rng);
      for (std::size_t d = 0; d < D; ++d) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(d) / static_cast<double>(D);
        n[d] = std::sin(f1 * t + p1) + 0.5 * std::sin(f2 * t + p2) + 0.2 * normal(rng);
      }
      break;
    }
  }
  return n;
}

double signal_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

std::vector<double> mix_noise(std::span<const double> clean, std::span<const double> noise,
                              double snr_db) {
  if (clean.size() != noise.size()) throw ShapeError("mix_noise: length mismatch");
  const double pc = signal_power(clean);
  const double pn = signal_power(noise);
  if (!(pc > 0.0)) throw DataError("mix_noise: clean signal has zero power");
  if (!(pn > 0.0)) throw DataError("mix_noise: noise has zero power");
  const double s = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  std::vector<double> out(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) out[i] = clean[i] + s * noise[i];
  return out;
}

Matrix mix_rows(const TaskSpec& spec, const Matrix& clean, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> snr(spec.snr_low_db, spec.snr_high_db);
  Matrix out(clean.rows, clean.cols);
  for (std::size_t i = 0; i < clean.rows; ++i) {
    const std::vector<double> noise = gen_noise(spec, rng);
    const double db = spec.snr_low_db == spec.snr_high_db ? spec.snr_low_db : snr(rng);
    const std::vector<double> noisy = mix_noise(clean.row(i), noise, db);
    std::copy(noisy.begin(), noisy.end(), out.row(i).begin());
  }
  return out;
}

TaskData build_task_data(const TaskSpec& spec) {
  spec.validate();
  const ClassStructure cs = make_class_structure(spec);
  TaskData data;
  data.spec = spec;

  auto pool_rng = stream_rng(spec.seed, kCleanPool);
  data.clean_train = gen_clean(spec, cs, spec.train_size, pool_rng);

  auto reg_rng = stream_rng(spec.seed, kRegNoise);
  data.reg_train.clean = data.clean_train.features;
  data.reg_train.noisy = mix_rows(spec, data.clean_train.features, reg_rng);

  const auto labelled = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.label_fraction *
                                            static_cast<double>(spec.train_size))),
      1, spec.train_size);
  std::vector<std::size_t> idx(labelled);
  for (std::size_t i = 0; i < labelled; ++i) idx[i] = i;
  const Matrix labelled_clean = data.clean_train.features.gather(idx);
  auto cls_rng = stream_rng(spec.seed, kClsNoise);
  data.cls_train.noisy = mix_rows(spec, labelled_clean, cls_rng);
  data.cls_train.labels.assign(data.clean_train.labels.begin(),
                               data.clean_train.labels.begin() + static_cast<std::ptrdiff_t>(labelled));

  auto make_split = [&](std::size_t n, Stream stream) {
    auto rng = stream_rng(spec.seed, stream);
    CleanSamples c = gen_clean(spec, cs, n, rng);
    LabeledSet s;
    s.noisy = mix_rows(spec, c.features, rng);
    s.clean = std::move(c.features);
    s.labels = std::move(c.labels);
    return s;
  };
  data.val = make_split(spec.val_size, kVal);
  data.test = make_split(spec.test_size, kTest);
  return data;
}

FrozenClassifier train_classifier(const ClassifierSpec& spec, const CleanSamples& data,
                                  const ClassifierTrainConfig& cfg) {
  spec.net.validate();
  if (spec.net.output_activation != OutputActivation::Softmax) {
    throw ConfigError("classifier network needs a softmax head");
  }
  const std::size_t n = data.features.rows;
  if (n == 0) throw DataError("classifier training set is empty");
  if (data.features.cols != spec.net.input_dim()) throw ShapeError("classifier input dim mismatch");
  const std::size_t K = spec.net.output_dim();
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) throw DataError("classifier label out of range");
  }

  ParamVector params = init_params(spec.net, spec.seed);
  std::mt19937_64 rng(spec.seed ^ 0x5eedc1a55ULL);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t B = std::max<std::size_t>(1, cfg.batch_size);
  ParamVector grad(params.size());
  detail::Tape tape;
  std::vector<double> z;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t i = pick(rng);
      detail::forward_tape(spec.net, params.data(), data.features.row(i), tape);
      z = tape.acts.back();
      detail::softmax_inplace(z);
      z[static_cast<std::size_t>(data.labels[i])] -= 1.0;
      for (double& v : z) v /= static_cast<double>(B);
      detail::backprop(spec.net, params.data(), tape, z, grad.span(), {});
    }
    axpy_inplace(-cfg.learning_rate, grad, params);
  }
  if (!params.all_finite()) throw TrainingError("classifier training diverged");

  FrozenClassifier clf(spec.net, std::move(params));
  const double acc = 1.0 - error_rate(clf, data.features, data.labels);
  if (acc < cfg.accuracy_floor) {
    throw TrainingError("classifier " + spec.net.describe() + " seed " +
                        std::to_string(spec.seed) + " reached clean accuracy " +
                        std::to_string(acc) + " < floor " + std::to_string(cfg.accuracy_floor));
  }
  return clf;
}

EvaluatorSet train_evaluators(std::span<const ClassifierSpec> specs, const CleanSamples& data,
                              const ClassifierSpec& proxy_spec, const ClassifierTrainConfig& cfg,
                              const Matrix& heldout_clean, std::span<const int> heldout_labels) {
  for (const ClassifierSpec& s : specs) {
    if (s == proxy_spec) {
      throw ConfigError("evaluator " + s.net.describe() + " seed " + std::to_string(s.seed) +
                        " is identical to the proxy");
    }
  }
  EvaluatorSet set;
  set.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    FrozenClassifier clf = train_classifier(specs[i], data, cfg);
    const double clean_err = error_rate(clf, heldout_clean, heldout_labels);
    set.push_back(Evaluator{"eval" + std::to_string(i), specs[i], std::move(clf), clean_err});
  }
  return set;
}

std::vector<double> evaluate_raw(const EvaluatorSet& set, const Matrix& inputs,
                                 std::span<const int> labels) {
  std::vector<double> out;
  out.reserve(set.size());
  for (const Evaluator& e : set) out.push_back(error_rate(e.model, inputs, labels));
  return out;
}

std::vector<double> evaluate(const NetworkSpec& enhancer, const ParamVector& theta,
                             const EvaluatorSet& set, const Matrix& noisy,
                             std::span<const int> labels) {
  return evaluate_raw(set, enhance(enhancer, theta, noisy), labels);
}

}  // namespace d4am
