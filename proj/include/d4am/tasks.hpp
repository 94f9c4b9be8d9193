#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "d4am/matrix.hpp"
#include "d4am/network.hpp"
#include "d4am/objectives.hpp"

namespace d4am {

enum class CleanGenerator { GaussianClasses, SinusoidBank };
enum class NoiseGenerator { Gaussian, Impulsive, Structured };

std::string to_string(CleanGenerator g);
std::string to_string(NoiseGenerator g);
CleanGenerator parse_clean_generator(const std::string& s);
NoiseGenerator parse_noise_generator(const std::string& s);

/// Synthetic denoising-for-classification task.
///
/// Clean features of class k lie on a low-rank affine piece around a class
/// centre; noisy inputs add a noise draw scaled to an SNR sampled uniformly
/// in [snr_low_db, snr_high_db].
struct TaskSpec {
  std::size_t feature_dim = 16;
  std::size_t num_classes = 4;
  double snr_low_db = -4.0;
  double snr_high_db = 6.0;
  CleanGenerator clean_generator = CleanGenerator::GaussianClasses;
  NoiseGenerator noise_generator = NoiseGenerator::Gaussian;
  std::size_t train_size = 4000;
  std::size_t val_size = 1000;
  std::size_t test_size = 2000;
  double label_fraction = 1.0;  ///< share of the training pool that carries labels
  std::uint64_t seed = 0;

  // gaussian_classes geometry
  std::size_t subspace_rank = 2;
  double class_separation = 3.0;
  double within_class_scale = 1.0;
  /// One within-class subspace shared by all classes (class-independent
  /// variation) instead of one per class.
  bool shared_subspace = false;

  void validate() const;  // throws ConfigError
};

/// Per-task class geometry, a deterministic function of TaskSpec::seed.
struct ClassStructure {
  std::vector<std::vector<double>> centres;  ///< K x D
  std::vector<Matrix> bases;                 ///< K of D x rank
  std::vector<double> frequencies;           ///< sinusoid_bank
};

ClassStructure make_class_structure(const TaskSpec& spec);

struct CleanSamples {
  Matrix features;
  std::vector<int> labels;
};

/// Sample i carries label i mod K, so classes stay balanced within one.
CleanSamples gen_clean(const TaskSpec& spec, std::size_t n, std::mt19937_64& rng);
CleanSamples gen_clean(const TaskSpec& spec, const ClassStructure& cs, std::size_t n,
                       std::mt19937_64& rng);

std::vector<double> gen_noise(const TaskSpec& spec, std::mt19937_64& rng);

/// Mean-square power.
double signal_power(std::span<const double> x);

/// clean + s * noise, with s chosen so that the clean-to-scaled-noise power
/// ratio is snr_db decibels. Throws DataError on zero-power inputs.
std::vector<double> mix_noise(std::span<const double> clean, std::span<const double> noise,
                              double snr_db);

/// Noisy copies of every row, one fresh noise draw and SNR per row.
Matrix mix_rows(const TaskSpec& spec, const Matrix& clean, std::mt19937_64& rng);

/// All splits of one task instance.
struct TaskData {
  TaskSpec spec;
  CleanSamples clean_train;  ///< classifier training pool (clean)
  RegBatch reg_train;        ///< full training pool, noisy/clean pairs
  ClsBatch cls_train;        ///< labelled subset, label_fraction of the pool
  LabeledSet val;
  LabeledSet test;
};

TaskData build_task_data(const TaskSpec& spec);

struct ClassifierSpec {
  NetworkSpec net;
  std::uint64_t seed = 0;

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

struct ClassifierTrainConfig {
  std::size_t steps = 4000;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double accuracy_floor = 0.95;
};

/// Trains on clean data with minibatch SGD, then freezes. Throws
/// TrainingError when training accuracy ends below the floor.
FrozenClassifier train_classifier(const ClassifierSpec& spec, const CleanSamples& data,
                                  const ClassifierTrainConfig& cfg);

inline ProxyModel train_proxy(const ClassifierSpec& spec, const CleanSamples& data,
                              const ClassifierTrainConfig& cfg) {
  return train_classifier(spec, data, cfg);
}

struct Evaluator {
  std::string name;
  ClassifierSpec spec;
  FrozenClassifier model;
  double clean_error = 0.0;  ///< error on held-out clean features
};

using EvaluatorSet = std::vector<Evaluator>;

/// Trains one frozen classifier per spec. A spec equal to `proxy_spec`
/// (same architecture and seed) is a ConfigError.
EvaluatorSet train_evaluators(std::span<const ClassifierSpec> specs, const CleanSamples& data,
                              const ClassifierSpec& proxy_spec, const ClassifierTrainConfig& cfg,
                              const Matrix& heldout_clean, std::span<const int> heldout_labels);

/// Per-evaluator error rate on inputs fed directly, without enhancement.
std::vector<double> evaluate_raw(const EvaluatorSet& set, const Matrix& inputs,
                                 std::span<const int> labels);

/// Per-evaluator error rate on enhance(noisy).
std::vector<double> evaluate(const NetworkSpec& enhancer, const ParamVector& theta,
                             const EvaluatorSet& set, const Matrix& noisy,
                             std::span<const int> labels);

}  // namespace d4am
