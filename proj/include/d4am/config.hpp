#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "d4am/network.hpp"
#include "d4am/tasks.hpp"
#include "d4am/trainer.hpp"

namespace d4am {

/// Hidden layer widths plus one activation for all of them.
struct ArchSpec {
  std::vector<std::size_t> hidden;
  Activation activation = Activation::Tanh;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// "tanh:32x16" style; an empty hidden list is written "tanh:".
std::string to_string(const ArchSpec& a);
ArchSpec parse_arch(const std::string& s);

/// Everything one experiment needs. Per experiment seed s the task, the
/// classifiers, the enhancer initialisation and the training noise are all
/// derived from s (see derive_seed), so seeds are the only source of
/// randomness.
struct ExperimentConfig {
  TaskSpec task;  ///< task.seed is replaced per experiment seed
  ArchSpec enhancer{{64}, Activation::Tanh};
  ArchSpec proxy{{32}, Activation::Tanh};
  std::vector<ArchSpec> evaluators{
      {{16}, Activation::Relu},
      {{32, 16}, Activation::Tanh},
      {{8}, Activation::Tanh},
      {{64}, Activation::Relu},
  };
  ClassifierTrainConfig classifier;
  TrainerConfig pretrain;  ///< mode InitPretrain; total_steps, epsilon, batch_size_reg
  TrainerConfig trainer;   ///< fine-tuning template; mode and seed are set per run
  /// Subset of NOIS, INIT, CLSO, SRPR, GCLB, D4AM, in report order.
  std::vector<std::string> ablation_modes;
  std::vector<double> grid_weights;
  bool run_grid = false;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "d4am_out";
  std::size_t jobs = 1;
  bool save_checkpoints = true;

  /// Defaults used when a key is absent from a config file.
  static ExperimentConfig defaults();

  void validate() const;  // throws ConfigError

  NetworkSpec enhancer_spec() const;
  ClassifierSpec proxy_spec(std::uint64_t seed) const;
  std::vector<ClassifierSpec> evaluator_specs(std::uint64_t seed) const;
  TaskSpec task_for(std::uint64_t seed) const;
};

/// SplitMix64 of (seed, stream); used for every per-seed sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Plain-text "key = value" lines; '#' starts a comment. Lists are comma
/// separated. Unknown or repeated keys and malformed values are
/// ConfigErrors naming the line and key. The result is validated.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Inverse of parse_config_text for every key.
std::string format_config(const ExperimentConfig& cfg);

}  // namespace d4am
