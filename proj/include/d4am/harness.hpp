#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "d4am/config.hpp"
#include "d4am/trainer.hpp"

namespace d4am {

enum class FailureKind { None, Config, Numerical, Io, Other };

std::string to_string(FailureKind k);

/// One (arm, seed) cell of the result matrix. Arms are NOIS, INIT, the
/// fine-tuning modes, and FIXED_<w> for grid weights.
struct CellResult {
  std::string arm;
  std::uint64_t seed = 0;
  bool ok = false;
  FailureKind failure = FailureKind::None;
  std::string error;
  std::vector<double> evaluator_errors;  ///< test error per evaluator
  double proxy_error = std::numeric_limits<double>::quiet_NaN();
  std::optional<RunReport> run;  ///< fine-tuning arms only

  /// Mean over evaluators (the proxy is not an evaluator).
  double mean_error() const;
};

struct ArmSummary {
  std::string arm;
  bool grid = false;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::vector<double> mean;    ///< per evaluator, over completed seeds
  std::vector<double> stddev;  ///< sample standard deviation (0 for one seed)
  double mean_error = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double proxy_mean = std::numeric_limits<double>::quiet_NaN();
};

struct AggregateReport {
  std::vector<std::string> evaluator_names;
  std::vector<CellResult> cells;  ///< arm-major, seeds in config order
  std::vector<ArmSummary> arms;   ///< in first-appearance order of cells
  std::optional<double> best7_average;
  std::vector<std::string> best7_arms;

  const ArmSummary* find(const std::string& arm) const;
  bool any_failed() const;
};

/// Label of the grid arm for weight w, e.g. "FIXED_0.1".
std::string grid_arm(double weight);

/// Summaries from raw cells. `grid_arms` marks the arms that enter the
/// best-7 average: the seven lowest arm mean errors, averaged (fewer when
/// fewer grid arms completed).
AggregateReport aggregate(std::vector<CellResult> cells, std::vector<std::string> evaluator_names,
                          const std::vector<std::string>& grid_arms);

struct PlannedRun {
  std::string arm;
  std::uint64_t seed = 0;
  bool trains = false;  ///< false for NOIS and INIT (INIT reuses pretraining)
  std::optional<double> weight;  ///< grid arms
};

/// Cells an experiment will produce, in report order.
std::vector<PlannedRun> plan(const ExperimentConfig& cfg, bool ablation, bool grid);

using ProgressFn = std::function<void(const std::string&)>;

/// Ablation matrix: per seed, build the task, train proxy and evaluators,
/// pretrain once (the shared INIT checkpoint), then fine-tune every
/// requested mode from it. Failures are recorded per cell.
AggregateReport run_ablation(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// One FIXED_WEIGHT run per (weight, seed) from the same INIT checkpoints.
AggregateReport run_grid_search(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Ablation modes and, when cfg.run_grid is set, the grid, sharing per-seed
/// preparation. Cells run on a pool of cfg.jobs worker threads.
AggregateReport run_experiment(const ExperimentConfig& cfg, bool ablation, bool grid,
                               const ProgressFn& progress = {});

}  // namespace d4am
