#include "d4am/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <thread>

#include <omp.h>

#include "d4am/checkpoint.hpp"
#include "d4am/errors.hpp"
#include "d4am/objectives.hpp"
#include "d4am/tasks.hpp"

namespace d4am {

namespace {

// Sub-stream ids for derive_seed. 1 and 100+i are the proxy and evaluators
// (see ExperimentConfig).
constexpr std::uint64_t kPretrainStream = 2;
constexpr std::uint64_t kEnhancerInitStream = 3;
constexpr std::uint64_t kFineTuneStream = 4;

struct Failure {
  FailureKind kind = FailureKind::None;
  std::string message;
};

template <class F>
Failure capture(F&& f) {
  try {
    f();
    return {};
  } catch (const ConfigError& e) {
    return {FailureKind::Config, e.what()};
  } catch (const NumericalError& e) {
    return {FailureKind::Numerical, e.what()};
  } catch (const IoError& e) {
    return {FailureKind::Io, e.what()};
  } catch (const std::exception& e) {
    return {FailureKind::Other, e.what()};
  }
}

struct SeedContext {
  std::uint64_t seed = 0;
  TaskData data;
  std::optional<ProxyModel> proxy;
  EvaluatorSet evaluators;
  ParamVector theta_init;
  Failure failure;
};

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(jobs, n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      omp_set_num_threads(1);
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::filesystem::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir / "checkpoints" / ("seed_" + std::to_string(seed));
}

void prepare(const ExperimentConfig& cfg, SeedContext& ctx) {
  const std::uint64_t s = ctx.seed;
  ctx.data = build_task_data(cfg.task_for(s));
  const ClassifierSpec proxy_spec = cfg.proxy_spec(s);
  ctx.proxy.emplace(train_proxy(proxy_spec, ctx.data.clean_train, cfg.classifier));
  const auto specs = cfg.evaluator_specs(s);
  ctx.evaluators = train_evaluators(specs, ctx.data.clean_train, proxy_spec, cfg.classifier,
                                    ctx.data.val.clean, ctx.data.val.labels);

  const NetworkSpec enh = cfg.enhancer_spec();
  TrainerConfig p = cfg.pretrain;
  p.seed = derive_seed(s, kPretrainStream);
  ctx.theta_init = pretrain(enh, init_params(enh, derive_seed(s, kEnhancerInitStream)),
                            ctx.data.reg_train, p);
  if (cfg.save_checkpoints) {
    const auto path = seed_dir(cfg, s) / "INIT.ckpt";
    save_checkpoint(ctx.theta_init, path);
    ctx.theta_init = load_checkpoint(path);
  }
}

void run_cell(const ExperimentConfig& cfg, const SeedContext& ctx, const PlannedRun& pr,
              CellResult& cell) {
  const auto& test = ctx.data.test;
  const NetworkSpec enh = cfg.enhancer_spec();
  if (pr.arm == "NOIS") {
    cell.evaluator_errors = evaluate_raw(ctx.evaluators, test.noisy, test.labels);
    cell.proxy_error = error_rate(*ctx.proxy, test.noisy, test.labels);
    return;
  }
  if (pr.arm == "INIT") {
    cell.evaluator_errors = evaluate(enh, ctx.theta_init, ctx.evaluators, test.noisy, test.labels);
    cell.proxy_error = error_rate(*ctx.proxy, enhance(enh, ctx.theta_init, test.noisy), test.labels);
    return;
  }

  TrainerConfig t = cfg.trainer;
  if (pr.weight) {
    t.mode = Mode::FixedWeight;
    t.fixed_weight = *pr.weight;
  } else {
    t.mode = parse_mode(pr.arm);
  }
  t.seed = derive_seed(ctx.seed, kFineTuneStream);

  TaskBundle bundle;
  bundle.enhancer = enh;
  bundle.theta0 = ctx.theta_init;
  bundle.proxy = &*ctx.proxy;
  bundle.reg_train = &ctx.data.reg_train;
  bundle.cls_train = &ctx.data.cls_train;
  bundle.val = &ctx.data.val;
  for (const auto& e : ctx.evaluators) bundle.val_classifiers.push_back(&e.model);

  const std::filesystem::path ckpt =
      cfg.save_checkpoints ? seed_dir(cfg, ctx.seed) / (pr.arm + ".ckpt") : std::filesystem::path{};
  try {
    cell.run = run(t, bundle, ckpt);
  } catch (const RunError& e) {
    cell.run = e.partial();
    throw;
  }
  const ParamVector& theta = cell.run->final_theta;
  cell.evaluator_errors = evaluate(enh, theta, ctx.evaluators, test.noisy, test.labels);
  cell.proxy_error = error_rate(*ctx.proxy, enhance(enh, theta, test.noisy), test.labels);
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::string to_string(FailureKind k) {
  switch (k) {
    case FailureKind::None: return "none";
    case FailureKind::Config: return "config";
    case FailureKind::Numerical: return "numerical";
    case FailureKind::Io: return "io";
    case FailureKind::Other: return "other";
  }
  return "other";
}

double CellResult::mean_error() const { return mean_of(evaluator_errors); }

const ArmSummary* AggregateReport::find(const std::string& arm) const {
  for (const auto& a : arms) {
    if (a.arm == arm) return &a;
  }
  return nullptr;
}

bool AggregateReport::any_failed() const {
  return std::any_of(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; });
}

std::string grid_arm(double weight) {
  TrainerConfig t;
  t.mode = Mode::FixedWeight;
  t.fixed_weight = weight;
  return t.label();
}

AggregateReport aggregate(std::vector<CellResult> cells, std::vector<std::string> evaluator_names,
                          const std::vector<std::string>& grid_arms) {
  AggregateReport rep;
  rep.evaluator_names = std::move(evaluator_names);
  rep.cells = std::move(cells);
  const std::size_t E = rep.evaluator_names.size();

  std::vector<std::string> order;
  std::map<std::string, std::vector<const CellResult*>> by_arm;
  for (const auto& c : rep.cells) {
    if (!by_arm.count(c.arm)) order.push_back(c.arm);
    by_arm[c.arm].push_back(&c);
  }

  for (const auto& arm : order) {
    ArmSummary s;
    s.arm = arm;
    s.grid = std::find(grid_arms.begin(), grid_arms.end(), arm) != grid_arms.end();
    std::vector<const CellResult*> done;
    for (const CellResult* c : by_arm[arm]) {
      if (c->ok) {
        done.push_back(c);
      } else {
        ++s.failed;
      }
    }
    s.completed = done.size();
    if (!done.empty()) {
      s.mean.resize(E);
      s.stddev.resize(E);
      for (std::size_t e = 0; e < E; ++e) {
        std::vector<double> xs;
        for (const CellResult* c : done) xs.push_back(c->evaluator_errors.at(e));
        s.mean[e] = mean_of(xs);
        s.stddev[e] = sample_std(xs, s.mean[e]);
      }
      std::vector<double> per_seed, proxy;
      for (const CellResult* c : done) {
        per_seed.push_back(c->mean_error());
        proxy.push_back(c->proxy_error);
      }
      s.mean_error = mean_of(per_seed);
      s.std_error = sample_std(per_seed, s.mean_error);
      s.proxy_mean = mean_of(proxy);
    }
    rep.arms.push_back(std::move(s));
  }

  std::vector<const ArmSummary*> grid;
  for (const auto& s : rep.arms) {
    if (s.grid && s.completed > 0) grid.push_back(&s);
  }
  std::stable_sort(grid.begin(), grid.end(), [](const ArmSummary* a, const ArmSummary* b) {
    return a->mean_error < b->mean_error;
  });
  const std::size_t k = std::min<std::size_t>(7, grid.size());
  if (k > 0) {
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      sum += grid[i]->mean_error;
      rep.best7_arms.push_back(grid[i]->arm);
    }
    rep.best7_average = sum / static_cast<double>(k);
  }
  return rep;
}

std::vector<PlannedRun> plan(const ExperimentConfig& cfg, bool ablation, bool grid) {
  std::vector<PlannedRun> out;
  if (ablation) {
    for (const auto& m : cfg.ablation_modes) {
      for (auto s : cfg.seeds) out.push_back({m, s, m != "NOIS" && m != "INIT", std::nullopt});
    }
  }
  if (grid) {
    for (double w : cfg.grid_weights) {
      for (auto s : cfg.seeds) out.push_back({grid_arm(w), s, true, w});
    }
  }
  return out;
}

AggregateReport run_experiment(const ExperimentConfig& cfg, bool ablation, bool grid,
                               const ProgressFn& progress) {
  cfg.validate();
  const auto runs = plan(cfg, ablation, grid);
  std::mutex log_mu;
  auto log = [&](const std::string& msg) {
    if (!progress) return;
    std::lock_guard<std::mutex> lk(log_mu);
    progress(msg);
  };

  const bool needs_training =
      std::any_of(runs.begin(), runs.end(), [](const PlannedRun& r) { return r.arm != "NOIS"; });

  std::vector<SeedContext> seeds(cfg.seeds.size());
  parallel_for(seeds.size(), cfg.jobs, [&](std::size_t i) {
    SeedContext& ctx = seeds[i];
    ctx.seed = cfg.seeds[i];
    ctx.failure = capture([&] {
      if (needs_training) {
        prepare(cfg, ctx);
      } else {
        // NOIS only: data and evaluators, no enhancer training.
        ctx.data = build_task_data(cfg.task_for(ctx.seed));
        const ClassifierSpec ps = cfg.proxy_spec(ctx.seed);
        ctx.proxy.emplace(train_proxy(ps, ctx.data.clean_train, cfg.classifier));
        ctx.evaluators = train_evaluators(cfg.evaluator_specs(ctx.seed), ctx.data.clean_train, ps,
                                          cfg.classifier, ctx.data.val.clean, ctx.data.val.labels);
      }
    });
    log("seed " + std::to_string(ctx.seed) + ": " +
        (ctx.failure.kind == FailureKind::None ? "prepared" : "failed: " + ctx.failure.message));
  });

  std::vector<CellResult> cells(runs.size());
  parallel_for(runs.size(), cfg.jobs, [&](std::size_t i) {
    const PlannedRun& pr = runs[i];
    CellResult& cell = cells[i];
    cell.arm = pr.arm;
    cell.seed = pr.seed;
    const auto idx = static_cast<std::size_t>(
        std::find(cfg.seeds.begin(), cfg.seeds.end(), pr.seed) - cfg.seeds.begin());
    const SeedContext& ctx = seeds[idx];
    Failure f = ctx.failure;
    if (f.kind == FailureKind::None) f = capture([&] { run_cell(cfg, ctx, pr, cell); });
    cell.ok = f.kind == FailureKind::None;
    cell.failure = f.kind;
    cell.error = f.message;
    if (!cell.ok) cell.evaluator_errors.clear();
    log(pr.arm + " seed " + std::to_string(pr.seed) + ": " + (cell.ok ? "ok" : "failed: " + f.message));
  });

  std::vector<std::string> names;
  for (std::size_t i = 0; i < cfg.evaluators.size(); ++i) {
    names.push_back("E" + std::to_string(i + 1) + "_" + to_string(cfg.evaluators[i]));
  }
  std::vector<std::string> grid_arms;
  if (grid) {
    for (double w : cfg.grid_weights) grid_arms.push_back(grid_arm(w));
  }
  return aggregate(std::move(cells), std::move(names), grid_arms);
}

AggregateReport run_ablation(const ExperimentConfig& cfg, const ProgressFn& progress) {
  return run_experiment(cfg, true, false, progress);
}

AggregateReport run_grid_search(const ExperimentConfig& cfg, const ProgressFn& progress) {
  if (cfg.grid_weights.empty()) throw ConfigError("grid_weights: empty");
  ExperimentConfig c = cfg;
  c.run_grid = true;
  return run_experiment(c, false, true, progress);
}

}  // namespace d4am
