#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "d4am/config.hpp"
#include "d4am/dataset_io.hpp"
#include "d4am/errors.hpp"
#include "d4am/harness.hpp"
#include "d4am/report_io.hpp"
#include "d4am/tasks.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

int exit_code(d4am::FailureKind k) {
  switch (k) {
    case d4am::FailureKind::None: return kExitOk;
    case d4am::FailureKind::Config: return kExitConfig;
    case d4am::FailureKind::Numerical: return kExitNumerical;
    case d4am::FailureKind::Io: return kExitIo;
    case d4am::FailureKind::Other: return kExitOther;
  }
  return kExitOther;
}

void print_summary(const d4am::AggregateReport& agg) {
  std::printf("%-14s %5s", "arm", "n");
  for (std::size_t e = 0; e < agg.evaluator_names.size(); ++e) std::printf("  %7s", ("E" + std::to_string(e + 1)).c_str());
  std::printf("  %7s  %7s  %7s\n", "mean", "std", "proxy");
  for (const auto& a : agg.arms) {
    std::printf("%-14s %2zu/%-2zu", a.arm.c_str(), a.completed, a.completed + a.failed);
    for (std::size_t e = 0; e < agg.evaluator_names.size(); ++e) {
      std::printf("  %7.4f", e < a.mean.size() ? a.mean[e] : std::nan(""));
    }
    std::printf("  %7.4f  %7.4f  %7.4f\n", a.mean_error, a.std_error, a.proxy_mean);
  }
  if (agg.best7_average) {
    std::printf("best-7 grid average: %.4f\n", *agg.best7_average);
  }
  for (const auto& c : agg.cells) {
    if (!c.ok) {
      std::printf("FAILED %s seed %llu (%s): %s\n", c.arm.c_str(),
                  static_cast<unsigned long long>(c.seed), d4am::to_string(c.failure).c_str(),
                  c.error.c_str());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"d4am: joint regression/classification fine-tuning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> modes;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  bool grid = false;
  bool dry_run = false;
  std::size_t jobs = 0;

  auto* run = app.add_subcommand("run", "run the ablation matrix and/or grid search");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--modes", modes, "ablation arms, e.g. NOIS,INIT,CLSO,SRPR,GCLB,D4AM; 'none' for no ablation")
      ->delimiter(',');
  run->add_flag("--grid", grid, "also run the FIXED_WEIGHT grid search");
  run->add_option("--seeds", seeds, "experiment seeds")->delimiter(',');
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--dry-run", dry_run, "validate and print the planned runs");
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  std::uint64_t data_seed = 0;
  std::string data_out;
  auto* gen = app.add_subcommand("gen-data", "write one task instance to disk");
  gen->add_option("--config", config_path, "config file")->required();
  gen->add_option("--seed", data_seed, "experiment seed")->required();
  gen->add_option("--out", data_out, "output directory")->required();

  auto* show = app.add_subcommand("show-config", "print the fully resolved configuration");
  show->add_option("--config", config_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    d4am::ExperimentConfig cfg = d4am::parse_config(config_path);

    if (*show) {
      std::cout << d4am::format_config(cfg);
      return kExitOk;
    }

    if (*gen) {
      const auto data = d4am::build_task_data(cfg.task_for(data_seed));
      d4am::save_task_data(data, data_out);
      std::printf("wrote task (seed %llu) to %s\n", static_cast<unsigned long long>(data_seed),
                  data_out.c_str());
      return kExitOk;
    }

    bool ablation = true;
    if (!modes.empty()) {
      if (modes.size() == 1 && (modes[0] == "none" || modes[0] == "NONE")) {
        cfg.ablation_modes.clear();
        ablation = false;
      } else {
        for (auto& m : modes) {
          for (char& ch : m) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        }
        cfg.ablation_modes = modes;
      }
    }
    if (cfg.ablation_modes.empty()) ablation = false;
    if (grid) cfg.run_grid = true;
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (jobs > 0) cfg.jobs = jobs;
    cfg.validate();

    const auto planned = d4am::plan(cfg, ablation, cfg.run_grid);
    if (dry_run) {
      std::printf("%zu cells, %zu seeds, jobs=%zu, output %s\n", planned.size(), cfg.seeds.size(),
                  cfg.jobs, cfg.output_dir.string().c_str());
      for (const auto& p : planned) {
        std::printf("  %-14s seed %-6llu %s\n", p.arm.c_str(),
                    static_cast<unsigned long long>(p.seed), p.trains ? "fine-tune" : "evaluate");
      }
      return kExitOk;
    }

    const auto agg = d4am::run_experiment(cfg, ablation, cfg.run_grid,
                                          [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); });
    d4am::emit_reports(agg, cfg.output_dir, d4am::format_config(cfg));
    print_summary(agg);
    for (const auto& c : agg.cells) {
      if (!c.ok) return exit_code(c.failure);
    }
    return kExitOk;
  } catch (const d4am::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const d4am::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const d4am::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
}
