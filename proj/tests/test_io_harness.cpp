#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "d4am/config.hpp"
#include "d4am/dataset_io.hpp"
#include "d4am/errors.hpp"
#include "d4am/harness.hpp"
#include "d4am/report_io.hpp"

using namespace d4am;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("d4am_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const char* kTiny = R"(
task.train_size = 200
task.val_size = 60
task.test_size = 100
evaluators = relu:8, tanh:12
classifier.steps = 300
classifier.accuracy_floor = 0
pretrain.steps = 200
trainer.steps = 40
trainer.eval_every = 20
)";

ExperimentConfig tiny(const std::string& extra, bool checkpoints = false) {
  return parse_config_text(std::string(kTiny) + extra + (checkpoints ? "" : "checkpoints = false\n"));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(split_csv_line(line));
  return rows;
}

CellResult cell(const std::string& arm, std::uint64_t seed, std::vector<double> errs) {
  CellResult c;
  c.arm = arm;
  c.seed = seed;
  c.ok = true;
  c.evaluator_errors = std::move(errs);
  c.proxy_error = 0.5;
  return c;
}

}  // namespace

TEST_CASE("task data files round-trip") {
  TaskSpec s;
  s.feature_dim = 6;
  s.train_size = 50;
  s.val_size = 20;
  s.test_size = 30;
  s.label_fraction = 0.5;
  s.seed = 4;
  const auto data = build_task_data(s);
  const auto dir = temp_dir("taskdata");
  save_task_data(data, dir);
  const auto back = load_task_data(dir);
  CHECK(back.reg_train.noisy == data.reg_train.noisy);
  CHECK(back.cls_train.noisy == data.cls_train.noisy);
  CHECK(back.cls_train.labels == data.cls_train.labels);
  CHECK(back.test.clean == data.test.clean);
  CHECK(back.val.labels == data.val.labels);
  CHECK(task_spec_to_json(back.spec) == task_spec_to_json(s));

  fs::remove(dir / "test_noisy.mat");
  CHECK_THROWS_AS(load_task_data(dir), IoError);
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_task_data(dir), IoError);
}

TEST_CASE("config parsing") {
  const auto d = parse_config_text("seeds = 3\n");
  const auto def = ExperimentConfig::defaults();
  CHECK(d.seeds == std::vector<std::uint64_t>{3});
  CHECK(d.trainer.total_steps == def.trainer.total_steps);
  CHECK(d.trainer.combiner.update_period == def.trainer.combiner.update_period);
  CHECK(d.grid_weights == def.grid_weights);
  CHECK(d.evaluators == def.evaluators);

  auto expect_error = [](const std::string& text, const std::string& needle) {
    try {
      (void)parse_config_text(text);
      FAIL("expected ConfigError for: " << text);
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  expect_error("seeds = 1\ncombiner.update_period = 0\n", "update_period");
  expect_error("seeds = 1, 1\n", "seed");
  expect_error("seeds = 1\n\nbogus.key = 2\n", "line 3");
  expect_error("seeds = 1\nbogus.key = 2\n", "bogus.key");
  expect_error("seeds = 1\nseeds = 2\n", "line 2");
  expect_error("seeds = 1\ntrainer.steps = ten\n", "trainer.steps");
  expect_error("seeds = 1\nmodes = CLSO, ADAM\n", "ADAM");

  auto cfg = parse_config_text("seeds = 1, 2\nmodes = CLSO, D4AM\ngrid = true\ntrainer.epsilon_end = 0.001\n"
                               "trainer.langevin = false\nenhancer.hidden = 7, 5\ntask.snr_low_db = -0.1\n");
  const auto text = format_config(cfg);
  CHECK(format_config(parse_config_text(text)) == text);
  CHECK(parse_arch("relu:32x16") == ArchSpec{{32, 16}, Activation::Relu});
  CHECK(to_string(ArchSpec{{}, Activation::Tanh}) == "tanh:");
}

TEST_CASE("derived seeds differ per stream and are stable") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("planned cells") {
  auto cfg = tiny("seeds = 0, 1, 2\nmodes = NOIS\n");
  auto p = plan(cfg, true, false);
  CHECK(p.size() == 3);
  for (const auto& r : p) CHECK_FALSE(r.trains);

  cfg = tiny("seeds = 0, 1, 2\nmodes = CLSO, D4AM\n");
  p = plan(cfg, true, false);
  CHECK(std::count_if(p.begin(), p.end(), [](const PlannedRun& r) { return r.trains; }) == 6);

  cfg = tiny("seeds = 0, 1\nmodes = none\ngrid = true\n");
  p = plan(cfg, false, true);
  CHECK(p.size() == 18);
  CHECK(p.front().arm == "FIXED_0");
  CHECK(*p.front().weight == 0.0);
}

TEST_CASE("best-7 averages the seven lowest grid arms") {
  std::vector<CellResult> cells;
  std::vector<std::string> grid;
  const double errs[] = {0.9, 0.1, 0.5, 0.3, 0.8, 0.2, 0.7, 0.4, 0.6};
  for (int i = 0; i < 9; ++i) {
    const std::string arm = grid_arm(i);
    grid.push_back(arm);
    cells.push_back(cell(arm, 0, {errs[i], errs[i]}));
  }
  cells.push_back(cell("D4AM", 0, {0.0, 0.0}));
  const auto agg = aggregate(cells, {"a", "b"}, grid);
  REQUIRE(agg.best7_average.has_value());
  CHECK(*agg.best7_average == doctest::Approx((0.1 + 0.2 + 0.3 + 0.4 + 0.5 + 0.6 + 0.7) / 7));
  CHECK(agg.best7_arms.size() == 7);
  CHECK(agg.best7_arms.front() == grid_arm(1));
  CHECK_FALSE(agg.find("D4AM")->grid);

  auto failed = cells;
  failed[1].ok = false;
  failed[1].failure = FailureKind::Numerical;
  const auto agg2 = aggregate(failed, {"a", "b"}, grid);
  CHECK(agg2.any_failed());
  CHECK(agg2.find(grid_arm(1))->completed == 0);
  CHECK(*agg2.best7_average == doctest::Approx((0.2 + 0.3 + 0.4 + 0.5 + 0.6 + 0.7 + 0.8) / 7));
}

TEST_CASE("sample standard deviation across seeds") {
  const auto agg = aggregate({cell("X", 0, {0.1}), cell("X", 1, {0.3}), cell("X", 2, {0.5})}, {"e"}, {});
  const auto* x = agg.find("X");
  CHECK(x->mean[0] == doctest::Approx(0.3));
  CHECK(x->stddev[0] == doctest::Approx(0.2));
  CHECK(x->std_error == doctest::Approx(0.2));
}

TEST_CASE("end-to-end experiment, reports and re-aggregation") {
  auto cfg = tiny("seeds = 0, 1\nmodes = NOIS, INIT, CLSO, D4AM\ngrid = true\ngrid_weights = 0, 2\n");
  const auto agg = run_experiment(cfg, true, true);
  CHECK_FALSE(agg.any_failed());
  REQUIRE(agg.cells.size() == 12);
  CHECK(agg.evaluator_names.size() == 2);

  const auto* clso = agg.find("CLSO");
  const auto* fixed0 = agg.find("FIXED_0");
  REQUIRE(clso);
  REQUIRE(fixed0);
  CHECK(clso->mean == fixed0->mean);
  for (const auto& c : agg.cells) {
    CHECK(c.run.has_value() == (c.arm != "NOIS" && c.arm != "INIT"));
  }

  const auto out1 = temp_dir("report1"), out2 = temp_dir("report2");
  emit_reports(agg, out1, format_config(cfg));
  emit_reports(run_experiment(cfg, true, true), out2, format_config(cfg));
  for (const char* f : {"summary.csv", "summary_std.csv", "cells.csv", "summary.json", "config.txt",
                        "runs/D4AM/seed_1/trace.csv", "runs/FIXED_2/seed_0/eval.csv"}) {
    REQUIRE(fs::exists(out1 / f));
    CHECK_MESSAGE(slurp(out1 / f) == slurp(out2 / f), f);
  }
  CHECK(read_csv(out1 / "runs/D4AM/seed_1/trace.csv").size() == 41);
  CHECK(read_csv(out1 / "runs/D4AM/seed_1/eval.csv").size() == 4);

  // Recompute every arm mean from cells.csv alone and compare to summary.csv.
  const auto cells = read_csv(out1 / "cells.csv");
  const auto summary = read_csv(out1 / "summary.csv");
  const std::size_t E = cells.front().size() - 6;
  REQUIRE(E == 2);
  std::map<std::string, std::vector<std::vector<double>>> per_arm;
  std::vector<std::string> order;
  for (std::size_t r = 1; r < cells.size(); ++r) {
    const auto& row = cells[r];
    if (!per_arm.count(row[0])) order.push_back(row[0]);
    CHECK(row[2] == "ok");
    std::vector<double> e;
    for (std::size_t k = 0; k < E; ++k) e.push_back(std::stod(row[5 + k]));
    per_arm[row[0]].push_back(e);
  }
  REQUIRE(summary.size() == order.size() + 1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& row = summary[i + 1];
    CHECK(row[0] == order[i]);
    const auto& seeds = per_arm[order[i]];
    CHECK(std::stoul(row[1]) == seeds.size());
    double overall = 0.0;
    for (std::size_t k = 0; k < E; ++k) {
      double s = 0.0;
      for (const auto& e : seeds) s += e[k];
      CHECK(std::stod(row[3 + k]) == s / static_cast<double>(seeds.size()));
    }
    for (const auto& e : seeds) {
      double m = 0.0;
      for (double v : e) m += v;
      overall += m / static_cast<double>(E);
    }
    CHECK(std::stod(row[3 + E]) == overall / static_cast<double>(seeds.size()));
  }
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("worker count does not change results") {
  auto one = tiny("seeds = 0, 1\nmodes = SRPR, GCLB\njobs = 1\n");
  auto two = tiny("seeds = 0, 1\nmodes = SRPR, GCLB\njobs = 2\n");
  const auto a = run_experiment(one, true, false), b = run_experiment(two, true, false);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].evaluator_errors == b.cells[i].evaluator_errors);
    CHECK(a.cells[i].run->final_theta == b.cells[i].run->final_theta);
  }
}

TEST_CASE("checkpoints are written and reused") {
  const auto out = temp_dir("ckpt_run");
  auto cfg = tiny("seeds = 3\nmodes = INIT, GCLB\noutput_dir = " + out.string() + "\n", true);
  const auto agg = run_experiment(cfg, true, false);
  CHECK_FALSE(agg.any_failed());
  CHECK(fs::exists(out / "checkpoints" / "seed_3" / "INIT.ckpt"));
  const auto* g = agg.find("GCLB");
  REQUIRE(g);
  CHECK(fs::exists(agg.cells.back().run->checkpoint_path));
  fs::remove_all(out);
}
