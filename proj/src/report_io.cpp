#include "d4am/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "d4am/errors.hpp"

namespace d4am {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json num_json(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

std::string trace_csv(const RunReport& r) {
  std::ostringstream os;
  os << "step,cls_loss,reg_loss,alpha_gclb,alpha_srpr,criterion,reg_norm_sq,calibrated_inner,"
        "coefficient,epsilon,alpha_grad,noise_applied\n";
  for (const auto& s : r.steps) {
    os << s.step << ',' << num(s.cls_loss) << ',' << num(s.reg_loss) << ',' << num(s.alpha_gclb)
       << ',' << num(s.alpha_srpr) << ',' << num(s.criterion) << ',' << num(s.reg_norm_sq) << ','
       << num(s.calibrated_inner) << ',' << num(s.coefficient) << ',' << num(s.epsilon) << ','
       << num(s.alpha_grad) << ',' << (s.noise_applied ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string eval_csv(const RunReport& r) {
  std::size_t E = 0;
  for (const auto& e : r.evals) E = std::max(E, e.evaluator_cls_loss.size());
  std::ostringstream os;
  os << "step,val_cls_loss,val_reg_loss";
  for (std::size_t i = 0; i < E; ++i) os << ",E" << i + 1 << "_cls_loss";
  os << '\n';
  for (const auto& e : r.evals) {
    os << e.step << ',' << num(e.val_cls_loss) << ',' << num(e.val_reg_loss);
    for (std::size_t i = 0; i < E; ++i) {
      os << ',' << (i < e.evaluator_cls_loss.size() ? num(e.evaluator_cls_loss[i]) : "nan");
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

nlohmann::json summary_json(const AggregateReport& agg) {
  nlohmann::json j;
  j["evaluators"] = agg.evaluator_names;
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : agg.arms) {
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t e = 0; e < a.mean.size(); ++e) {
      per[agg.evaluator_names[e]] = {{"mean", a.mean[e]}, {"std", a.stddev[e]}};
    }
    arms.push_back({{"arm", a.arm},
                    {"grid", a.grid},
                    {"completed", a.completed},
                    {"failed", a.failed},
                    {"mean_error", num_json(a.mean_error)},
                    {"std_error", num_json(a.std_error)},
                    {"proxy_mean_error", num_json(a.proxy_mean)},
                    {"per_evaluator", per}});
  }
  j["arms"] = arms;
  j["best7_average"] = agg.best7_average ? nlohmann::json(*agg.best7_average) : nlohmann::json();
  j["best7_arms"] = agg.best7_arms;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& c : agg.cells) {
    if (!c.ok) {
      failures.push_back(
          {{"arm", c.arm}, {"seed", c.seed}, {"kind", to_string(c.failure)}, {"error", c.error}});
    }
  }
  j["failures"] = failures;
  return j;
}

void emit_reports(const AggregateReport& agg, const std::filesystem::path& dir,
                  const std::string& config_text) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto& names = agg.evaluator_names;

  {
    std::ostringstream os, sd;
    os << "arm,completed,failed";
    sd << "arm";
    for (const auto& n : names) {
      os << ',' << csv_field(n);
      sd << ',' << csv_field(n);
    }
    os << ",mean_error,std_error,proxy_mean\n";
    sd << '\n';
    for (const auto& a : agg.arms) {
      os << csv_field(a.arm) << ',' << a.completed << ',' << a.failed;
      sd << csv_field(a.arm);
      for (std::size_t e = 0; e < names.size(); ++e) {
        os << ',' << (e < a.mean.size() ? num(a.mean[e]) : "nan");
        sd << ',' << (e < a.stddev.size() ? num(a.stddev[e]) : "nan");
      }
      os << ',' << num(a.mean_error) << ',' << num(a.std_error) << ',' << num(a.proxy_mean) << '\n';
      sd << '\n';
    }
    write_text(dir / "summary.csv", os.str());
    write_text(dir / "summary_std.csv", sd.str());
  }

  {
    std::ostringstream os;
    os << "arm,seed,status,failure,proxy_error";
    for (const auto& n : names) os << ',' << csv_field(n);
    os << ",error\n";
    for (const auto& c : agg.cells) {
      os << csv_field(c.arm) << ',' << c.seed << ',' << (c.ok ? "ok" : "failed") << ','
         << to_string(c.failure) << ',' << (c.ok ? num(c.proxy_error) : "nan");
      for (std::size_t e = 0; e < names.size(); ++e) {
        os << ',' << (c.ok && e < c.evaluator_errors.size() ? num(c.evaluator_errors[e]) : "nan");
      }
      os << ',' << csv_field(c.error) << '\n';
    }
    write_text(dir / "cells.csv", os.str());
  }

  write_text(dir / "summary.json", summary_json(agg).dump(2) + "\n");

  for (const auto& c : agg.cells) {
    if (!c.run) continue;
    const auto run_dir = dir / "runs" / c.arm / ("seed_" + std::to_string(c.seed));
    write_text(run_dir / "trace.csv", trace_csv(*c.run));
    write_text(run_dir / "eval.csv", eval_csv(*c.run));
  }

  if (!config_text.empty()) write_text(dir / "config.txt", config_text);
}

}  // namespace d4am
