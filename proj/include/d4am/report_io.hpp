#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "d4am/harness.hpp"

namespace d4am {

// Files written by emit_reports (doubles printed with %.17g, so every value
// round-trips exactly):
//   summary.csv        one row per arm: completed, failed, mean error per
//                      evaluator, mean_error, std_error, proxy_mean
//   summary_std.csv    one row per arm: sample std per evaluator
//   cells.csv          one row per (arm, seed): status, proxy and evaluator
//                      errors, failure message
//   summary.json       the same aggregates plus the best-7 grid average
//   runs/<arm>/seed_<s>/trace.csv   per-step record of a fine-tuning run
//   runs/<arm>/seed_<s>/eval.csv    validation losses at each evaluation
//   config.txt         the configuration, when one is given
// Output is a pure function of the arguments.

nlohmann::json summary_json(const AggregateReport& agg);

void emit_reports(const AggregateReport& agg, const std::filesystem::path& dir,
                  const std::string& config_text = {});

}  // namespace d4am
