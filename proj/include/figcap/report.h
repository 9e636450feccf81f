// Copyright 2026 The figcap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Per-condition metric tables with percent change against a baseline row.

#ifndef FIGCAP_REPORT_H_
#define FIGCAP_REPORT_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "figcap/metrics.h"

namespace figcap::report {

// 100 * (value - baseline) / baseline; nullopt when baseline is 0.
std::optional<double> percent_delta(double value, double baseline);

// "+11.8%", "-2.8%", "0.0%"; an undefined delta renders as an em dash.
std::string format_delta(const std::optional<double>& delta);

struct ConditionResult {
  std::string name;
  metrics::MetricBundle bundle;
  size_t n_instances = 1;
};

struct DeltaRow {
  std::string name;
  size_t n_instances = 0;
  std::array<double, 13> values{};
  std::array<std::optional<double>, 13> deltas{};
  bool is_baseline = false;
};

struct DeltaTable {
  std::string baseline_name;
  std::vector<DeltaRow> rows;
};

// Rows keep the order of `results`. Throws std::invalid_argument when the
// baseline is not among them, or when a condition has n_instances == 0.
DeltaTable build_table(const std::vector<ConditionResult>& results,
                       const std::string& baseline);

enum class Format { kMarkdown, kCsv, kJson };
Format parse_format(std::string_view s);

std::string render(const DeltaTable& table, Format format);

// Writes report.md, report.csv and report.json into `dir`.
void write_reports(const std::string& dir, const DeltaTable& table);

}  // namespace figcap::report

#endif  // FIGCAP_REPORT_H_
