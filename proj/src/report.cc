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

#include "figcap/report.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "figcap/common.h"

namespace figcap::report {

using nlohmann::json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

std::string render_markdown(const DeltaTable& t) {
  std::string out = "| Condition |";
  for (auto name : metrics::kMetricNames) out += " " + std::string(name) + " |";
  out += "\n|---|";
  for (size_t i = 0; i < metrics::kMetricNames.size(); ++i) out += "---|";
  out += "\n";
  for (const DeltaRow& r : t.rows) {
    out += "| " + md_cell(r.name) + (r.is_baseline ? " (baseline)" : "") + " |";
    for (size_t i = 0; i < r.values.size(); ++i) {
      out += " " + fmt("%.4f", r.values[i]);
      if (!r.is_baseline) out += " (" + format_delta(r.deltas[i]) + ")";
      out += " |";
    }
    out += "\n";
  }
  return out;
}

std::string render_csv(const DeltaTable& t) {
  std::string out = "condition,n,baseline";
  for (auto name : metrics::kMetricNames) out += "," + std::string(name);
  for (auto name : metrics::kMetricNames) out += "," + std::string(name) + " delta%";
  out += "\n";
  for (const DeltaRow& r : t.rows) {
    out += csv_field(r.name) + "," + std::to_string(r.n_instances) + "," +
           (r.is_baseline ? "1" : "0");
    for (double v : r.values) out += "," + fmt("%.17g", v);
    for (const auto& d : r.deltas) out += "," + (d ? fmt("%.17g", *d) : std::string());
    out += "\n";
  }
  return out;
}

std::string render_json(const DeltaTable& t) {
  json j;
  j["baseline"] = t.baseline_name;
  j["metrics"] = json::array();
  for (auto name : metrics::kMetricNames) j["metrics"].push_back(std::string(name));
  j["rows"] = json::array();
  for (const DeltaRow& r : t.rows) {
    json row;
    row["condition"] = r.name;
    row["n"] = r.n_instances;
    row["baseline"] = r.is_baseline;
    row["values"] = r.values;
    json d = json::array();
    for (const auto& x : r.deltas) d.push_back(x ? json(*x) : json(nullptr));
    row["delta_percent"] = std::move(d);
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

}  // namespace

std::optional<double> percent_delta(double value, double baseline) {
  if (baseline == 0.0) return std::nullopt;
  return 100.0 * (value - baseline) / baseline;
}

std::string format_delta(const std::optional<double>& delta) {
  if (!delta) return "—";
  // Round half away from zero at one decimal, and never print "-0.0".
  double r = std::round(*delta * 10.0) / 10.0;
  if (r == 0.0) return "0.0%";
  return fmt("%+.1f%%", r);
}

DeltaTable build_table(const std::vector<ConditionResult>& results,
                       const std::string& baseline) {
  const ConditionResult* base = nullptr;
  std::string available;
  for (const ConditionResult& c : results) {
    if (c.n_instances == 0) {
      throw std::invalid_argument("condition '" + c.name + "' has no instances");
    }
    if (!base && c.name == baseline) base = &c;
    available += (available.empty() ? "" : ", ") + ("'" + c.name + "'");
  }
  if (!base) {
    throw std::invalid_argument("unknown baseline '" + baseline +
                                "'; available conditions: " +
                                (available.empty() ? "(none)" : available));
  }
  DeltaTable t;
  t.baseline_name = baseline;
  const auto bv = base->bundle.values();
  for (const ConditionResult& c : results) {
    DeltaRow row;
    row.name = c.name;
    row.n_instances = c.n_instances;
    row.values = c.bundle.values();
    row.is_baseline = &c == base;
    for (size_t i = 0; i < row.values.size(); ++i) {
      row.deltas[i] = row.is_baseline ? std::optional<double>(0.0)
                                      : percent_delta(row.values[i], bv[i]);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Format parse_format(std::string_view s) {
  const std::string l = to_lower_ascii(s);
  if (l == "markdown" || l == "md") return Format::kMarkdown;
  if (l == "csv") return Format::kCsv;
  if (l == "json") return Format::kJson;
  throw std::invalid_argument("unknown report format '" + std::string(s) + "'");
}

std::string render(const DeltaTable& table, Format format) {
  switch (format) {
    case Format::kMarkdown:
      return render_markdown(table);
    case Format::kCsv:
      return render_csv(table);
    case Format::kJson:
      return render_json(table);
  }
  return {};
}

void write_reports(const std::string& dir, const DeltaTable& table) {
  namespace fs = std::filesystem;
  write_file((fs::path(dir) / "report.md").string(), render(table, Format::kMarkdown));
  write_file((fs::path(dir) / "report.csv").string(), render(table, Format::kCsv));
  write_file((fs::path(dir) / "report.json").string(), render(table, Format::kJson));
}

}  // namespace figcap::report
