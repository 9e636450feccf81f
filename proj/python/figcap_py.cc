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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "figcap/commands.h"
#include "figcap/filter.h"
#include "figcap/metrics.h"
#include "figcap/pipeline.h"
#include "figcap/report.h"

namespace py = pybind11;

namespace {

py::dict bundle_dict(const figcap::metrics::MetricBundle& b) {
  py::dict d;
  const auto v = b.values();
  for (size_t i = 0; i < v.size(); ++i) {
    d[py::str(std::string(figcap::metrics::kMetricNames[i]))] = v[i];
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_figcap, m) {
  m.doc() = "Caption metrics, relevance filtering helpers and report deltas.";

  m.def("tokenize", &figcap::metrics::tokenize, py::arg("text"));
  m.def("token_count", &figcap::metrics::token_count, py::arg("text"));
  m.def(
      "evaluate_pair",
      [](const std::string& candidate, const std::string& reference) {
        return bundle_dict(figcap::metrics::evaluate_pair(candidate, reference));
      },
      py::arg("candidate"), py::arg("reference"),
      "BLEU-1..4 and ROUGE-1/2/L precision, recall and F1 for one pair.");
  m.def(
      "evaluate_corpus",
      [](const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
        if (candidates.size() != references.size()) {
          throw std::invalid_argument("candidates and references differ in length");
        }
        std::vector<figcap::metrics::MetricBundle> bundles;
        for (size_t i = 0; i < candidates.size(); ++i) {
          bundles.push_back(figcap::metrics::evaluate_pair(candidates[i], references[i]));
        }
        return bundle_dict(figcap::metrics::aggregate(bundles));
      },
      py::arg("candidates"), py::arg("references"));
  m.attr("METRIC_NAMES") = [] {
    std::vector<std::string> names;
    for (auto n : figcap::metrics::kMetricNames) names.emplace_back(n);
    return names;
  }();

  m.def("percent_delta", &figcap::report::percent_delta, py::arg("value"), py::arg("baseline"));
  m.def("format_delta", &figcap::report::format_delta, py::arg("delta"));

  m.def(
      "segment",
      [](const std::string& paragraph) {
        std::vector<std::string> out;
        for (const auto& c : figcap::filter::segment(paragraph)) out.push_back(c.text);
        return out;
      },
      py::arg("paragraph"));
  m.def("passes_threshold", &figcap::filter::passes_threshold, py::arg("ll_conditional"),
        py::arg("ll_null"), py::arg("lambda_"));

  m.def(
      "length_window",
      [](int target) {
        auto w = figcap::pipeline::LengthWindow::from_target(target);
        return py::make_tuple(w.lower, w.upper);
      },
      py::arg("target_len"));
  m.def(
      "parse_ranking",
      [](const std::string& text, size_t n) { return figcap::pipeline::parse_ranking(text, n); },
      py::arg("text"), py::arg("n"));

  m.def(
      "validate_corpus",
      [](const std::string& path) {
        std::ostringstream out;
        int code = figcap::cli::cmd_validate(path, std::nullopt, out);
        return py::make_tuple(code, out.str());
      },
      py::arg("path"));
}
