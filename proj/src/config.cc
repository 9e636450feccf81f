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

#include "figcap/config.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "figcap/common.h"

namespace figcap::cli {

namespace {

std::string show(const std::string& v) { return v; }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
template <typename T>
  requires std::is_integral_v<T>
std::string show(T v) {
  return std::to_string(v);
}

void read(const std::string& s, std::string& out) { out = s; }
void read(const std::string& s, bool& out) {
  const std::string l = to_lower_ascii(trim(s));
  if (l == "true" || l == "1" || l == "yes" || l == "on") {
    out = true;
  } else if (l == "false" || l == "0" || l == "no" || l == "off") {
    out = false;
  } else {
    throw std::invalid_argument("not a boolean: '" + s + "'");
  }
}
void read(const std::string& s, double& out) {
  const std::string t = trim(s);
  size_t used = 0;
  try {
    out = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw std::invalid_argument("not a number: '" + s + "'");
}
template <typename T>
  requires std::is_integral_v<T>
void read(const std::string& s, T& out) {
  const std::string t = trim(s);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw std::invalid_argument("not an integer: '" + s + "'");
  }
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <typename T>
Field field(const char* section, const char* key, T& ref) {
  return {section, key, [&ref] { return show(ref); },
          [&ref](const std::string& s) { read(s, ref); }};
}

std::vector<Field> fields(RunConfig& c) {
  optimizer::OptBudget& b = c.budget;
  BackendConfig& be = c.backend;
  return {
      field("corpus", "train", c.train_path),
      field("corpus", "val", c.val_path),
      field("corpus", "test", c.test_path),

      field("filter", "lambda", c.lambda),
      field("filter", "per_token", c.per_token),
      field("filter", "filtered_inference", c.filtered_inference),
      field("filter", "workers", c.filter_workers),

      field("optimizer", "k_demos", b.k_demos),
      field("optimizer", "m_instructions", b.m_instructions),
      field("optimizer", "minibatch", b.minibatch),
      field("optimizer", "trials", b.trials),
      field("optimizer", "simba_iterations", b.simba_iterations),
      field("optimizer", "r_max", b.r_max),
      field("optimizer", "keep_threshold", b.keep_threshold),
      field("optimizer", "n_min", b.n_min),
      field("optimizer", "bootstrap_records", b.bootstrap_records),
      field("optimizer", "retry_cap", b.retry_cap),
      field("optimizer", "ucb_c", b.ucb_c),
      field("optimizer", "noise_sd", b.noise_sd),

      field("backend", "kind", be.kind),
      field("backend", "mock_mode", be.mock_mode),
      field("backend", "mock_script", be.mock_script),
      field("backend", "model", be.model),
      field("backend", "rerank_model", be.rerank_model),
      field("backend", "refine_model", be.refine_model),
      field("backend", "scorer_model", be.scorer_model),
      field("backend", "base_url", be.base_url),
      field("backend", "supports_logprobs", be.supports_logprobs),
      field("backend", "rate_limit", be.rate_limit),
      field("backend", "rate_window_ms", be.rate_window_ms),
      field("backend", "timeout_ms", be.timeout_ms),
      field("backend", "max_retries", be.max_retries),
      field("backend", "temperature", be.temperature),
      field("backend", "max_tokens", be.max_tokens),

      field("pipeline", "split", c.split),
      field("pipeline", "stage1_only", c.stage1_only),
      field("pipeline", "workers", c.workers),
      field("pipeline", "seed", c.seed),
      field("pipeline", "t_retry", c.t_retry),
      field("pipeline", "max_profile_demos", c.max_profile_demos),
      field("pipeline", "failure_threshold", c.failure_threshold),
      field("pipeline", "template_dir", c.template_dir),
      field("pipeline", "prompt_dir", c.prompt_dir),
      field("pipeline", "out_dir", c.out_dir),
      field("pipeline", "redact_audit", c.redact_audit),

      field("report", "baseline", c.baseline),
  };
}

void check(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (!(c.lambda > 0.0)) fail("filter.lambda must be > 0");
  if (c.budget.k_demos == 0) fail("optimizer.k_demos must be >= 1");
  if (c.budget.m_instructions == 0) fail("optimizer.m_instructions must be >= 1");
  if (c.budget.minibatch == 0) fail("optimizer.minibatch must be >= 1");
  if (c.budget.keep_threshold < 0.0 || c.budget.keep_threshold > 1.0) {
    fail("optimizer.keep_threshold must be in [0, 1]");
  }
  if (c.budget.retry_cap < 0) fail("optimizer.retry_cap must be >= 0");
  if (c.t_retry < 0) fail("pipeline.t_retry must be >= 0");
  if (c.failure_threshold < 0.0 || c.failure_threshold > 1.0) {
    fail("pipeline.failure_threshold must be in [0, 1]");
  }
  static const std::set<std::string> kinds = {"mock", "openai", "gemini"};
  if (!kinds.count(c.backend.kind)) fail("backend.kind must be mock, openai or gemini");
  if (c.backend.max_tokens <= 0) fail("backend.max_tokens must be > 0");
  if (c.backend.temperature < 0.0) fail("backend.temperature must be >= 0");
  corpus::parse_split(c.split);
}

}  // namespace

std::string RunConfig::corpus_path(corpus::Split s) const {
  switch (s) {
    case corpus::Split::kTrain:
      return train_path;
    case corpus::Split::kVal:
      return val_path;
    case corpus::Split::kTest:
      return test_path;
  }
  return {};
}

size_t RunConfig::effective_workers() const {
  size_t w = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
  if (backend.kind != "mock" && backend.rate_limit > 0) {
    w = std::min(w, backend.rate_limit);
  }
  return std::max<size_t>(1, w);
}

RunConfig RunConfig::parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  RunConfig c;
  std::vector<Field> fs = fields(c);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw std::invalid_argument("config: key '" + section + "' outside a section");
    }
    for (const auto& [key, value] : body) {
      auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == fs.end()) {
        throw std::invalid_argument("config: unknown key " + section + "." + key);
      }
      try {
        it->set(trim(value.data()));
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("config: " + section + "." + key + ": " + e.what());
      }
    }
  }
  check(c);
  return c;
}

RunConfig RunConfig::load(const std::string& path) { return parse(read_file(path)); }

std::string RunConfig::dump() const {
  RunConfig copy = *this;
  std::string out;
  std::string section;
  for (const Field& f : fields(copy)) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get() + "\n";
  }
  return out;
}

}  // namespace figcap::cli
