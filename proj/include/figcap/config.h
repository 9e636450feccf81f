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

// Run configuration: a sectioned INI file. Every key has a default, and
// dump() writes all of them so a run directory records exactly what ran.
//
//   [corpus]    train, val, test
//   [filter]    lambda, per_token, filtered_inference, workers
//   [optimizer] k_demos, m_instructions, minibatch, trials, ...
//   [backend]   kind, model, rerank_model, refine_model, base_url, ...
//   [pipeline]  split, stage1_only, workers, seed, t_retry, ...
//   [report]    baseline
//
// Secrets never live in the file: the API key comes from FIGCAP_API_KEY, and
// FIGCAP_BASE_URL overrides backend.base_url.

#ifndef FIGCAP_CONFIG_H_
#define FIGCAP_CONFIG_H_

#include <cstdint>
#include <string>

#include "figcap/corpus.h"
#include "figcap/optimizer.h"

namespace figcap::cli {

inline constexpr const char* kApiKeyEnv = "FIGCAP_API_KEY";
inline constexpr const char* kBaseUrlEnv = "FIGCAP_BASE_URL";

struct BackendConfig {
  // mock | openai | gemini
  std::string kind = "mock";
  // echo | gold | scripted (mock only)
  std::string mock_mode = "echo";
  std::string mock_script;
  // Required for live backends.
  std::string model;
  // Empty means same as `model`.
  std::string rerank_model;
  std::string refine_model;
  // Model used for filter log-likelihoods; must support prompt logprobs.
  std::string scorer_model;
  std::string base_url = "https://api.openai.com/v1";
  bool supports_logprobs = false;
  size_t rate_limit = 0;  // calls per window; 0 = unlimited
  int64_t rate_window_ms = 60000;
  int64_t timeout_ms = 60000;
  int max_retries = 4;
  double temperature = 0.0;
  int max_tokens = 256;
};

struct RunConfig {
  std::string train_path;
  std::string val_path;
  std::string test_path;

  double lambda = 1.2;
  bool per_token = false;
  bool filtered_inference = false;
  size_t filter_workers = 1;

  optimizer::OptBudget budget;
  BackendConfig backend;

  std::string split = "test";
  bool stage1_only = false;
  size_t workers = 0;  // 0 = available processors
  uint64_t seed = 42;
  int t_retry = 2;
  size_t max_profile_demos = 3;
  // Largest tolerated fraction of failed records before exit code 2.
  double failure_threshold = 0.5;
  std::string template_dir = "templates";
  std::string prompt_dir;  // empty = built-in prompts
  std::string out_dir = "runs/latest";
  bool redact_audit = false;

  std::string baseline = "Selected Before Personalization";

  // Path of the corpus for `split` (train/val/test).
  std::string corpus_path(corpus::Split s) const;

  // Workers after applying the processor count and the rate ceiling.
  size_t effective_workers() const;

  // Throws std::invalid_argument on unknown keys or bad values.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string dump() const;
};

}  // namespace figcap::cli

#endif  // FIGCAP_CONFIG_H_
