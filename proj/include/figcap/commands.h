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

// Subcommands of the figcap tool. Each returns the process exit code and
// writes only under its run directory (cmd_optimize also writes the
// template store).

#ifndef FIGCAP_COMMANDS_H_
#define FIGCAP_COMMANDS_H_

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "figcap/config.h"
#include "figcap/llm.h"
#include "figcap/pipeline.h"

namespace figcap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitThreshold = 2;

inline constexpr const char* kAllGenerated = "All Generated Captions";
inline constexpr const char* kSelectedBefore = "Selected Before Personalization";
inline constexpr const char* kSelectedAfter = "Selected After Personalization";

// Backends built from a config. One mock instance serves every role.
struct BackendSet {
  std::vector<std::shared_ptr<llm::LlmBackend>> owned;
  std::shared_ptr<llm::LikelihoodScorer> scorer;
  pipeline::Backends view;
};

// The API key is read from FIGCAP_API_KEY for non-mock backends.
BackendSet make_backends(const RunConfig& config);

int cmd_validate(const std::string& corpus_path,
                 std::optional<corpus::Split> split, std::ostream& out);

// Writes filter_audit.jsonl: per-chunk scores of every record in the split.
int cmd_filter_audit(const RunConfig& config, std::ostream& out);

int cmd_optimize(const RunConfig& config, std::ostream& out);

int cmd_run(const RunConfig& config, std::ostream& out);

// A candidate file given as "name=path" or just "path" (name = file stem).
struct CandidateSpec {
  std::string name;
  std::string path;
  static CandidateSpec parse(const std::string& arg);
};

// `baseline` empty means the first candidate file.
int cmd_eval(const std::vector<CandidateSpec>& candidates,
             const std::string& references, const std::string& baseline,
             const std::string& out_dir, std::ostream& out);

// Re-renders a report.json (or a table fixture in the same shape) against a
// possibly different baseline and prints it in `format`.
int cmd_report(const std::string& report_json, const std::string& baseline,
               const std::string& format, std::ostream& out);

}  // namespace figcap::cli

#endif  // FIGCAP_COMMANDS_H_
