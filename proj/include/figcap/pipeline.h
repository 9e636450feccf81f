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

// Per-record caption generation:
//
//   stage 1: one candidate per category (category template), then an LLM
//            ranking when there is more than one candidate;
//   stage 2: rewrite of the selected caption in the style of the paper's
//            profile captions, held to +/-15% of a target token length.

#ifndef FIGCAP_PIPELINE_H_
#define FIGCAP_PIPELINE_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "figcap/corpus.h"
#include "figcap/filter.h"
#include "figcap/llm.h"
#include "figcap/optimizer.h"
#include "figcap/prompts.h"

namespace figcap::pipeline {

enum class Stage { kGenerated, kSelected, kRefined };
std::string_view stage_name(Stage s);

struct CaptionCandidate {
  std::string paper_id;
  std::string category;
  std::string text;
  Stage stage = Stage::kGenerated;
  int template_version = 0;
  std::string model_id;

  nlohmann::json to_json() const;
  friend bool operator==(const CaptionCandidate&, const CaptionCandidate&) = default;
};

struct RerankDecision {
  // Permutation of candidate indices (0-based), best first.
  std::vector<size_t> ordered_candidate_ids;
  std::string justification;
  size_t chosen = 0;
  // Ranking could not be parsed even after the repair prompt.
  bool fallback = false;
  // Only one candidate; no ranking call was made.
  bool bypassed = false;

  nlohmann::json to_json() const;
};

struct LengthWindow {
  int target_len = 1;
  int lower = 1;
  int upper = 2;
  // caption_len_hint | profile_mean | selected_length
  std::string source;
  // Target taken from the caption being refined, so the window cannot bind.
  bool degenerate = false;

  // floor(0.85 t) clamped to >= 1, ceil(1.15 t); integer arithmetic only.
  static LengthWindow from_target(int target_len);
  bool contains(int n) const { return n >= lower && n <= upper; }
  // Tokens outside the window; 0 when inside.
  int distance(int n) const;
  nlohmann::json to_json() const;
};

struct AuditEntry {
  std::string stage;
  std::string purpose;
  std::string category;
  int attempt = 0;
  std::string model_id;
  std::string prompt;
  std::string response;
  std::string error;
};

struct AuditTrail {
  std::string paper_id;
  std::vector<AuditEntry> calls;
  nlohmann::json decisions = nlohmann::json::object();
  std::vector<std::string> flags;

  size_t count(std::string_view purpose) const;
  // With `redact`, prompts and responses are replaced by size and hash.
  nlohmann::json to_json(bool redact = false) const;
};

struct PipelineOptions {
  bool stage1_only = false;
  // Use relevance-filtered paragraphs at inference (needs a scorer).
  bool filtered_inference = false;
  filter::FilterOptions filter;
  int t_retry = 2;
  size_t max_profile_demos = 3;
  optimizer::SamplingParams sampling;
  prompts::PromptLibrary library = prompts::PromptLibrary::defaults();
};

struct Backends {
  llm::LlmBackend* generator = nullptr;
  llm::LlmBackend* reranker = nullptr;  // defaults to generator
  llm::LlmBackend* refiner = nullptr;   // defaults to generator
  llm::LikelihoodScorer* scorer = nullptr;
};

struct GenerationResult {
  std::vector<CaptionCandidate> candidates;
  std::vector<std::string> errors;
};

GenerationResult generate_candidates(const corpus::PaperRecord& record,
                                     const optimizer::TemplateStore& store,
                                     llm::LlmBackend& generator,
                                     const PipelineOptions& options = {},
                                     AuditTrail* trail = nullptr);

// Parses a ranking of n captions into 0-based indices. Accepts a
// "Ranking: 2, 1, 3" line, a numbered list naming "Caption k", or a bare
// comma list on the first line. nullopt unless the result is a permutation.
std::optional<std::vector<size_t>> parse_ranking(std::string_view text, size_t n);

// Never includes the target's gold caption.
std::string build_rerank_prompt(const corpus::PaperRecord& record,
                                const std::vector<CaptionCandidate>& candidates,
                                const prompts::PromptLibrary& library);

struct Selection {
  CaptionCandidate selected;
  RerankDecision decision;
};

// Throws std::invalid_argument for an empty candidate list.
Selection select_candidate(const corpus::PaperRecord& record,
                           const std::vector<CaptionCandidate>& candidates,
                           llm::LlmBackend& reranker,
                           const PipelineOptions& options = {},
                           AuditTrail* trail = nullptr);

LengthWindow length_window(const corpus::PaperRecord& record,
                           int selected_token_len);

std::string build_refine_prompt(const corpus::PaperRecord& record,
                                const std::string& initial,
                                const LengthWindow& window,
                                const PipelineOptions& options = {});

struct Refinement {
  CaptionCandidate candidate;
  int attempts = 0;
  bool length_violation = false;
  bool unrefined = false;
};

Refinement refine_caption(const corpus::PaperRecord& record,
                          const CaptionCandidate& selected,
                          llm::LlmBackend& backend, const LengthWindow& window,
                          const PipelineOptions& options = {},
                          AuditTrail* trail = nullptr);

struct RecordResult {
  std::string paper_id;
  std::vector<CaptionCandidate> candidates;
  std::optional<CaptionCandidate> selected;
  std::optional<CaptionCandidate> refined;
  std::optional<RerankDecision> decision;
  std::optional<LengthWindow> window;
  std::vector<std::string> flags;
  bool failed = false;
  AuditTrail trail;

  // Refined caption if there is one, else the selected one.
  const CaptionCandidate* final_caption() const;
  bool has_flag(std::string_view flag) const;
};

// Never throws: stage failures degrade to flags, and a record with no usable
// candidate is marked failed.
RecordResult run_record(const corpus::PaperRecord& record,
                        const optimizer::TemplateStore& store,
                        const Backends& backends,
                        const PipelineOptions& options = {});

// Runs records on `workers` threads (0 = hardware concurrency). Results are
// in input order.
std::vector<RecordResult> run_batch(const std::vector<corpus::PaperRecord>& records,
                                    const optimizer::TemplateStore& store,
                                    const Backends& backends,
                                    const PipelineOptions& options = {},
                                    size_t workers = 1);

}  // namespace figcap::pipeline

#endif  // FIGCAP_PIPELINE_H_
