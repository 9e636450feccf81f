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

#ifndef FIGCAP_PROMPTS_H_
#define FIGCAP_PROMPTS_H_

#include <string>
#include <string_view>
#include <vector>

#include "figcap/corpus.h"

namespace figcap::prompts {

// Prompt texts with {placeholder} slots. Each one can be overridden by a
// file of the same name (generate.txt, rerank.txt, ...) in a prompts dir.
struct PromptLibrary {
  // {instruction} {rules} {demos} {figure_type} {mention} {paragraph} {ocr}
  std::string generate;
  // Appended to `generate` when a reasoning trace is wanted.
  std::string reasoning_suffix;
  // {figure_type} {mention} {paragraph} {ocr} {captions} {n}
  std::string rerank;
  // {n}
  std::string rerank_repair;
  // {demos} {mention} {paragraph} {initial} {length_hint}
  std::string refine;
  // {n} {lower} {upper}
  std::string refine_length_retry;
  // {category} {seed_instruction} {context_summary} {existing}
  std::string propose_instruction;
  // {instruction} {rules} {context} {generated} {gold} {score}
  std::string propose_rule;

  static PromptLibrary defaults();
  // Missing files keep their defaults.
  static PromptLibrary load(const std::string& dir);
  // Writes every prompt as <name>.txt.
  void save(const std::string& dir) const;
};

std::string format_ocr(const std::vector<std::string>& ocr);

// "Type / Mention / Paragraph / OCR" block used for demos and proposals.
std::string context_summary(const corpus::FigureContext& fc,
                            std::string_view paragraph_override = {},
                            bool use_override = false);

// Takes the text after the last "Caption:" marker when a reasoning trace is
// present; otherwise the trimmed response.
std::string extract_caption(std::string_view response);

}  // namespace figcap::prompts

#endif  // FIGCAP_PROMPTS_H_
