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

#include "figcap/prompts.h"

#include <filesystem>

#include "figcap/common.h"

namespace figcap::prompts {

namespace {

struct Slot {
  const char* file;
  std::string PromptLibrary::*field;
};

constexpr Slot kSlots[] = {
    {"generate.txt", &PromptLibrary::generate},
    {"reasoning_suffix.txt", &PromptLibrary::reasoning_suffix},
    {"rerank.txt", &PromptLibrary::rerank},
    {"rerank_repair.txt", &PromptLibrary::rerank_repair},
    {"refine.txt", &PromptLibrary::refine},
    {"refine_length_retry.txt", &PromptLibrary::refine_length_retry},
    {"propose_instruction.txt", &PromptLibrary::propose_instruction},
    {"propose_rule.txt", &PromptLibrary::propose_rule},
};

std::string strip_quotes(std::string s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

}  // namespace

PromptLibrary PromptLibrary::defaults() {
  PromptLibrary p;
  p.generate =
      "{instruction}\n"
      "{rules}{demos}\n"
      "Figure type: {figure_type}\n"
      "Mention: {mention}\n"
      "Paragraph: {paragraph}\n"
      "OCR: {ocr}\n"
      "Caption:";
  p.reasoning_suffix =
      "\n\nFirst explain your reasoning on a line starting with "
      "\"Reasoning:\", then give the caption on a line starting with "
      "\"Caption:\".";
  p.rerank =
      "Context:\n"
      "- Type: {figure_type}\n"
      "- Mention: {mention}\n"
      "- Paragraph: {paragraph}\n"
      "- OCR: {ocr}\n"
      "\n"
      "Captions:\n"
      "{captions}\n"
      "\n"
      "Task: Rank best→worst by clarity, relevance, accuracy, tone.\n"
      "\n"
      "Output: Ordered list + justifications. Start with one line of the "
      "form \"Ranking: a, b, c\" listing all {n} caption numbers, best first. "
      "Refer to captions only by number and do not rewrite them.";
  p.rerank_repair =
      "\n\nYour previous answer could not be read as a ranking of captions 1 "
      "to {n}. Reply with exactly one line: \"Ranking: \" followed by every "
      "caption number once, separated by commas.";
  p.refine =
      "Refine caption style only; no new info.\n"
      "\n"
      "Rules:\n"
      "- Keep facts; no new entities\n"
      "- Edit style/structure only\n"
      "- Preserve IDs; concise\n"
      "{demos}\n"
      "Target:\n"
      "Mention: {mention}\n"
      "Paragraph: {paragraph}\n"
      "Initial: {initial}\n"
      "Length: {length_hint}\n"
      "\n"
      "Output: Final caption only.";
  p.refine_length_retry =
      "\n\nYour previous caption had {n} tokens. The caption must have "
      "between {lower} and {upper} tokens.";
  p.propose_instruction =
      "You are improving the instruction given to a scientific figure-caption "
      "generator for papers in the category {category}.\n"
      "Current instruction: {seed_instruction}\n"
      "\n"
      "Sample figure contexts from this category:\n"
      "{context_summary}\n"
      "\n"
      "Instructions already proposed:\n"
      "{existing}\n"
      "\n"
      "Write one new instruction, different from those above, that leads to "
      "captions closer to the ones authors write. Reply with the instruction "
      "only.";
  p.propose_rule =
      "A scientific figure-caption generator produced a poor caption.\n"
      "Instruction: {instruction}\n"
      "Current rules:\n"
      "{rules}\n"
      "\n"
      "Figure context:\n"
      "{context}\n"
      "\n"
      "Generated caption: {generated}\n"
      "Reference caption: {gold}\n"
      "ROUGE-L precision: {score}\n"
      "\n"
      "Write one short imperative rule (a single sentence) that would have "
      "avoided this mistake. Reply with the rule only.";
  return p;
}

PromptLibrary PromptLibrary::load(const std::string& dir) {
  PromptLibrary p = defaults();
  for (const Slot& s : kSlots) {
    std::filesystem::path path = std::filesystem::path(dir) / s.file;
    if (std::filesystem::exists(path)) {
      std::string text = read_file(path.string());
      // Editors append a trailing newline; the compiled defaults have none.
      while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
        text.pop_back();
      }
      p.*(s.field) = std::move(text);
    }
  }
  return p;
}

void PromptLibrary::save(const std::string& dir) const {
  for (const Slot& s : kSlots) {
    write_file((std::filesystem::path(dir) / s.file).string(), this->*(s.field) + "\n");
  }
}

std::string format_ocr(const std::vector<std::string>& ocr) {
  std::string out;
  for (size_t i = 0; i < ocr.size(); ++i) {
    if (i) out += "; ";
    out += ocr[i];
  }
  return out;
}

std::string context_summary(const corpus::FigureContext& fc,
                            std::string_view paragraph_override,
                            bool use_override) {
  std::string out;
  out += "Figure type: " + fc.figure_type + "\n";
  out += "Mention: " + fc.mention + "\n";
  out += "Paragraph: " +
         (use_override ? std::string(paragraph_override) : fc.paragraph) + "\n";
  out += "OCR: " + format_ocr(fc.ocr);
  return out;
}

std::string extract_caption(std::string_view response) {
  std::vector<std::string> lines = split(response, '\n');
  for (size_t i = lines.size(); i-- > 0;) {
    std::string t = trim(lines[i]);
    size_t skip = 0;
    if (starts_with_icase(t, "final caption:")) {
      skip = 14;
    } else if (starts_with_icase(t, "caption:")) {
      skip = 8;
    } else {
      continue;
    }
    std::string out = t.substr(skip);
    for (size_t j = i + 1; j < lines.size(); ++j) {
      std::string more = trim(lines[j]);
      if (!more.empty()) out += " " + more;
    }
    return strip_quotes(trim(out));
  }
  return strip_quotes(trim(response));
}

}  // namespace figcap::prompts
