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

#include "figcap/filter.h"

#include <cctype>
#include <cmath>
#include <future>

#include "figcap/common.h"
#include "figcap/metrics.h"

namespace figcap::filter {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)); }

bool ends_with_abbreviation(std::string_view text,
                            const std::vector<std::string>& abbreviations) {
  for (const std::string& abbr : abbreviations) {
    if (abbr.empty() || abbr.size() > text.size()) continue;
    std::string_view tail = text.substr(text.size() - abbr.size());
    if (!starts_with_icase(tail, abbr)) continue;
    if (abbr.size() == text.size() ||
        !is_alnum(text[text.size() - abbr.size() - 1])) {
      return true;
    }
  }
  return false;
}

}  // namespace

const std::vector<std::string>& default_abbreviations() {
  static const std::vector<std::string> kList = {
      "Fig.",  "Figs.", "Eq.",   "Eqs.",  "et al.", "e.g.",    "i.e.",
      "cf.",   "vs.",   "Sec.",  "Sect.", "Tab.",   "No.",     "Ref.",
      "Refs.", "Dr.",   "Prof.", "Mr.",   "Ms.",    "approx.", "resp.",
      "Ch.",   "Thm.",  "Def.",  "Lem.",  "Alg.",   "App.",    "Appx.",
  };
  return kList;
}

std::vector<Chunk> segment(std::string_view paragraph,
                           const std::vector<std::string>& abbreviations) {
  const std::string s = collapse_whitespace(paragraph);
  std::vector<Chunk> chunks;
  size_t start = 0;
  for (size_t i = 0; i + 2 < s.size(); ++i) {
    const char c = s[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (s[i + 1] != ' ') continue;
    const unsigned char next = static_cast<unsigned char>(s[i + 2]);
    if (!std::isupper(next) && !std::isdigit(next)) continue;
    std::string_view sentence(s.data() + start, i + 1 - start);
    if (c == '.' && ends_with_abbreviation(sentence, abbreviations)) continue;
    chunks.push_back({chunks.size(), std::string(sentence)});
    start = i + 2;
  }
  if (start < s.size()) chunks.push_back({chunks.size(), s.substr(start)});
  return chunks;
}

bool passes_threshold(double ll_conditional, double ll_null, double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be > 0");
  return ll_conditional - ll_null >= std::log(lambda);
}

ScoringError::ScoringError(size_t chunk_index, const std::string& what)
    : std::runtime_error("scoring chunk " + std::to_string(chunk_index) +
                         " failed: " + what),
      chunk_index_(chunk_index) {}

RelevanceScore score_chunk(const Chunk& chunk, std::string_view mention,
                           llm::LikelihoodScorer& scorer,
                           const FilterOptions& options) {
  const std::string m = trim(mention);
  if (m.empty()) throw std::invalid_argument("mention must be non-empty");
  RelevanceScore out;
  out.chunk_index = chunk.index;
  try {
    out.ll_conditional = scorer.loglikelihood(
        substitute(options.conditional_prompt, {{"chunk", chunk.text}}), m);
    out.ll_null = scorer.loglikelihood(options.null_prompt, m);
  } catch (const std::exception& e) {
    throw ScoringError(chunk.index, e.what());
  }
  if (options.per_token) {
    const double n =
        static_cast<double>(std::max<size_t>(1, metrics::token_count(m)));
    out.ll_conditional /= n;
    out.ll_null /= n;
  }
  out.retained = passes_threshold(out.ll_conditional, out.ll_null, options.lambda);
  return out;
}

FilterResult filter_paragraph(const corpus::FigureContext& fc,
                              llm::LikelihoodScorer& scorer,
                              const FilterOptions& options) {
  FilterResult result;
  result.chunks = segment(fc.paragraph, options.abbreviations);
  if (result.chunks.empty()) return result;

  result.scores.resize(result.chunks.size());
  if (options.workers <= 1 || result.chunks.size() == 1) {
    for (const Chunk& c : result.chunks) {
      result.scores[c.index] = score_chunk(c, fc.mention, scorer, options);
    }
  } else {
    for (size_t base = 0; base < result.chunks.size(); base += options.workers) {
      std::vector<std::future<RelevanceScore>> batch;
      const size_t end = std::min(result.chunks.size(), base + options.workers);
      for (size_t i = base; i < end; ++i) {
        batch.push_back(std::async(std::launch::async, [&, i] {
          return score_chunk(result.chunks[i], fc.mention, scorer, options);
        }));
      }
      for (size_t i = base; i < end; ++i) result.scores[i] = batch[i - base].get();
    }
  }

  for (const RelevanceScore& s : result.scores) {
    if (!s.retained) continue;
    if (!result.text.empty()) result.text.push_back(' ');
    result.text += result.chunks[s.chunk_index].text;
  }
  return result;
}

FilterResult rethreshold(const FilterResult& scored, double lambda) {
  FilterResult out;
  out.chunks = scored.chunks;
  out.scores = scored.scores;
  for (RelevanceScore& s : out.scores) {
    s.retained = passes_threshold(s.ll_conditional, s.ll_null, lambda);
    if (!s.retained) continue;
    if (!out.text.empty()) out.text.push_back(' ');
    out.text += out.chunks[s.chunk_index].text;
  }
  return out;
}

nlohmann::json FilterResult::to_json() const {
  nlohmann::json j;
  j["filtered"] = text;
  nlohmann::json arr = nlohmann::json::array();
  for (const RelevanceScore& s : scores) {
    arr.push_back({{"chunk_index", s.chunk_index},
                   {"text", chunks[s.chunk_index].text},
                   {"ll_conditional", s.ll_conditional},
                   {"ll_null", s.ll_null},
                   {"retained", s.retained}});
  }
  j["chunks"] = std::move(arr);
  return j;
}

}  // namespace figcap::filter
