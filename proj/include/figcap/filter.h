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

// Sentence-level relevance filtering of a figure's paragraph. Each sentence
// is kept when the mention text is sufficiently more likely with the
// sentence as context than with no context at all.

#ifndef FIGCAP_FILTER_H_
#define FIGCAP_FILTER_H_

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "figcap/corpus.h"
#include "figcap/llm.h"

namespace figcap::filter {

struct Chunk {
  size_t index = 0;
  std::string text;
};

struct RelevanceScore {
  size_t chunk_index = 0;
  double ll_conditional = 0.0;
  double ll_null = 0.0;
  bool retained = false;
};

inline constexpr double kDefaultLambda = 1.2;

// Abbreviations that end in '.' but do not end a sentence. Matched
// case-insensitively at a word boundary.
const std::vector<std::string>& default_abbreviations();

// Splits after '.', '!' or '?' when followed by whitespace and then an
// uppercase letter or digit, unless the text before the mark ends with a
// guarded abbreviation. Whitespace is collapsed first, so joining the chunks
// with single spaces gives back the normalized paragraph.
std::vector<Chunk> segment(std::string_view paragraph,
                           const std::vector<std::string>& abbreviations =
                               default_abbreviations());

// The likelihood-ratio test: retained iff ll_cond - ll_null >= ln(lambda).
// Throws std::invalid_argument for lambda <= 0.
bool passes_threshold(double ll_conditional, double ll_null, double lambda);

struct FilterOptions {
  double lambda = kDefaultLambda;
  // Divide both log-likelihoods by the mention's token count.
  bool per_token = false;
  std::string conditional_prompt = "Context: {chunk}\nThe figure mention: ";
  std::string null_prompt = "The figure mention: ";
  std::vector<std::string> abbreviations = default_abbreviations();
  // Chunks of one paragraph scored concurrently when > 1.
  size_t workers = 1;
};

// Scorer failure while scoring a chunk.
class ScoringError : public std::runtime_error {
 public:
  ScoringError(size_t chunk_index, const std::string& what);
  size_t chunk_index() const { return chunk_index_; }

 private:
  size_t chunk_index_;
};

RelevanceScore score_chunk(const Chunk& chunk, std::string_view mention,
                           llm::LikelihoodScorer& scorer,
                           const FilterOptions& options = {});

struct FilterResult {
  std::string text;
  std::vector<RelevanceScore> scores;
  std::vector<Chunk> chunks;

  nlohmann::json to_json() const;
};

FilterResult filter_paragraph(const corpus::FigureContext& fc,
                              llm::LikelihoodScorer& scorer,
                              const FilterOptions& options = {});

// Re-applies a threshold to already computed scores.
FilterResult rethreshold(const FilterResult& scored, double lambda);

}  // namespace figcap::filter

#endif  // FIGCAP_FILTER_H_
