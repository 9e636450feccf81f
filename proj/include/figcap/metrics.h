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

// Caption similarity metrics: BLEU-1..4 and ROUGE-1/2/L against a single
// reference, all built on one tokenizer so that length limits elsewhere in
// the pipeline are measured in the same unit.

#ifndef FIGCAP_METRICS_H_
#define FIGCAP_METRICS_H_

#include <array>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace figcap::metrics {

using TokenSeq = std::vector<std::string>;
using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, int>;

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  // Builds a score from precision and recall; F1 is 0 when P + R = 0.
  static RougeScore from_pr(double precision, double recall);

  friend bool operator==(const RougeScore&, const RougeScore&) = default;
};

struct MetricBundle {
  std::array<double, 4> bleu{};
  RougeScore rouge1;
  RougeScore rouge2;
  RougeScore rougeL;

  // Flattened in table column order: B1..B4, R1 P/R/F, R2 P/R/F, RL P/R/F.
  std::array<double, 13> values() const;
  static MetricBundle from_values(std::span<const double, 13> v);

  friend bool operator==(const MetricBundle&, const MetricBundle&) = default;
};

inline constexpr std::array<std::string_view, 13> kMetricNames = {
    "B1",   "B2",   "B3",   "B4",   "R1-P", "R1-R", "R1-F",
    "R2-P", "R2-R", "R2-F", "RL-P", "RL-R", "RL-F"};

// Lowercases ASCII and splits on every maximal run of non-alphanumeric ASCII
// characters. Bytes >= 0x80 count as token characters, so UTF-8 words stay
// whole.
TokenSeq tokenize(std::string_view text);

// Number of tokens `text` produces under tokenize().
size_t token_count(std::string_view text);

// Throws std::invalid_argument for n == 0.
NgramCounts ngram_counts(const TokenSeq& seq, size_t n);

struct BleuOptions {
  // Add-one smoothing of zero n-gram precisions (only for orders the
  // candidate is long enough to have). Off by default.
  bool smoothing = false;
};

// An order n that neither side is long enough to have counts as p_n = 1, so
// identical candidate and reference always score 1. A candidate shorter than
// n against a reference of length >= n scores 0 at that order.
std::array<double, 4> bleu(const TokenSeq& candidate,
                           const TokenSeq& reference,
                           const BleuOptions& options = {});

// n must be 1 or 2 for the reported metrics, but any n >= 1 works.
RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference,
                   size_t n);

size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

MetricBundle evaluate_pair(std::string_view candidate,
                           std::string_view reference,
                           const BleuOptions& options = {});

// Macro average. Throws std::invalid_argument on an empty list.
MetricBundle aggregate(std::span<const MetricBundle> bundles);

}  // namespace figcap::metrics

#endif  // FIGCAP_METRICS_H_
