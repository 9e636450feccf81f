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

#include "figcap/metrics.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace figcap::metrics {

namespace {

bool is_token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c >= 0x80;
}

// Sum over shared n-grams of min(count_a, count_b).
int clipped_overlap(const NgramCounts& a, const NgramCounts& b) {
  int overlap = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      overlap += std::min(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return overlap;
}

double safe_ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

}  // namespace

RougeScore RougeScore::from_pr(double precision, double recall) {
  RougeScore s;
  s.precision = precision;
  s.recall = recall;
  double sum = precision + recall;
  s.f1 = sum > 0 ? 2.0 * precision * recall / sum : 0.0;
  return s;
}

std::array<double, 13> MetricBundle::values() const {
  return {bleu[0],          bleu[1],          bleu[2],
          bleu[3],          rouge1.precision, rouge1.recall,
          rouge1.f1,        rouge2.precision, rouge2.recall,
          rouge2.f1,        rougeL.precision, rougeL.recall,
          rougeL.f1};
}

MetricBundle MetricBundle::from_values(std::span<const double, 13> v) {
  MetricBundle b;
  for (size_t i = 0; i < 4; ++i) b.bleu[i] = v[i];
  b.rouge1 = {v[4], v[5], v[6]};
  b.rouge2 = {v[7], v[8], v[9]};
  b.rougeL = {v[10], v[11], v[12]};
  return b;
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_char(c)) {
      current.push_back(
          (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                 : static_cast<char>(c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

size_t token_count(std::string_view text) { return tokenize(text).size(); }

NgramCounts ngram_counts(const TokenSeq& seq, size_t n) {
  if (n == 0) throw std::invalid_argument("ngram order must be >= 1");
  NgramCounts counts;
  if (seq.size() < n) return counts;
  for (size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[Ngram(seq.begin() + i, seq.begin() + i + n)];
  }
  return counts;
}

std::array<double, 4> bleu(const TokenSeq& candidate,
                           const TokenSeq& reference,
                           const BleuOptions& options) {
  std::array<double, 4> scores{};
  if (candidate.empty()) return scores;

  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = std::min(1.0, std::exp(1.0 - r / c));

  double log_sum = 0.0;
  bool dead = false;  // some order n <= k has zero precision
  for (size_t n = 1; n <= 4; ++n) {
    if (!dead) {
      const int total =
          candidate.size() >= n ? static_cast<int>(candidate.size() - n + 1)
                                : 0;
      const int matches =
          total > 0 ? clipped_overlap(ngram_counts(candidate, n),
                                      ngram_counts(reference, n))
                    : 0;
      if (total == 0) {
        // Neither side has n-grams of this order: vacuous match.
        dead = reference.size() >= n;
      } else if (matches == 0) {
        if (options.smoothing) {
          log_sum += std::log(1.0 / (total + 1.0));
        } else {
          dead = true;
        }
      } else {
        log_sum += std::log(static_cast<double>(matches) / total);
      }
    }
    scores[n - 1] = dead ? 0.0 : bp * std::exp(log_sum / static_cast<double>(n));
  }
  return scores;
}

RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference,
                   size_t n) {
  NgramCounts cand = ngram_counts(candidate, n);
  NgramCounts ref = ngram_counts(reference, n);
  const double overlap = clipped_overlap(cand, ref);
  const double cand_total =
      candidate.size() >= n ? static_cast<double>(candidate.size() - n + 1) : 0;
  const double ref_total =
      reference.size() >= n ? static_cast<double>(reference.size() - n + 1) : 0;
  return RougeScore::from_pr(safe_ratio(overlap, cand_total),
                             safe_ratio(overlap, ref_total));
}

size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0;
  // Two-row DP over b.
  std::vector<size_t> prev(b.size() + 1, 0);
  std::vector<size_t> cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  const double l = static_cast<double>(lcs_length(candidate, reference));
  return RougeScore::from_pr(
      safe_ratio(l, static_cast<double>(candidate.size())),
      safe_ratio(l, static_cast<double>(reference.size())));
}

MetricBundle evaluate_pair(std::string_view candidate,
                           std::string_view reference,
                           const BleuOptions& options) {
  TokenSeq c = tokenize(candidate);
  TokenSeq r = tokenize(reference);
  MetricBundle b;
  b.bleu = bleu(c, r, options);
  b.rouge1 = rouge_n(c, r, 1);
  b.rouge2 = rouge_n(c, r, 2);
  b.rougeL = rouge_l(c, r);
  return b;
}

MetricBundle aggregate(std::span<const MetricBundle> bundles) {
  if (bundles.empty()) {
    throw std::invalid_argument("aggregate needs at least one bundle");
  }
  // Summing each column in sorted order makes the mean bit-identical under
  // any permutation of the input.
  std::array<std::vector<double>, 13> columns;
  for (const MetricBundle& b : bundles) {
    auto v = b.values();
    for (size_t i = 0; i < v.size(); ++i) columns[i].push_back(v[i]);
  }
  std::array<double, 13> mean{};
  for (size_t i = 0; i < columns.size(); ++i) {
    std::sort(columns[i].begin(), columns[i].end());
    double s = 0.0;
    for (double x : columns[i]) s += x;
    mean[i] = s / static_cast<double>(bundles.size());
  }
  return MetricBundle::from_values(mean);
}

}  // namespace figcap::metrics
