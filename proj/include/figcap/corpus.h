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

#ifndef FIGCAP_CORPUS_H_
#define FIGCAP_CORPUS_H_

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace figcap::corpus {

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split s);
// Accepts "train", "val"/"validation", "test". Throws on anything else.
Split parse_split(std::string_view s);

struct FigureContext {
  std::string figure_id;
  std::string mention;
  std::string paragraph;
  std::vector<std::string> ocr;
  std::string figure_type;
  std::optional<int> caption_len_hint;
  std::optional<std::string> gold_caption;
  // Set when the source line had no paragraph field at all.
  bool paragraph_missing = false;

  friend bool operator==(const FigureContext&, const FigureContext&) = default;
};

struct PaperRecord {
  std::string paper_id;
  std::vector<std::string> categories;
  FigureContext target;
  std::vector<FigureContext> profiles;
  Split split = Split::kTrain;

  friend bool operator==(const PaperRecord&, const PaperRecord&) = default;
};

inline constexpr size_t kMaxProfiles = 3;

struct LoadError {
  size_t line = 0;  // 1-based
  std::string reason;
};

struct LoadReport {
  std::string path;
  std::vector<PaperRecord> records;
  std::vector<LoadError> errors;
  // Valid records whose split differs from the requested one.
  size_t skipped_other_split = 0;
  // paper_ids accepted with an empty paragraph.
  std::vector<std::string> missing_paragraph;

  nlohmann::json summary_json() const;
};

// Parses and validates one JSON object. Throws std::invalid_argument with a
// short reason ("profiles exceed 3", "categories empty", ...) on failure.
PaperRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const PaperRecord& r);
nlohmann::json context_to_json(const FigureContext& fc);

// Reads a JSONL file. An unreadable file throws std::runtime_error; bad lines
// are collected into the report with their line numbers. With `split` set,
// only records of that split are returned.
LoadReport load_corpus(const std::string& path,
                       std::optional<Split> split = std::nullopt);

// Same as load_corpus over in-memory text.
LoadReport parse_corpus(std::string_view text,
                        std::optional<Split> split = std::nullopt);

std::string serialize_corpus(std::span<const PaperRecord> records);

struct CorpusStats {
  size_t n_papers = 0;
  size_t n_single_category = 0;
  size_t n_multi_category = 0;
  // Absent for an empty corpus.
  std::optional<double> mean_categories;
  // Population standard deviation.
  std::optional<double> sd_categories;
  std::set<std::string> category_vocabulary;

  nlohmann::json to_json() const;
};

CorpusStats corpus_stats(std::span<const PaperRecord> records);

}  // namespace figcap::corpus

#endif  // FIGCAP_CORPUS_H_
