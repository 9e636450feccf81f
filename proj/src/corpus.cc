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

#include "figcap/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "figcap/common.h"
#include "figcap/metrics.h"

namespace figcap::corpus {

using nlohmann::json;

namespace {

[[noreturn]] void reject(const std::string& reason) {
  throw std::invalid_argument(reason);
}

std::string string_field(const json& obj, const char* key, const char* where,
                         bool required) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) reject(std::string(where) + key + " missing");
    return {};
  }
  if (!it->is_string()) reject(std::string(where) + key + " is not a string");
  return it->get<std::string>();
}

FigureContext context_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) reject(where + "is not an object");
  FigureContext fc;
  fc.figure_id = string_field(j, "figure_id", where.c_str(), false);
  fc.mention = trim(string_field(j, "mention", where.c_str(), false));
  auto para = j.find("paragraph");
  if (para == j.end() || para->is_null()) {
    fc.paragraph_missing = true;
  } else {
    if (!para->is_string()) reject(where + "paragraph is not a string");
    fc.paragraph = para->get<std::string>();
  }
  if (auto ocr = j.find("ocr"); ocr != j.end() && !ocr->is_null()) {
    if (!ocr->is_array()) reject(where + "ocr is not an array");
    for (const json& e : *ocr) {
      if (!e.is_string()) reject(where + "ocr entry is not a string");
      // Blank OCR strings carry nothing; drop them so the invariant holds.
      std::string t = trim(e.get<std::string>());
      if (!t.empty()) fc.ocr.push_back(std::move(t));
    }
  }
  fc.figure_type = string_field(j, "figure_type", where.c_str(), false);
  if (auto g = j.find("gold_caption"); g != j.end() && !g->is_null()) {
    if (!g->is_string()) reject(where + "gold_caption is not a string");
    fc.gold_caption = g->get<std::string>();
  }
  if (auto h = j.find("caption_len_hint"); h != j.end() && !h->is_null()) {
    if (!h->is_number_integer()) {
      reject(where + "caption_len_hint is not an integer");
    }
    long long v = h->get<long long>();
    if (v < 0) reject(where + "caption_len_hint negative");
    fc.caption_len_hint = static_cast<int>(v);
    if (fc.gold_caption) {
      size_t n = metrics::token_count(*fc.gold_caption);
      if (n != static_cast<size_t>(v)) {
        std::ostringstream msg;
        msg << where << "caption_len_hint mismatch (hint " << v
            << ", gold_caption has " << n << " tokens)";
        reject(msg.str());
      }
    }
  }
  return fc;
}

std::vector<std::string> parse_categories(const json& j) {
  std::vector<std::string> raw;
  if (j.is_string()) {
    raw = split(j.get<std::string>(), ';');
  } else if (j.is_array()) {
    for (const json& e : j) {
      if (!e.is_string()) reject("category is not a string");
      // A single element may itself be a ';'-delimited list.
      for (std::string& s : split(e.get<std::string>(), ';')) {
        raw.push_back(std::move(s));
      }
    }
  } else if (!j.is_null()) {
    reject("categories is not an array");
  }
  std::vector<std::string> out;
  for (const std::string& s : raw) {
    std::string t = trim(s);
    if (t.empty()) continue;
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  return out;
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  std::string v = to_lower_ascii(trim(s));
  if (v == "train") return Split::kTrain;
  if (v == "val" || v == "validation" || v == "dev") return Split::kVal;
  if (v == "test") return Split::kTest;
  throw std::invalid_argument("unknown split: " + std::string(s));
}

PaperRecord record_from_json(const json& j) {
  if (!j.is_object()) reject("record is not a JSON object");
  PaperRecord r;
  r.paper_id = trim(string_field(j, "paper_id", "", true));
  if (r.paper_id.empty()) reject("paper_id empty");

  auto cats = j.find("categories");
  r.categories = cats == j.end() ? std::vector<std::string>{}
                                 : parse_categories(*cats);
  if (r.categories.empty()) reject("categories empty");

  r.split = parse_split(string_field(j, "split", "", true));

  auto target = j.find("target");
  if (target == j.end() || target->is_null()) reject("target missing");
  r.target = context_from_json(*target, "target.");
  if (r.target.mention.empty()) reject("target mention empty");

  if (auto profiles = j.find("profiles");
      profiles != j.end() && !profiles->is_null()) {
    if (!profiles->is_array()) reject("profiles is not an array");
    if (profiles->size() > kMaxProfiles) reject("profiles exceed 3");
    for (size_t i = 0; i < profiles->size(); ++i) {
      std::string where = "profiles[" + std::to_string(i) + "].";
      FigureContext p = context_from_json((*profiles)[i], where);
      if (!p.gold_caption) reject(where + "gold_caption missing");
      r.profiles.push_back(std::move(p));
    }
  }
  return r;
}

json context_to_json(const FigureContext& fc) {
  json j;
  j["figure_id"] = fc.figure_id;
  j["mention"] = fc.mention;
  if (!fc.paragraph_missing) j["paragraph"] = fc.paragraph;
  j["ocr"] = fc.ocr;
  j["figure_type"] = fc.figure_type;
  if (fc.caption_len_hint) j["caption_len_hint"] = *fc.caption_len_hint;
  if (fc.gold_caption) j["gold_caption"] = *fc.gold_caption;
  return j;
}

json record_to_json(const PaperRecord& r) {
  json j;
  j["paper_id"] = r.paper_id;
  j["categories"] = r.categories;
  j["split"] = std::string(split_name(r.split));
  j["target"] = context_to_json(r.target);
  json profiles = json::array();
  for (const FigureContext& p : r.profiles) profiles.push_back(context_to_json(p));
  j["profiles"] = std::move(profiles);
  return j;
}

LoadReport parse_corpus(std::string_view text, std::optional<Split> split) {
  LoadReport report;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line = nl == std::string_view::npos
                                ? text.substr(pos)
                                : text.substr(pos, nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      PaperRecord r = record_from_json(j);
      if (split && r.split != *split) {
        ++report.skipped_other_split;
        continue;
      }
      if (r.target.paragraph_missing) {
        report.missing_paragraph.push_back(r.paper_id);
      }
      report.records.push_back(std::move(r));
    } catch (const json::parse_error& e) {
      report.errors.push_back({line_no, std::string("invalid JSON: ") + e.what()});
    } catch (const std::exception& e) {
      report.errors.push_back({line_no, e.what()});
    }
  }
  return report;
}

LoadReport load_corpus(const std::string& path, std::optional<Split> split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  LoadReport report = parse_corpus(ss.str(), split);
  report.path = path;
  return report;
}

json LoadReport::summary_json() const {
  json j;
  j["path"] = path;
  j["n_records"] = records.size();
  j["n_errors"] = errors.size();
  j["skipped_other_split"] = skipped_other_split;
  j["missing_paragraph"] = missing_paragraph;
  json errs = json::array();
  for (const LoadError& e : errors) {
    errs.push_back({{"line", e.line}, {"reason", e.reason}});
  }
  j["errors"] = std::move(errs);
  return j;
}

std::string serialize_corpus(std::span<const PaperRecord> records) {
  std::string out;
  for (const PaperRecord& r : records) {
    out += record_to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

CorpusStats corpus_stats(std::span<const PaperRecord> records) {
  CorpusStats s;
  // Integer moments keep the result exactly permutation-invariant.
  unsigned long long sum = 0;
  unsigned long long sum_sq = 0;
  for (const PaperRecord& r : records) {
    const unsigned long long k = r.categories.size();
    ++s.n_papers;
    if (k == 1) {
      ++s.n_single_category;
    } else {
      ++s.n_multi_category;
    }
    sum += k;
    sum_sq += k * k;
    s.category_vocabulary.insert(r.categories.begin(), r.categories.end());
  }
  if (s.n_papers > 0) {
    const double n = static_cast<double>(s.n_papers);
    const double mean = static_cast<double>(sum) / n;
    const double var =
        std::max(0.0, static_cast<double>(sum_sq) / n - mean * mean);
    s.mean_categories = mean;
    s.sd_categories = std::sqrt(var);
  }
  return s;
}

json CorpusStats::to_json() const {
  json j;
  j["n_papers"] = n_papers;
  j["n_single_category"] = n_single_category;
  j["n_multi_category"] = n_multi_category;
  j["mean_categories"] = mean_categories ? json(*mean_categories) : json();
  j["sd_categories"] = sd_categories ? json(*sd_categories) : json();
  j["n_unique_categories"] = category_vocabulary.size();
  j["category_vocabulary"] = category_vocabulary;
  return j;
}

}  // namespace figcap::corpus
