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

#include "figcap/mock_backend.h"

#include <array>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "figcap/common.h"
#include "figcap/metrics.h"

namespace figcap::llm {

namespace {

constexpr std::array<std::string_view, 12> kFocusPhrases = {
    "the quantity plotted on each axis",
    "the main trend the figure shows",
    "the compared methods or conditions",
    "the dataset or experimental setting",
    "the key numerical result",
    "what each panel or curve denotes",
    "the model or architecture depicted",
    "the variable being varied",
    "the units and scales used",
    "the comparison against the baseline",
    "the structure of the diagram",
    "the takeaway a reader needs first",
};

constexpr std::array<std::string_view, 10> kRules = {
    "Name the plotted quantities explicitly.",
    "Start the caption with the figure's main subject, not 'This figure'.",
    "Do not copy sentences from the paragraph verbatim.",
    "Mention the compared methods by name.",
    "Keep the caption to a single sentence when possible.",
    "Drop background details that the figure does not show.",
    "State the dataset when the mention names one.",
    "Avoid speculative claims about causes.",
    "Use the same terminology as the mention text.",
    "Describe panels in left-to-right order.",
};

std::string hint(const LlmRequest& r, const std::string& key,
                 const std::string& fallback = "") {
  auto it = r.hints.find(key);
  return it == r.hints.end() ? fallback : it->second;
}

int hint_int(const LlmRequest& r, const std::string& key, int fallback) {
  auto it = r.hints.find(key);
  if (it == r.hints.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    return fallback;
  }
}

std::vector<std::string> words_of(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& words, size_t n) {
  std::string out;
  for (size_t i = 0; i < std::min(n, words.size()); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace

MockMode parse_mock_mode(std::string_view s) {
  std::string v = to_lower_ascii(trim(s));
  if (v == "echo" || v.empty()) return MockMode::kEcho;
  if (v == "gold") return MockMode::kGold;
  if (v == "scripted") return MockMode::kScripted;
  throw std::invalid_argument("unknown mock mode: " + std::string(s));
}

std::vector<ScriptEntry> load_script(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  const nlohmann::json& arr = j.is_object() ? j.at("entries") : j;
  std::vector<ScriptEntry> out;
  for (const auto& e : arr) {
    ScriptEntry s;
    s.purpose = e.value("purpose", "");
    s.contains = e.value("contains", "");
    s.response = e.at("response").get<std::string>();
    out.push_back(std::move(s));
  }
  return out;
}

std::string strip_category_marker(std::string_view text) {
  std::string t = trim(text);
  if (t.rfind("CAT:", 0) != 0) return t;
  size_t sp = t.find(' ');
  return sp == std::string::npos ? std::string() : trim(t.substr(sp + 1));
}

MockBackend::MockBackend(MockOptions options) : options_(std::move(options)) {}

std::string MockBackend::scripted_response(const LlmRequest& r) const {
  for (const ScriptEntry& e : options_.script) {
    if (!e.purpose.empty() && e.purpose != r.purpose) continue;
    if (!e.contains.empty() && r.prompt.find(e.contains) == std::string::npos) {
      continue;
    }
    return e.response;
  }
  throw LlmError("scripted mock has no entry for purpose '" + r.purpose + "'");
}

std::string MockBackend::echo_response(const LlmRequest& r,
                                       uint64_t seed) const {
  const uint64_t h = hash_parts(seed, {r.purpose, r.prompt});
  if (r.purpose == "generate") {
    std::vector<std::string> words = words_of(hint(r, "mention", "figure"));
    std::string body = join(words, 6 + h % 20);
    std::string cat = hint(r, "category");
    return cat.empty() ? body : "CAT:" + cat + " " + body;
  }
  if (r.purpose == "rerank") {
    int n = std::max(1, hint_int(r, "n_candidates", 1));
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 1);
    Rng rng(h);
    shuffle(order, rng);
    std::string out = "Ranking: ";
    for (size_t i = 0; i < order.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(order[i]);
    }
    return out + "\nJustification: deterministic mock ordering.";
  }
  if (r.purpose == "refine") {
    std::string initial = strip_category_marker(hint(r, "initial"));
    const int target = hint_int(r, "target_len", 0);
    const int upper = hint_int(r, "upper", target);
    std::vector<std::string> words = words_of(initial);
    if (target <= 0 || static_cast<int>(metrics::token_count(initial)) <= upper) {
      return initial;
    }
    // Trim whole words until the token count reaches the target.
    while (words.size() > 1 &&
           static_cast<int>(metrics::token_count(join(words, words.size()))) >
               target) {
      words.pop_back();
    }
    return join(words, words.size());
  }
  if (r.purpose == "propose_instruction") {
    std::string seed_instruction = hint(r, "seed_instruction",
                                        "Write a caption for the figure.");
    return seed_instruction + " Emphasize " +
           std::string(kFocusPhrases[h % kFocusPhrases.size()]) + ".";
  }
  if (r.purpose == "propose_rule") {
    return std::string(kRules[h % kRules.size()]);
  }
  return "ECHO: " + r.prompt.substr(0, 80);
}

LlmResponse MockBackend::complete(const LlmRequest& request) {
  validate_request(request);
  const uint64_t seed =
      request.seed ? static_cast<uint64_t>(*request.seed) : options_.seed;
  LlmResponse out;
  out.model_id = options_.model_id;
  switch (options_.mode) {
    case MockMode::kScripted:
      out.text = scripted_response(request);
      break;
    case MockMode::kGold: {
      size_t open = request.prompt.find("<<gold:");
      size_t close = open == std::string::npos
                         ? std::string::npos
                         : request.prompt.find(">>", open + 7);
      if (close != std::string::npos) {
        out.text = trim(request.prompt.substr(open + 7, close - open - 7));
        break;
      }
      out.text = echo_response(request, seed);
      break;
    }
    case MockMode::kEcho:
      out.text = echo_response(request, seed);
      break;
  }
  out.token_count = approx_token_count(out.text);
  return out;
}

double MockBackend::loglikelihood(const std::string& prompt,
                                  const std::string& continuation) {
  if (continuation.empty()) {
    throw std::invalid_argument("continuation must be non-empty");
  }
  metrics::TokenSeq tokens = metrics::tokenize(continuation);
  if (tokens.empty()) tokens.push_back(continuation);
  double total = 0.0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const uint64_t h = hash_parts(options_.seed,
                                  {prompt, tokens[i], std::to_string(i)});
    total -= 5.0 * unit_interval(h);
  }
  return total;
}

CallbackBackend::CallbackBackend(Fn fn, std::string model_id)
    : fn_(std::move(fn)), model_id_(std::move(model_id)) {}

LlmResponse CallbackBackend::complete(const LlmRequest& request) {
  validate_request(request);
  LlmResponse out;
  out.text = fn_(request);
  out.token_count = approx_token_count(out.text);
  out.model_id = model_id_;
  return out;
}

}  // namespace figcap::llm
