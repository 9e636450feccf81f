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

#include "figcap/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <thread>

#include "figcap/common.h"
#include "figcap/metrics.h"

namespace figcap::pipeline {

using nlohmann::json;

namespace {

llm::LlmResponse logged_call(llm::LlmBackend& backend, const llm::LlmRequest& req,
                             AuditTrail* trail, const std::string& stage,
                             const std::string& category, int attempt) {
  AuditEntry entry;
  entry.stage = stage;
  entry.purpose = req.purpose;
  entry.category = category;
  entry.attempt = attempt;
  entry.model_id = backend.model_id();
  entry.prompt = req.prompt;
  try {
    llm::LlmResponse r = backend.complete(req);
    entry.response = r.text;
    if (trail) trail->calls.push_back(std::move(entry));
    return r;
  } catch (const std::exception& e) {
    entry.error = e.what();
    if (trail) trail->calls.push_back(std::move(entry));
    throw;
  }
}

std::vector<int> integers_in(std::string_view s) {
  std::vector<int> out;
  size_t i = 0;
  while (i < s.size()) {
    if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      long v = 0;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
        v = std::min<long>(v * 10 + (s[i] - '0'), 1000000);
        ++i;
      }
      out.push_back(static_cast<int>(v));
    } else {
      ++i;
    }
  }
  return out;
}

std::optional<std::vector<size_t>> as_permutation(const std::vector<int>& v,
                                                  size_t n) {
  if (v.size() != n) return std::nullopt;
  std::vector<bool> seen(n, false);
  std::vector<size_t> out;
  for (int x : v) {
    if (x < 1 || static_cast<size_t>(x) > n || seen[x - 1]) return std::nullopt;
    seen[x - 1] = true;
    out.push_back(static_cast<size_t>(x - 1));
  }
  return out;
}

// "1. Caption 3 - because ..." -> 3. Returns -1 when the line has no
// caption reference.
int caption_reference(std::string_view line) {
  std::string lower = to_lower_ascii(line);
  for (std::string_view key : {"caption", "cap."}) {
    size_t pos = lower.find(key);
    if (pos == std::string::npos) continue;
    size_t i = pos + key.size();
    while (i < lower.size() && (lower[i] == ' ' || lower[i] == '.' ||
                                lower[i] == '#' || lower[i] == '"')) {
      ++i;
    }
    if (i < lower.size() && std::isdigit(static_cast<unsigned char>(lower[i]))) {
      return integers_in(lower.substr(i)).front();
    }
  }
  return -1;
}

std::string effective_paragraph(const corpus::FigureContext& fc) {
  return fc.paragraph;
}

}  // namespace

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kGenerated:
      return "generated";
    case Stage::kSelected:
      return "selected";
    case Stage::kRefined:
      return "refined";
  }
  return "generated";
}

json CaptionCandidate::to_json() const {
  return {{"paper_id", paper_id},   {"category", category},
          {"text", text},           {"stage", stage_name(stage)},
          {"template_version", template_version}, {"model_id", model_id}};
}

json RerankDecision::to_json() const {
  return {{"ordered_candidate_ids", ordered_candidate_ids},
          {"justification", justification},
          {"chosen", chosen},
          {"fallback", fallback},
          {"bypassed", bypassed}};
}

LengthWindow LengthWindow::from_target(int target_len) {
  LengthWindow w;
  w.target_len = std::max(1, target_len);
  const long t = w.target_len;
  w.lower = static_cast<int>(std::max(1L, (85 * t) / 100));
  w.upper = static_cast<int>((115 * t + 99) / 100);
  return w;
}

int LengthWindow::distance(int n) const {
  if (n < lower) return lower - n;
  if (n > upper) return n - upper;
  return 0;
}

json LengthWindow::to_json() const {
  return {{"target_len", target_len}, {"lower", lower}, {"upper", upper},
          {"source", source},         {"degenerate", degenerate}};
}

size_t AuditTrail::count(std::string_view purpose) const {
  return static_cast<size_t>(std::count_if(
      calls.begin(), calls.end(),
      [&](const AuditEntry& e) { return e.purpose == purpose; }));
}

json AuditTrail::to_json(bool redact) const {
  json j;
  j["paper_id"] = paper_id;
  json arr = json::array();
  for (const AuditEntry& e : calls) {
    json c = {{"stage", e.stage},       {"purpose", e.purpose},
              {"category", e.category}, {"attempt", e.attempt},
              {"model_id", e.model_id}};
    if (redact) {
      c["prompt_chars"] = e.prompt.size();
      c["prompt_hash"] = hex64(fnv1a(e.prompt));
      c["response_chars"] = e.response.size();
      c["response_hash"] = hex64(fnv1a(e.response));
    } else {
      c["prompt"] = e.prompt;
      c["response"] = e.response;
    }
    if (!e.error.empty()) c["error"] = e.error;
    arr.push_back(std::move(c));
  }
  j["calls"] = std::move(arr);
  j["decisions"] = decisions;
  j["flags"] = flags;
  return j;
}

const CaptionCandidate* RecordResult::final_caption() const {
  if (refined) return &*refined;
  if (selected) return &*selected;
  return nullptr;
}

bool RecordResult::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

// ---------------------------------------------------------------------------
// Stage 1

GenerationResult generate_candidates(const corpus::PaperRecord& record,
                                     const optimizer::TemplateStore& store,
                                     llm::LlmBackend& generator,
                                     const PipelineOptions& options,
                                     AuditTrail* trail) {
  GenerationResult out;
  for (const std::string& category : record.categories) {
    const optimizer::PromptTemplate& t = store.resolve(category);
    llm::LlmRequest req = optimizer::generation_request(
        t, record.target, category, options.library, options.sampling);
    try {
      llm::LlmResponse r =
          logged_call(generator, req, trail, "stage1", category, 0);
      std::string text = prompts::extract_caption(r.text);
      if (text.empty()) {
        out.errors.push_back(category + ": empty caption");
        continue;
      }
      CaptionCandidate c;
      c.paper_id = record.paper_id;
      c.category = category;
      c.text = std::move(text);
      c.stage = Stage::kGenerated;
      c.template_version = t.version;
      c.model_id = r.model_id.empty() ? generator.model_id() : r.model_id;
      out.candidates.push_back(std::move(c));
    } catch (const std::exception& e) {
      out.errors.push_back(category + ": " + e.what());
    }
  }
  return out;
}

std::optional<std::vector<size_t>> parse_ranking(std::string_view text,
                                                 size_t n) {
  if (n == 0) return std::nullopt;
  std::vector<std::string> lines = split(text, '\n');

  for (const std::string& line : lines) {
    std::string lower = to_lower_ascii(line);
    size_t pos = lower.find("ranking");
    if (pos == std::string::npos) continue;
    size_t colon = lower.find(':', pos);
    if (colon == std::string::npos) continue;
    if (auto p = as_permutation(integers_in(std::string_view(line).substr(colon + 1)), n)) {
      return p;
    }
  }

  std::vector<int> refs;
  for (const std::string& line : lines) {
    int ref = caption_reference(line);
    if (ref >= 0) refs.push_back(ref);
  }
  if (auto p = as_permutation(refs, n)) return p;

  for (const std::string& line : lines) {
    if (trim(line).empty()) continue;
    return as_permutation(integers_in(line), n);
  }
  return std::nullopt;
}

std::string build_rerank_prompt(const corpus::PaperRecord& record,
                                const std::vector<CaptionCandidate>& candidates,
                                const prompts::PromptLibrary& library) {
  std::string captions;
  for (size_t i = 0; i < candidates.size(); ++i) {
    captions += std::to_string(i + 1) + ". \"" + candidates[i].text + "\"\n";
  }
  if (!captions.empty()) captions.pop_back();
  return substitute(library.rerank,
                    {{"figure_type", record.target.figure_type},
                     {"mention", record.target.mention},
                     {"paragraph", effective_paragraph(record.target)},
                     {"ocr", prompts::format_ocr(record.target.ocr)},
                     {"captions", captions},
                     {"n", std::to_string(candidates.size())}});
}

Selection select_candidate(const corpus::PaperRecord& record,
                           const std::vector<CaptionCandidate>& candidates,
                           llm::LlmBackend& reranker,
                           const PipelineOptions& options, AuditTrail* trail) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_candidate needs at least one candidate");
  }
  Selection sel;
  if (candidates.size() == 1) {
    sel.selected = candidates.front();
    sel.selected.stage = Stage::kSelected;
    sel.decision.ordered_candidate_ids = {0};
    sel.decision.chosen = 0;
    sel.decision.bypassed = true;
    sel.decision.justification = "single candidate";
    return sel;
  }

  const size_t n = candidates.size();
  const std::string base = build_rerank_prompt(record, candidates, options.library);
  std::optional<std::vector<size_t>> order;
  std::string response;
  for (int attempt = 0; attempt < 2 && !order; ++attempt) {
    llm::LlmRequest req;
    req.prompt = attempt == 0
                     ? base
                     : base + substitute(options.library.rerank_repair,
                                         {{"n", std::to_string(n)}});
    req.temperature = 0.0;
    req.max_tokens = 512;
    req.seed = options.sampling.seed;
    req.purpose = "rerank";
    req.hints = {{"n_candidates", std::to_string(n)},
                 {"attempt", std::to_string(attempt)}};
    try {
      response = logged_call(reranker, req, trail, "stage1", "", attempt).text;
    } catch (const std::exception&) {
      continue;
    }
    order = parse_ranking(response, n);
  }

  if (order) {
    sel.decision.ordered_candidate_ids = *order;
    sel.decision.justification = trim(response);
  } else {
    sel.decision.ordered_candidate_ids.resize(n);
    for (size_t i = 0; i < n; ++i) sel.decision.ordered_candidate_ids[i] = i;
    sel.decision.fallback = true;
    sel.decision.justification = "unparseable ranking; input order used";
  }
  sel.decision.chosen = sel.decision.ordered_candidate_ids.front();
  // The caption text always comes from our own candidate list, never from
  // the reranker's reply.
  sel.selected = candidates[sel.decision.chosen];
  sel.selected.stage = Stage::kSelected;
  return sel;
}

// ---------------------------------------------------------------------------
// Stage 2

LengthWindow length_window(const corpus::PaperRecord& record,
                           int selected_token_len) {
  if (record.target.caption_len_hint && *record.target.caption_len_hint > 0) {
    LengthWindow w = LengthWindow::from_target(*record.target.caption_len_hint);
    w.source = "caption_len_hint";
    return w;
  }
  long total = 0;
  long n = 0;
  for (const corpus::FigureContext& p : record.profiles) {
    if (!p.gold_caption) continue;
    total += static_cast<long>(metrics::token_count(*p.gold_caption));
    ++n;
  }
  if (n > 0 && total > 0) {
    // Round half up in integers.
    LengthWindow w =
        LengthWindow::from_target(static_cast<int>((2 * total + n) / (2 * n)));
    w.source = "profile_mean";
    return w;
  }
  LengthWindow w = LengthWindow::from_target(selected_token_len);
  w.source = "selected_length";
  w.degenerate = true;
  return w;
}

std::string build_refine_prompt(const corpus::PaperRecord& record,
                                const std::string& initial,
                                const LengthWindow& window,
                                const PipelineOptions& options) {
  std::string demos;
  size_t used = 0;
  for (const corpus::FigureContext& p : record.profiles) {
    if (used >= options.max_profile_demos) break;
    if (!p.gold_caption) continue;
    if (used == 0) demos = "\nDemos:\n";
    demos += "Mention: " + p.mention + "\n";
    demos += "Paragraph: " + p.paragraph + "\n";
    demos += "Refined caption: " + *p.gold_caption + "\n\n";
    ++used;
  }
  const std::string hint = std::to_string(window.target_len) + " tokens (" +
                           std::to_string(window.lower) + "-" +
                           std::to_string(window.upper) + ")";
  return substitute(options.library.refine,
                    {{"demos", demos},
                     {"mention", record.target.mention},
                     {"paragraph", effective_paragraph(record.target)},
                     {"initial", initial},
                     {"length_hint", hint}});
}

Refinement refine_caption(const corpus::PaperRecord& record,
                          const CaptionCandidate& selected,
                          llm::LlmBackend& backend, const LengthWindow& window,
                          const PipelineOptions& options, AuditTrail* trail) {
  if (selected.stage != Stage::kSelected) {
    throw std::invalid_argument("refine_caption expects a selected candidate");
  }
  const std::string base = build_refine_prompt(record, selected.text, window, options);
  std::optional<std::string> best;
  int best_distance = 0;
  int last_len = 0;
  Refinement out;
  for (int attempt = 0; attempt <= std::max(0, options.t_retry); ++attempt) {
    llm::LlmRequest req;
    req.prompt = attempt == 0
                     ? base
                     : base + substitute(options.library.refine_length_retry,
                                         {{"n", std::to_string(last_len)},
                                          {"lower", std::to_string(window.lower)},
                                          {"upper", std::to_string(window.upper)}});
    req.temperature = options.sampling.temperature;
    req.max_tokens = options.sampling.max_tokens;
    req.seed = options.sampling.seed;
    req.purpose = "refine";
    req.hints = {{"initial", selected.text},
                 {"target_len", std::to_string(window.target_len)},
                 {"lower", std::to_string(window.lower)},
                 {"upper", std::to_string(window.upper)},
                 {"attempt", std::to_string(attempt)}};
    ++out.attempts;
    std::string text;
    try {
      text = prompts::extract_caption(
          logged_call(backend, req, trail, "stage2", selected.category, attempt).text);
    } catch (const std::exception&) {
      continue;
    }
    if (text.empty()) continue;
    last_len = static_cast<int>(metrics::token_count(text));
    const int d = window.distance(last_len);
    if (!best || d < best_distance) {
      best = text;
      best_distance = d;
    }
    if (d == 0) break;
  }

  out.candidate = selected;
  if (!best) {
    out.unrefined = true;
    return out;
  }
  out.candidate.text = *best;
  out.candidate.stage = Stage::kRefined;
  out.candidate.model_id = backend.model_id();
  out.length_violation = best_distance > 0;
  return out;
}

// ---------------------------------------------------------------------------
// Orchestration

RecordResult run_record(const corpus::PaperRecord& input,
                        const optimizer::TemplateStore& store,
                        const Backends& backends,
                        const PipelineOptions& options) {
  RecordResult res;
  res.paper_id = input.paper_id;
  res.trail.paper_id = input.paper_id;
  auto flag = [&](std::string f) {
    res.flags.push_back(f);
    res.trail.flags.push_back(std::move(f));
  };

  try {
    if (!backends.generator) throw std::invalid_argument("no generator backend");
    llm::LlmBackend& generator = *backends.generator;
    llm::LlmBackend& reranker = backends.reranker ? *backends.reranker : generator;
    llm::LlmBackend& refiner = backends.refiner ? *backends.refiner : generator;

    corpus::PaperRecord record = input;
    if (record.target.paragraph_missing) flag("missing_paragraph");
    if (options.filtered_inference) {
      if (!backends.scorer) {
        flag("filter_unavailable");
      } else {
        try {
          filter::FilterResult f =
              filter::filter_paragraph(record.target, *backends.scorer, options.filter);
          res.trail.decisions["filter"] = f.to_json();
          record.target.paragraph = f.text;
        } catch (const std::exception& e) {
          flag("filter_failed");
          res.trail.decisions["filter_error"] = e.what();
        }
      }
    }

    GenerationResult gen =
        generate_candidates(record, store, generator, options, &res.trail);
    for (const std::string& e : gen.errors) flag("generation_failed: " + e);
    res.candidates = gen.candidates;
    if (gen.candidates.empty()) {
      res.failed = true;
      flag("record_failed");
      return res;
    }

    Selection sel = select_candidate(record, gen.candidates, reranker, options,
                                     &res.trail);
    if (sel.decision.fallback) flag("rerank_fallback");
    res.trail.decisions["rerank"] = sel.decision.to_json();
    res.selected = sel.selected;
    res.decision = sel.decision;
    if (options.stage1_only) return res;

    LengthWindow window = length_window(
        record, static_cast<int>(metrics::token_count(sel.selected.text)));
    if (window.degenerate) flag("degenerate_length_window");
    res.window = window;
    res.trail.decisions["length_window"] = window.to_json();

    Refinement ref =
        refine_caption(record, sel.selected, refiner, window, options, &res.trail);
    res.trail.decisions["refine_attempts"] = ref.attempts;
    if (ref.unrefined) {
      flag("unrefined");
    } else {
      res.refined = ref.candidate;
      if (ref.length_violation) flag("length_violation");
    }
  } catch (const std::exception& e) {
    res.failed = true;
    flag(std::string("record_failed: ") + e.what());
  }
  return res;
}

std::vector<RecordResult> run_batch(const std::vector<corpus::PaperRecord>& records,
                                    const optimizer::TemplateStore& store,
                                    const Backends& backends,
                                    const PipelineOptions& options,
                                    size_t workers) {
  std::vector<RecordResult> results(records.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<size_t>(1, records.size()));
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < records.size(); i = next++) {
      results[i] = run_record(records[i], store, backends, options);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return results;
}

}  // namespace figcap::pipeline
