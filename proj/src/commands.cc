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

#include "figcap/commands.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>

#include "figcap/common.h"
#include "figcap/corpus.h"
#include "figcap/filter.h"
#include "figcap/http_backend.h"
#include "figcap/metrics.h"
#include "figcap/mock_backend.h"
#include "figcap/optimizer.h"
#include "figcap/prompts.h"
#include "figcap/report.h"

namespace figcap::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

prompts::PromptLibrary library_for(const RunConfig& c) {
  return c.prompt_dir.empty() ? prompts::PromptLibrary::defaults()
                              : prompts::PromptLibrary::load(c.prompt_dir);
}

filter::FilterOptions filter_options(const RunConfig& c) {
  filter::FilterOptions o;
  o.lambda = c.lambda;
  o.per_token = c.per_token;
  o.workers = std::max<size_t>(1, c.filter_workers);
  return o;
}

optimizer::SamplingParams sampling(const RunConfig& c) {
  optimizer::SamplingParams s;
  s.temperature = c.backend.temperature;
  s.max_tokens = c.backend.max_tokens;
  s.seed = static_cast<int64_t>(c.seed);
  return s;
}

corpus::LoadReport load_split(const RunConfig& c, corpus::Split split,
                              std::ostream& out) {
  const std::string path = c.corpus_path(split);
  if (path.empty()) {
    throw std::invalid_argument("no corpus path configured for split " +
                                std::string(corpus::split_name(split)));
  }
  corpus::LoadReport rep = corpus::load_corpus(path, split);
  for (const corpus::LoadError& e : rep.errors) {
    out << "warning: " << path << ":" << e.line << ": " << e.reason << "\n";
  }
  return rep;
}

void write_config(const RunConfig& c, const std::string& dir) {
  write_file(path_in(dir, "config.ini"), c.dump());
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// paper_id -> caption from a JSONL file. Accepts {"paper_id","caption"}
// lines and corpus records (target gold caption).
std::map<std::string, std::string> read_captions(const std::string& path,
                                                 std::ostream& out,
                                                 bool reference) {
  std::map<std::string, std::string> m;
  const std::vector<std::string> lines = split(read_file(path), '\n');
  for (size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      json j = json::parse(lines[i]);
      std::string id = j.at("paper_id").get<std::string>();
      std::optional<std::string> text;
      if (j.contains("caption") && j["caption"].is_string()) {
        text = j["caption"].get<std::string>();
      } else if (reference && j.contains("target") &&
                 j["target"].contains("gold_caption") &&
                 j["target"]["gold_caption"].is_string()) {
        text = j["target"]["gold_caption"].get<std::string>();
      } else if (reference && j.contains("gold_caption") &&
                 j["gold_caption"].is_string()) {
        text = j["gold_caption"].get<std::string>();
      }
      if (!text) {
        out << "warning: " << path << ":" << i + 1 << ": no caption\n";
        continue;
      }
      if (!m.emplace(id, *text).second) {
        out << "warning: " << path << ":" << i + 1 << ": duplicate paper_id "
            << id << " ignored\n";
      }
    } catch (const std::exception& e) {
      out << "warning: " << path << ":" << i + 1 << ": " << e.what() << "\n";
    }
  }
  return m;
}

report::ConditionResult condition(const std::string& name,
                                  const std::vector<metrics::MetricBundle>& b) {
  return {name, metrics::aggregate(b), b.size()};
}

}  // namespace

BackendSet make_backends(const RunConfig& c) {
  BackendSet set;
  const BackendConfig& b = c.backend;
  if (b.kind == "mock") {
    llm::MockOptions o;
    o.mode = llm::parse_mock_mode(b.mock_mode);
    o.seed = c.seed;
    if (!b.mock_script.empty()) o.script = llm::load_script(b.mock_script);
    auto mock = std::make_shared<llm::MockBackend>(o);
    set.owned.push_back(mock);
    set.scorer = mock;
    set.view.generator = mock.get();
    set.view.scorer = mock.get();
    return set;
  }

  if (b.model.empty()) {
    throw std::invalid_argument("backend.model is required for backend " + b.kind);
  }
  llm::HttpBackendConfig hc;
  hc.style = b.kind == "gemini" ? llm::ApiStyle::kGemini : llm::ApiStyle::kOpenAI;
  hc.base_url = b.base_url;
  if (const char* url = std::getenv(kBaseUrlEnv); url && *url) hc.base_url = url;
  if (const char* key = std::getenv(kApiKeyEnv)) hc.api_key = key;
  hc.timeout = std::chrono::milliseconds(b.timeout_ms);
  hc.retry.max_retries = b.max_retries;
  hc.supports_logprobs = b.supports_logprobs;
  auto transport = llm::make_httplib_transport(hc.base_url);
  auto clock = std::make_shared<llm::SteadyClock>();
  std::shared_ptr<llm::RateLimiter> limiter;
  if (b.rate_limit > 0) {
    limiter = std::make_shared<llm::RateLimiter>(
        b.rate_limit, std::chrono::milliseconds(b.rate_window_ms), clock);
  }
  auto make = [&](const std::string& model) {
    llm::HttpBackendConfig mc = hc;
    mc.model_id = model.empty() ? b.model : model;
    auto backend = std::make_shared<llm::HttpBackend>(mc, transport, limiter, clock);
    set.owned.push_back(backend);
    return backend.get();
  };
  set.view.generator = make(b.model);
  set.view.reranker = b.rerank_model.empty() ? set.view.generator : make(b.rerank_model);
  set.view.refiner = b.refine_model.empty() ? set.view.generator : make(b.refine_model);
  if (b.supports_logprobs) {
    llm::HttpBackendConfig sc = hc;
    sc.model_id = b.scorer_model.empty() ? b.model : b.scorer_model;
    set.scorer = std::make_shared<llm::HttpScorer>(sc, transport, limiter, clock);
    set.view.scorer = set.scorer.get();
  }
  return set;
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& corpus_path,
                 std::optional<corpus::Split> split, std::ostream& out) {
  corpus::LoadReport rep = corpus::load_corpus(corpus_path, split);
  json j = rep.summary_json();
  j["stats"] = corpus::corpus_stats(rep.records).to_json();
  out << j.dump(2) << "\n";
  return rep.errors.empty() ? kExitOk : kExitValidation;
}

int cmd_filter_audit(const RunConfig& c, std::ostream& out) {
  const corpus::Split split = corpus::parse_split(c.split);
  corpus::LoadReport rep = load_split(c, split, out);
  BackendSet backends = make_backends(c);
  if (!backends.scorer) {
    throw llm::CapabilityError(
        "filter-audit needs a backend with prompt log-probabilities");
  }
  fs::create_directories(c.out_dir);
  write_config(c, c.out_dir);
  const filter::FilterOptions opts = filter_options(c);
  std::string lines;
  size_t chunks = 0;
  size_t kept = 0;
  size_t failed = 0;
  for (const corpus::PaperRecord& r : rep.records) {
    json j = {{"paper_id", r.paper_id}, {"lambda", c.lambda}};
    try {
      filter::FilterResult f = filter::filter_paragraph(r.target, *backends.scorer, opts);
      j["result"] = f.to_json();
      chunks += f.scores.size();
      for (const auto& s : f.scores) kept += s.retained ? 1 : 0;
    } catch (const std::exception& e) {
      j["error"] = e.what();
      ++failed;
    }
    lines += j.dump() + "\n";
  }
  write_file(path_in(c.out_dir, "filter_audit.jsonl"), lines);
  out << "records " << rep.records.size() << ", chunks " << chunks
      << ", retained " << kept << ", failed " << failed << "\n";
  return kExitOk;
}

int cmd_optimize(const RunConfig& c, std::ostream& out) {
  corpus::LoadReport rep = load_split(c, corpus::Split::kTrain, out);
  BackendSet backends = make_backends(c);
  if (c.filtered_inference && !backends.scorer) {
    throw llm::CapabilityError(
        "filtered optimization needs a backend with prompt log-probabilities");
  }
  fs::create_directories(c.out_dir);
  write_config(c, c.out_dir);

  std::map<std::string, std::vector<corpus::PaperRecord>> by_category;
  for (const corpus::PaperRecord& r : rep.records) {
    for (const std::string& cat : r.categories) by_category[cat].push_back(r);
  }

  optimizer::OptBudget budget = c.budget;
  budget.seed = c.seed;
  const prompts::PromptLibrary library = library_for(c);
  const filter::FilterOptions fopts = filter_options(c);

  json summary = {{"budget", budget.to_json()}, {"categories", json::array()}};
  size_t partial = 0;
  out << "category\tn_train\tscore\tstatus\n";
  for (const auto& [category, records] : by_category) {
    optimizer::OptimizeResult res = optimizer::optimize_category(
        category, records, *backends.view.generator, budget, library,
        c.filtered_inference ? backends.scorer.get() : nullptr, fopts, sampling(c));
    optimizer::save_template(c.template_dir, res.tmpl);
    const std::string status = res.tmpl.partial    ? "partial"
                               : res.tmpl.fallback ? "fallback"
                                                   : "optimized";
    if (res.tmpl.partial) ++partial;
    for (const std::string& w : res.warnings) out << "warning: " << w << "\n";
    out << category << "\t" << res.n_train << "\t"
        << (res.tmpl.score ? fixed4(*res.tmpl.score) : "-") << "\t" << status << "\n";
    summary["categories"].push_back({{"category", category},
                                     {"n_train", res.n_train},
                                     {"n_holdout", res.n_holdout},
                                     {"score", res.tmpl.score ? json(*res.tmpl.score) : json()},
                                     {"status", status},
                                     {"warnings", res.warnings}});
  }
  write_file(path_in(c.out_dir, "optimize_summary.json"), summary.dump(2) + "\n");
  if (!by_category.empty() && partial == by_category.size()) return kExitThreshold;
  return kExitOk;
}

int cmd_run(const RunConfig& c, std::ostream& out) {
  const corpus::Split split = corpus::parse_split(c.split);
  corpus::LoadReport rep = load_split(c, split, out);
  BackendSet backends = make_backends(c);
  if (c.filtered_inference && !backends.scorer) {
    throw llm::CapabilityError(
        "filtered inference needs a backend with prompt log-probabilities");
  }
  const optimizer::TemplateStore store = optimizer::TemplateStore::load(c.template_dir);

  pipeline::PipelineOptions opts;
  opts.stage1_only = c.stage1_only;
  opts.filtered_inference = c.filtered_inference;
  opts.filter = filter_options(c);
  opts.t_retry = c.t_retry;
  opts.max_profile_demos = c.max_profile_demos;
  opts.sampling = sampling(c);
  opts.library = library_for(c);

  fs::create_directories(path_in(c.out_dir, "audit"));
  write_config(c, c.out_dir);

  std::vector<pipeline::RecordResult> results = pipeline::run_batch(
      rep.records, store, backends.view, opts, c.effective_workers());

  std::string captions;
  std::set<std::string> used_names;
  size_t failed = 0;
  std::map<std::string, size_t> flag_counts;
  for (const pipeline::RecordResult& r : results) {
    const pipeline::CaptionCandidate* fin = r.final_caption();
    json line = {{"paper_id", r.paper_id},
                 {"caption", fin ? json(fin->text) : json()},
                 {"stage", fin ? json(pipeline::stage_name(fin->stage)) : json()},
                 {"flags", r.flags}};
    captions += line.dump() + "\n";
    if (r.failed) ++failed;
    for (const std::string& f : r.flags) ++flag_counts[figcap::split(f, ':').front()];

    std::string name = safe_name(r.paper_id);
    for (int k = 2; !used_names.insert(name).second; ++k) {
      name = safe_name(r.paper_id) + "-" + std::to_string(k);
    }
    json audit = r.trail.to_json(c.redact_audit);
    audit["candidates"] = json::array();
    for (const auto& cand : r.candidates) audit["candidates"].push_back(cand.to_json());
    if (r.selected) audit["selected"] = r.selected->to_json();
    if (r.refined) audit["refined"] = r.refined->to_json();
    write_file(path_in(path_in(c.out_dir, "audit"), name + ".json"), audit.dump(2) + "\n");
  }
  write_file(path_in(c.out_dir, "captions.jsonl"), captions);

  // Evaluation, only when every record has a gold caption.
  const bool have_gold =
      !rep.records.empty() &&
      std::all_of(rep.records.begin(), rep.records.end(),
                  [](const corpus::PaperRecord& r) { return r.target.gold_caption.has_value(); });
  bool reported = false;
  if (have_gold) {
    std::vector<metrics::MetricBundle> all, before, after;
    for (size_t i = 0; i < results.size(); ++i) {
      const std::string& gold = *rep.records[i].target.gold_caption;
      const pipeline::RecordResult& r = results[i];
      if (r.failed || !r.selected) continue;
      for (const auto& cand : r.candidates) all.push_back(metrics::evaluate_pair(cand.text, gold));
      before.push_back(metrics::evaluate_pair(r.selected->text, gold));
      if (!c.stage1_only) after.push_back(metrics::evaluate_pair(r.final_caption()->text, gold));
    }
    if (!before.empty()) {
      std::vector<report::ConditionResult> conds = {condition(kAllGenerated, all),
                                                    condition(kSelectedBefore, before)};
      if (!after.empty()) conds.push_back(condition(kSelectedAfter, after));
      report::DeltaTable t = report::build_table(conds, c.baseline);
      report::write_reports(c.out_dir, t);
      out << report::render(t, report::Format::kMarkdown);
      reported = true;
    }
  }

  json summary = {{"records", results.size()},
                  {"failed", failed},
                  {"load_errors", rep.errors.size()},
                  {"flags", flag_counts},
                  {"evaluated", reported}};
  write_file(path_in(c.out_dir, "run_summary.json"), summary.dump(2) + "\n");
  out << "records " << results.size() << ", failed " << failed << "\n";

  const double frac = results.empty() ? 0.0 : static_cast<double>(failed) / results.size();
  return frac > c.failure_threshold ? kExitThreshold : kExitOk;
}

CandidateSpec CandidateSpec::parse(const std::string& arg) {
  const size_t eq = arg.find('=');
  if (eq != std::string::npos && eq > 0) return {arg.substr(0, eq), arg.substr(eq + 1)};
  return {fs::path(arg).stem().string(), arg};
}

int cmd_eval(const std::vector<CandidateSpec>& candidates,
             const std::string& references, const std::string& baseline,
             const std::string& out_dir, std::ostream& out) {
  const std::map<std::string, std::string> refs = read_captions(references, out, true);
  std::vector<report::ConditionResult> conds;
  for (const CandidateSpec& spec : candidates) {
    const std::map<std::string, std::string> cands = read_captions(spec.path, out, false);
    std::vector<metrics::MetricBundle> bundles;
    std::vector<std::string> unmatched;
    for (const auto& [id, text] : cands) {
      auto it = refs.find(id);
      if (it == refs.end()) {
        unmatched.push_back(id);
        continue;
      }
      bundles.push_back(metrics::evaluate_pair(text, it->second));
    }
    if (!unmatched.empty()) {
      out << "warning: " << spec.name << ": " << unmatched.size()
          << " paper_id(s) without a reference excluded:";
      for (const std::string& id : unmatched) out << " " << id;
      out << "\n";
    }
    if (bundles.empty()) {
      out << "warning: " << spec.name << ": nothing to evaluate\n";
      continue;
    }
    conds.push_back(condition(spec.name, bundles));
  }

  fs::create_directories(out_dir);
  report::DeltaTable t;
  if (!conds.empty()) {
    const std::string base = baseline.empty() ? candidates.front().name : baseline;
    t = report::build_table(conds, base);
  }
  report::write_reports(out_dir, t);
  out << report::render(t, report::Format::kMarkdown);
  return conds.empty() ? kExitValidation : kExitOk;
}

int cmd_report(const std::string& report_json, const std::string& baseline,
               const std::string& format, std::ostream& out) {
  json j = json::parse(read_file(report_json));
  std::vector<report::ConditionResult> conds;
  for (const json& row : j.at("rows")) {
    std::vector<double> v = row.at("values").get<std::vector<double>>();
    if (v.size() != metrics::kMetricNames.size()) {
      throw std::invalid_argument("row '" + row.at("condition").get<std::string>() +
                                  "' does not have 13 values");
    }
    report::ConditionResult cr;
    cr.name = row.at("condition").get<std::string>();
    cr.bundle = metrics::MetricBundle::from_values(std::span<const double, 13>(v.data(), 13));
    cr.n_instances = row.value("n", size_t{1});
    conds.push_back(std::move(cr));
  }
  const std::string base = baseline.empty() ? j.value("baseline", std::string()) : baseline;
  report::DeltaTable t = conds.empty() ? report::DeltaTable{base, {}}
                                       : report::build_table(conds, base);
  out << report::render(t, report::parse_format(format));
  return kExitOk;
}

}  // namespace figcap::cli
