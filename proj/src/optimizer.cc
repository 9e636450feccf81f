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

#include "figcap/optimizer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "figcap/metrics.h"

namespace figcap::optimizer {

using nlohmann::json;

namespace {

constexpr double kTieEps = 1e-12;

double caption_precision(const std::string& caption, const std::string& gold) {
  return metrics::rouge_l(metrics::tokenize(caption), metrics::tokenize(gold))
      .precision;
}

std::string normalize_for_dedup(const std::string& s) {
  return to_lower_ascii(collapse_whitespace(s));
}

std::string first_line(const std::string& s) {
  std::string t = trim(s);
  size_t nl = t.find('\n');
  return nl == std::string::npos ? t : trim(t.substr(0, nl));
}

std::string strip_wrapping_quotes(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

std::vector<TrainExample> subset(const std::vector<TrainExample>& all,
                                 const std::vector<size_t>& idx) {
  std::vector<TrainExample> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(all[i]);
  return out;
}

std::string config_hash(const OptBudget& budget, const std::string& category,
                        const prompts::PromptLibrary& library,
                        bool filtered, double lambda) {
  json j = budget.to_json();
  j["category"] = category;
  j["filtered"] = filtered;
  j["lambda"] = lambda;
  j["generate_prompt"] = library.generate;
  j["rule_prompt"] = library.propose_rule;
  j["instruction_prompt"] = library.propose_instruction;
  return hex64(fnv1a(j.dump()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Templates

json PromptTemplate::to_json() const {
  json j;
  j["category"] = category;
  j["instruction"] = instruction;
  json d = json::array();
  for (const Demo& demo : demos) {
    d.push_back({{"context", demo.context},
                 {"caption", demo.caption},
                 {"source_paper_id", demo.source_paper_id}});
  }
  j["demos"] = std::move(d);
  json r = json::array();
  for (const FeedbackRule& rule : rules) {
    r.push_back({{"rule_text", rule.rule_text},
                 {"source_example", rule.source_example},
                 {"delta", rule.delta}});
  }
  j["rules"] = std::move(r);
  j["version"] = version;
  j["score"] = score ? json(*score) : json();
  j["fallback"] = fallback;
  j["partial"] = partial;
  j["config_hash"] = config_hash;
  return j;
}

PromptTemplate PromptTemplate::from_json(const json& j) {
  PromptTemplate t;
  t.category = j.at("category").get<std::string>();
  t.instruction = j.at("instruction").get<std::string>();
  for (const json& d : j.value("demos", json::array())) {
    t.demos.push_back({d.at("context").get<std::string>(),
                       d.at("caption").get<std::string>(),
                       d.value("source_paper_id", "")});
  }
  for (const json& r : j.value("rules", json::array())) {
    t.rules.push_back({r.at("rule_text").get<std::string>(),
                       r.value("source_example", ""), r.value("delta", 0.0)});
  }
  t.version = j.value("version", 0);
  if (j.contains("score") && !j["score"].is_null()) {
    t.score = j["score"].get<double>();
  }
  t.fallback = j.value("fallback", false);
  t.partial = j.value("partial", false);
  t.config_hash = j.value("config_hash", "");
  return t;
}

const std::string& default_instruction() {
  static const std::string kInstruction =
      "Write a concise, accurate caption for the scientific figure described "
      "below, using only information supported by the mention, paragraph and "
      "OCR text.";
  return kInstruction;
}

PromptTemplate general_template() {
  PromptTemplate t;
  t.category = kGeneralCategory;
  t.instruction = default_instruction();
  return t;
}

void TemplateStore::put(PromptTemplate t) {
  std::string key = t.category;
  templates_[key] = std::move(t);
}

bool TemplateStore::contains(const std::string& category) const {
  return templates_.count(category) > 0;
}

const PromptTemplate& TemplateStore::resolve(const std::string& category) const {
  auto it = templates_.find(category);
  return it == templates_.end() ? general_ : it->second;
}

TemplateStore TemplateStore::load(const std::string& dir) {
  TemplateStore store;
  if (!std::filesystem::is_directory(dir)) return store;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    PromptTemplate t = PromptTemplate::from_json(json::parse(read_file(f.string())));
    if (t.category == kGeneralCategory) {
      store.set_general(t);
    } else {
      store.put(std::move(t));
    }
  }
  return store;
}

std::string template_file_name(const std::string& category) {
  std::string name = category;
  for (char& c : name) {
    if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '_';
  }
  return name + ".json";
}

void save_template(const std::string& dir, const PromptTemplate& t) {
  write_file((std::filesystem::path(dir) / template_file_name(t.category)).string(),
             t.to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Prompt assembly

std::vector<TrainExample> make_examples(
    const std::vector<corpus::PaperRecord>& records,
    llm::LikelihoodScorer* filter_scorer,
    const filter::FilterOptions& filter_options) {
  std::vector<TrainExample> out;
  for (const corpus::PaperRecord& r : records) {
    if (!r.target.gold_caption || trim(*r.target.gold_caption).empty()) continue;
    TrainExample ex{r.paper_id, r.target, *r.target.gold_caption};
    if (filter_scorer) {
      ex.context.paragraph =
          filter::filter_paragraph(r.target, *filter_scorer, filter_options).text;
    }
    // The gold caption stays in `gold` only.
    ex.context.gold_caption.reset();
    out.push_back(std::move(ex));
  }
  return out;
}

std::string build_generation_prompt(const PromptTemplate& t,
                                    const corpus::FigureContext& target,
                                    const prompts::PromptLibrary& library,
                                    bool with_reasoning) {
  std::string rules;
  if (!t.rules.empty()) {
    rules = "\nRules:\n";
    for (const FeedbackRule& r : t.rules) rules += "- " + r.rule_text + "\n";
  }
  std::string demos;
  if (!t.demos.empty()) {
    demos = "\nExamples:\n";
    for (const Demo& d : t.demos) {
      demos += "\n" + d.context + "\nCaption: " + d.caption + "\n";
    }
  }
  std::string prompt =
      substitute(library.generate, {{"instruction", t.instruction},
                                    {"rules", rules},
                                    {"demos", demos},
                                    {"figure_type", target.figure_type},
                                    {"mention", target.mention},
                                    {"paragraph", target.paragraph},
                                    {"ocr", prompts::format_ocr(target.ocr)}});
  if (with_reasoning) prompt += library.reasoning_suffix;
  return prompt;
}

llm::LlmRequest generation_request(const PromptTemplate& t,
                                   const corpus::FigureContext& target,
                                   const std::string& category,
                                   const prompts::PromptLibrary& library,
                                   const SamplingParams& sampling,
                                   bool with_reasoning) {
  llm::LlmRequest req;
  req.prompt = build_generation_prompt(t, target, library, with_reasoning);
  req.temperature = sampling.temperature;
  req.max_tokens = sampling.max_tokens;
  req.seed = sampling.seed;
  req.purpose = "generate";
  req.hints = {{"category", category},
               {"mention", target.mention},
               {"n_rules", std::to_string(t.rules.size())},
               {"n_demos", std::to_string(t.demos.size())}};
  return req;
}

double evaluate_template(const PromptTemplate& t,
                         const std::vector<TrainExample>& examples,
                         const std::string& category, llm::LlmBackend& backend,
                         const prompts::PromptLibrary& library,
                         const SamplingParams& sampling) {
  if (examples.empty()) return 0.0;
  double sum = 0.0;
  for (const TrainExample& ex : examples) {
    llm::LlmResponse r = backend.complete(
        generation_request(t, ex.context, category, library, sampling));
    sum += caption_precision(prompts::extract_caption(r.text), ex.gold);
  }
  return sum / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------
// Bootstrapping

DemoPool bootstrap_demos(const std::vector<TrainExample>& train,
                         llm::LlmBackend& generator,
                         const PromptTemplate& current,
                         const BootstrapOptions& options, Rng& rng,
                         const prompts::PromptLibrary& library,
                         const SamplingParams& sampling) {
  if (train.empty()) throw std::invalid_argument("bootstrap needs training data");
  if (options.k == 0) throw std::invalid_argument("demo set size must be >= 1");
  DemoPool pool;
  const size_t n = options.sample_size == 0
                       ? train.size()
                       : std::min(options.sample_size, train.size());
  std::vector<Demo> kept;
  for (size_t idx : sample_indices(train.size(), n, rng)) {
    const TrainExample& ex = train[idx];
    ++pool.attempted;
    std::string caption;
    try {
      llm::LlmResponse r = generator.complete(generation_request(
          current, ex.context, current.category, library, sampling));
      caption = prompts::extract_caption(r.text);
    } catch (const std::exception& e) {
      ++pool.failures;
      pool.warnings.push_back("generation failed for " + ex.paper_id + ": " +
                              e.what());
      continue;
    }
    if (caption.empty()) {
      ++pool.failures;
      pool.warnings.push_back("empty generation for " + ex.paper_id);
      continue;
    }
    if (caption_precision(caption, ex.gold) > options.keep_threshold) {
      kept.push_back({prompts::context_summary(ex.context), caption, ex.paper_id});
    }
  }
  pool.kept = kept.size();
  for (size_t i = 0; i < kept.size(); i += options.k) {
    const size_t end = std::min(kept.size(), i + options.k);
    pool.sets.emplace_back(kept.begin() + i, kept.begin() + end);
  }
  if (kept.empty()) {
    pool.warnings.push_back("no bootstrapped demo passed the keep threshold");
  } else if (kept.size() < options.k) {
    pool.warnings.push_back("only " + std::to_string(kept.size()) +
                            " demos passed the keep threshold; demo sets are "
                            "smaller than k");
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Instruction proposal

std::vector<std::string> propose_instructions(
    const std::string& seed_instruction, const std::string& context_summary,
    const std::string& category, llm::LlmBackend& proposer,
    const ProposalOptions& options, const prompts::PromptLibrary& library) {
  if (options.m == 0) throw std::invalid_argument("m must be >= 1");
  std::vector<std::string> out = {seed_instruction};
  std::vector<std::string> seen = {normalize_for_dedup(seed_instruction)};
  const size_t max_attempts = (options.m - 1) + static_cast<size_t>(std::max(0, options.retry_cap));
  for (size_t attempt = 0; out.size() < options.m && attempt < max_attempts;
       ++attempt) {
    std::string existing;
    for (size_t i = 0; i < out.size(); ++i) {
      existing += std::to_string(i + 1) + ". " + out[i] + "\n";
    }
    llm::LlmRequest req;
    req.prompt = substitute(library.propose_instruction,
                            {{"category", category},
                             {"seed_instruction", seed_instruction},
                             {"context_summary", context_summary},
                             {"existing", existing}});
    req.temperature = options.temperature;
    req.max_tokens = 200;
    req.seed = static_cast<int64_t>(options.seed + attempt);
    req.purpose = "propose_instruction";
    req.hints = {{"seed_instruction", seed_instruction},
                 {"attempt", std::to_string(attempt)}};
    std::string text;
    try {
      text = strip_wrapping_quotes(trim(proposer.complete(req).text));
    } catch (const std::exception&) {
      continue;
    }
    if (text.empty()) continue;
    std::string key = normalize_for_dedup(text);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(std::move(key));
    out.push_back(std::move(text));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Surrogate search

std::optional<double> CandidateConfig::mean() const {
  if (observed_scores.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& [mb, score] : observed_scores) s += score;
  return s / static_cast<double>(observed_scores.size());
}

SearchResult surrogate_search(size_t n_instructions, size_t n_demo_sets,
                              const EvalFn& eval_fn,
                              const SearchOptions& options, Rng& rng) {
  const size_t n_cells = n_instructions * n_demo_sets;
  if (n_cells == 0) throw std::invalid_argument("empty candidate grid");
  SearchResult res;
  res.cells.resize(n_cells);
  for (size_t i = 0; i < n_cells; ++i) {
    res.cells[i].instruction_id = i / n_demo_sets;
    res.cells[i].demo_set_id = i % n_demo_sets;
  }

  const double inf = std::numeric_limits<double>::infinity();
  int free_failures = 0;
  size_t minibatch_id = 0;
  while (res.trials < options.budget) {
    double best_ucb = -inf;
    std::vector<size_t> ties;
    for (size_t i = 0; i < n_cells; ++i) {
      const auto& obs = res.cells[i].observed_scores;
      double ucb = inf;
      if (!obs.empty()) {
        ucb = *res.cells[i].mean() +
              options.ucb_c * options.noise_sd /
                  std::sqrt(static_cast<double>(obs.size()));
      }
      if (ucb > best_ucb + kTieEps || (ucb == inf && best_ucb != inf)) {
        best_ucb = ucb;
        ties.assign(1, i);
      } else if (ucb == best_ucb || std::abs(ucb - best_ucb) <= kTieEps) {
        ties.push_back(i);
      }
    }
    const size_t pick = ties[uniform_index(rng, ties.size())];
    const size_t mb = minibatch_id++;
    double score = 0.0;
    try {
      score = eval_fn(res.cells[pick], mb);
      if (!(score >= 0.0 && score <= 1.0)) {
        throw std::out_of_range("minibatch score outside [0, 1]");
      }
    } catch (const std::exception&) {
      ++res.failures;
      if (free_failures < options.retry_cap) {
        ++free_failures;
      } else {
        ++res.trials;
      }
      continue;
    }
    res.cells[pick].observed_scores.emplace_back(mb, score);
    res.trace.push_back(pick);
    ++res.trials;
  }

  size_t best = 0;
  std::optional<double> best_mean;
  for (size_t i = 0; i < n_cells; ++i) {
    std::optional<double> m = res.cells[i].mean();
    if (!m) continue;
    if (!best_mean || *m > *best_mean + kTieEps) {
      best = i;
      best_mean = m;
    }
  }
  res.best = res.cells[best];
  res.best_mean = best_mean;
  return res;
}

// ---------------------------------------------------------------------------
// Feedback rules

SimbaResult simba_refine(const PromptTemplate& tmpl,
                         const std::vector<TrainExample>& train,
                         llm::LlmBackend& generator,
                         const SimbaOptions& options, Rng& rng,
                         const prompts::PromptLibrary& library,
                         const SamplingParams& sampling) {
  SimbaResult res;
  res.tmpl = tmpl;
  if (options.iterations == 0 || train.empty()) return res;

  const std::string& category = tmpl.category;
  // Acceptance is always judged on one fixed minibatch, so the recorded mean
  // can only go up.
  const std::vector<TrainExample> accept_set =
      subset(train, sample_indices(train.size(), options.minibatch, rng));
  double current_mean =
      evaluate_template(tmpl, accept_set, category, generator, library, sampling);
  res.input_mean = current_mean;

  PromptTemplate current = tmpl;
  for (size_t it = 0; it < options.iterations; ++it) {
    SimbaStep step;
    step.iteration = it;
    step.base_mean = current_mean;
    if (current.rules.size() >= options.r_max) {
      step.note = "rule cap reached";
      res.steps.push_back(std::move(step));
      break;
    }
    const std::vector<TrainExample> mining =
        subset(train, sample_indices(train.size(), options.minibatch, rng));

    std::string rule;
    std::string source;
    try {
      double worst = std::numeric_limits<double>::infinity();
      const TrainExample* worst_ex = nullptr;
      std::string worst_caption;
      for (const TrainExample& ex : mining) {
        llm::LlmResponse r = generator.complete(generation_request(
            current, ex.context, category, library, sampling,
            /*with_reasoning=*/true));
        // Reasoning traces never leave this loop.
        std::string caption = prompts::extract_caption(r.text);
        double score = caption_precision(caption, ex.gold);
        if (score < worst) {
          worst = score;
          worst_ex = &ex;
          worst_caption = caption;
        }
      }
      std::string rules_text;
      for (const FeedbackRule& r : current.rules) rules_text += "- " + r.rule_text + "\n";
      if (rules_text.empty()) rules_text = "(none)\n";
      llm::LlmRequest req;
      req.prompt = substitute(
          library.propose_rule,
          {{"instruction", current.instruction},
           {"rules", rules_text},
           {"context", prompts::context_summary(worst_ex->context)},
           {"generated", worst_caption},
           {"gold", worst_ex->gold},
           {"score", std::to_string(worst)}});
      req.temperature = sampling.temperature;
      req.max_tokens = 120;
      req.seed = sampling.seed;
      req.purpose = "propose_rule";
      req.hints = {{"category", category},
                   {"n_rules", std::to_string(current.rules.size())},
                   {"iteration", std::to_string(it)}};
      rule = strip_wrapping_quotes(first_line(generator.complete(req).text));
      source = worst_ex->paper_id;
    } catch (const std::exception& e) {
      step.note = std::string("skipped: ") + e.what();
      res.steps.push_back(std::move(step));
      continue;
    }
    step.rule = rule;
    if (rule.empty() || rule.size() > options.max_rule_chars) {
      step.note = "malformed rule rejected";
      res.steps.push_back(std::move(step));
      continue;
    }

    PromptTemplate candidate = current;
    candidate.rules.push_back({rule, source, 0.0});
    double new_mean = 0.0;
    try {
      new_mean = evaluate_template(candidate, accept_set, category, generator,
                                   library, sampling);
    } catch (const std::exception& e) {
      step.note = std::string("skipped: ") + e.what();
      res.steps.push_back(std::move(step));
      continue;
    }
    step.new_mean = new_mean;
    if (new_mean >= current_mean) {
      candidate.rules.back().delta = new_mean - current_mean;
      ++candidate.version;
      current = std::move(candidate);
      current_mean = new_mean;
      step.accepted = true;
    } else {
      step.note = "score decreased";
    }
    res.steps.push_back(std::move(step));
  }
  res.tmpl = std::move(current);
  res.output_mean = current_mean;
  return res;
}

// ---------------------------------------------------------------------------
// Composition

json OptBudget::to_json() const {
  return {{"k_demos", k_demos},
          {"m_instructions", m_instructions},
          {"minibatch", minibatch},
          {"trials", trials},
          {"simba_iterations", simba_iterations},
          {"r_max", r_max},
          {"keep_threshold", keep_threshold},
          {"n_min", n_min},
          {"bootstrap_records", bootstrap_records},
          {"retry_cap", retry_cap},
          {"ucb_c", ucb_c},
          {"noise_sd", noise_sd},
          {"seed", seed}};
}

OptimizeResult optimize_category(const std::string& category,
                                 const std::vector<corpus::PaperRecord>& train,
                                 llm::LlmBackend& backend,
                                 const OptBudget& budget,
                                 const prompts::PromptLibrary& library,
                                 llm::LikelihoodScorer* filter_scorer,
                                 const filter::FilterOptions& filter_options,
                                 const SamplingParams& sampling) {
  OptimizeResult res;
  const std::string hash = config_hash(budget, category, library,
                                       filter_scorer != nullptr,
                                       filter_options.lambda);
  Rng rng(hash_parts(budget.seed, {category}));

  PromptTemplate seed_template = general_template();
  seed_template.category = category;
  seed_template.config_hash = hash;

  std::vector<TrainExample> examples;
  try {
    examples = make_examples(train, filter_scorer, filter_options);
  } catch (const std::exception& e) {
    res.warnings.push_back(std::string("filtering failed: ") + e.what());
    seed_template.partial = true;
    res.tmpl = seed_template;
    return res;
  }
  res.n_train = examples.size();
  if (examples.size() < budget.n_min) {
    res.tmpl = seed_template;
    res.tmpl.fallback = true;
    res.warnings.push_back("category " + category + " has " +
                           std::to_string(examples.size()) +
                           " training records (< n_min " +
                           std::to_string(budget.n_min) +
                           "); using the general template");
    return res;
  }

  res.n_holdout = std::max<size_t>(1, examples.size() / 10);
  const std::vector<TrainExample> holdout(examples.end() - static_cast<long>(res.n_holdout),
                                          examples.end());
  const std::vector<TrainExample> opt(examples.begin(),
                                      examples.end() - static_cast<long>(res.n_holdout));

  PromptTemplate best = seed_template;
  try {
    DemoPool pool = bootstrap_demos(
        opt, backend, seed_template,
        {budget.k_demos, budget.keep_threshold, budget.bootstrap_records}, rng,
        library, sampling);
    for (std::string& w : pool.warnings) res.warnings.push_back(std::move(w));
    std::vector<std::vector<Demo>> demo_sets = {{}};
    for (auto& s : pool.sets) demo_sets.push_back(std::move(s));

    std::string summary;
    for (size_t i = 0; i < std::min<size_t>(3, opt.size()); ++i) {
      summary += prompts::context_summary(opt[i].context) + "\n\n";
    }
    std::vector<std::string> instructions = propose_instructions(
        seed_template.instruction, summary, category, backend,
        {budget.m_instructions, budget.retry_cap, 0.7, budget.seed}, library);
    if (instructions.size() < budget.m_instructions) {
      res.warnings.push_back("only " + std::to_string(instructions.size()) +
                             " distinct instructions proposed");
    }

    auto make = [&](const CandidateConfig& cell) {
      PromptTemplate t = seed_template;
      t.instruction = instructions[cell.instruction_id];
      t.demos = demo_sets[cell.demo_set_id];
      return t;
    };
    EvalFn eval = [&](const CandidateConfig& cell, size_t mb_id) {
      Rng mb_rng(hash_parts(budget.seed, {category, "minibatch", std::to_string(mb_id)}));
      return evaluate_template(
          make(cell), subset(opt, sample_indices(opt.size(), budget.minibatch, mb_rng)),
          category, backend, library, sampling);
    };
    SearchResult search = surrogate_search(
        instructions.size(), demo_sets.size(), eval,
        {budget.trials, budget.ucb_c, budget.noise_sd, budget.retry_cap}, rng);
    best = make(search.best);
    best.version = 1;
    res.search = std::move(search);

    SimbaResult simba = simba_refine(
        best, opt, backend,
        {budget.simba_iterations, budget.minibatch, budget.r_max, 300}, rng,
        library, sampling);
    best = simba.tmpl;
    res.simba = std::move(simba);
  } catch (const std::exception& e) {
    best.partial = true;
    res.warnings.push_back(std::string("optimization stopped early: ") + e.what());
  }

  try {
    best.score = evaluate_template(best, holdout, category, backend, library, sampling);
  } catch (const std::exception& e) {
    best.partial = true;
    res.warnings.push_back(std::string("held-out scoring failed: ") + e.what());
  }
  best.config_hash = hash;
  res.tmpl = std::move(best);
  return res;
}

}  // namespace figcap::optimizer
