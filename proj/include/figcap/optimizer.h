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

// Per-category prompt search. Two phases:
//
//   1. Demo bootstrapping and instruction proposal, then a UCB search over
//      the (instruction, demo set) grid scored on fresh training minibatches.
//   2. Feedback-rule mining: the worst caption of a minibatch yields one
//      imperative rule, which is kept only if the minibatch score does not
//      drop.
//
// The objective everywhere is mean ROUGE-L precision against gold captions.

#ifndef FIGCAP_OPTIMIZER_H_
#define FIGCAP_OPTIMIZER_H_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "figcap/common.h"
#include "figcap/corpus.h"
#include "figcap/filter.h"
#include "figcap/llm.h"
#include "figcap/prompts.h"

namespace figcap::optimizer {

struct Demo {
  std::string context;  // prompts::context_summary of the training figure
  std::string caption;  // generated caption that passed the keep threshold
  std::string source_paper_id;

  friend bool operator==(const Demo&, const Demo&) = default;
};

struct FeedbackRule {
  std::string rule_text;
  std::string source_example;  // paper_id of the mined example
  double delta = 0.0;          // measured minibatch gain when accepted

  friend bool operator==(const FeedbackRule&, const FeedbackRule&) = default;
};

struct PromptTemplate {
  std::string category;
  std::string instruction;
  std::vector<Demo> demos;
  std::vector<FeedbackRule> rules;
  int version = 0;
  // Held-out mean ROUGE-L precision; absent when never evaluated.
  std::optional<double> score;
  bool fallback = false;
  bool partial = false;
  std::string config_hash;

  nlohmann::json to_json() const;
  static PromptTemplate from_json(const nlohmann::json& j);

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

inline constexpr const char* kGeneralCategory = "general";

const std::string& default_instruction();
PromptTemplate general_template();

// Category -> template, falling back to the general template.
class TemplateStore {
 public:
  void put(PromptTemplate t);
  bool contains(const std::string& category) const;
  const PromptTemplate& resolve(const std::string& category) const;
  const std::map<std::string, PromptTemplate>& templates() const {
    return templates_;
  }
  void set_general(PromptTemplate t) { general_ = std::move(t); }
  const PromptTemplate& general() const { return general_; }

  // Reads every *.json in `dir`; a missing dir yields an empty store.
  static TemplateStore load(const std::string& dir);

 private:
  std::map<std::string, PromptTemplate> templates_;
  PromptTemplate general_ = general_template();
};

// File name used for a category inside the template dir.
std::string template_file_name(const std::string& category);
void save_template(const std::string& dir, const PromptTemplate& t);

struct SamplingParams {
  double temperature = 0.0;
  int max_tokens = 256;
  std::optional<int64_t> seed;
};

// A training figure as the optimizer sees it: paragraph possibly filtered.
struct TrainExample {
  std::string paper_id;
  corpus::FigureContext context;
  std::string gold;
};

// Records without a target gold caption are skipped. With a scorer, each
// paragraph is replaced by its relevance-filtered version.
std::vector<TrainExample> make_examples(
    const std::vector<corpus::PaperRecord>& records,
    llm::LikelihoodScorer* filter_scorer = nullptr,
    const filter::FilterOptions& filter_options = {});

std::string build_generation_prompt(const PromptTemplate& t,
                                    const corpus::FigureContext& target,
                                    const prompts::PromptLibrary& library,
                                    bool with_reasoning = false);

llm::LlmRequest generation_request(const PromptTemplate& t,
                                   const corpus::FigureContext& target,
                                   const std::string& category,
                                   const prompts::PromptLibrary& library,
                                   const SamplingParams& sampling,
                                   bool with_reasoning = false);

// ---------------------------------------------------------------------------
// Demo bootstrapping

struct DemoPool {
  std::vector<std::vector<Demo>> sets;
  size_t attempted = 0;
  size_t kept = 0;
  size_t failures = 0;
  std::vector<std::string> warnings;
};

struct BootstrapOptions {
  size_t k = 3;
  double keep_threshold = 0.5;
  // Records run through the template; 0 means all of them.
  size_t sample_size = 0;
};

DemoPool bootstrap_demos(const std::vector<TrainExample>& train,
                         llm::LlmBackend& generator,
                         const PromptTemplate& current,
                         const BootstrapOptions& options, Rng& rng,
                         const prompts::PromptLibrary& library =
                             prompts::PromptLibrary::defaults(),
                         const SamplingParams& sampling = {});

// ---------------------------------------------------------------------------
// Instruction proposal

struct ProposalOptions {
  size_t m = 8;
  int retry_cap = 3;
  double temperature = 0.7;
  uint64_t seed = 0;
};

// Returns up to m distinct instructions; the seed instruction is always
// first and the list is never empty.
std::vector<std::string> propose_instructions(
    const std::string& seed_instruction, const std::string& context_summary,
    const std::string& category, llm::LlmBackend& proposer,
    const ProposalOptions& options,
    const prompts::PromptLibrary& library = prompts::PromptLibrary::defaults());

// ---------------------------------------------------------------------------
// Surrogate search

struct CandidateConfig {
  size_t instruction_id = 0;
  size_t demo_set_id = 0;
  // (minibatch id, score in [0, 1])
  std::vector<std::pair<size_t, double>> observed_scores;

  std::optional<double> mean() const;
};

struct SearchOptions {
  size_t budget = 40;
  double ucb_c = 2.0;
  // Observation noise of one minibatch mean.
  double noise_sd = 0.1;
  // Failed evaluations that do not consume budget.
  int retry_cap = 3;
};

struct SearchResult {
  CandidateConfig best;
  std::optional<double> best_mean;  // absent when best was never evaluated
  std::vector<CandidateConfig> cells;  // row-major: instruction, demo set
  size_t trials = 0;
  size_t failures = 0;
  std::vector<size_t> trace;  // cell index chosen per successful trial
};

// Evaluates one cell on minibatch `minibatch_id`; may throw.
using EvalFn = std::function<double(const CandidateConfig&, size_t)>;

// UCB over a Gaussian posterior per cell (flat prior, known noise): unvisited
// cells have unbounded upper confidence and are tried first. Ties in
// selection are broken with `rng`; the returned cell is the evaluated one
// with the highest posterior mean, ties to the lower row-major index.
SearchResult surrogate_search(size_t n_instructions, size_t n_demo_sets,
                              const EvalFn& eval_fn,
                              const SearchOptions& options, Rng& rng);

// ---------------------------------------------------------------------------
// Feedback-rule mining

struct SimbaOptions {
  size_t iterations = 8;
  size_t minibatch = 16;
  size_t r_max = 5;
  size_t max_rule_chars = 300;
};

struct SimbaStep {
  size_t iteration = 0;
  std::string rule;
  std::optional<double> base_mean;
  std::optional<double> new_mean;
  bool accepted = false;
  std::string note;
};

struct SimbaResult {
  PromptTemplate tmpl;
  // Mean score on the fixed acceptance minibatch before and after; absent
  // when no iteration ran.
  std::optional<double> input_mean;
  std::optional<double> output_mean;
  std::vector<SimbaStep> steps;
};

SimbaResult simba_refine(const PromptTemplate& tmpl,
                         const std::vector<TrainExample>& train,
                         llm::LlmBackend& generator,
                         const SimbaOptions& options, Rng& rng,
                         const prompts::PromptLibrary& library =
                             prompts::PromptLibrary::defaults(),
                         const SamplingParams& sampling = {});

// ---------------------------------------------------------------------------
// Whole category

struct OptBudget {
  size_t k_demos = 3;
  size_t m_instructions = 8;
  size_t minibatch = 16;
  size_t trials = 40;
  size_t simba_iterations = 8;
  size_t r_max = 5;
  double keep_threshold = 0.5;
  size_t n_min = 20;
  size_t bootstrap_records = 24;
  int retry_cap = 3;
  double ucb_c = 2.0;
  double noise_sd = 0.1;
  uint64_t seed = 42;

  nlohmann::json to_json() const;
};

struct OptimizeResult {
  PromptTemplate tmpl;
  size_t n_train = 0;
  size_t n_holdout = 0;
  std::optional<SearchResult> search;
  std::optional<SimbaResult> simba;
  std::vector<std::string> warnings;
};

OptimizeResult optimize_category(
    const std::string& category, const std::vector<corpus::PaperRecord>& train,
    llm::LlmBackend& backend, const OptBudget& budget,
    const prompts::PromptLibrary& library = prompts::PromptLibrary::defaults(),
    llm::LikelihoodScorer* filter_scorer = nullptr,
    const filter::FilterOptions& filter_options = {},
    const SamplingParams& sampling = {});

// Mean ROUGE-L precision of `t` over `examples` (0 for an empty list).
double evaluate_template(const PromptTemplate& t,
                         const std::vector<TrainExample>& examples,
                         const std::string& category, llm::LlmBackend& backend,
                         const prompts::PromptLibrary& library,
                         const SamplingParams& sampling = {});

}  // namespace figcap::optimizer

#endif  // FIGCAP_OPTIMIZER_H_
