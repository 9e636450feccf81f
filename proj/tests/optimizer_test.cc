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

#include <gtest/gtest.h>

#include <atomic>
#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "figcap/metrics.h"
#include "figcap/mock_backend.h"
#include "support/synthetic.h"

namespace figcap::optimizer {
namespace {

using llm::CallbackBackend;
using llm::LlmRequest;

std::string hint(const LlmRequest& r, const std::string& key) {
  auto it = r.hints.find(key);
  return it == r.hints.end() ? "" : it->second;
}

// `good` of the 10 gold words, then filler: ROUGE-L precision good/10.
std::string caption_with_precision(int good) {
  static const char* kGold[] = {"g0", "g1", "g2", "g3", "g4", "g5", "g6", "g7", "g8", "g9"};
  std::string out;
  for (int i = 0; i < 10; ++i) {
    if (i) out += " ";
    out += i < good ? kGold[i] : "zz";
  }
  return out;
}

std::vector<TrainExample> examples(size_t n) {
  std::vector<TrainExample> out;
  for (size_t i = 0; i < n; ++i) {
    TrainExample ex;
    ex.paper_id = "p" + std::to_string(i);
    ex.context.mention = "Figure " + std::to_string(i) + " shows item " + std::to_string(i);
    ex.context.paragraph = "Some paragraph.";
    ex.context.figure_type = "plot";
    ex.gold = caption_with_precision(10);
    out.push_back(ex);
  }
  return out;
}

std::vector<corpus::PaperRecord> records_from(const std::vector<TrainExample>& ex) {
  std::vector<corpus::PaperRecord> out;
  for (const TrainExample& e : ex) {
    corpus::PaperRecord r;
    r.paper_id = e.paper_id;
    r.categories = {"cs.CV"};
    r.target = e.context;
    r.target.gold_caption = e.gold;
    out.push_back(r);
  }
  return out;
}

TEST(PromptTemplate, JsonRoundTrip) {
  PromptTemplate t;
  t.category = "cs.CV";
  t.instruction = "Write it.";
  t.demos = {{"Mention: x", "A caption.", "p1"}};
  t.rules = {{"Be concise.", "p2", 0.125}};
  t.version = 3;
  t.score = 0.4;
  t.partial = true;
  t.config_hash = "abc";
  EXPECT_EQ(PromptTemplate::from_json(t.to_json()), t);
  PromptTemplate u = general_template();
  EXPECT_EQ(PromptTemplate::from_json(u.to_json()), u);
  EXPECT_FALSE(u.score);
}

TEST(TemplateStore, ResolveFallsBackToGeneral) {
  TemplateStore s;
  PromptTemplate t = general_template();
  t.category = "cs.CL";
  t.instruction = "Specific.";
  s.put(t);
  EXPECT_EQ(s.resolve("cs.CL").instruction, "Specific.");
  EXPECT_EQ(s.resolve("math.AG").category, kGeneralCategory);
}

TEST(TemplateStore, SaveAndLoad) {
  testing::ScratchDir dir("templates");
  PromptTemplate t = general_template();
  t.category = "cs.CV";
  t.instruction = "Saved.";
  save_template(dir.str(), t);
  EXPECT_TRUE(std::filesystem::exists(dir.file("cs.CV.json")));
  TemplateStore s = TemplateStore::load(dir.str());
  EXPECT_EQ(s.resolve("cs.CV"), t);
  EXPECT_TRUE(TemplateStore::load(dir.file("missing")).templates().empty());
  EXPECT_EQ(template_file_name("a/b c"), "a_b_c.json");
}

TEST(GenerationPrompt, AssemblesBlocksWithoutGold) {
  PromptTemplate t = general_template();
  t.rules = {{"Mention the dataset.", "p", 0.1}};
  t.demos = {{"Mention: m", "Demo caption.", "p"}};
  corpus::FigureContext fc;
  fc.mention = "Figure 2 shows X.";
  fc.paragraph = "Para.";
  fc.ocr = {"a", "b"};
  fc.figure_type = "plot";
  fc.gold_caption = "SECRET GOLD";
  std::string p = build_generation_prompt(t, fc, prompts::PromptLibrary::defaults());
  EXPECT_NE(p.find("- Mention the dataset."), std::string::npos);
  EXPECT_NE(p.find("Caption: Demo caption."), std::string::npos);
  EXPECT_NE(p.find("OCR: a; b"), std::string::npos);
  EXPECT_EQ(p.find("SECRET GOLD"), std::string::npos);
}

TEST(Bootstrap, ImpossibleThresholdGivesEmptyPool) {
  CallbackBackend gen([](const LlmRequest&) { return caption_with_precision(10); });
  Rng rng(1);
  DemoPool pool = bootstrap_demos(examples(6), gen, general_template(),
                                  {.k = 3, .keep_threshold = 1.1}, rng);
  EXPECT_TRUE(pool.sets.empty());
  EXPECT_FALSE(pool.warnings.empty());
}

TEST(Bootstrap, EchoingGoldKeepsEverything) {
  CallbackBackend gen([](const LlmRequest&) { return caption_with_precision(10); });
  Rng rng(1);
  DemoPool pool = bootstrap_demos(examples(7), gen, general_template(), {.k = 3}, rng);
  EXPECT_EQ(pool.kept, 7u);
  ASSERT_EQ(pool.sets.size(), 3u);
  EXPECT_EQ(pool.sets[2].size(), 1u);
  for (const auto& set : pool.sets) EXPECT_LE(set.size(), 3u);
}

TEST(Bootstrap, AlternatingScores) {
  std::vector<TrainExample> ex = examples(10);
  std::map<std::string, int> good;
  for (size_t i = 0; i < ex.size(); ++i) good[ex[i].context.mention] = i % 2 ? 1 : 9;
  CallbackBackend gen([&](const LlmRequest& r) {
    return caption_with_precision(good.at(hint(r, "mention")));
  });
  Rng rng(4);
  DemoPool pool = bootstrap_demos(ex, gen, general_template(), {.keep_threshold = 0.5}, rng);
  EXPECT_EQ(pool.kept, 5u);
  EXPECT_EQ(pool.attempted, 10u);
}

TEST(Bootstrap, GeneratorFailuresSkipped) {
  std::atomic<int> calls{0};
  CallbackBackend gen([&](const LlmRequest&) -> std::string {
    if (++calls % 2 == 0) throw llm::LlmError("boom");
    return caption_with_precision(10);
  });
  Rng rng(2);
  DemoPool pool = bootstrap_demos(examples(6), gen, general_template(), {}, rng);
  EXPECT_EQ(pool.failures, 3u);
  EXPECT_EQ(pool.kept, 3u);
}

TEST(ProposeInstructions, SingleIsSeed) {
  CallbackBackend p([](const LlmRequest&) { return "Other."; });
  EXPECT_EQ(propose_instructions("Seed.", "ctx", "cs.CV", p, {.m = 1}),
            (std::vector<std::string>{"Seed."}));
}

TEST(ProposeInstructions, DuplicatesDroppedWithinRetryCap) {
  std::atomic<int> calls{0};
  CallbackBackend p([&](const LlmRequest&) {
    ++calls;
    return "\"Always the same.\"";
  });
  auto out = propose_instructions("Seed.", "ctx", "cs.CV", p, {.m = 4, .retry_cap = 2});
  EXPECT_EQ(out, (std::vector<std::string>{"Seed.", "Always the same."}));
  EXPECT_EQ(calls.load(), 3 + 2);
}

TEST(ProposeInstructions, DistinctVariants) {
  llm::MockBackend mock({.seed = 3});
  auto out = propose_instructions("Seed.", "ctx", "cs.CV", mock, {.m = 5, .retry_cap = 10});
  EXPECT_EQ(out.front(), "Seed.");
  std::set<std::string> uniq(out.begin(), out.end());
  EXPECT_EQ(uniq.size(), out.size());
  EXPECT_GE(out.size(), 2u);
}

TEST(SurrogateSearch, FindsDominantCell) {
  auto eval = [](const CandidateConfig& c, size_t) {
    return c.instruction_id == 2 && c.demo_set_id == 1 ? 0.9 : 0.1;
  };
  Rng rng(42);
  SearchResult r = surrogate_search(4, 3, eval, {.budget = 40}, rng);
  EXPECT_EQ(r.best.instruction_id, 2u);
  EXPECT_EQ(r.best.demo_set_id, 1u);
  EXPECT_NEAR(*r.best_mean, 0.9, 1e-12);
  EXPECT_EQ(r.trials, 40u);
}

TEST(SurrogateSearch, VisitsEveryCellWhenBudgetAllows) {
  Rng rng(1);
  SearchResult r = surrogate_search(3, 2, [](const CandidateConfig&, size_t) { return 0.5; },
                                    {.budget = 6}, rng);
  for (const auto& c : r.cells) EXPECT_EQ(c.observed_scores.size(), 1u);
}

TEST(SurrogateSearch, IdenticalScoresTieToFirstCell) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    SearchResult r = surrogate_search(
        3, 3, [](const CandidateConfig&, size_t) { return 0.3; }, {.budget = 20}, rng);
    EXPECT_EQ(r.best.instruction_id, 0u);
    EXPECT_EQ(r.best.demo_set_id, 0u);
  }
}

TEST(SurrogateSearch, ZeroBudget) {
  Rng rng(1);
  SearchResult r = surrogate_search(1, 1, [](const CandidateConfig&, size_t) { return 1.0; },
                                    {.budget = 0}, rng);
  EXPECT_EQ(r.best.instruction_id, 0u);
  EXPECT_FALSE(r.best_mean);
  EXPECT_TRUE(r.best.observed_scores.empty());
}

TEST(SurrogateSearch, FailuresConsumeBudgetPastRetryCap) {
  Rng rng(1);
  SearchResult r = surrogate_search(
      2, 2, [](const CandidateConfig&, size_t) -> double { throw std::runtime_error("x"); },
      {.budget = 5, .retry_cap = 3}, rng);
  EXPECT_EQ(r.trials, 5u);
  EXPECT_EQ(r.failures, 8u);
  EXPECT_FALSE(r.best_mean);
}

TEST(SurrogateSearch, FreshMinibatchPerTrial) {
  Rng rng(3);
  std::set<size_t> seen;
  SearchResult r = surrogate_search(2, 2, [&](const CandidateConfig&, size_t mb) {
    EXPECT_TRUE(seen.insert(mb).second);
    return 0.5;
  }, {.budget = 10}, rng);
  EXPECT_EQ(seen.size(), 10u);
}

// Generation quality is base + step * rules; the proposed rule is fixed.
CallbackBackend rule_effect_backend(int base, int step) {
  return CallbackBackend([base, step](const LlmRequest& r) -> std::string {
    if (r.purpose == "propose_rule") return "Use the dataset name.";
    int n = std::stoi(hint(r, "n_rules"));
    int good = std::clamp(base + step * n, 0, 10);
    return "Reasoning: thinking.\nCaption: " + caption_with_precision(good);
  });
}

TEST(Simba, ZeroIterationsUnchanged) {
  auto gen = rule_effect_backend(3, 1);
  Rng rng(1);
  PromptTemplate t = general_template();
  SimbaResult r = simba_refine(t, examples(20), gen, {.iterations = 0}, rng);
  EXPECT_EQ(r.tmpl, t);
  EXPECT_FALSE(r.input_mean);
}

TEST(Simba, HelpfulRulesAcceptedUpToCap) {
  for (size_t iters : {3u, 8u}) {
    auto gen = rule_effect_backend(3, 1);
    Rng rng(7);
    PromptTemplate t = general_template();
    SimbaResult r = simba_refine(t, examples(20), gen,
                                 {.iterations = iters, .minibatch = 8, .r_max = 5}, rng);
    EXPECT_EQ(r.tmpl.rules.size(), std::min<size_t>(iters, 5));
    EXPECT_EQ(r.tmpl.version, t.version + static_cast<int>(r.tmpl.rules.size()));
    for (const auto& rule : r.tmpl.rules) EXPECT_NEAR(rule.delta, 0.1, 1e-12);
    EXPECT_GT(*r.output_mean, *r.input_mean);
  }
}

TEST(Simba, HarmfulRulesRejected) {
  auto gen = rule_effect_backend(6, -1);
  Rng rng(7);
  PromptTemplate t = general_template();
  SimbaResult r = simba_refine(t, examples(20), gen, {.iterations = 5}, rng);
  EXPECT_TRUE(r.tmpl.rules.empty());
  EXPECT_EQ(r.tmpl.version, t.version);
  EXPECT_EQ(*r.output_mean, *r.input_mean);
}

TEST(Simba, MalformedRulesRejected) {
  for (std::string rule : {std::string(), std::string(301, 'x')}) {
    CallbackBackend gen([rule](const LlmRequest& r) -> std::string {
      if (r.purpose == "propose_rule") return rule;
      return caption_with_precision(5);
    });
    Rng rng(2);
    SimbaResult r = simba_refine(general_template(), examples(10), gen, {.iterations = 3}, rng);
    EXPECT_TRUE(r.tmpl.rules.empty());
    for (const auto& s : r.steps) EXPECT_FALSE(s.accepted);
  }
}

TEST(Simba, StoredTemplateHasNoReasoning) {
  auto gen = rule_effect_backend(3, 1);
  Rng rng(7);
  SimbaResult r = simba_refine(general_template(), examples(20), gen, {.iterations = 2}, rng);
  for (const auto& rule : r.tmpl.rules) {
    EXPECT_EQ(rule.rule_text.find("Reasoning"), std::string::npos);
  }
}

TEST(OptimizeCategory, SmallCategoryFallsBack) {
  llm::MockBackend mock({.seed = 42});
  OptimizeResult r = optimize_category("cs.CV", records_from(examples(3)), mock, OptBudget{});
  EXPECT_TRUE(r.tmpl.fallback);
  EXPECT_EQ(r.tmpl.category, "cs.CV");
  EXPECT_EQ(r.tmpl.instruction, default_instruction());
  EXPECT_TRUE(r.tmpl.to_json()["fallback"].get<bool>());
}

TEST(OptimizeCategory, DeterministicUnderSeededMock) {
  std::vector<corpus::PaperRecord> recs = testing::synthetic_corpus(
      {.n_records = 30, .seed = 3, .split = corpus::Split::kTrain});
  OptBudget b;
  b.trials = 12;
  b.simba_iterations = 3;
  b.minibatch = 6;
  b.m_instructions = 4;
  b.bootstrap_records = 10;
  llm::MockBackend m1({.seed = 42});
  llm::MockBackend m2({.seed = 42});
  OptimizeResult a = optimize_category("cs.CV", recs, m1, b);
  OptimizeResult c = optimize_category("cs.CV", recs, m2, b);
  EXPECT_FALSE(a.tmpl.fallback);
  EXPECT_EQ(a.tmpl.to_json().dump(2), c.tmpl.to_json().dump(2));
  EXPECT_TRUE(a.tmpl.score);
  EXPECT_GE(a.tmpl.version, 1);
}

TEST(OptimizeCategory, DominantInstructionWins) {
  const std::string kBest = "Name the measured quantity first.";
  CallbackBackend backend([&](const LlmRequest& r) -> std::string {
    if (r.purpose == "propose_instruction") {
      return hint(r, "attempt") == "1" ? kBest : "Variant " + hint(r, "attempt") + ".";
    }
    if (r.purpose == "propose_rule") return "Keep it short.";
    const bool best = r.prompt.find(kBest) != std::string::npos;
    return caption_with_precision(best ? 9 : 2);
  });
  OptBudget b;
  b.trials = 30;
  b.simba_iterations = 2;
  b.minibatch = 5;
  b.m_instructions = 4;
  OptimizeResult r = optimize_category("cs.LG", records_from(examples(25)), backend, b);
  EXPECT_EQ(r.tmpl.instruction, kBest);
  EXPECT_FALSE(r.tmpl.fallback);
  EXPECT_FALSE(r.tmpl.partial);
}

TEST(MakeExamples, StripsGoldAndFilters) {
  std::vector<corpus::PaperRecord> recs = records_from(examples(2));
  recs[1].target.gold_caption.reset();
  std::vector<TrainExample> ex = make_examples(recs);
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_FALSE(ex[0].context.gold_caption);
  llm::CallbackScorer never([](const std::string&, const std::string&) { return -100.0; });
  std::vector<TrainExample> filtered = make_examples(recs, &never);
  EXPECT_EQ(filtered[0].context.paragraph, "");
}

}  // namespace
}  // namespace figcap::optimizer
