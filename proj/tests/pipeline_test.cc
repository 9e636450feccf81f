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

#include <gtest/gtest.h>

#include <atomic>

#include "figcap/metrics.h"
#include "figcap/mock_backend.h"
#include "support/synthetic.h"

namespace figcap::pipeline {
namespace {

using llm::CallbackBackend;
using llm::LlmRequest;

std::string words(int n, const std::string& w = "word") {
  std::string out;
  for (int i = 0; i < n; ++i) out += (i ? " " : "") + w;
  return out;
}

corpus::PaperRecord record(std::vector<std::string> cats) {
  corpus::PaperRecord r;
  r.paper_id = "p1";
  r.categories = std::move(cats);
  r.target.mention = "Figure 1 shows the loss.";
  r.target.paragraph = "We train it. Loss falls.";
  r.target.figure_type = "plot";
  r.target.gold_caption = "SECRET GOLD CAPTION";
  return r;
}

std::vector<CaptionCandidate> candidates(size_t n) {
  std::vector<CaptionCandidate> out;
  for (size_t i = 0; i < n; ++i) {
    out.push_back({"p1", "c" + std::to_string(i), "caption " + std::to_string(i + 1)});
  }
  return out;
}

TEST(ParseRanking, Forms) {
  EXPECT_EQ(parse_ranking("2,1,3", 3), (std::vector<size_t>{1, 0, 2}));
  EXPECT_EQ(parse_ranking("Ranking: 3, 1, 2\nJustification: x", 3),
            (std::vector<size_t>{2, 0, 1}));
  EXPECT_EQ(parse_ranking("1. Caption 2\n2. Caption 1", 2), (std::vector<size_t>{1, 0}));
  EXPECT_FALSE(parse_ranking("2,2", 2));
  EXPECT_FALSE(parse_ranking("1,2", 3));
  EXPECT_FALSE(parse_ranking("4,1,2", 3));
  EXPECT_FALSE(parse_ranking("no idea", 2));
}

TEST(LengthWindow, Arithmetic) {
  LengthWindow w = LengthWindow::from_target(100);
  EXPECT_EQ(w.lower, 85);
  EXPECT_EQ(w.upper, 115);
  LengthWindow one = LengthWindow::from_target(1);
  EXPECT_EQ(one.lower, 1);
  EXPECT_EQ(one.upper, 2);
  LengthWindow seven = LengthWindow::from_target(7);
  EXPECT_EQ(seven.lower, 5);
  EXPECT_EQ(seven.upper, 9);
  EXPECT_EQ(w.distance(80), 5);
  EXPECT_EQ(w.distance(100), 0);
  EXPECT_EQ(w.distance(120), 5);
  for (int t = 1; t <= 500; ++t) {
    LengthWindow x = LengthWindow::from_target(t);
    EXPECT_LE(x.lower, t);
    EXPECT_GE(x.upper, t);
  }
}

TEST(LengthWindow, TargetSources) {
  corpus::PaperRecord r = record({"a"});
  r.target.caption_len_hint = 12;
  EXPECT_EQ(length_window(r, 50).target_len, 12);
  r.target.caption_len_hint.reset();
  for (int n : {10, 20, 30}) {
    corpus::FigureContext p;
    p.gold_caption = words(n);
    r.profiles.push_back(p);
  }
  LengthWindow w = length_window(r, 50);
  EXPECT_EQ(w.target_len, 20);
  EXPECT_EQ(w.source, "profile_mean");
  r.profiles.clear();
  LengthWindow d = length_window(r, 9);
  EXPECT_EQ(d.target_len, 9);
  EXPECT_TRUE(d.degenerate);
}

TEST(GenerateCandidates, OnePerCategoryWithTemplateMarker) {
  llm::MockBackend mock({.seed = 1});
  optimizer::TemplateStore store;
  GenerationResult g = generate_candidates(record({"a", "b", "c"}), store, mock);
  ASSERT_EQ(g.candidates.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(g.candidates[i].text.rfind("CAT:" + g.candidates[i].category, 0), 0u);
    EXPECT_EQ(g.candidates[i].stage, Stage::kGenerated);
  }
  EXPECT_EQ(generate_candidates(record({"a"}), store, mock).candidates.size(), 1u);
}

TEST(GenerateCandidates, FailedCategoryOmitted) {
  CallbackBackend gen([](const LlmRequest& r) -> std::string {
    if (r.hints.at("category") == "b") throw llm::LlmError("down");
    return "A caption.";
  });
  GenerationResult g = generate_candidates(record({"a", "b"}), {}, gen);
  ASSERT_EQ(g.candidates.size(), 1u);
  EXPECT_EQ(g.candidates[0].category, "a");
  EXPECT_EQ(g.errors.size(), 1u);
}

TEST(SelectCandidate, SingleBypasses) {
  std::atomic<int> calls{0};
  CallbackBackend rr([&](const LlmRequest&) {
    ++calls;
    return "1";
  });
  Selection s = select_candidate(record({"a"}), candidates(1), rr);
  EXPECT_EQ(calls.load(), 0);
  EXPECT_TRUE(s.decision.bypassed);
  EXPECT_EQ(s.selected.stage, Stage::kSelected);
  EXPECT_EQ(s.selected.text, "caption 1");
  EXPECT_THROW(select_candidate(record({"a"}), {}, rr), std::invalid_argument);
}

TEST(SelectCandidate, FollowsRanking) {
  CallbackBackend rr([](const LlmRequest&) { return "2,1,3"; });
  Selection s = select_candidate(record({"a", "b", "c"}), candidates(3), rr);
  EXPECT_EQ(s.selected.text, "caption 2");
  EXPECT_EQ(s.decision.chosen, 1u);
  EXPECT_FALSE(s.decision.fallback);
}

TEST(SelectCandidate, MalformedFallsBackAfterRepair) {
  std::vector<std::string> prompts;
  CallbackBackend rr([&](const LlmRequest& r) {
    prompts.push_back(r.prompt);
    return "2,2";
  });
  Selection s = select_candidate(record({"a", "b"}), candidates(2), rr);
  EXPECT_EQ(prompts.size(), 2u);
  EXPECT_TRUE(s.decision.fallback);
  EXPECT_EQ(s.selected.text, "caption 1");
  EXPECT_EQ(s.decision.ordered_candidate_ids, (std::vector<size_t>{0, 1}));
}

TEST(SelectCandidate, PromptOmitsGoldAndIgnoresRestatedText) {
  std::string seen;
  CallbackBackend rr([&](const LlmRequest& r) {
    seen = r.prompt;
    return "Ranking: 2, 1\nBest caption: \"An invented caption.\"";
  });
  Selection s = select_candidate(record({"a", "b"}), candidates(2), rr);
  EXPECT_EQ(seen.find("SECRET GOLD"), std::string::npos);
  EXPECT_NE(seen.find("1. \"caption 1\""), std::string::npos);
  EXPECT_EQ(s.selected.text, "caption 2");
}

TEST(RefineCaption, NoProfilesStillRuns) {
  corpus::PaperRecord r = record({"a"});
  r.target.caption_len_hint = 5;
  std::string prompt;
  CallbackBackend be([&](const LlmRequest& q) {
    prompt = q.prompt;
    return words(5);
  });
  CaptionCandidate sel = candidates(1)[0];
  sel.stage = Stage::kSelected;
  Refinement f = refine_caption(r, sel, be, length_window(r, 2));
  EXPECT_EQ(f.attempts, 1);
  EXPECT_FALSE(f.length_violation);
  EXPECT_EQ(f.candidate.stage, Stage::kRefined);
  EXPECT_EQ(prompt.find("Demos:"), std::string::npos);
  EXPECT_EQ(prompt.find("SECRET GOLD"), std::string::npos);
}

TEST(RefineCaption, ProfileDemosCapped) {
  corpus::PaperRecord r = record({"a"});
  for (int i = 0; i < 3; ++i) {
    corpus::FigureContext p;
    p.mention = "m" + std::to_string(i);
    p.gold_caption = "profile caption " + std::to_string(i);
    r.profiles.push_back(p);
  }
  PipelineOptions o;
  o.max_profile_demos = 2;
  std::string p = build_refine_prompt(r, "init", LengthWindow::from_target(10), o);
  EXPECT_NE(p.find("profile caption 1"), std::string::npos);
  EXPECT_EQ(p.find("profile caption 2"), std::string::npos);
}

TEST(RefineCaption, RetriesThenKeepsClosest) {
  corpus::PaperRecord r = record({"a"});
  r.target.caption_len_hint = 10;
  int call = 0;
  CallbackBackend be([&](const LlmRequest&) { return words(++call == 2 ? 20 : 30); });
  CaptionCandidate sel = candidates(1)[0];
  sel.stage = Stage::kSelected;
  Refinement f = refine_caption(r, sel, be, length_window(r, 0));
  EXPECT_EQ(f.attempts, 3);
  EXPECT_TRUE(f.length_violation);
  EXPECT_EQ(metrics::token_count(f.candidate.text), 20u);
}

TEST(RefineCaption, BackendExhaustedKeepsSelected) {
  corpus::PaperRecord r = record({"a"});
  CallbackBackend be([](const LlmRequest&) -> std::string { throw llm::LlmError("x"); });
  CaptionCandidate sel = candidates(1)[0];
  sel.stage = Stage::kSelected;
  Refinement f = refine_caption(r, sel, be, LengthWindow::from_target(2));
  EXPECT_TRUE(f.unrefined);
  EXPECT_EQ(f.candidate.text, sel.text);
  CaptionCandidate gen = candidates(1)[0];
  EXPECT_THROW(refine_caption(r, gen, be, LengthWindow::from_target(2)), std::invalid_argument);
}

TEST(RunRecord, StageCounts) {
  llm::MockBackend mock({.seed = 3});
  Backends b{&mock};
  RecordResult three = run_record(record({"a", "b", "c"}), {}, b);
  EXPECT_EQ(three.trail.count("generate"), 3u);
  EXPECT_EQ(three.trail.count("rerank"), 1u);
  EXPECT_GE(three.trail.count("refine"), 1u);
  ASSERT_TRUE(three.refined);
  RecordResult one = run_record(record({"a"}), {}, b);
  EXPECT_EQ(one.trail.count("rerank"), 0u);
  EXPECT_EQ(one.trail.count("generate"), 1u);
}

TEST(RunRecord, WindowOrFlag) {
  llm::MockBackend mock({.seed = 5});
  Backends b{&mock};
  for (const corpus::PaperRecord& r : testing::synthetic_corpus({.n_records = 30})) {
    RecordResult res = run_record(r, {}, b);
    ASSERT_TRUE(res.refined) << r.paper_id;
    const int n = static_cast<int>(metrics::token_count(res.refined->text));
    EXPECT_TRUE(res.window->contains(n) || res.has_flag("length_violation")) << r.paper_id;
  }
}

TEST(RunRecord, Stage1Only) {
  llm::MockBackend mock({.seed = 3});
  PipelineOptions o;
  o.stage1_only = true;
  RecordResult res = run_record(record({"a", "b"}), {}, {&mock}, o);
  EXPECT_EQ(res.trail.count("refine"), 0u);
  EXPECT_FALSE(res.refined);
  EXPECT_EQ(res.final_caption()->stage, Stage::kSelected);
}

TEST(RunRecord, AllGenerationsFailMarksRecord) {
  CallbackBackend be([](const LlmRequest&) -> std::string { throw llm::LlmError("x"); });
  RecordResult res = run_record(record({"a", "b"}), {}, {&be});
  EXPECT_TRUE(res.failed);
  EXPECT_EQ(res.final_caption(), nullptr);
}

TEST(RunRecord, DeterministicTrail) {
  llm::MockBackend m1({.seed = 8});
  llm::MockBackend m2({.seed = 8});
  corpus::PaperRecord r = record({"a", "b", "c"});
  EXPECT_EQ(run_record(r, {}, {&m1}).trail.to_json(), run_record(r, {}, {&m2}).trail.to_json());
}

TEST(RunBatch, OrderAndThreadIndependence) {
  llm::MockBackend mock({.seed = 4});
  auto recs = testing::synthetic_corpus({.n_records = 25});
  auto a = run_batch(recs, {}, {&mock}, {}, 1);
  auto b = run_batch(recs, {}, {&mock}, {}, 4);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].paper_id, recs[i].paper_id);
    EXPECT_EQ(a[i].trail.to_json(), b[i].trail.to_json());
  }
}

TEST(AuditTrail, Redaction) {
  llm::MockBackend mock({.seed = 3});
  RecordResult res = run_record(record({"a", "b"}), {}, {&mock});
  std::string red = res.trail.to_json(true).dump();
  EXPECT_EQ(red.find("Figure 1 shows the loss."), std::string::npos);
  EXPECT_NE(res.trail.to_json().dump().find("Figure 1 shows the loss."), std::string::npos);
}

}  // namespace
}  // namespace figcap::pipeline
