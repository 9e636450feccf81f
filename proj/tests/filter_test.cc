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

#include "figcap/filter.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "figcap/mock_backend.h"

namespace figcap::filter {
namespace {

std::vector<std::string> texts(const std::vector<Chunk>& chunks) {
  std::vector<std::string> out;
  for (const Chunk& c : chunks) out.push_back(c.text);
  return out;
}

// Conditional log-likelihood keyed by chunk text; null prompt scores 0.
llm::CallbackScorer table_scorer(std::map<std::string, double> by_chunk) {
  return llm::CallbackScorer([by_chunk](const std::string& prompt, const std::string&) {
    for (const auto& [chunk, ll] : by_chunk) {
      if (prompt.find(chunk) != std::string::npos) return ll;
    }
    return 0.0;
  });
}

TEST(Segment, Basic) {
  EXPECT_EQ(texts(segment("A is big. B is small.")),
            (std::vector<std::string>{"A is big.", "B is small."}));
  EXPECT_EQ(segment("See Fig. 2 for details.").size(), 1u);
  EXPECT_TRUE(segment("").empty());
  EXPECT_TRUE(segment("   ").empty());
}

TEST(Segment, AbbreviationsAndPunctuation) {
  EXPECT_EQ(segment("Results from Smith et al. Show gains.").size(), 1u);
  EXPECT_EQ(segment("Use priors, e.g. Gaussian ones. Then fit.").size(), 2u);
  EXPECT_EQ(segment("Is it good? Yes! 3 runs agree.").size(), 3u);
  // No split before a lowercase word.
  EXPECT_EQ(segment("It costs 3 vs. about 4. ok then.").size(), 1u);
}

TEST(Segment, ChunksReconstructNormalizedParagraph) {
  const std::string p = "First  sentence here.\n Second one!  Third?  4 more.";
  std::vector<Chunk> chunks = segment(p);
  std::string joined;
  for (size_t i = 0; i < chunks.size(); ++i) {
    EXPECT_EQ(chunks[i].index, i);
    joined += (i ? " " : "") + chunks[i].text;
  }
  EXPECT_EQ(joined, "First sentence here. Second one! Third? 4 more.");
}

TEST(Threshold, LogRatioRule) {
  EXPECT_FALSE(passes_threshold(-3.0, -3.0, 1.2));
  EXPECT_TRUE(passes_threshold(-2.5, -3.0, 1.2));
  EXPECT_TRUE(passes_threshold(-3.0, -3.0, 1.0));
  EXPECT_TRUE(passes_threshold(std::log(1.2), 0.0, 1.2));
  EXPECT_FALSE(passes_threshold(std::nextafter(std::log(1.2), 0.0), 0.0, 1.2));
  EXPECT_THROW(passes_threshold(0, 0, 0.0), std::invalid_argument);
}

TEST(ScoreChunk, UsesBothPrompts) {
  std::vector<std::string> prompts;
  llm::CallbackScorer scorer([&](const std::string& p, const std::string& c) {
    prompts.push_back(p);
    EXPECT_EQ(c, "Figure 1 shows X.");
    return p.empty() ? 0.0 : -1.0;
  });
  RelevanceScore s = score_chunk({4, "X is big."}, "Figure 1 shows X.", scorer);
  EXPECT_EQ(s.chunk_index, 4u);
  ASSERT_EQ(prompts.size(), 2u);
  EXPECT_EQ(prompts[0], "Context: X is big.\nThe figure mention: ");
  EXPECT_EQ(prompts[1], "The figure mention: ");
}

TEST(ScoreChunk, ErrorCarriesIndex) {
  llm::CallbackScorer scorer([](const std::string&, const std::string&) -> double {
    throw std::runtime_error("backend down");
  });
  try {
    score_chunk({7, "x"}, "m", scorer);
    FAIL();
  } catch (const ScoringError& e) {
    EXPECT_EQ(e.chunk_index(), 7u);
  }
}

TEST(FilterParagraph, KeepsPassingChunksInOrder) {
  corpus::FigureContext fc;
  fc.mention = "Figure 1 shows accuracy.";
  fc.paragraph = "Alpha is one. Beta is two. Gamma is three.";
  auto scorer = table_scorer({{"Alpha", 1.0}, {"Beta", -1.0}, {"Gamma", 0.5}});
  FilterResult r = filter_paragraph(fc, scorer);
  EXPECT_EQ(r.text, "Alpha is one. Gamma is three.");
  ASSERT_EQ(r.scores.size(), 3u);
  EXPECT_TRUE(r.scores[0].retained);
  EXPECT_FALSE(r.scores[1].retained);
  EXPECT_TRUE(r.scores[2].retained);
}

TEST(FilterParagraph, AllBelowAndEmpty) {
  corpus::FigureContext fc;
  fc.mention = "Figure 1.";
  fc.paragraph = "Alpha. Beta.";
  auto scorer = table_scorer({{"Alpha", -1.0}, {"Beta", -2.0}});
  FilterResult r = filter_paragraph(fc, scorer);
  EXPECT_EQ(r.text, "");
  ASSERT_EQ(r.scores.size(), 2u);
  for (const auto& s : r.scores) EXPECT_FALSE(s.retained);
  fc.paragraph = "";
  EXPECT_TRUE(filter_paragraph(fc, scorer).scores.empty());
}

TEST(FilterParagraph, DefaultLambda) {
  EXPECT_DOUBLE_EQ(FilterOptions{}.lambda, 1.2);
  EXPECT_DOUBLE_EQ(kDefaultLambda, 1.2);
}

TEST(FilterParagraph, ConcurrentMatchesSequential) {
  llm::MockBackend mock({.seed = 9});
  corpus::FigureContext fc;
  fc.mention = "As shown in Figure 3, loss falls.";
  fc.paragraph = "One is here. Two is here. Three is here. Four is here. Five.";
  FilterOptions seq;
  FilterOptions par;
  par.workers = 3;
  FilterResult a = filter_paragraph(fc, mock, seq);
  FilterResult b = filter_paragraph(fc, mock, par);
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(FilterParagraph, RethresholdMatchesFreshRun) {
  llm::MockBackend mock({.seed = 2});
  corpus::FigureContext fc;
  fc.mention = "Figure 2 plots the error.";
  fc.paragraph = "Error is low. Variance is high. We used 5 seeds. Plots are smoothed.";
  FilterResult base = filter_paragraph(fc, mock, {.lambda = 1.0});
  for (double lambda : {1.0, 1.5, 3.0, 10.0}) {
    FilterResult fresh = filter_paragraph(fc, mock, {.lambda = lambda});
    EXPECT_EQ(rethreshold(base, lambda).to_json(), fresh.to_json());
  }
}

}  // namespace
}  // namespace figcap::filter
