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

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <mutex>
#include <thread>

#include "figcap/http_backend.h"
#include "figcap/llm.h"
#include "figcap/mock_backend.h"
#include "figcap/rate_limiter.h"
#include "support/synthetic.h"

namespace figcap::llm {
namespace {

using nlohmann::json;
using std::chrono::milliseconds;

LlmRequest request(std::string prompt, std::string purpose = "generate") {
  LlmRequest r;
  r.prompt = std::move(prompt);
  r.purpose = std::move(purpose);
  return r;
}

// Replays canned results and records every call.
class FakeTransport : public HttpTransport {
 public:
  struct Call {
    std::string path;
    std::string body;
    std::map<std::string, std::string> headers;
  };

  void push(int status, std::string body) { queue_.push_back({status, std::move(body), false}); }
  void push_transport_error() { queue_.push_back({0, "", true}); }

  HttpResult post(const std::string& path, const std::string& body,
                  const std::map<std::string, std::string>& headers,
                  milliseconds) override {
    std::lock_guard<std::mutex> lock(mu_);
    calls.push_back({path, body, headers});
    if (queue_.empty()) return {500, "empty queue"};
    Item it = queue_.front();
    queue_.pop_front();
    if (it.transport_error) throw TransportError("connection reset");
    return {it.status, it.body};
  }

  std::vector<Call> calls;

 private:
  struct Item {
    int status;
    std::string body;
    bool transport_error;
  };
  std::mutex mu_;
  std::deque<Item> queue_;
};

std::string chat_ok(const std::string& text) {
  return json({{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
               {"usage", {{"completion_tokens", 3}}}})
      .dump();
}

HttpBackendConfig openai_config() {
  HttpBackendConfig c;
  c.model_id = "test-model";
  c.api_key = "k";
  c.base_url = "http://localhost:1";
  return c;
}

TEST(Request, Validation) {
  EXPECT_THROW(validate_request(request("")), std::invalid_argument);
  LlmRequest r = request("x");
  r.temperature = -0.1;
  EXPECT_THROW(validate_request(r), std::invalid_argument);
  r = request("x");
  r.max_tokens = 0;
  EXPECT_THROW(validate_request(r), std::invalid_argument);
  EXPECT_NO_THROW(validate_request(request("x")));
}

TEST(Mock, DeterministicPerRequestAndSeed) {
  MockBackend a({.seed = 5});
  MockBackend b({.seed = 5});
  LlmRequest r = request("Caption this figure.");
  r.hints = {{"mention", "Figure 1 shows the loss falling over epochs quickly"},
             {"category", "cs.LG"}};
  EXPECT_EQ(a.complete(r).text, b.complete(r).text);
  EXPECT_EQ(a.complete(r).text, a.complete(r).text);
  EXPECT_EQ(a.complete(r).text.rfind("CAT:cs.LG ", 0), 0u);
}

TEST(Mock, EmptyPromptRejected) {
  MockBackend m;
  EXPECT_THROW(m.complete(request("")), std::invalid_argument);
}

TEST(Mock, GoldModeReadsMarker) {
  MockBackend m({.mode = MockMode::kGold});
  EXPECT_EQ(m.complete(request("Mention: x <<gold: The real caption. >> y")).text,
            "The real caption.");
}

TEST(Mock, ScriptedMode) {
  MockOptions o;
  o.mode = MockMode::kScripted;
  o.script = {{"rerank", "", "Ranking: 2, 1"}, {"", "hello", "world"}};
  MockBackend m(o);
  EXPECT_EQ(m.complete(request("anything", "rerank")).text, "Ranking: 2, 1");
  EXPECT_EQ(m.complete(request("say hello", "generate")).text, "world");
  EXPECT_THROW(m.complete(request("nothing", "generate")), LlmError);
}

TEST(Mock, ScriptFile) {
  testing::ScratchDir dir("script");
  write_file(dir.file("s.json"),
             R"({"entries":[{"purpose":"refine","response":"Short caption."}]})");
  std::vector<ScriptEntry> s = load_script(dir.file("s.json"));
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].purpose, "refine");
  EXPECT_EQ(s[0].contains, "");
  EXPECT_EQ(parse_mock_mode("scripted"), MockMode::kScripted);
  EXPECT_THROW(parse_mock_mode("random"), std::invalid_argument);
}

TEST(Mock, RefineTruncatesToTarget) {
  MockBackend m;
  LlmRequest r = request("refine", "refine");
  r.hints = {{"initial", "CAT:cs.CV one two three four five six seven eight nine ten"},
             {"target_len", "4"},
             {"upper", "5"}};
  EXPECT_EQ(m.complete(r).text, "one two three four");
  r.hints["target_len"] = "20";
  r.hints["upper"] = "23";
  EXPECT_EQ(m.complete(r).text, "one two three four five six seven eight nine ten");
}

TEST(Mock, LoglikelihoodRange) {
  MockBackend m({.seed = 1});
  double a = m.loglikelihood("Context: x\n", "Figure 1 shows y");
  EXPECT_EQ(a, m.loglikelihood("Context: x\n", "Figure 1 shows y"));
  EXPECT_LT(a, 0.0);
  EXPECT_GE(a, -5.0 * 4);
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_THROW(m.loglikelihood("p", ""), std::invalid_argument);
  EXPECT_NE(a, m.loglikelihood("Context: z\n", "Figure 1 shows y"));
}

TEST(Mock, StripCategoryMarker) {
  EXPECT_EQ(strip_category_marker("CAT:cs.CV A plot."), "A plot.");
  EXPECT_EQ(strip_category_marker("A plot."), "A plot.");
}

TEST(Http, OpenAiPayloadAndParse) {
  auto t = std::make_shared<FakeTransport>();
  t->push(200, chat_ok("A caption."));
  auto clock = std::make_shared<FakeClock>();
  HttpBackend b(openai_config(), t, nullptr, clock);
  LlmRequest r = request("Describe.");
  r.system = "Be brief.";
  r.seed = 3;
  r.hints = {{"secret_hint", "not for the wire"}};
  LlmResponse res = b.complete(r);
  EXPECT_EQ(res.text, "A caption.");
  EXPECT_EQ(res.token_count, 3);
  EXPECT_EQ(res.model_id, "test-model");
  ASSERT_EQ(t->calls.size(), 1u);
  EXPECT_EQ(t->calls[0].path, "/chat/completions");
  EXPECT_EQ(t->calls[0].headers.at("Authorization"), "Bearer k");
  json body = json::parse(t->calls[0].body);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "Describe.");
  EXPECT_EQ(body["seed"], 3);
  EXPECT_EQ(t->calls[0].body.find("secret_hint"), std::string::npos);
}

TEST(Http, GeminiAdapter) {
  auto t = std::make_shared<FakeTransport>();
  t->push(200, R"({"candidates":[{"content":{"parts":[{"text":"Gem "},{"text":"caption."}]}}]})");
  HttpBackendConfig c = openai_config();
  c.style = ApiStyle::kGemini;
  c.model_id = "gemini-2.5-flash";
  HttpBackend b(c, t, nullptr, std::make_shared<FakeClock>());
  EXPECT_EQ(b.complete(request("Rank these.")).text, "Gem caption.");
  EXPECT_EQ(t->calls[0].path, "/models/gemini-2.5-flash:generateContent");
  EXPECT_EQ(t->calls[0].headers.at("x-goog-api-key"), "k");
  json body = json::parse(t->calls[0].body);
  EXPECT_EQ(body["contents"][0]["parts"][0]["text"], "Rank these.");
}

TEST(Http, RetriesTransientThenSucceeds) {
  auto t = std::make_shared<FakeTransport>();
  t->push(429, "slow down");
  t->push(200, chat_ok("ok"));
  auto clock = std::make_shared<FakeClock>();
  HttpBackend b(openai_config(), t, nullptr, clock);
  EXPECT_EQ(b.complete(request("x")).text, "ok");
  EXPECT_EQ(t->calls.size(), 2u);
  EXPECT_EQ(b.stats().retries.load(), 1);
  EXPECT_EQ(b.stats().successes.load(), 1);
  EXPECT_EQ(clock->total_slept(), milliseconds(500));
}

TEST(Http, BackoffIsExponentialAndCapped) {
  auto t = std::make_shared<FakeTransport>();
  for (int i = 0; i < 5; ++i) t->push(503, "busy");
  auto clock = std::make_shared<FakeClock>();
  HttpBackendConfig c = openai_config();
  c.retry = {4, milliseconds(500), milliseconds(2000)};
  HttpBackend b(c, t, nullptr, clock);
  EXPECT_THROW(b.complete(request("x")), TimeoutError);
  EXPECT_EQ(t->calls.size(), 5u);
  // 500 + 1000 + 2000 + 2000
  EXPECT_EQ(clock->total_slept(), milliseconds(5500));
  EXPECT_EQ(b.stats().failures.load(), 1);
}

TEST(Http, TransportErrorIsRetried) {
  auto t = std::make_shared<FakeTransport>();
  t->push_transport_error();
  t->push(200, chat_ok("fine"));
  HttpBackend b(openai_config(), t, nullptr, std::make_shared<FakeClock>());
  EXPECT_EQ(b.complete(request("x")).text, "fine");
}

TEST(Http, NonTransientIsTypedError) {
  auto t = std::make_shared<FakeTransport>();
  t->push(401, R"({"error":"bad key"})");
  HttpBackend b(openai_config(), t, nullptr, std::make_shared<FakeClock>());
  try {
    b.complete(request("x"));
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 401);
    EXPECT_NE(e.body_excerpt().find("bad key"), std::string::npos);
  }
  EXPECT_EQ(t->calls.size(), 1u);
}

TEST(Http, EmptyPromptNeverReachesTransport) {
  auto t = std::make_shared<FakeTransport>();
  HttpBackend b(openai_config(), t, nullptr, std::make_shared<FakeClock>());
  EXPECT_THROW(b.complete(request("")), std::invalid_argument);
  EXPECT_TRUE(t->calls.empty());
}

TEST(Http, MalformedResponse) {
  auto t = std::make_shared<FakeTransport>();
  t->push(200, "not json");
  t->push(200, R"({"choices":[]})");
  HttpBackend b(openai_config(), t, nullptr, std::make_shared<FakeClock>());
  EXPECT_THROW(b.complete(request("x")), ApiError);
  EXPECT_THROW(b.complete(request("x")), ApiError);
}

TEST(HttpScorer, CapabilityCheckedAtConstruction) {
  auto t = std::make_shared<FakeTransport>();
  EXPECT_THROW(HttpScorer(openai_config(), t), CapabilityError);
  HttpBackendConfig c = openai_config();
  c.supports_logprobs = true;
  c.style = ApiStyle::kGemini;
  EXPECT_THROW(HttpScorer(c, t), CapabilityError);
  EXPECT_TRUE(t->calls.empty());
}

TEST(HttpScorer, SumsContinuationTokens) {
  auto t = std::make_shared<FakeTransport>();
  // prompt "ab" (2 bytes) + continuation "cd" (2 bytes) + one generated token.
  t->push(200, R"({"choices":[{"logprobs":{"text_offset":[0,1,2,3,4],
      "token_logprobs":[null,-0.5,-1.25,-0.25,-9.0]}}]})");
  HttpBackendConfig c = openai_config();
  c.supports_logprobs = true;
  HttpScorer s(c, t, nullptr, std::make_shared<FakeClock>());
  EXPECT_DOUBLE_EQ(s.loglikelihood("ab", "cd"), -1.5);
  json body = json::parse(t->calls[0].body);
  EXPECT_EQ(body["prompt"], "abcd");
  EXPECT_EQ(body["echo"], true);
  EXPECT_EQ(t->calls[0].path, "/completions");
}

TEST(RateLimiter, NeverExceedsCeiling) {
  auto clock = std::make_shared<FakeClock>();
  RateLimiter lim(2, milliseconds(1000), clock);
  {
    auto p1 = lim.acquire();
    auto p2 = lim.acquire();
    EXPECT_EQ(lim.occupancy(), 2u);
  }
  // Both finished but still inside the window.
  EXPECT_EQ(lim.occupancy(), 2u);
  clock->advance(milliseconds(1001));
  EXPECT_EQ(lim.occupancy(), 0u);
}

TEST(RateLimiter, BlockedAcquireWaitsForWindow) {
  auto clock = std::make_shared<FakeClock>();
  RateLimiter lim(1, milliseconds(1000), clock);
  { auto p = lim.acquire(); }
  auto p = lim.acquire();  // must sleep the fake clock past the window
  EXPECT_GE(clock->total_slept(), milliseconds(1000));
  EXPECT_LE(lim.occupancy(), 1u);
}

TEST(RateLimiter, ConcurrentCallersRespectCeiling) {
  auto clock = std::make_shared<SteadyClock>();
  RateLimiter lim(3, milliseconds(20), clock);
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      for (int k = 0; k < 3; ++k) {
        auto p = lim.acquire();
        int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        EXPECT_LE(lim.occupancy(), 3u);
        --in_flight;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 3);
}

TEST(RateLimiter, UnlimitedWhenCeilingZero) {
  auto clock = std::make_shared<FakeClock>();
  RateLimiter lim(0, milliseconds(1000), clock);
  std::vector<RateLimiter::Permit> permits;
  for (int i = 0; i < 50; ++i) permits.push_back(lim.acquire());
  EXPECT_EQ(clock->total_slept(), Clock::Duration(0));
}

}  // namespace
}  // namespace figcap::llm
