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

// Offline backends. Every response is a pure function of the request and the
// seed, so whole pipeline runs are reproducible without a network.

#ifndef FIGCAP_MOCK_BACKEND_H_
#define FIGCAP_MOCK_BACKEND_H_

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "figcap/llm.h"

namespace figcap::llm {

enum class MockMode {
  // Deterministic synthetic answers per request purpose; generation output
  // starts with a "CAT:<category>" marker naming the template used.
  kEcho,
  // Returns the text inside a "<<gold:...>>" marker found in the prompt,
  // falling back to kEcho when there is none.
  kGold,
  // Replays a fixture transcript.
  kScripted,
};

MockMode parse_mock_mode(std::string_view s);

struct ScriptEntry {
  std::string purpose;   // empty matches any purpose
  std::string contains;  // empty matches any prompt
  std::string response;
};

// Reads a transcript: a JSON array (or {"entries": [...]}) of objects with
// optional "purpose"/"contains" and required "response".
std::vector<ScriptEntry> load_script(const std::string& path);

struct MockOptions {
  MockMode mode = MockMode::kEcho;
  uint64_t seed = 0;
  std::vector<ScriptEntry> script;
  std::string model_id = "mock";
};

class MockBackend : public LlmBackend, public LikelihoodScorer {
 public:
  explicit MockBackend(MockOptions options = {});

  LlmResponse complete(const LlmRequest& request) override;
  std::string model_id() const override { return options_.model_id; }

  // Each continuation token contributes a hash-derived value in [-5, 0).
  double loglikelihood(const std::string& prompt,
                       const std::string& continuation) override;

 private:
  std::string echo_response(const LlmRequest& request, uint64_t seed) const;
  std::string scripted_response(const LlmRequest& request) const;

  MockOptions options_;
};

// Backend whose answers come from a callable; for tests and bindings.
class CallbackBackend : public LlmBackend {
 public:
  using Fn = std::function<std::string(const LlmRequest&)>;
  explicit CallbackBackend(Fn fn, std::string model_id = "callback");

  LlmResponse complete(const LlmRequest& request) override;
  std::string model_id() const override { return model_id_; }

 private:
  Fn fn_;
  std::string model_id_;
};

class CallbackScorer : public LikelihoodScorer {
 public:
  using Fn = std::function<double(const std::string&, const std::string&)>;
  explicit CallbackScorer(Fn fn) : fn_(std::move(fn)) {}
  double loglikelihood(const std::string& prompt,
                       const std::string& continuation) override {
    return fn_(prompt, continuation);
  }

 private:
  Fn fn_;
};

// Removes a leading "CAT:<category>" marker left by the echo mock.
std::string strip_category_marker(std::string_view text);

}  // namespace figcap::llm

#endif  // FIGCAP_MOCK_BACKEND_H_
