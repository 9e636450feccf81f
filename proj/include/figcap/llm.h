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

// Backend abstraction for chat generation and continuation scoring.

#ifndef FIGCAP_LLM_H_
#define FIGCAP_LLM_H_

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace figcap::llm {

struct LlmRequest {
  std::optional<std::string> system;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 256;
  std::optional<int64_t> seed;

  // Call-site metadata. Never sent over the wire; used by the audit trail
  // and by offline backends. `purpose` is one of: generate, rerank, refine,
  // propose_instruction, propose_rule.
  std::string purpose;
  std::map<std::string, std::string> hints;
};

struct LlmResponse {
  std::string text;
  int token_count = 0;
  std::chrono::milliseconds latency{0};
  std::string model_id;
};

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-transient API failure (4xx other than 408/429, malformed payloads).
class ApiError : public LlmError {
 public:
  ApiError(int status, std::string body_excerpt);
  int status() const { return status_; }
  const std::string& body_excerpt() const { return body_; }

 private:
  int status_;
  std::string body_;
};

// Retries exhausted on transient failures, or a call exceeded its deadline.
class TimeoutError : public LlmError {
 public:
  using LlmError::LlmError;
};

// The backend cannot do what was configured (e.g. log-probabilities).
class CapabilityError : public LlmError {
 public:
  using LlmError::LlmError;
};

// Total log-likelihood of `continuation` given `prompt`.
class LikelihoodScorer {
 public:
  virtual ~LikelihoodScorer() = default;
  // Must tolerate concurrent calls.
  virtual double loglikelihood(const std::string& prompt,
                               const std::string& continuation) = 0;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  // Must tolerate concurrent calls. Throws std::invalid_argument on an empty
  // prompt before any I/O.
  virtual LlmResponse complete(const LlmRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

// Throws std::invalid_argument unless the request is well formed.
void validate_request(const LlmRequest& request);

// Whitespace-delimited word count, the unit backends report in token_count
// when the server does not say.
int approx_token_count(const std::string& text);

}  // namespace figcap::llm

#endif  // FIGCAP_LLM_H_
