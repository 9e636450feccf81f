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

// Live backends speaking the OpenAI-compatible chat-completion protocol, with
// an adapter for Gemini's native generateContent endpoint.

#ifndef FIGCAP_HTTP_BACKEND_H_
#define FIGCAP_HTTP_BACKEND_H_

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <string>

#include "figcap/llm.h"
#include "figcap/rate_limiter.h"

namespace figcap::llm {

struct HttpResult {
  int status = 0;
  std::string body;
};

// Connection-level failure (refused, reset, read timeout). Always transient.
class TransportError : public LlmError {
 public:
  using LlmError::LlmError;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // POSTs `body` to base_url + path. Throws TransportError when no HTTP
  // response was obtained.
  virtual HttpResult post(const std::string& path, const std::string& body,
                          const std::map<std::string, std::string>& headers,
                          std::chrono::milliseconds timeout) = 0;
};

// cpp-httplib transport with a small pool of keep-alive clients.
std::shared_ptr<HttpTransport> make_httplib_transport(
    const std::string& base_url);

enum class ApiStyle { kOpenAI, kGemini };

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
};

struct HttpBackendConfig {
  ApiStyle style = ApiStyle::kOpenAI;
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model_id;
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
  // Whether the server returns prompt log-probabilities on /completions
  // with echo=true (vLLM and similar).
  bool supports_logprobs = false;
};

struct CallStats {
  std::atomic<long> requests{0};
  std::atomic<long> retries{0};
  std::atomic<long> successes{0};
  std::atomic<long> failures{0};
};

bool is_transient_status(int status);

// Shared request loop: rate limit, timeout, exponential backoff on transient
// failures, typed errors otherwise.
class HttpCaller {
 public:
  HttpCaller(HttpBackendConfig config, std::shared_ptr<HttpTransport> transport,
             std::shared_ptr<RateLimiter> limiter, std::shared_ptr<Clock> clock);

  // Returns the body of the first 2xx response.
  std::string post_json(const std::string& path, const std::string& body,
                        const std::map<std::string, std::string>& headers);

  const HttpBackendConfig& config() const { return config_; }
  const CallStats& stats() const { return stats_; }

 private:
  HttpBackendConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<RateLimiter> limiter_;
  std::shared_ptr<Clock> clock_;
  CallStats stats_;
};

class HttpBackend : public LlmBackend {
 public:
  // A null limiter disables rate limiting; a null clock means SteadyClock.
  HttpBackend(HttpBackendConfig config, std::shared_ptr<HttpTransport> transport,
              std::shared_ptr<RateLimiter> limiter = nullptr,
              std::shared_ptr<Clock> clock = nullptr);

  LlmResponse complete(const LlmRequest& request) override;
  std::string model_id() const override;
  const CallStats& stats() const { return caller_.stats(); }

  // Request payload for the configured wire style, exposed for tests.
  std::string build_payload(const LlmRequest& request) const;

 private:
  HttpCaller caller_;
};

// Continuation scoring through the legacy /completions endpoint with
// echo=true. Construction fails with CapabilityError when the configuration
// does not declare log-probability support.
class HttpScorer : public LikelihoodScorer {
 public:
  HttpScorer(HttpBackendConfig config, std::shared_ptr<HttpTransport> transport,
             std::shared_ptr<RateLimiter> limiter = nullptr,
             std::shared_ptr<Clock> clock = nullptr);

  double loglikelihood(const std::string& prompt,
                       const std::string& continuation) override;

 private:
  HttpCaller caller_;
};

// Sums the echoed log-probabilities of tokens that start at or after
// `prompt_bytes` and before `total_bytes`. Exposed for tests.
double sum_continuation_logprobs(const std::string& response_body,
                                 size_t prompt_bytes, size_t total_bytes);

}  // namespace figcap::llm

#endif  // FIGCAP_HTTP_BACKEND_H_
