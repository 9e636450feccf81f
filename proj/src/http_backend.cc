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

#include "figcap/http_backend.h"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <vector>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace figcap::llm {

using nlohmann::json;

namespace {

constexpr size_t kBodyExcerpt = 512;

std::string excerpt(const std::string& body) {
  return body.size() <= kBodyExcerpt ? body : body.substr(0, kBodyExcerpt) + "...";
}

class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(const std::string& base_url) {
    // Split "scheme://host[:port]/prefix".
    size_t scheme_end = base_url.find("://");
    size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    size_t path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) {
      origin_ = base_url;
    } else {
      origin_ = base_url.substr(0, path_start);
      prefix_ = base_url.substr(path_start);
      while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
  }

  HttpResult post(const std::string& path, const std::string& body,
                  const std::map<std::string, std::string>& headers,
                  std::chrono::milliseconds timeout) override {
    std::unique_ptr<httplib::Client> client = checkout();
    client->set_connection_timeout(timeout);
    client->set_read_timeout(timeout);
    client->set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client->Post(prefix_ + path, h, body, "application/json");
    if (!res) {
      throw TransportError("HTTP transport error: " +
                           httplib::to_string(res.error()));
    }
    HttpResult out{res->status, res->body};
    checkin(std::move(client));
    return out;
  }

 private:
  std::unique_ptr<httplib::Client> checkout() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!idle_.empty()) {
        auto c = std::move(idle_.back());
        idle_.pop_back();
        return c;
      }
    }
    auto c = std::make_unique<httplib::Client>(origin_);
    c->set_keep_alive(true);
    return c;
  }

  void checkin(std::unique_ptr<httplib::Client> c) {
    std::lock_guard<std::mutex> lock(mu_);
    if (idle_.size() < 16) idle_.push_back(std::move(c));
  }

  std::string origin_;
  std::string prefix_;
  std::mutex mu_;
  std::vector<std::unique_ptr<httplib::Client>> idle_;
};

std::map<std::string, std::string> auth_headers(const HttpBackendConfig& c) {
  std::map<std::string, std::string> h;
  if (c.api_key.empty()) return h;
  if (c.style == ApiStyle::kGemini) {
    h["x-goog-api-key"] = c.api_key;
  } else {
    h["Authorization"] = "Bearer " + c.api_key;
  }
  return h;
}

std::string chat_path(const HttpBackendConfig& c) {
  if (c.style == ApiStyle::kGemini) {
    return "/models/" + c.model_id + ":generateContent";
  }
  return "/chat/completions";
}

}  // namespace

std::shared_ptr<HttpTransport> make_httplib_transport(
    const std::string& base_url) {
  return std::make_shared<HttplibTransport>(base_url);
}

bool is_transient_status(int status) {
  return status == 408 || status == 429 || status == 500 || status == 502 ||
         status == 503 || status == 504;
}

HttpCaller::HttpCaller(HttpBackendConfig config,
                       std::shared_ptr<HttpTransport> transport,
                       std::shared_ptr<RateLimiter> limiter,
                       std::shared_ptr<Clock> clock)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      limiter_(std::move(limiter)),
      clock_(clock ? std::move(clock) : std::make_shared<SteadyClock>()) {
  if (!transport_) throw std::invalid_argument("HTTP transport is null");
}

std::string HttpCaller::post_json(
    const std::string& path, const std::string& body,
    const std::map<std::string, std::string>& headers) {
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) {
      ++stats_.retries;
      auto delay = config_.retry.base_delay * (1LL << std::min(attempt - 1, 20));
      clock_->sleep_for(std::min<std::chrono::nanoseconds>(
          delay, config_.retry.max_delay));
    }
    ++stats_.requests;
    HttpResult res;
    try {
      RateLimiter::Permit permit;
      if (limiter_) permit = limiter_->acquire();
      res = transport_->post(path, body, headers, config_.timeout);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (res.status >= 200 && res.status < 300) {
      ++stats_.successes;
      return res.body;
    }
    if (!is_transient_status(res.status)) {
      ++stats_.failures;
      throw ApiError(res.status, excerpt(res.body));
    }
    last_error = "HTTP " + std::to_string(res.status) + ": " + excerpt(res.body);
  }
  ++stats_.failures;
  throw TimeoutError("retries exhausted after " +
                     std::to_string(config_.retry.max_retries + 1) +
                     " attempts; last error: " + last_error);
}

HttpBackend::HttpBackend(HttpBackendConfig config,
                         std::shared_ptr<HttpTransport> transport,
                         std::shared_ptr<RateLimiter> limiter,
                         std::shared_ptr<Clock> clock)
    : caller_(std::move(config), std::move(transport), std::move(limiter),
              std::move(clock)) {
  if (caller_.config().model_id.empty()) {
    throw std::invalid_argument("backend model_id must be set");
  }
}

std::string HttpBackend::model_id() const { return caller_.config().model_id; }

std::string HttpBackend::build_payload(const LlmRequest& req) const {
  const HttpBackendConfig& c = caller_.config();
  json body;
  if (c.style == ApiStyle::kGemini) {
    body["contents"] = json::array(
        {{{"role", "user"}, {"parts", json::array({{{"text", req.prompt}}})}}});
    if (req.system) {
      body["systemInstruction"] = {{"parts", json::array({{{"text", *req.system}}})}};
    }
    json gen = {{"temperature", req.temperature},
                {"maxOutputTokens", req.max_tokens}};
    if (req.seed) gen["seed"] = *req.seed;
    body["generationConfig"] = std::move(gen);
  } else {
    json messages = json::array();
    if (req.system) messages.push_back({{"role", "system"}, {"content", *req.system}});
    messages.push_back({{"role", "user"}, {"content", req.prompt}});
    body["model"] = c.model_id;
    body["messages"] = std::move(messages);
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;
    if (req.seed) body["seed"] = *req.seed;
  }
  return body.dump();
}

LlmResponse HttpBackend::complete(const LlmRequest& req) {
  validate_request(req);
  const HttpBackendConfig& c = caller_.config();
  const auto start = std::chrono::steady_clock::now();
  std::string raw = caller_.post_json(chat_path(c), build_payload(req),
                                      auth_headers(c));
  LlmResponse out;
  out.model_id = c.model_id;
  json j = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ApiError(200, "response is not JSON: " + excerpt(raw));
  try {
    if (c.style == ApiStyle::kGemini) {
      const json& parts = j.at("candidates").at(0).at("content").at("parts");
      for (const json& p : parts) {
        if (p.contains("text")) out.text += p.at("text").get<std::string>();
      }
      if (j.contains("usageMetadata") &&
          j["usageMetadata"].contains("candidatesTokenCount")) {
        out.token_count = j["usageMetadata"]["candidatesTokenCount"].get<int>();
      }
    } else {
      const json& msg = j.at("choices").at(0).at("message");
      out.text = msg.at("content").is_null() ? "" : msg.at("content").get<std::string>();
      if (j.contains("usage") && j["usage"].contains("completion_tokens")) {
        out.token_count = j["usage"]["completion_tokens"].get<int>();
      }
    }
  } catch (const json::exception& e) {
    throw ApiError(200, std::string("unexpected response shape: ") + e.what());
  }
  if (out.token_count <= 0) out.token_count = approx_token_count(out.text);
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  return out;
}

HttpScorer::HttpScorer(HttpBackendConfig config,
                       std::shared_ptr<HttpTransport> transport,
                       std::shared_ptr<RateLimiter> limiter,
                       std::shared_ptr<Clock> clock)
    : caller_(std::move(config), std::move(transport), std::move(limiter),
              std::move(clock)) {
  if (!caller_.config().supports_logprobs) {
    throw CapabilityError("backend '" + caller_.config().model_id +
                          "' is not configured with log-probability support");
  }
  if (caller_.config().style != ApiStyle::kOpenAI) {
    throw CapabilityError("log-likelihood scoring needs an OpenAI-compatible "
                          "/completions endpoint");
  }
}

double sum_continuation_logprobs(const std::string& response_body,
                                 size_t prompt_bytes, size_t total_bytes) {
  json j = json::parse(response_body, nullptr, false);
  if (j.is_discarded()) throw ApiError(200, "response is not JSON");
  try {
    const json& lp = j.at("choices").at(0).at("logprobs");
    const json& offsets = lp.at("text_offset");
    const json& values = lp.at("token_logprobs");
    double total = 0.0;
    size_t used = 0;
    for (size_t i = 0; i < offsets.size() && i < values.size(); ++i) {
      size_t off = offsets[i].get<size_t>();
      if (off < prompt_bytes || off >= total_bytes) continue;
      if (values[i].is_null()) continue;
      double v = values[i].get<double>();
      if (!std::isfinite(v)) throw ApiError(200, "non-finite log-probability");
      total += v;
      ++used;
    }
    if (used == 0) throw ApiError(200, "no continuation tokens in logprobs");
    return total;
  } catch (const json::exception& e) {
    throw ApiError(200, std::string("unexpected logprobs shape: ") + e.what());
  }
}

double HttpScorer::loglikelihood(const std::string& prompt,
                                 const std::string& continuation) {
  if (continuation.empty()) {
    throw std::invalid_argument("continuation must be non-empty");
  }
  const HttpBackendConfig& c = caller_.config();
  const std::string full = prompt + continuation;
  json body = {{"model", c.model_id}, {"prompt", full},  {"max_tokens", 1},
               {"temperature", 0.0},  {"echo", true},    {"logprobs", 1}};
  std::string raw = caller_.post_json("/completions", body.dump(), auth_headers(c));
  return sum_continuation_logprobs(raw, prompt.size(), full.size());
}

}  // namespace figcap::llm
