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

#include "figcap/llm.h"

#include <sstream>

#include "figcap/common.h"

namespace figcap::llm {

ApiError::ApiError(int status, std::string body_excerpt)
    : LlmError("API error " + std::to_string(status) + ": " + body_excerpt),
      status_(status),
      body_(std::move(body_excerpt)) {}

void validate_request(const LlmRequest& request) {
  if (trim(request.prompt).empty()) {
    throw std::invalid_argument("LLM request prompt is empty");
  }
  if (request.temperature < 0) {
    throw std::invalid_argument("LLM request temperature is negative");
  }
  if (request.max_tokens <= 0) {
    throw std::invalid_argument("LLM request max_tokens must be positive");
  }
}

int approx_token_count(const std::string& text) {
  std::istringstream in(text);
  std::string w;
  int n = 0;
  while (in >> w) ++n;
  return n;
}

}  // namespace figcap::llm
