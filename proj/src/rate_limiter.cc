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

#include "figcap/rate_limiter.h"

#include <algorithm>
#include <thread>

namespace figcap::llm {

Clock::TimePoint SteadyClock::now() const {
  return std::chrono::time_point_cast<Duration>(
      std::chrono::steady_clock::now());
}

void SteadyClock::sleep_for(Duration d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

Clock::TimePoint FakeClock::now() const {
  std::lock_guard<std::mutex> lock(mu_);
  return now_;
}

void FakeClock::sleep_for(Duration d) {
  std::lock_guard<std::mutex> lock(mu_);
  if (d.count() > 0) {
    now_ += d;
    slept_ += d;
  }
}

void FakeClock::advance(Duration d) {
  std::lock_guard<std::mutex> lock(mu_);
  now_ += d;
}

Clock::Duration FakeClock::total_slept() const {
  std::lock_guard<std::mutex> lock(mu_);
  return slept_;
}

RateLimiter::Permit::Permit(Permit&& other) noexcept
    : owner_(other.owner_), start_(other.start_) {
  other.owner_ = nullptr;
}

RateLimiter::Permit& RateLimiter::Permit::operator=(Permit&& other) noexcept {
  if (this != &other) {
    if (owner_) owner_->release(start_);
    owner_ = other.owner_;
    start_ = other.start_;
    other.owner_ = nullptr;
  }
  return *this;
}

RateLimiter::Permit::~Permit() {
  if (owner_) owner_->release(start_);
}

RateLimiter::RateLimiter(size_t ceiling, Clock::Duration window,
                         std::shared_ptr<Clock> clock)
    : ceiling_(ceiling), window_(window), clock_(std::move(clock)) {}

void RateLimiter::prune(Clock::TimePoint now) {
  while (!finished_starts_.empty() && finished_starts_.front() + window_ <= now) {
    finished_starts_.pop_front();
  }
}

RateLimiter::Permit RateLimiter::acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  while (true) {
    const Clock::TimePoint now = clock_->now();
    prune(now);
    if (ceiling_ == 0 || in_flight_ + finished_starts_.size() < ceiling_) {
      ++in_flight_;
      return Permit(this, now);
    }
    if (finished_starts_.empty()) {
      // Every slot is held by an in-flight call.
      cv_.wait(lock);
      continue;
    }
    const Clock::Duration wait = finished_starts_.front() + window_ - now;
    lock.unlock();
    clock_->sleep_for(wait);
    lock.lock();
  }
}

void RateLimiter::release(Clock::TimePoint start) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    --in_flight_;
    const Clock::TimePoint now = clock_->now();
    if (start + window_ > now) {
      auto pos =
          std::upper_bound(finished_starts_.begin(), finished_starts_.end(), start);
      finished_starts_.insert(pos, start);
    }
  }
  cv_.notify_all();
}

size_t RateLimiter::occupancy() {
  std::lock_guard<std::mutex> lock(mu_);
  prune(clock_->now());
  return in_flight_ + finished_starts_.size();
}

}  // namespace figcap::llm
