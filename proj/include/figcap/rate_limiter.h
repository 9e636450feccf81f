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

#ifndef FIGCAP_RATE_LIMITER_H_
#define FIGCAP_RATE_LIMITER_H_

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>

namespace figcap::llm {

class Clock {
 public:
  using Duration = std::chrono::nanoseconds;
  using TimePoint = std::chrono::time_point<std::chrono::steady_clock, Duration>;

  virtual ~Clock() = default;
  virtual TimePoint now() const = 0;
  virtual void sleep_for(Duration d) = 0;
};

class SteadyClock : public Clock {
 public:
  TimePoint now() const override;
  void sleep_for(Duration d) override;
};

// Test clock: sleep_for advances time instantly.
class FakeClock : public Clock {
 public:
  TimePoint now() const override;
  void sleep_for(Duration d) override;
  void advance(Duration d);
  Duration total_slept() const;

 private:
  mutable std::mutex mu_;
  TimePoint now_{};
  Duration slept_{0};
};

// Sliding-window limiter: at any instant, calls still in flight plus calls
// that started within the trailing window and already finished never exceed
// `ceiling`. A ceiling of 0 disables limiting.
class RateLimiter {
 public:
  class Permit {
   public:
    Permit() = default;
    Permit(Permit&& other) noexcept;
    Permit& operator=(Permit&& other) noexcept;
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    ~Permit();

   private:
    friend class RateLimiter;
    Permit(RateLimiter* owner, Clock::TimePoint start)
        : owner_(owner), start_(start) {}
    RateLimiter* owner_ = nullptr;
    Clock::TimePoint start_{};
  };

  RateLimiter(size_t ceiling, Clock::Duration window,
              std::shared_ptr<Clock> clock);

  // Blocks until a slot is free.
  Permit acquire();

  // in_flight + finished-within-window, at the clock's current time.
  size_t occupancy();
  size_t ceiling() const { return ceiling_; }

 private:
  void release(Clock::TimePoint start);
  void prune(Clock::TimePoint now);

  const size_t ceiling_;
  const Clock::Duration window_;
  std::shared_ptr<Clock> clock_;
  std::mutex mu_;
  std::condition_variable cv_;
  size_t in_flight_ = 0;
  std::deque<Clock::TimePoint> finished_starts_;
};

}  // namespace figcap::llm

#endif  // FIGCAP_RATE_LIMITER_H_
