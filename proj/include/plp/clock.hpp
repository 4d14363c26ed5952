#pragma once

#include <chrono>
#include <deque>
#include <mutex>

namespace plp {

class Clock {
public:
    using duration = std::chrono::nanoseconds;
    using time_point = std::chrono::time_point<std::chrono::steady_clock, duration>;

    virtual ~Clock() = default;
    virtual time_point now() = 0;
    virtual void sleep_until(time_point t) = 0;

    void sleep_for(duration d) { sleep_until(now() + d); }
};

class SystemClock final : public Clock {
public:
    time_point now() override;
    void sleep_until(time_point t) override;
};

// Time only moves when someone sleeps.
class FakeClock final : public Clock {
public:
    time_point now() override;
    void sleep_until(time_point t) override;
    void advance(duration d);

private:
    std::mutex mutex_;
    time_point now_{};
};

Clock& system_clock();

// At most requests_per_minute acquisitions in any half-open 60 s window.
// acquire() blocks (via the clock) until a slot is free. Thread-safe.
class RateLimiter {
public:
    RateLimiter(int requests_per_minute, Clock& clock);

    void acquire();
    int requests_per_minute() const noexcept { return limit_; }

private:
    int limit_;
    Clock& clock_;
    std::mutex mutex_;
    std::deque<Clock::time_point> issued_;
};

}  // namespace plp
