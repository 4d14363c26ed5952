#include "plp/clock.hpp"

#include <thread>

#include "plp/errors.hpp"

namespace plp {

Clock::time_point SystemClock::now() {
    return std::chrono::time_point_cast<duration>(std::chrono::steady_clock::now());
}

void SystemClock::sleep_until(time_point t) { std::this_thread::sleep_until(t); }

Clock::time_point FakeClock::now() {
    std::lock_guard lock(mutex_);
    return now_;
}

void FakeClock::sleep_until(time_point t) {
    std::lock_guard lock(mutex_);
    if (t > now_) now_ = t;
}

void FakeClock::advance(duration d) {
    std::lock_guard lock(mutex_);
    now_ += d;
}

Clock& system_clock() {
    static SystemClock clock;
    return clock;
}

RateLimiter::RateLimiter(int requests_per_minute, Clock& clock)
    : limit_(requests_per_minute), clock_(clock) {
    if (requests_per_minute <= 0) throw ConfigError("requests_per_minute must be positive");
}

void RateLimiter::acquire() {
    constexpr auto window = std::chrono::minutes(1);
    std::lock_guard lock(mutex_);
    auto now = clock_.now();
    while (!issued_.empty() && issued_.front() + window <= now) issued_.pop_front();
    if (static_cast<int>(issued_.size()) >= limit_) {
        clock_.sleep_until(issued_.front() + window);
        now = clock_.now();
        while (!issued_.empty() && issued_.front() + window <= now) issued_.pop_front();
    }
    issued_.push_back(now);
}

}  // namespace plp
