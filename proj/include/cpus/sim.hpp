#pragma once

// Discrete-event machinery shared by the registry, the platform and the
// runtime. Simulated time is microseconds on a virtual clock advanced by the
// scheduler; ties break on scheduling sequence, which keeps whole runs
// deterministic.

#include <chrono>
#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace cpus {

class Clock {
public:
    virtual ~Clock() = default;
    virtual int64_t now_us() const = 0;
};

class WallClock : public Clock {
public:
    int64_t now_us() const override {
        return std::chrono::duration_cast<std::chrono::microseconds>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    }
};

class SimClock : public Clock {
public:
    int64_t now_us() const override { return now_; }
    void set(int64_t t) { now_ = t; }
    void advance(int64_t delta) { now_ += delta; }

private:
    int64_t now_ = 0;
};

class Scheduler {
public:
    SimClock& clock() { return clock_; }
    const SimClock& clock() const { return clock_; }
    int64_t now_us() const { return clock_.now_us(); }

    void schedule_at(int64_t at_us, std::function<void()> fn) {
        if (at_us < clock_.now_us()) at_us = clock_.now_us();
        queue_.push(Entry{at_us, seq_++, std::move(fn)});
    }

    void schedule_in(int64_t delay_us, std::function<void()> fn) {
        schedule_at(clock_.now_us() + delay_us, std::move(fn));
    }

    bool idle() const { return queue_.empty(); }

    // Drains the event queue, advancing the clock to each event's timestamp.
    void run_until_idle() {
        while (!queue_.empty()) step();
    }

    void step() {
        if (queue_.empty()) return;
        Entry e = queue_.top();
        queue_.pop();
        clock_.set(e.at_us);
        e.fn();
    }

private:
    struct Entry {
        int64_t at_us;
        uint64_t seq;
        std::function<void()> fn;

        bool operator>(const Entry& o) const {
            return at_us != o.at_us ? at_us > o.at_us : seq > o.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
    SimClock clock_;
    uint64_t seq_ = 0;
};

}  // namespace cpus
