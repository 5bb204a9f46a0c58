#pragma once

// In-process topic bus. Topics are slash-delimited paths; a subscription
// pattern is either an exact topic or a prefix ending in "#". Delivery is
// synchronous, in subscription order, at-least-once for subscribers
// registered before the publish.

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

namespace cpus {

struct Event {
    std::string topic;
    std::string payload;
    int64_t timestamp = 0;
};

class EventBus {
public:
    using Handler = std::function<void(const Event&)>;

    uint64_t subscribe(const std::string& pattern, Handler handler) {
        std::lock_guard lock(mutex_);
        subs_.push_back({next_id_, pattern, std::move(handler)});
        return next_id_++;
    }

    void unsubscribe(uint64_t id) {
        std::lock_guard lock(mutex_);
        for (auto it = subs_.begin(); it != subs_.end(); ++it)
            if (it->id == id) {
                subs_.erase(it);
                return;
            }
    }

    void publish(const Event& event) {
        std::vector<Handler> targets;
        {
            std::lock_guard lock(mutex_);
            for (const auto& s : subs_)
                if (matches(s.pattern, event.topic)) targets.push_back(s.handler);
        }
        for (auto& h : targets) h(event);
    }

    static bool matches(const std::string& pattern, const std::string& topic) {
        if (pattern == "#") return true;
        if (!pattern.empty() && pattern.back() == '#')
            return topic.rfind(pattern.substr(0, pattern.size() - 1), 0) == 0;
        return pattern == topic;
    }

private:
    struct Subscription {
        uint64_t id;
        std::string pattern;
        Handler handler;
    };

    std::mutex mutex_;
    std::vector<Subscription> subs_;
    uint64_t next_id_ = 1;
};

}  // namespace cpus
