#pragma once

// Resource directory: workers register their service resources, clients look
// them up by resource type and semantic query. Registrations expire after
// their lifetime against an injected clock. Also the home of reservation
// tokens, so concurrent binds against one directory contend here.

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpus/errors.hpp"
#include "cpus/service_model.hpp"
#include "cpus/sim.hpp"

namespace cpus {

inline constexpr int64_t kDefaultLifetimeS = 90000;  // resource-directory convention

struct ResourceLink {
    std::string path;           // e.g. "/pickAndPlace"
    std::string resource_type;  // e.g. "as:Service"
    ServiceDescription description;
};

struct Registration {
    std::string id;
    std::string endpoint_name;
    int64_t lifetime_s = kDefaultLifetimeS;
    int64_t registered_at_us = 0;
    std::vector<ResourceLink> links;

    bool expired_at(int64_t now_us) const {
        return registered_at_us + lifetime_s * 1'000'000 <= now_us;
    }
};

class Registry {
public:
    explicit Registry(const Clock* clock) : clock_(clock) {}

    /// Registers (or replaces) an endpoint's links; resets its lifetime.
    std::string register_endpoint(const std::string& endpoint_name, int64_t lifetime_s,
                                  std::vector<ResourceLink> links) {
        if (lifetime_s <= 0) throw InvalidLifetime();
        if (links.empty()) throw EmptyLinks();
        for (size_t i = 0; i < links.size(); i++)
            for (size_t j = i + 1; j < links.size(); j++)
                if (links[i].path == links[j].path)
                    throw ConfigError("duplicate resource path in registration: " +
                                      links[i].path);
        std::lock_guard lock(mutex_);
        Registration reg;
        reg.id = std::to_string(next_id_++);
        reg.endpoint_name = endpoint_name;
        reg.lifetime_s = lifetime_s;
        reg.registered_at_us = clock_->now_us();
        reg.links = std::move(links);
        regs_[endpoint_name] = std::move(reg);  // replacement is atomic under the lock
        return regs_[endpoint_name].id;
    }

    /// Live links passing the optional resourceType filter and query.
    std::vector<std::pair<std::string, ResourceLink>> lookup(
        const std::optional<std::string>& resource_type = std::nullopt,
        const ServiceQuery* query = nullptr) const {
        std::lock_guard lock(mutex_);
        std::vector<std::pair<std::string, ResourceLink>> out;
        int64_t now = clock_->now_us();
        for (const auto& [ep, reg] : regs_) {
            if (reg.expired_at(now)) continue;
            for (const auto& link : reg.links) {
                if (resource_type && link.resource_type != *resource_type) continue;
                if (query && !matches(*query, link.description)) continue;
                out.emplace_back(ep, link);
            }
        }
        return out;
    }

    /// Removes every registration whose lifetime elapsed at `now`; idempotent.
    int sweep_expired(int64_t now_us) {
        std::lock_guard lock(mutex_);
        int removed = 0;
        for (auto it = regs_.begin(); it != regs_.end();) {
            if (it->second.expired_at(now_us)) {
                it = regs_.erase(it);
                removed++;
            } else {
                ++it;
            }
        }
        return removed;
    }

    bool remove(const std::string& endpoint_name) {
        std::lock_guard lock(mutex_);
        return regs_.erase(endpoint_name) > 0;
    }

    std::optional<Registration> registration(const std::string& endpoint_name) const {
        std::lock_guard lock(mutex_);
        auto it = regs_.find(endpoint_name);
        if (it == regs_.end() || it->second.expired_at(clock_->now_us())) return std::nullopt;
        return it->second;
    }

    size_t live_count() const {
        std::lock_guard lock(mutex_);
        size_t n = 0;
        int64_t now = clock_->now_us();
        for (const auto& [ep, reg] : regs_)
            if (!reg.expired_at(now)) n++;
        return n;
    }

    // ---- reservation tokens (exclusive per worker) ----

    void reserve(const std::string& worker, const std::string& holder) {
        std::lock_guard lock(mutex_);
        auto it = reservations_.find(worker);
        if (it != reservations_.end() && it->second != holder)
            throw ReservationConflict(worker);
        reservations_[worker] = holder;
    }

    void release(const std::string& worker, const std::string& holder) {
        std::lock_guard lock(mutex_);
        auto it = reservations_.find(worker);
        if (it != reservations_.end() && it->second == holder) reservations_.erase(it);
    }

    void release_all(const std::string& holder) {
        std::lock_guard lock(mutex_);
        for (auto it = reservations_.begin(); it != reservations_.end();)
            it = it->second == holder ? reservations_.erase(it) : std::next(it);
    }

    std::map<std::string, std::string> reservations() const {
        std::lock_guard lock(mutex_);
        return reservations_;
    }

private:
    const Clock* clock_;
    mutable std::mutex mutex_;
    std::map<std::string, Registration> regs_;
    std::map<std::string, std::string> reservations_;
    uint64_t next_id_ = 1;
};

// Discovery-side registry access, implemented in-process or over the wire.
class ServiceSource {
public:
    virtual ~ServiceSource() = default;
    virtual std::vector<std::pair<std::string, ResourceLink>> lookup(
        const std::optional<std::string>& resource_type, const ServiceQuery* query) = 0;
    virtual void reserve(const std::string& worker, const std::string& holder) = 0;
    virtual void release(const std::string& worker, const std::string& holder) = 0;
};

class LocalServiceSource : public ServiceSource {
public:
    explicit LocalServiceSource(Registry& r) : registry_(r) {}

    std::vector<std::pair<std::string, ResourceLink>> lookup(
        const std::optional<std::string>& resource_type, const ServiceQuery* query) override {
        return registry_.lookup(resource_type, query);
    }
    void reserve(const std::string& worker, const std::string& holder) override {
        registry_.reserve(worker, holder);
    }
    void release(const std::string& worker, const std::string& holder) override {
        registry_.release(worker, holder);
    }

private:
    Registry& registry_;
};

// Registration-side access used by the platform's workers.
class RegistryLink {
public:
    virtual ~RegistryLink() = default;
    virtual std::string register_endpoint(const std::string& endpoint_name, int64_t lifetime_s,
                                          std::vector<ResourceLink> links) = 0;
    virtual void remove(const std::string& endpoint_name) = 0;
};

class LocalRegistryLink : public RegistryLink {
public:
    explicit LocalRegistryLink(Registry& r) : registry_(r) {}

    std::string register_endpoint(const std::string& endpoint_name, int64_t lifetime_s,
                                  std::vector<ResourceLink> links) override {
        return registry_.register_endpoint(endpoint_name, lifetime_s, std::move(links));
    }
    void remove(const std::string& endpoint_name) override { registry_.remove(endpoint_name); }

private:
    Registry& registry_;
};

}  // namespace cpus
