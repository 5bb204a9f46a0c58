#pragma once

// Simulated assembly platform: workers exposing services with operation-space
// preconditions and declarative effects, workbenches with rotating fixtures,
// and tracked physical objects. Execution is asynchronous over the shared
// discrete-event scheduler; a blocking variant backs the wire EXECUTE server.

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "cpus/errors.hpp"
#include "cpus/event_bus.hpp"
#include "cpus/registry.hpp"
#include "cpus/service_model.hpp"
#include "cpus/sim.hpp"

namespace cpus {

struct OperationSpace {
    std::string location = "*";  // position id or "*" (anywhere within reach)
    std::string state = "*";     // state label or "*"
};

struct ServiceEffect {
    std::optional<std::string> state;
    std::optional<std::string> location;
};

struct WorkerService {
    std::string path;  // e.g. "/pickAndPlace"
    ServiceDescription description;
    int64_t latency_us = 1;
    OperationSpace opspace;
    ServiceEffect effect;
};

enum class WorkerStatus { Idle, Busy, Failed };

struct WorkerSim {
    std::string name;
    std::vector<WorkerService> services;
    std::vector<std::string> reach;  // position ids the worker can serve
    WorkerStatus status = WorkerStatus::Idle;
    int64_t lifetime_s = kDefaultLifetimeS;
    std::string in_flight_object;

    const WorkerService* find_service(const std::string& path) const {
        for (const auto& s : services)
            if (s.path == path) return &s;
        return nullptr;
    }
};

struct WorkbenchSim {
    std::string name;
    std::vector<std::string> fixtures;
    std::vector<std::string> positions;             // global ids, rotation order
    std::map<std::string, std::string> occupancy;  // position -> fixture
    bool rotating = false;
};

struct PhysicalObject {
    std::string id;
    std::string location;  // position id
    std::string state;
    std::string represents;  // product part whose subtree's tasks act on it
};

struct FailureEvent {
    std::string worker;
    int64_t at_us = 0;
    std::optional<int64_t> recover_at_us;
};

struct Scenario {
    std::string name;
    std::vector<WorkerSim> workers;
    std::vector<WorkbenchSim> benches;
    std::vector<PhysicalObject> objects;
    std::vector<FailureEvent> failures;
    int64_t rotate_latency_us = 2000;
    int64_t transfer_latency_us = 3000;
};

struct ExecResult {
    enum class Status {
        Success,
        WorkerBusy,
        WorkerFailed,
        NoSuchService,
        PreconditionFailed,
        BenchBusy
    };

    Status status = Status::Success;
    int64_t rtt_us = 0;
    std::string detail;

    bool ok() const { return status == Status::Success; }
};

inline const char* to_string(ExecResult::Status s) {
    switch (s) {
        case ExecResult::Status::Success: return "success";
        case ExecResult::Status::WorkerBusy: return "worker_busy";
        case ExecResult::Status::WorkerFailed: return "worker_failed";
        case ExecResult::Status::NoSuchService: return "no_such_service";
        case ExecResult::Status::PreconditionFailed: return "precondition_failed";
        case ExecResult::Status::BenchBusy: return "bench_busy";
    }
    return "unknown";
}

// ---- scenario config --------------------------------------------------------

inline Scenario scenario_from_json(const nlohmann::ordered_json& j) {
    Scenario sc;
    try {
        sc.name = j.value("name", std::string("scenario"));
        sc.rotate_latency_us = j.value("rotate_latency_us", int64_t{2000});
        sc.transfer_latency_us = j.value("transfer_latency_us", int64_t{3000});
        if (sc.rotate_latency_us <= 0 || sc.transfer_latency_us <= 0)
            throw ConfigError("rotate/transfer latencies must be positive");

        std::set<std::string> positions;
        for (const auto& jb : j.value("workbenches", nlohmann::ordered_json::array())) {
            WorkbenchSim b;
            b.name = jb.at("name").get<std::string>();
            for (const auto& f : jb.at("fixtures")) b.fixtures.push_back(f.get<std::string>());
            for (const auto& p : jb.at("positions"))
                b.positions.push_back(b.name + "." + p.get<std::string>());
            if (b.fixtures.empty() || b.fixtures.size() != b.positions.size())
                throw ConfigError("workbench " + b.name +
                                  " needs equally many fixtures and positions");
            for (size_t i = 0; i < b.positions.size(); i++) {
                if (!positions.insert(b.positions[i]).second)
                    throw ConfigError("duplicate position " + b.positions[i]);
                b.occupancy[b.positions[i]] = b.fixtures[i];
            }
            for (const auto& other : sc.benches)
                if (other.name == b.name) throw ConfigError("duplicate workbench " + b.name);
            sc.benches.push_back(std::move(b));
        }

        std::set<std::string> worker_names;
        for (const auto& jw : j.value("workers", nlohmann::ordered_json::array())) {
            WorkerSim w;
            w.name = jw.at("name").get<std::string>();
            if (!worker_names.insert(w.name).second)
                throw ConfigError("duplicate worker name " + w.name);
            w.lifetime_s = jw.value("lifetime_s", kDefaultLifetimeS);
            for (const auto& r : jw.value("reach", nlohmann::ordered_json::array())) {
                std::string pos = r.get<std::string>();
                if (!positions.count(pos))
                    throw ConfigError("worker " + w.name + " reach names unknown position " +
                                      pos);
                w.reach.push_back(pos);
            }
            for (const auto& js : jw.at("services")) {
                WorkerService s;
                s.path = js.at("path").get<std::string>();
                if (s.path.empty() || s.path[0] != '/')
                    throw ConfigError("service path must start with '/': " + s.path);
                if (w.find_service(s.path))
                    throw ConfigError("duplicate service path " + s.path + " on " + w.name);
                s.latency_us = js.at("latency_us").get<int64_t>();
                if (s.latency_us <= 0)
                    throw ConfigError("latency_us must be positive on " + w.name + s.path);
                s.description.iri = ":" + s.path.substr(1);
                s.description.label = js.at("label").get<std::string>();
                s.description.label_lang = "en";
                for (const auto& jp : js.value("params", nlohmann::ordered_json::array())) {
                    ParamEntry p;
                    p.key = jp.at("key").get<std::string>();
                    p.declared_type = jp.value("type", std::string("FLOAT"));
                    if (p.declared_type == "STRING") {
                        p.string_value = jp.at("value").get<std::string>();
                    } else {
                        p.is_number = true;
                        p.number = jp.at("value").get<double>();
                    }
                    s.description.params.push_back(std::move(p));
                }
                // declared latency, consumed by the binder's ranking rule
                if (!s.description.find_param("LATENCY")) {
                    ParamEntry lat;
                    lat.key = "LATENCY";
                    lat.declared_type = "FLOAT";
                    lat.is_number = true;
                    lat.number = static_cast<double>(s.latency_us);
                    s.description.params.push_back(lat);
                }
                if (js.contains("operation_space")) {
                    s.opspace.location = js["operation_space"].value("location", std::string("*"));
                    s.opspace.state = js["operation_space"].value("state", std::string("*"));
                    if (s.opspace.location != "*" && !positions.count(s.opspace.location))
                        throw ConfigError("operation space of " + w.name + s.path +
                                          " names unknown position " + s.opspace.location);
                }
                if (js.contains("effect")) {
                    if (js["effect"].contains("state"))
                        s.effect.state = js["effect"]["state"].get<std::string>();
                    if (js["effect"].contains("location"))
                        s.effect.location = js["effect"]["location"].get<std::string>();
                }
                w.services.push_back(std::move(s));
            }
            sc.workers.push_back(std::move(w));
        }

        std::set<std::string> object_ids;
        for (const auto& jo : j.value("objects", nlohmann::ordered_json::array())) {
            PhysicalObject o;
            o.id = jo.at("id").get<std::string>();
            if (!object_ids.insert(o.id).second)
                throw ConfigError("duplicate object id " + o.id);
            o.location = jo.at("location").get<std::string>();
            if (!positions.count(o.location))
                throw ConfigError("object " + o.id + " placed at unknown position " + o.location);
            o.state = jo.value("state", std::string(""));
            o.represents = jo.value("represents", std::string(""));
            sc.objects.push_back(std::move(o));
        }

        for (const auto& jf : j.value("failures", nlohmann::ordered_json::array())) {
            FailureEvent f;
            f.worker = jf.at("worker").get<std::string>();
            if (!worker_names.count(f.worker))
                throw ConfigError("failure names unknown worker " + f.worker);
            f.at_us = jf.at("at_us").get<int64_t>();
            if (jf.contains("recover_at_us") && !jf["recover_at_us"].is_null())
                f.recover_at_us = jf["recover_at_us"].get<int64_t>();
            sc.failures.push_back(f);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario config: ") + e.what());
    }
    return sc;
}

inline Scenario load_scenario_file(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario config: ") + e.what());
    }
    return scenario_from_json(j);
}

class Platform {
public:
    Platform(Scheduler& scheduler, EventBus& bus, RegistryLink* registry)
        : scheduler_(scheduler), bus_(bus), registry_(registry) {}

    /// Instantiates the scenario and self-registers every worker's services.
    void load(const Scenario& scenario) {
        scenario_ = scenario;
        workers_.clear();
        benches_.clear();
        objects_.clear();
        for (const auto& w : scenario.workers) workers_[w.name] = w;
        for (const auto& b : scenario.benches) benches_[b.name] = b;
        for (const auto& o : scenario.objects) objects_[o.id] = o;
        if (registry_)
            for (const auto& [name, w] : workers_) register_worker(w);
    }

    void register_worker(const WorkerSim& w) {
        if (!registry_ || w.services.empty()) return;
        std::vector<ResourceLink> links;
        for (const auto& s : w.services) links.push_back({s.path, "as:Service", s.description});
        registry_->register_endpoint(w.name, w.lifetime_s, std::move(links));
    }

    /// Schedules the scenario's scripted failure/recovery events.
    void arm_failures() {
        for (const auto& f : scenario_.failures) {
            std::string worker = f.worker;
            scheduler_.schedule_at(f.at_us, [this, worker] { inject_failure(worker); });
            if (f.recover_at_us)
                scheduler_.schedule_at(*f.recover_at_us, [this, worker] { recover(worker); });
        }
    }

    using Completion = std::function<void(const ExecResult&)>;

    /// EXECUTE request semantics: precondition check against the service's
    /// operation space, then the worker is busy for latency x repeat and the
    /// declared effect lands atomically with the success response.
    void execute(const std::string& worker, const std::string& path,
                 const std::string& object_id, int repeat, Completion done) {
        WorkerSim& w = worker_ref(worker);
        PhysicalObject& obj = object_ref(object_id);
        int64_t issued = scheduler_.now_us();

        if (w.status == WorkerStatus::Failed)
            return finish(done, {ExecResult::Status::WorkerFailed, 0, worker + " is failed"});
        if (w.status == WorkerStatus::Busy)
            return finish(done, {ExecResult::Status::WorkerBusy, 0, worker + " is busy"});
        const WorkerService* svc = w.find_service(path);
        if (!svc)
            return finish(done, {ExecResult::Status::NoSuchService, 0, worker + " has no " + path});
        if (auto failed = precondition_failure(w, *svc, obj))
            return finish(done, *failed);

        w.status = WorkerStatus::Busy;
        w.in_flight_object = object_id;
        int64_t duration = svc->latency_us * std::max(1, repeat);
        std::string wname = w.name, spath = svc->path;
        scheduler_.schedule_in(duration, [this, wname, spath, object_id, issued, done] {
            WorkerSim& w2 = worker_ref(wname);
            w2.in_flight_object.clear();
            if (w2.status == WorkerStatus::Failed) {
                // failure injected mid-flight: no effect is applied
                done({ExecResult::Status::WorkerFailed, 0, wname + " failed during execution"});
                return;
            }
            const WorkerService& svc2 = *w2.find_service(spath);
            apply_effect(svc2, object_ref(object_id));
            w2.status = WorkerStatus::Idle;
            publish_idle(wname);
            done({ExecResult::Status::Success, scheduler_.now_us() - issued, ""});
        });
    }

    /// Blocking EXECUTE for the wire server (wall-clock latency).
    ExecResult execute_blocking(const std::string& worker, const std::string& path,
                                const std::string& object_id, int repeat) {
        auto wit = workers_.find(worker);
        if (wit == workers_.end())
            return {ExecResult::Status::NoSuchService, 0, "no such worker " + worker};
        WorkerSim& w = wit->second;
        auto oit = objects_.find(object_id);
        if (oit == objects_.end())
            return {ExecResult::Status::PreconditionFailed, 0, "no such object " + object_id};
        if (w.status == WorkerStatus::Failed)
            return {ExecResult::Status::WorkerFailed, 0, worker + " is failed"};
        if (w.status == WorkerStatus::Busy)
            return {ExecResult::Status::WorkerBusy, 0, worker + " is busy"};
        const WorkerService* svc = w.find_service(path);
        if (!svc) return {ExecResult::Status::NoSuchService, 0, worker + " has no " + path};
        if (auto failed = precondition_failure(w, *svc, oit->second)) return *failed;
        WallClock wall;
        int64_t started = wall.now_us();
        w.status = WorkerStatus::Busy;
        std::this_thread::sleep_for(
            std::chrono::microseconds(svc->latency_us * std::max(1, repeat)));
        apply_effect(*svc, oit->second);
        w.status = WorkerStatus::Idle;
        return {ExecResult::Status::Success, std::max<int64_t>(1, wall.now_us() - started), ""};
    }

    /// Advances the bench's occupancy by one position; objects ride along.
    void rotate(const std::string& bench, Completion done) {
        WorkbenchSim& b = bench_ref(bench);
        if (b.rotating)
            return finish(done, {ExecResult::Status::BenchBusy, 0, bench + " already rotating"});
        for (const auto& [name, w] : workers_)
            if (w.status == WorkerStatus::Busy && !w.in_flight_object.empty() &&
                bench_of_position(object_ref(w.in_flight_object).location) == bench)
                return finish(done, {ExecResult::Status::BenchBusy, 0,
                                     name + " mid-operation on " + bench});
        b.rotating = true;
        int64_t issued = scheduler_.now_us();
        scheduler_.schedule_in(scenario_.rotate_latency_us, [this, bench, issued, done] {
            WorkbenchSim& b2 = bench_ref(bench);
            size_t n = b2.positions.size();
            std::map<std::string, std::string> next;
            for (size_t i = 0; i < n; i++)
                next[b2.positions[(i + 1) % n]] = b2.occupancy[b2.positions[i]];
            std::map<std::string, std::string> moved;  // object -> new position
            for (auto& [id, obj] : objects_) {
                for (size_t i = 0; i < n; i++)
                    if (obj.location == b2.positions[i])
                        moved[id] = b2.positions[(i + 1) % n];
            }
            b2.occupancy = next;
            for (auto& [id, pos] : moved) objects_[id].location = pos;
            b2.rotating = false;
            for (auto& [id, pos] : moved)
                bus_.publish({bench + "/fixture/" + b2.occupancy[pos] + "/state",
                              objects_[id].id + "@" + pos, scheduler_.now_us()});
            done({ExecResult::Status::Success, scheduler_.now_us() - issued, ""});
        });
    }

    /// Logistics move of one object to a target position (cross-bench).
    void transfer(const std::string& object_id, const std::string& to_position, Completion done) {
        object_ref(object_id);  // existence check
        int64_t issued = scheduler_.now_us();
        scheduler_.schedule_in(scenario_.transfer_latency_us,
                               [this, object_id, to_position, issued, done] {
                                   PhysicalObject& obj = object_ref(object_id);
                                   obj.location = to_position;
                                   bus_.publish({"transfer/" + object_id, to_position,
                                                 scheduler_.now_us()});
                                   done({ExecResult::Status::Success,
                                         scheduler_.now_us() - issued, ""});
                               });
    }

    void inject_failure(const std::string& worker) {
        WorkerSim& w = worker_ref(worker);
        w.status = WorkerStatus::Failed;
        if (registry_) registry_->remove(worker);
        bus_.publish({worker + "/failed", "", scheduler_.now_us()});
    }

    void recover(const std::string& worker) {
        WorkerSim& w = worker_ref(worker);
        if (w.status != WorkerStatus::Failed) return;
        w.status = WorkerStatus::Idle;
        register_worker(w);
        publish_idle(worker);
    }

    // ---- queries ----

    const Scenario& scenario() const { return scenario_; }

    const PhysicalObject* object(const std::string& id) const {
        auto it = objects_.find(id);
        return it == objects_.end() ? nullptr : &it->second;
    }
    const WorkerSim* worker(const std::string& name) const {
        auto it = workers_.find(name);
        return it == workers_.end() ? nullptr : &it->second;
    }
    const WorkbenchSim* bench(const std::string& name) const {
        auto it = benches_.find(name);
        return it == benches_.end() ? nullptr : &it->second;
    }
    std::vector<std::string> object_ids() const {
        std::vector<std::string> out;
        for (const auto& [id, o] : objects_) out.push_back(id);
        return out;
    }

    std::string bench_of_position(const std::string& position) const {
        auto dot = position.find('.');
        if (dot == std::string::npos) return "";
        std::string name = position.substr(0, dot);
        return benches_.count(name) ? name : "";
    }

    EventBus& bus() { return bus_; }
    Scheduler& scheduler() { return scheduler_; }

private:
    void finish(const Completion& done, ExecResult result) {
        scheduler_.schedule_in(0, [done, result] { done(result); });
    }

    std::optional<ExecResult> precondition_failure(const WorkerSim& w, const WorkerService& svc,
                                                   const PhysicalObject& obj) const {
        std::string expected = svc.opspace.location;
        if (expected == "*" && !w.reach.empty()) {
            if (std::find(w.reach.begin(), w.reach.end(), obj.location) == w.reach.end())
                return ExecResult{ExecResult::Status::PreconditionFailed, 0,
                                  "expected location within reach of " + w.name + ", actual " +
                                      obj.location};
        } else if (expected != "*" && obj.location != expected) {
            return ExecResult{ExecResult::Status::PreconditionFailed, 0,
                              "expected location " + expected + ", actual " + obj.location};
        }
        if (svc.opspace.state != "*" && obj.state != svc.opspace.state)
            return ExecResult{ExecResult::Status::PreconditionFailed, 0,
                              "expected state " + svc.opspace.state + ", actual " + obj.state};
        return std::nullopt;
    }

    void apply_effect(const WorkerService& svc, PhysicalObject& obj) {
        if (svc.effect.state) obj.state = *svc.effect.state;
        if (svc.effect.location) obj.location = *svc.effect.location;
        std::string bench = bench_of_position(obj.location);
        if (!bench.empty()) {
            const WorkbenchSim& b = bench_ref(bench);
            auto it = b.occupancy.find(obj.location);
            std::string fixture = it == b.occupancy.end() ? "?" : it->second;
            bus_.publish({bench + "/fixture/" + fixture + "/state", obj.id + ":" + obj.state,
                          scheduler_.now_us()});
        }
    }

    void publish_idle(const std::string& worker) {
        bus_.publish({worker + "/idle", "", scheduler_.now_us()});
    }

    WorkerSim& worker_ref(const std::string& name) {
        auto it = workers_.find(name);
        if (it == workers_.end()) throw ConfigError("unknown worker " + name);
        return it->second;
    }
    WorkbenchSim& bench_ref(const std::string& name) {
        auto it = benches_.find(name);
        if (it == benches_.end()) throw ConfigError("unknown workbench " + name);
        return it->second;
    }
    PhysicalObject& object_ref(const std::string& id) {
        auto it = objects_.find(id);
        if (it == objects_.end()) throw ConfigError("unknown object " + id);
        return it->second;
    }

    Scheduler& scheduler_;
    EventBus& bus_;
    RegistryLink* registry_;
    Scenario scenario_;
    std::map<std::string, WorkerSim> workers_;
    std::map<std::string, WorkbenchSim> benches_;
    std::map<std::string, PhysicalObject> objects_;
};

/// Wire EXECUTE endpoint: POST /<ep>/<servicePath> with {"object","repeat"}.
/// Responds with the outcome and the measured round-trip time.
inline std::function<std::pair<std::string, std::string>(
    const std::string&, const std::map<std::string, std::string>&, const std::string&)>
execute_wire_route(Platform& platform) {
    return [&platform](const std::string& path, const std::map<std::string, std::string>&,
                       const std::string& body) -> std::pair<std::string, std::string> {
        auto split = path.find('/', 1);
        if (split == std::string::npos)
            return {"4.00 Bad Request expected /<ep>/<service>", ""};
        std::string worker = path.substr(1, split - 1);
        std::string service = path.substr(split);
        std::string object;
        int repeat = 1;
        if (!body.empty()) {
            auto j = nlohmann::ordered_json::parse(body, nullptr, false);
            if (!j.is_discarded()) {
                object = j.value("object", std::string());
                repeat = j.value("repeat", 1);
            }
        }
        ExecResult r = platform.execute_blocking(worker, service, object, repeat);
        nlohmann::ordered_json out{
            {"outcome", to_string(r.status)}, {"rtt_us", r.rtt_us}, {"detail", r.detail}};
        std::string status =
            r.ok() ? "2.05 Content" : std::string("4.00 Bad Request ") + to_string(r.status);
        return {status, out.dump()};
    };
}

}  // namespace cpus
