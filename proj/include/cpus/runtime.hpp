#pragma once

// Executes a bound process on the simulated platform. Orchestration drives
// steps from a central coordinator loop; choreography wires one agent per
// step that reacts to its predecessors' completion events on the topic bus.
// Both respect the step graph, collect EXECUTE round-trip times, and invoke
// one rebind per failing step before giving up.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cpus/binder.hpp"
#include "cpus/errors.hpp"
#include "cpus/event_bus.hpp"
#include "cpus/platform.hpp"
#include "cpus/registry.hpp"

namespace cpus {

enum class RunStyle { Orchestration, Choreography };

inline RunStyle run_style_from_string(const std::string& s) {
    if (s == "orchestration") return RunStyle::Orchestration;
    if (s == "choreography") return RunStyle::Choreography;
    throw ConfigError("unknown run style: " + s);
}

struct TraceEntry {
    std::string step;
    std::string task;
    std::string service;   // verb
    std::string endpoint;  // worker+path, bench, or object move
    int64_t start_us = 0;
    int64_t end_us = 0;
    std::string outcome;
};

struct RttSample {
    std::string step;
    std::string service;
    std::string endpoint;
    int64_t rtt_us = 0;
};

struct RunReport {
    enum class Outcome { Completed, Failed };

    Outcome outcome = Outcome::Completed;
    std::string failed_step;
    std::string failure_reason;
    std::vector<TraceEntry> trace;
    std::vector<RttSample> rtt_samples;
    std::map<std::string, int> liaisons_realized;  // multiset
    int64_t makespan_us = 0;

    bool completed() const { return outcome == Outcome::Completed; }
};

struct RttStats {
    size_t count = 0;
    int64_t min = 0;
    int64_t p50 = 0;
    int64_t p95 = 0;
    int64_t max = 0;
};

/// Exact order statistics (nearest-rank percentiles) per service.
inline std::map<std::string, RttStats> rtt_report(const RunReport& report) {
    std::map<std::string, std::vector<int64_t>> grouped;
    for (const auto& s : report.rtt_samples) grouped[s.service].push_back(s.rtt_us);
    std::map<std::string, RttStats> out;
    for (auto& [service, values] : grouped) {
        std::sort(values.begin(), values.end());
        RttStats st;
        st.count = values.size();
        st.min = values.front();
        st.max = values.back();
        auto rank = [&](double p) {
            size_t r = static_cast<size_t>(std::ceil(p * static_cast<double>(values.size())));
            return values[std::max<size_t>(1, r) - 1];
        };
        st.p50 = rank(0.50);
        st.p95 = rank(0.95);
        out[service] = st;
    }
    return out;
}

class Runtime {
public:
    Runtime(Platform& platform, ServiceSource& source)
        : platform_(platform), source_(source) {}

    RunReport run(ProcessPsm& psm, RunStyle style) {
        psm_ = &psm;
        style_ = style;
        report_ = RunReport{};
        completed_.clear();
        dispatched_.clear();
        parked_.clear();
        lazy_movement_done_.clear();
        lazy_moving_.clear();
        rebinds_used_.clear();
        in_flight_ = 0;
        stopping_ = false;
        pending_rebind_.reset();
        choreo_subs_.clear();

        Scheduler& sched = platform_.scheduler();
        platform_.arm_failures();

        if (psm_->mode != BindingMode::DynamicLazy)
            for (const auto& [w, h] : psm_->reservations) source_.reserve(w, h);

        if (style == RunStyle::Choreography) setup_choreography();
        sched.schedule_in(0, [this] { kick(); });
        sched.run_until_idle();

        for (auto id : choreo_subs_) platform_.bus().unsubscribe(id);

        if (psm_->mode != BindingMode::DynamicLazy)
            for (const auto& [w, h] : psm_->reservations) source_.release(w, h);

        if (!stopping_ && completed_.size() < psm_->steps.size()) {
            std::ostringstream os;
            for (const auto& s : psm_->steps)
                if (!completed_.count(s.id)) os << s.id << " ";
            throw DeadlockDetected(os.str());
        }
        report_.makespan_us = sched.now_us();
        std::sort(report_.trace.begin(), report_.trace.end(),
                  [](const TraceEntry& a, const TraceEntry& b) {
                      return a.start_us != b.start_us ? a.start_us < b.start_us
                                                      : a.step < b.step;
                  });
        return report_;
    }

private:
    // ---- readiness ----

    std::vector<std::string> predecessors(const std::string& id) const {
        std::vector<std::string> out;
        for (const auto& [a, b] : psm_->arcs)
            if (b == id) out.push_back(a);
        return out;
    }

    bool ready(const BoundStep& s) const {
        if (completed_.count(s.id) || dispatched_.count(s.id)) return false;
        for (const auto& p : predecessors(s.id))
            if (!completed_.count(p)) return false;
        return true;
    }

    void kick() {
        if (style_ == RunStyle::Orchestration) {
            scan();
        } else {
            // choreography: source steps self-trigger, the rest wait on events
            for (const auto& s : psm_->steps)
                if (ready(s)) attempt(s.id);
        }
    }

    void scan() {
        if (stopping_) return;
        for (const auto& s : psm_->steps)
            if (ready(s)) attempt(s.id);
        retry_parked();
    }

    void park(const std::string& id) {
        if (std::find(parked_.begin(), parked_.end(), id) == parked_.end())
            parked_.push_back(id);
    }

    void retry_parked() {
        if (stopping_) return;
        std::vector<std::string> waiting = std::move(parked_);
        parked_.clear();
        for (const auto& id : waiting) {
            const BoundStep* s = psm_->find_step(id);
            if (s && !completed_.count(id)) attempt(id);
        }
    }

    void setup_choreography() {
        // each step subscribes to its predecessors' completion events before
        // anything is published
        for (const auto& s : psm_->steps) {
            std::string id = s.id;
            auto preds = predecessors(id);
            if (preds.empty()) continue;
            auto remaining = std::make_shared<std::set<std::string>>(preds.begin(), preds.end());
            for (const auto& p : preds) {
                choreo_subs_.push_back(platform_.bus().subscribe(
                    "run/step/" + p + "/done", [this, id, remaining](const Event& ev) {
                        remaining->erase(step_of_topic(ev.topic));
                        if (remaining->empty() && !stopping_) attempt(id);
                    }));
            }
        }
    }

    static std::string step_of_topic(const std::string& topic) {
        // run/step/<id>/done
        auto a = topic.find("step/") + 5;
        auto b = topic.find('/', a);
        return topic.substr(a, b - a);
    }

    // ---- dispatch ----

    void attempt(const std::string& id) {
        if (stopping_ || completed_.count(id) || dispatched_.count(id) ||
            lazy_moving_.count(id))
            return;
        BoundStep* s = psm_->find_step(id);
        if (!s) return;

        switch (s->kind) {
            case StepKind::Noop: {
                dispatched_.insert(id);
                in_flight_++;
                int64_t t = platform_.scheduler().now_us();
                platform_.scheduler().schedule_in(0, [this, id, t] {
                    finish_step(id, {ExecResult::Status::Success, 0, ""}, t, "-", "noop");
                });
                return;
            }
            case StepKind::Rotate: {
                dispatched_.insert(id);
                in_flight_++;
                int64_t t = platform_.scheduler().now_us();
                std::string bench = s->bench;
                platform_.rotate(bench, [this, id, t, bench](const ExecResult& r) {
                    if (r.status == ExecResult::Status::BenchBusy) {
                        dispatched_.erase(id);
                        in_flight_--;
                        park(id);
                        return;
                    }
                    finish_step(id, r, t, bench, "rotate");
                });
                return;
            }
            case StepKind::Transfer: {
                dispatched_.insert(id);
                in_flight_++;
                int64_t t = platform_.scheduler().now_us();
                std::string dest = s->to_position;
                platform_.transfer(s->target_object, dest, [this, id, t, dest](const ExecResult& r) {
                    finish_step(id, r, t, dest, "transfer");
                });
                return;
            }
            case StepKind::Activity:
                break;
        }

        // lazy steps resolve against the live directory at their turn
        if (!s->endpoint) {
            if (!resolve_lazy(*s)) return;  // failure already recorded
        }

        const WorkerSim* w = platform_.worker(s->endpoint->worker);
        if (w && w->status == WorkerStatus::Busy) {
            park(id);
            return;
        }

        if (psm_->mode == BindingMode::DynamicLazy && !lazy_movement_done_.count(id)) {
            if (start_lazy_movement(*s)) return;  // movement chain will re-attempt
        }

        dispatched_.insert(id);
        in_flight_++;
        int64_t t = platform_.scheduler().now_us();
        if (psm_->mode == BindingMode::DynamicLazy) source_.reserve(s->endpoint->worker, psm_->holder);
        std::string endpoint = s->endpoint->worker + s->endpoint->path;
        std::string verb = s->verb;
        std::string worker = s->endpoint->worker, path = s->endpoint->path;
        platform_.execute(worker, path, s->target_object, s->repeat,
                          [this, id, t, endpoint, verb, worker](const ExecResult& r) {
                              if (psm_->mode == BindingMode::DynamicLazy)
                                  source_.release(worker, psm_->holder);
                              if (r.status == ExecResult::Status::WorkerBusy) {
                                  dispatched_.erase(id);
                                  in_flight_--;
                                  park(id);
                                  return;
                              }
                              if (r.status == ExecResult::Status::WorkerFailed) {
                                  dispatched_.erase(id);
                                  in_flight_--;
                                  report_.trace.push_back({id, psm_->find_step(id)->task_id,
                                                           verb, endpoint, t,
                                                           platform_.scheduler().now_us(),
                                                           to_string(r.status)});
                                  handle_worker_failure(id, worker);
                                  return;
                              }
                              finish_step(id, r, t, endpoint, verb);
                          });
    }

    // Lazy resolution: evaluate the stored query now, rank, remember endpoint.
    bool resolve_lazy(BoundStep& s) {
        ServiceQuery query = parse_query(s.query_text);
        auto matches = source_.lookup(std::string("as:Service"), &query);
        auto choice = binding::pick_candidate(matches, s.line, &platform_.scenario());
        if (!choice) {
            fail_run(s.id, "UnsatisfiedActivity: " + s.verb);
            return false;
        }
        s.endpoint = Endpoint{choice->worker, choice->link.path};
        return true;
    }

    // Movement for lazily resolved steps is planned at dispatch time from the
    // platform's live object positions. Returns true when movement was issued
    // (the chain re-attempts the activity when done).
    bool start_lazy_movement(BoundStep& s) {
        const Scenario* topo = &platform_.scenario();
        auto allowed = binding::allowed_positions(topo, s.endpoint->worker, s.endpoint->path);
        lazy_movement_done_.insert(s.id);
        if (allowed.empty() || s.target_object.empty()) return false;

        binding::LocationTracker tracker;
        for (const auto& oid : platform_.object_ids())
            tracker.locations[oid] = platform_.object(oid)->location;

        binding::StepIdGen ids;
        BoundStep probe = s;
        auto moves = binding::plan_movement(topo, probe, allowed, tracker, ids);
        if (moves.empty()) return false;

        auto queue = std::make_shared<std::vector<BoundStep>>(std::move(moves));
        lazy_moving_.insert(s.id);
        issue_lazy_move(s.id, queue, 0);
        return true;
    }

    void issue_lazy_move(const std::string& activity_id,
                         std::shared_ptr<std::vector<BoundStep>> queue, size_t index) {
        if (index >= queue->size()) {
            lazy_moving_.erase(activity_id);
            attempt(activity_id);
            return;
        }
        const BoundStep& mv = (*queue)[index];
        int64_t t = platform_.scheduler().now_us();
        std::string trace_id = activity_id + ".m" + std::to_string(index + 1);
        std::string task = psm_->find_step(activity_id)->task_id;
        auto done = [this, activity_id, queue, index, t, trace_id, task,
                     label = mv.kind == StepKind::Rotate ? mv.bench : mv.to_position,
                     verb = std::string(mv.verb)](const ExecResult& r) {
            report_.trace.push_back({trace_id, task, verb, label, t,
                                     platform_.scheduler().now_us(), to_string(r.status)});
            if (!r.ok()) {
                fail_run(trace_id, r.detail);
                return;
            }
            issue_lazy_move(activity_id, queue, index + 1);
        };
        if (mv.kind == StepKind::Rotate)
            platform_.rotate(mv.bench, done);
        else
            platform_.transfer(mv.target_object, mv.to_position, done);
    }

    // ---- completion ----

    void finish_step(const std::string& id, const ExecResult& r, int64_t started,
                     const std::string& endpoint, const std::string& verb) {
        in_flight_--;
        BoundStep* s = psm_->find_step(id);
        int64_t now = platform_.scheduler().now_us();
        report_.trace.push_back(
            {id, s ? s->task_id : "", verb, endpoint, started, now, to_string(r.status)});

        if (!r.ok()) {
            fail_run(id, r.detail.empty() ? to_string(r.status) : r.detail);
            return;
        }

        completed_.insert(id);
        if (s) {
            s->executed = true;
            if (s->kind == StepKind::Activity) {
                report_.rtt_samples.push_back({id, verb, endpoint, r.rtt_us});
            }
            for (const auto& l : s->liaisons) report_.liaisons_realized[l]++;
        }

        if (pending_rebind_ && in_flight_ == 0) {
            perform_rebind();
            return;
        }

        platform_.bus().publish({"run/step/" + id + "/done", "", now});
        if (style_ == RunStyle::Orchestration) scan();
        else retry_parked();
    }

    void fail_run(const std::string& step, const std::string& reason) {
        if (stopping_) return;
        stopping_ = true;
        report_.outcome = RunReport::Outcome::Failed;
        report_.failed_step = step;
        report_.failure_reason = reason;
    }

    // ---- failure / rebind ----

    void handle_worker_failure(const std::string& step_id, const std::string& worker) {
        if (stopping_) return;
        if (++rebinds_used_[step_id] > 1) {
            fail_run(step_id, "worker " + worker + " failed and rebind already used");
            return;
        }
        pending_rebind_ = worker;
        if (in_flight_ == 0) perform_rebind();
        // otherwise the last in-flight completion triggers it (quiesce first)
    }

    void perform_rebind() {
        std::string failed = *pending_rebind_;
        pending_rebind_.reset();
        std::map<std::string, std::string> locations;
        for (const auto& oid : platform_.object_ids())
            locations[oid] = platform_.object(oid)->location;
        try {
            ProcessPsm next = rebind(*psm_, failed, source_, &platform_.scenario(), locations);
            *psm_ = std::move(next);
        } catch (const Error& e) {
            fail_run("(rebind)", e.what());
            return;
        }
        if (style_ == RunStyle::Choreography) {
            for (auto id : choreo_subs_) platform_.bus().unsubscribe(id);
            choreo_subs_.clear();
            setup_choreography();
        }
        scan_after_rebind();
    }

    void scan_after_rebind() {
        // dispatch everything that became ready, regardless of style
        for (const auto& s : psm_->steps)
            if (ready(s)) attempt(s.id);
        retry_parked();
    }

    Platform& platform_;
    ServiceSource& source_;
    ProcessPsm* psm_ = nullptr;
    RunStyle style_ = RunStyle::Orchestration;
    RunReport report_;
    std::set<std::string> completed_;
    std::set<std::string> dispatched_;
    std::vector<std::string> parked_;
    std::set<std::string> lazy_movement_done_;
    std::set<std::string> lazy_moving_;
    std::map<std::string, int> rebinds_used_;
    std::optional<std::string> pending_rebind_;
    std::vector<uint64_t> choreo_subs_;
    int in_flight_ = 0;
    bool stopping_ = false;
};

// ---- artifacts --------------------------------------------------------------

inline std::string metrics_csv(const RunReport& report) {
    std::ostringstream os;
    os << "step_id,task_id,service,endpoint,rtt_us,outcome\n";
    for (const auto& t : report.trace) {
        int64_t rtt = 0;
        for (const auto& s : report.rtt_samples)
            if (s.step == t.step) rtt = s.rtt_us;
        if (rtt == 0 && t.outcome == std::string("success")) rtt = t.end_us - t.start_us;
        os << t.step << "," << t.task << "," << t.service << "," << t.endpoint << "," << rtt
           << "," << t.outcome << "\n";
    }
    return os.str();
}

inline std::string timeline_log(const RunReport& report) {
    std::ostringstream os;
    for (const auto& t : report.trace)
        os << "[" << t.start_us << ".." << t.end_us << "] " << t.step << " " << t.task << " "
           << t.service << " @" << t.endpoint << " -> " << t.outcome << "\n";
    return os.str();
}

inline ordered_json run_report_to_json(const RunReport& report) {
    ordered_json j;
    j["outcome"] = report.completed() ? "completed" : "failed";
    if (!report.completed()) {
        j["failed_step"] = report.failed_step;
        j["failure_reason"] = report.failure_reason;
    }
    j["makespan_us"] = report.makespan_us;
    j["trace"] = ordered_json::array();
    for (const auto& t : report.trace)
        j["trace"].push_back({{"step", t.step},
                              {"task", t.task},
                              {"service", t.service},
                              {"endpoint", t.endpoint},
                              {"start_us", t.start_us},
                              {"end_us", t.end_us},
                              {"outcome", t.outcome}});
    j["rtt_samples"] = ordered_json::array();
    for (const auto& s : report.rtt_samples)
        j["rtt_samples"].push_back({{"step", s.step},
                                    {"service", s.service},
                                    {"endpoint", s.endpoint},
                                    {"rtt_us", s.rtt_us}});
    j["liaisons_realized"] = report.liaisons_realized;
    j["rtt_report"] = ordered_json::object();
    for (const auto& [service, st] : rtt_report(report))
        j["rtt_report"][service] = {{"count", st.count},
                                    {"min", st.min},
                                    {"p50", st.p50},
                                    {"p95", st.p95},
                                    {"max", st.max}};
    return j;
}

}  // namespace cpus
