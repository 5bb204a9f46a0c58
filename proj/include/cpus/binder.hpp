#pragma once

// PIM -> PSM transformation: every activity spec becomes a discovery query
// (label = verb, filter = QoS), matched against the registry and resolved to
// a concrete worker endpoint; Rotate/Transfer steps are inserted wherever the
// planned object positions and the chosen workers' operating positions
// diverge. Static and eager binds reserve their workers up front; lazy binds
// carry unresolved queries and reserve nothing.

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpus/errors.hpp"
#include "cpus/platform.hpp"
#include "cpus/process_gen.hpp"
#include "cpus/registry.hpp"
#include "cpus/service_model.hpp"

namespace cpus {

enum class BindingMode { Static, DynamicEager, DynamicLazy };

inline const char* to_string(BindingMode m) {
    switch (m) {
        case BindingMode::Static: return "static";
        case BindingMode::DynamicEager: return "eager";
        case BindingMode::DynamicLazy: return "lazy";
    }
    return "static";
}

inline BindingMode binding_mode_from_string(const std::string& s) {
    if (s == "static") return BindingMode::Static;
    if (s == "eager") return BindingMode::DynamicEager;
    if (s == "lazy") return BindingMode::DynamicLazy;
    throw ConfigError("unknown binding mode: " + s);
}

enum class StepKind { Activity, Transfer, Rotate, Noop };

inline const char* to_string(StepKind k) {
    switch (k) {
        case StepKind::Activity: return "activity";
        case StepKind::Transfer: return "transfer";
        case StepKind::Rotate: return "rotate";
        case StepKind::Noop: return "noop";
    }
    return "activity";
}

struct Endpoint {
    std::string worker;
    std::string path;

    bool operator==(const Endpoint&) const = default;
};

struct BoundStep {
    std::string id;  // "S1"...
    StepKind kind = StepKind::Activity;
    std::string task_id;
    std::string line;  // assembly-line restriction inherited from the task
    std::string verb;
    std::string target_object;
    std::vector<std::string> secondary_objects;  // brought to the activity position
    std::optional<Endpoint> endpoint;            // resolved worker (static/eager)
    std::string query_text;                      // synthesized query, kept for lazy/rebind
    int repeat = 1;
    std::vector<std::string> liaisons;  // realized when this step completes
    std::string bench;                  // Rotate target
    std::string to_position;            // Transfer destination
    bool executed = false;
};

struct ProcessPsm {
    std::vector<BoundStep> steps;
    std::set<std::pair<std::string, std::string>> arcs;
    BindingMode mode = BindingMode::Static;
    std::vector<std::pair<std::string, std::string>> reservations;  // (worker, holder)
    std::string holder;

    BoundStep* find_step(const std::string& id) {
        for (auto& s : steps)
            if (s.id == id) return &s;
        return nullptr;
    }
    const BoundStep* find_step(const std::string& id) const {
        for (const auto& s : steps)
            if (s.id == id) return &s;
        return nullptr;
    }
};

namespace binding {

inline ServiceQuery query_for_activity(const ActivitySpec& a) {
    ServiceQuery q;
    q.label_pattern = a.verb;
    q.label_lang = "en";
    int v = 0;
    for (const auto& r : a.qos) {
        std::string var = "q" + std::to_string(v++);
        q.bindings.push_back({r.key, var, "FLOAT"});
        q.filter.push_back({var, r.op, r.threshold});
    }
    return q;
}

inline double declared_latency(const ServiceDescription& d) {
    const ParamEntry* p = d.find_param("LATENCY");
    return p && p->is_number ? p->number : std::numeric_limits<double>::infinity();
}

// Positions where a worker's service can act: reach restricted by the
// service's operation space.
inline std::vector<std::string> allowed_positions(const Scenario* topology,
                                                  const std::string& worker,
                                                  const std::string& path) {
    std::vector<std::string> out;
    if (!topology) return out;
    for (const auto& w : topology->workers) {
        if (w.name != worker) continue;
        const WorkerService* svc = w.find_service(path);
        std::string required = svc ? svc->opspace.location : "*";
        for (const auto& pos : w.reach)
            if (required == "*" || pos == required) out.push_back(pos);
        if (required != "*" && out.empty() && svc) out.push_back(required);
    }
    return out;
}

inline std::vector<std::string> bench_positions(const Scenario* topology,
                                                const std::string& bench) {
    if (topology)
        for (const auto& b : topology->benches)
            if (b.name == bench) return b.positions;
    return {};
}

inline std::string bench_of_position(const Scenario* topology, const std::string& pos) {
    auto dot = pos.find('.');
    if (dot == std::string::npos || !topology) return "";
    std::string name = pos.substr(0, dot);
    for (const auto& b : topology->benches)
        if (b.name == name) return name;
    return "";
}

inline std::optional<ServiceEffect> service_effect(const Scenario* topology,
                                                   const Endpoint& ep) {
    if (!topology) return std::nullopt;
    for (const auto& w : topology->workers)
        if (w.name == ep.worker)
            if (const WorkerService* svc = w.find_service(ep.path)) return svc->effect;
    return std::nullopt;
}

// Deepest scenario object whose represented part subsumes `part`.
inline std::string object_for_part(const PimContext& ctx, const Scenario* topology,
                                   const std::string& part) {
    if (!topology || part.empty()) return "";
    std::string best;
    int best_depth = -1;
    for (const auto& o : topology->objects) {
        if (o.represents.empty() || !ctx.within(part, o.represents)) continue;
        int depth = 0;
        for (std::string cur = o.represents;;) {
            auto it = ctx.part_parent.find(cur);
            if (it == ctx.part_parent.end() || it->second.empty()) break;
            cur = it->second;
            depth++;
        }
        if (depth > best_depth) {
            best_depth = depth;
            best = o.id;
        }
    }
    return best;
}

inline std::string target_object_for_task(const PimContext& ctx, const Scenario* topology,
                                          const AssemblyTask& task) {
    std::string direct = object_for_part(ctx, topology, task.origin_node);
    if (!direct.empty()) return direct;
    for (const auto& d : ctx.designations)
        if (d.role == SubAssemblyRole::Master)
            return object_for_part(ctx, topology, d.composite_part);
    return "";
}

struct Candidate {
    std::string worker;
    ResourceLink link;
};

// Ranking rule: assembly-line fit first (when topology is known), then lowest
// declared latency, then lexicographic (worker, path).
inline std::optional<Candidate> pick_candidate(
    const std::vector<std::pair<std::string, ResourceLink>>& matches, const std::string& line,
    const Scenario* topology) {
    std::vector<Candidate> pool;
    for (const auto& [ep, link] : matches) {
        if (!line.empty() && topology) {
            auto positions = allowed_positions(topology, ep, link.path);
            auto line_pos = bench_positions(topology, line);
            bool overlaps = false;
            for (const auto& p : positions)
                if (std::find(line_pos.begin(), line_pos.end(), p) != line_pos.end())
                    overlaps = true;
            if (!overlaps) continue;
        }
        pool.push_back({ep, link});
    }
    if (pool.empty()) return std::nullopt;
    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
        double la = declared_latency(a.link.description);
        double lb = declared_latency(b.link.description);
        if (la != lb) return la < lb;
        if (a.worker != b.worker) return a.worker < b.worker;
        return a.link.path < b.link.path;
    });
    return pool.front();
}

// Tracks object positions while movement steps are planned; mirrors the
// platform's rotate semantics (all objects on the bench ride along).
struct LocationTracker {
    std::map<std::string, std::string> locations;

    static LocationTracker from_scenario(const Scenario* topology) {
        LocationTracker t;
        if (topology)
            for (const auto& o : topology->objects) t.locations[o.id] = o.location;
        return t;
    }

    void rotate(const Scenario* topology, const std::string& bench) {
        auto positions = bench_positions(topology, bench);
        size_t n = positions.size();
        if (n == 0) return;
        for (auto& [id, loc] : locations)
            for (size_t i = 0; i < n; i++)
                if (loc == positions[i]) {
                    loc = positions[(i + 1) % n];
                    break;
                }
    }
};

struct StepIdGen {
    int next = 1;
    std::string operator()() { return "S" + std::to_string(next++); }
};

// Movement steps bringing the step's objects to a position the resolved
// worker can serve. Rotations when the object's own bench offers one,
// a transfer otherwise; secondary objects are always transferred.
inline std::vector<BoundStep> plan_movement(const Scenario* topology, const BoundStep& activity,
                                            const std::vector<std::string>& allowed,
                                            LocationTracker& tracker, StepIdGen& ids) {
    std::vector<BoundStep> moves;
    if (!topology || allowed.empty() || activity.target_object.empty()) return moves;
    auto loc_it = tracker.locations.find(activity.target_object);
    if (loc_it == tracker.locations.end()) return moves;

    auto in_allowed = [&](const std::string& pos) {
        return std::find(allowed.begin(), allowed.end(), pos) != allowed.end();
    };

    if (!in_allowed(loc_it->second)) {
        std::string bench = bench_of_position(topology, loc_it->second);
        auto positions = bench_positions(topology, bench);
        int rotations = 0;
        if (!bench.empty()) {
            size_t n = positions.size();
            size_t idx = std::find(positions.begin(), positions.end(), loc_it->second) -
                         positions.begin();
            for (size_t r = 1; r < n; r++)
                if (in_allowed(positions[(idx + r) % n])) {
                    rotations = static_cast<int>(r);
                    break;
                }
        }
        if (rotations > 0) {
            for (int r = 0; r < rotations; r++) {
                BoundStep rot;
                rot.id = ids();
                rot.kind = StepKind::Rotate;
                rot.task_id = activity.task_id;
                rot.verb = "rotate";
                rot.bench = bench;
                moves.push_back(rot);
                tracker.rotate(topology, bench);
            }
        } else {
            BoundStep tr;
            tr.id = ids();
            tr.kind = StepKind::Transfer;
            tr.task_id = activity.task_id;
            tr.verb = "transfer";
            tr.target_object = activity.target_object;
            tr.to_position = allowed.front();
            moves.push_back(tr);
            tracker.locations[activity.target_object] = allowed.front();
        }
    }

    std::string act_pos = tracker.locations[activity.target_object];
    for (const auto& sec : activity.secondary_objects) {
        auto it = tracker.locations.find(sec);
        if (it == tracker.locations.end() || it->second == act_pos) continue;
        BoundStep tr;
        tr.id = ids();
        tr.kind = StepKind::Transfer;
        tr.task_id = activity.task_id;
        tr.verb = "transfer";
        tr.target_object = sec;
        tr.to_position = act_pos;
        moves.push_back(tr);
        it->second = act_pos;
    }
    return moves;
}

inline std::string filter_description(const ActivitySpec& a) {
    std::ostringstream os;
    for (size_t i = 0; i < a.qos.size(); i++)
        os << (i ? " && " : "") << a.qos[i].key << a.qos[i].op << a.qos[i].threshold;
    return os.str();
}

// Tasks of the PIM in a deterministic topological order.
inline std::vector<const AssemblyTask*> topo_tasks(const ProcessPim& pim) {
    std::map<std::string, int> indegree;
    for (const auto& t : pim.tasks) indegree[t.id] = 0;
    for (const auto& [a, b] : pim.graph.arcs)
        if (indegree.count(a) && indegree.count(b)) indegree[b]++;
    std::vector<const AssemblyTask*> out;
    std::set<std::string> emitted;
    while (out.size() < pim.tasks.size()) {
        const AssemblyTask* next = nullptr;
        for (const auto& t : pim.tasks)
            if (!emitted.count(t.id) && indegree[t.id] == 0) {
                next = &t;
                break;
            }
        if (!next) throw CyclicPrecedence("task graph");
        emitted.insert(next->id);
        out.push_back(next);
        for (const auto& [a, b] : pim.graph.arcs)
            if (a == next->id && indegree.count(b)) indegree[b]--;
    }
    return out;
}

}  // namespace binding

/// Resolves a PIM against the registry under the given binding mode.
/// `topology` (the scenario) drives line restrictions, object mapping and
/// movement planning; without it only endpoint resolution happens.
inline ProcessPsm bind(const ProcessPim& pim, ServiceSource& source, BindingMode mode,
                       const Scenario* topology, const std::string& holder = "bind") {
    ProcessPsm psm;
    psm.mode = mode;
    psm.holder = holder;

    binding::StepIdGen ids;
    binding::LocationTracker tracker = binding::LocationTracker::from_scenario(topology);
    bool lazy = mode == BindingMode::DynamicLazy;

    for (const AssemblyTask* task : binding::topo_tasks(pim)) {
        std::vector<BoundStep> task_steps;
        for (size_t ai = 0; ai < task->activities.size(); ai++) {
            const ActivitySpec& a = task->activities[ai];
            BoundStep step;
            step.task_id = task->id;
            step.line = task->line;
            step.verb = a.verb;
            step.repeat = a.repeat;
            step.target_object = binding::target_object_for_task(pim.context, topology, *task);
            for (const auto* ep : {&a.subject, &a.target}) {
                if (!ep->has_value()) continue;
                std::string obj = binding::object_for_part(pim.context, topology, (*ep)->part);
                if (!obj.empty() && obj != step.target_object &&
                    std::find(step.secondary_objects.begin(), step.secondary_objects.end(),
                              obj) == step.secondary_objects.end())
                    step.secondary_objects.push_back(obj);
            }
            if (ai + 1 == task->activities.size()) step.liaisons = task->liaisons;

            if (a.verb == "NoOp") {
                step.kind = StepKind::Noop;
                step.id = ids();
                task_steps.push_back(std::move(step));
                continue;
            }

            ServiceQuery query = binding::query_for_activity(a);
            step.query_text = serialize_query(query);

            if (!lazy) {
                auto matches = source.lookup(std::string("as:Service"), &query);
                auto choice = binding::pick_candidate(matches, task->line, topology);
                if (!choice)
                    throw UnsatisfiedActivity(task->id, a.verb, binding::filter_description(a));
                step.endpoint = Endpoint{choice->worker, choice->link.path};
                auto allowed =
                    binding::allowed_positions(topology, choice->worker, choice->link.path);
                auto moves = binding::plan_movement(topology, step, allowed, tracker, ids);
                for (auto& mv : moves) task_steps.push_back(std::move(mv));
                if (auto effect = binding::service_effect(topology, *step.endpoint);
                    effect && effect->location && !step.target_object.empty())
                    tracker.locations[step.target_object] = *effect->location;
            }
            step.id = ids();
            task_steps.push_back(std::move(step));
        }

        for (size_t i = 0; i + 1 < task_steps.size(); i++)
            psm.arcs.insert({task_steps[i].id, task_steps[i + 1].id});
        for (auto& s : task_steps) psm.steps.push_back(std::move(s));
    }

    // Cross-task arcs from the PIM graph (initial nodes carry no steps).
    auto first_step_of = [&](const std::string& task) -> const BoundStep* {
        for (const auto& s : psm.steps)
            if (s.task_id == task) return &s;
        return nullptr;
    };
    auto last_step_of = [&](const std::string& task) -> const BoundStep* {
        const BoundStep* last = nullptr;
        for (const auto& s : psm.steps)
            if (s.task_id == task) last = &s;
        return last;
    };
    for (const auto& [a, b] : pim.graph.arcs) {
        const BoundStep* from = last_step_of(a);
        const BoundStep* to = first_step_of(b);
        if (from && to) psm.arcs.insert({from->id, to->id});
    }

    if (!lazy) {
        std::set<std::string> workers;
        for (const auto& s : psm.steps)
            if (s.kind == StepKind::Activity && s.endpoint) workers.insert(s.endpoint->worker);
        std::vector<std::string> acquired;
        try {
            for (const auto& w : workers) {
                source.reserve(w, holder);
                acquired.push_back(w);
                psm.reservations.emplace_back(w, holder);
            }
        } catch (...) {
            for (const auto& w : acquired) source.release(w, holder);
            throw;
        }
    }
    return psm;
}

/// Re-resolves every unexecuted activity bound to the failed worker and
/// replans the unexecuted movement steps from the current object locations.
/// Executed steps and the task-level order are untouched.
inline ProcessPsm rebind(const ProcessPsm& psm, const std::string& failed_worker,
                         ServiceSource& source, const Scenario* topology,
                         const std::map<std::string, std::string>& current_locations) {
    bool affected = false;
    for (const auto& s : psm.steps)
        if (!s.executed && s.kind == StepKind::Activity && s.endpoint &&
            s.endpoint->worker == failed_worker)
            affected = true;
    if (!affected) return psm;

    ProcessPsm out;
    out.mode = psm.mode;
    out.holder = psm.holder;

    // Drop unexecuted movement steps, splicing their arcs shut.
    std::set<std::string> dropped;
    std::set<std::pair<std::string, std::string>> arcs = psm.arcs;
    std::vector<BoundStep> kept;
    for (const auto& s : psm.steps) {
        if (!s.executed && (s.kind == StepKind::Rotate || s.kind == StepKind::Transfer)) {
            dropped.insert(s.id);
            std::vector<std::string> preds, succs;
            for (const auto& [a, b] : arcs) {
                if (b == s.id) preds.push_back(a);
                if (a == s.id) succs.push_back(b);
            }
            for (auto it = arcs.begin(); it != arcs.end();)
                it = (it->first == s.id || it->second == s.id) ? arcs.erase(it) : std::next(it);
            for (const auto& p : preds)
                for (const auto& q : succs) arcs.insert({p, q});
        } else {
            kept.push_back(s);
        }
    }

    int max_id = 0;
    for (const auto& s : psm.steps) max_id = std::max(max_id, std::stoi(s.id.substr(1)));
    binding::StepIdGen ids{max_id + 1};

    // Re-resolve orphaned activities.
    for (auto& s : kept) {
        if (s.executed || s.kind != StepKind::Activity || !s.endpoint ||
            s.endpoint->worker != failed_worker)
            continue;
        ServiceQuery query = parse_query(s.query_text);
        auto matches = source.lookup(std::string("as:Service"), &query);
        auto choice = binding::pick_candidate(matches, s.line, topology);
        if (!choice) throw UnsatisfiedActivity(s.task_id, s.verb, "rebind after " + failed_worker);
        s.endpoint = Endpoint{choice->worker, choice->link.path};
    }

    // Replan movement for unexecuted activities, in topological order.
    binding::LocationTracker tracker;
    tracker.locations = current_locations;

    std::map<std::string, int> indegree;
    for (const auto& s : kept) indegree[s.id] = 0;
    for (const auto& [a, b] : arcs)
        if (indegree.count(a) && indegree.count(b)) indegree[b]++;
    std::vector<std::string> order;
    std::set<std::string> emitted;
    while (order.size() < kept.size()) {
        const BoundStep* next = nullptr;
        for (const auto& s : kept)
            if (!emitted.count(s.id) && indegree[s.id] == 0) {
                next = &s;
                break;
            }
        if (!next) throw CyclicPrecedence("psm graph during rebind");
        emitted.insert(next->id);
        order.push_back(next->id);
        for (const auto& [a, b] : arcs)
            if (a == next->id && indegree.count(b)) indegree[b]--;
    }

    std::map<std::string, BoundStep> by_id;
    for (const auto& s : kept) by_id[s.id] = s;
    std::vector<BoundStep> final_steps;
    for (const auto& id : order) {
        BoundStep s = by_id[id];
        if (!s.executed && s.kind == StepKind::Activity && s.endpoint) {
            auto allowed =
                binding::allowed_positions(topology, s.endpoint->worker, s.endpoint->path);
            auto moves = binding::plan_movement(topology, s, allowed, tracker, ids);
            for (auto& mv : moves) {
                // splice the movement chain in front of this activity
                std::vector<std::string> preds;
                for (const auto& [a, b] : arcs)
                    if (b == s.id) preds.push_back(a);
                for (const auto& p : preds) {
                    arcs.erase({p, s.id});
                    arcs.insert({p, mv.id});
                }
                arcs.insert({mv.id, s.id});
                final_steps.push_back(mv);
            }
            if (auto effect = binding::service_effect(topology, *s.endpoint);
                effect && effect->location && !s.target_object.empty())
                tracker.locations[s.target_object] = *effect->location;
        }
        final_steps.push_back(s);
    }

    out.steps = std::move(final_steps);
    out.arcs = std::move(arcs);

    // Reservation upkeep: drop the failed worker, cover the substitutes.
    if (psm.mode != BindingMode::DynamicLazy) {
        std::set<std::string> workers;
        for (const auto& s : out.steps)
            if (s.kind == StepKind::Activity && s.endpoint && !s.executed)
                workers.insert(s.endpoint->worker);
        source.release(failed_worker, out.holder);
        for (const auto& [w, h] : psm.reservations)
            if (w != failed_worker) out.reservations.emplace_back(w, h);
        for (const auto& w : workers) {
            bool held = false;
            for (const auto& [rw, rh] : out.reservations) held |= rw == w;
            if (!held) {
                source.reserve(w, out.holder);
                out.reservations.emplace_back(w, out.holder);
            }
        }
    }
    return out;
}

// ---- JSON export / import ---------------------------------------------------

inline ordered_json psm_to_json(const ProcessPsm& psm) {
    ordered_json j;
    j["steps"] = ordered_json::array();
    for (const auto& s : psm.steps) {
        ordered_json js;
        js["id"] = s.id;
        js["kind"] = to_string(s.kind);
        js["task"] = s.task_id;
        js["line"] = s.line;
        js["verb"] = s.verb;
        js["object"] = s.target_object;
        js["secondary"] = s.secondary_objects;
        if (s.endpoint)
            js["endpoint"] = {{"worker", s.endpoint->worker}, {"path", s.endpoint->path}};
        else
            js["endpoint"] = nullptr;
        js["query"] = s.query_text;
        js["repeat"] = s.repeat;
        js["liaisons"] = s.liaisons;
        js["bench"] = s.bench;
        js["to"] = s.to_position;
        js["executed"] = s.executed;
        j["steps"].push_back(js);
    }
    j["graph"]["arcs"] = ordered_json::array();
    for (const auto& [a, b] : psm.arcs) j["graph"]["arcs"].push_back({a, b});
    j["mode"] = to_string(psm.mode);
    j["reservations"] = ordered_json::array();
    for (const auto& [w, h] : psm.reservations)
        j["reservations"].push_back({{"worker", w}, {"holder", h}});
    j["holder"] = psm.holder;
    return j;
}

inline ProcessPsm psm_from_json(const ordered_json& j) {
    ProcessPsm psm;
    for (const auto& js : j.at("steps")) {
        BoundStep s;
        s.id = js.at("id").get<std::string>();
        std::string kind = js.at("kind").get<std::string>();
        s.kind = kind == "activity"   ? StepKind::Activity
                 : kind == "transfer" ? StepKind::Transfer
                 : kind == "rotate"   ? StepKind::Rotate
                                      : StepKind::Noop;
        s.task_id = js.at("task").get<std::string>();
        s.line = js.value("line", std::string());
        s.verb = js.at("verb").get<std::string>();
        s.target_object = js.at("object").get<std::string>();
        s.secondary_objects = js.value("secondary", std::vector<std::string>{});
        if (!js.at("endpoint").is_null())
            s.endpoint = Endpoint{js["endpoint"].at("worker").get<std::string>(),
                                  js["endpoint"].at("path").get<std::string>()};
        s.query_text = js.value("query", std::string());
        s.repeat = js.value("repeat", 1);
        s.liaisons = js.value("liaisons", std::vector<std::string>{});
        s.bench = js.value("bench", std::string());
        s.to_position = js.value("to", std::string());
        s.executed = js.value("executed", false);
        psm.steps.push_back(std::move(s));
    }
    for (const auto& ja : j.at("graph").at("arcs"))
        psm.arcs.insert({ja.at(0).get<std::string>(), ja.at(1).get<std::string>()});
    psm.mode = binding_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& jr : j.value("reservations", ordered_json::array()))
        psm.reservations.emplace_back(jr.at("worker").get<std::string>(),
                                      jr.at("holder").get<std::string>());
    psm.holder = j.value("holder", std::string("bind"));
    return psm;
}

}  // namespace cpus
