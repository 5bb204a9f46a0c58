#pragma once

// Platform-independent assembly process generation: assembly tasks derived
// from the product's liaisons, the assembly-task precedence graph, activity
// specifications, and exhaustive sequence enumeration.

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "cpus/errors.hpp"
#include "cpus/product_model.hpp"

namespace cpus {

using ordered_json = nlohmann::ordered_json;

struct QosRequirement {
    std::string key;
    std::string op;  // > >= =
    double threshold = 0.0;
};

struct ActivitySpec {
    std::string verb;
    std::optional<LiaisonEndPoint> subject;
    std::optional<LiaisonEndPoint> target;
    std::vector<QosRequirement> qos;
    int repeat = 1;
    std::string liaison;  // liaison this activity realizes (bookkeeping)
};

struct AssemblyTask {
    std::string id;
    std::string origin_node;          // part whose processing produced the task
    std::vector<std::string> liaisons;
    std::vector<ActivitySpec> activities;
    int order_key = 0;                // max order among merged liaisons
    std::string line;                 // governing assembly line label, may be empty
};

struct InitialTask {
    enum class Kind { MIT, BIT };
    std::string id;
    Kind kind = Kind::MIT;
    std::string base_part;
    std::string subassembly;
};

struct PrecedenceGraph {
    std::vector<std::string> nodes;
    std::set<std::pair<std::string, std::string>> arcs;
    std::vector<InitialTask> initials;

    bool has_node(const std::string& n) const {
        return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
    }
    std::vector<std::string> predecessors(const std::string& n) const {
        std::vector<std::string> out;
        for (const auto& [a, b] : arcs)
            if (b == n) out.push_back(a);
        return out;
    }
    std::vector<std::string> successors(const std::string& n) const {
        std::vector<std::string> out;
        for (const auto& [a, b] : arcs)
            if (a == n) out.push_back(b);
        return out;
    }
};

struct PimContext {
    std::map<std::string, std::string> part_parent;  // part -> parent ("" at root)
    std::vector<SubAssemblyDesignation> designations;

    bool within(const std::string& id, const std::string& ancestor) const {
        std::string cur = id;
        for (;;) {
            if (cur == ancestor) return true;
            auto it = part_parent.find(cur);
            if (it == part_parent.end() || it->second.empty()) return false;
            cur = it->second;
        }
    }

    // Assembly line governing a part: the designation of the nearest
    // enclosing designated composite.
    std::string line_for(const std::string& part) const {
        std::string best_line;
        size_t best_depth = 0;
        bool found = false;
        for (const auto& d : designations) {
            if (!within(part, d.composite_part)) continue;
            size_t depth = 0;
            for (std::string cur = d.composite_part;;) {
                auto it = part_parent.find(cur);
                if (it == part_parent.end() || it->second.empty()) break;
                cur = it->second;
                depth++;
            }
            if (!found || depth >= best_depth) {
                best_line = d.assembly_line;
                best_depth = depth;
                found = true;
            }
        }
        return best_line;
    }
};

struct ProcessPim {
    std::vector<AssemblyTask> tasks;
    PrecedenceGraph graph;
    DecompositionReport report;
    PimContext context;

    const AssemblyTask* find_task(const std::string& id) const {
        for (const auto& t : tasks)
            if (t.id == id) return &t;
        return nullptr;
    }
};

namespace detail {

// Owned realizable liaisons of a node, sorted by (order, declaration index).
inline std::vector<std::string> realizable_owned(const ProductModel& m, const Part& node) {
    std::vector<std::pair<std::pair<int, int>, std::string>> keyed;
    int decl = 0;
    for (const auto& lid : node.owned_liaisons) {
        const Liaison* l = m.find_liaison(lid);
        decl++;
        if (!l || l->kind == LiaisonKind::HiDclRealised) continue;  // Rule 1 exclusion
        keyed.push_back({{l->order, decl}, lid});
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::string> out;
    for (auto& [k, id] : keyed) out.push_back(id);
    return out;
}

// Endpoint parts of a liaison lifted to direct children of `node`. Parts
// outside the node's subtree contribute nothing (they are treated as already
// assembled elsewhere).
inline std::set<std::string> lifted_parts(const ProductModel& m, const Liaison& l,
                                          const std::string& node) {
    std::set<std::string> out;
    for (const auto& pr : l.pairs)
        for (const auto* ep : {&pr.end_a, &pr.end_b})
            if (auto c = m.lift_to_child_of(ep->part, node)) out.insert(*c);
    return out;
}

inline std::optional<std::string> seed_base_part(const ProductModel& m, const std::string& node) {
    for (const auto& d : m.subassemblies)
        if (d.composite_part == node) return d.base_part;
    return std::nullopt;
}

// Composite children ordered master-subtree-first, then branch subtrees in
// designation declaration order, then declaration order.
inline std::vector<std::string> ordered_composite_children(const ProductModel& m,
                                                           const Part& node) {
    struct Entry { int category; int decl; std::string id; };
    std::vector<Entry> entries;
    const SubAssemblyDesignation* master = m.master();
    int decl = 0;
    for (const auto& cid : node.children) {
        const Part* c = m.find_part(cid);
        decl++;
        if (!c || c->kind != PartKind::Composite) continue;
        int category = 1 + static_cast<int>(m.subassemblies.size()) + 1;
        if (master && m.within(master->composite_part, cid)) {
            category = 0;
        } else {
            int bi = 0;
            for (const auto& d : m.subassemblies) {
                if (d.role == SubAssemblyRole::Branch && m.within(d.composite_part, cid)) {
                    category = 1 + bi;
                    break;
                }
                bi++;
            }
        }
        entries.push_back({category, decl, cid});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.category, a.decl) < std::tie(b.category, b.decl);
    });
    std::vector<std::string> out;
    for (auto& e : entries) out.push_back(e.id);
    return out;
}

struct TaskSeed {
    std::string origin;
    std::vector<std::string> liaisons;  // merged group, in (order, decl) order
    int order_key = 0;
    int group_decl = 0;  // declaration index of the first liaison, for tie-breaks
    std::set<std::string> lifted;  // union of lifted endpoint parts
};

// Groups a node's liaisons into tasks per Rules 1/2a/2b. Membership starts
// from the designated base part (when the node is a designated sub-assembly)
// and grows as liaisons attach parts; every liaison attaching a part pulls in
// the other pending liaisons that tie the same new parts to the membership.
inline std::vector<TaskSeed> group_node_liaisons(const ProductModel& m, const Part& node) {
    std::vector<std::string> ordered = realizable_owned(m, node);
    std::set<std::string> members;
    if (auto base = seed_base_part(m, node.id)) members.insert(*base);

    std::deque<std::string> pending(ordered.begin(), ordered.end());
    std::map<std::string, int> decl_index;
    for (size_t i = 0; i < ordered.size(); i++) decl_index[ordered[i]] = static_cast<int>(i);

    std::vector<TaskSeed> seeds;
    while (!pending.empty()) {
        std::string first = pending.front();
        pending.pop_front();
        const Liaison& l0 = *m.find_liaison(first);
        std::set<std::string> l0_parts = lifted_parts(m, l0, node.id);
        std::set<std::string> fresh;
        for (const auto& p : l0_parts)
            if (!members.count(p)) fresh.insert(p);

        TaskSeed seed;
        seed.origin = node.id;
        seed.liaisons.push_back(first);
        seed.order_key = l0.order;
        seed.group_decl = decl_index[first];
        seed.lifted = l0_parts;

        if (!fresh.empty()) {
            std::set<std::string> scope = members;
            scope.insert(fresh.begin(), fresh.end());
            for (auto it = pending.begin(); it != pending.end();) {
                const Liaison& lx = *m.find_liaison(*it);
                std::set<std::string> px = lifted_parts(m, lx, node.id);
                bool touches_fresh = false, inside = !px.empty();
                for (const auto& p : px) {
                    if (fresh.count(p)) touches_fresh = true;
                    if (!scope.count(p)) inside = false;
                }
                if (inside && touches_fresh) {
                    seed.liaisons.push_back(*it);
                    seed.order_key = std::max(seed.order_key, lx.order);
                    seed.lifted.insert(px.begin(), px.end());
                    it = pending.erase(it);
                } else {
                    ++it;
                }
            }
            members.insert(fresh.begin(), fresh.end());
        }
        seeds.push_back(std::move(seed));
    }

    // Chain order within the node: ascending order key, declaration for ties.
    std::stable_sort(seeds.begin(), seeds.end(), [](const TaskSeed& a, const TaskSeed& b) {
        return std::tie(a.order_key, a.group_decl) < std::tie(b.order_key, b.group_decl);
    });
    return seeds;
}

inline void visit_composites(const ProductModel& m, const std::string& node,
                             std::vector<std::string>& out) {
    const Part* p = m.find_part(node);
    if (!p || p->kind != PartKind::Composite) return;
    for (const auto& c : ordered_composite_children(m, *p)) visit_composites(m, c, out);
    out.push_back(node);
}

inline std::vector<detail::TaskSeed> all_task_seeds(const ProductModel& m) {
    std::vector<std::string> postorder;
    visit_composites(m, m.root, postorder);
    std::vector<TaskSeed> seeds;
    for (const auto& node : postorder) {
        auto node_seeds = group_node_liaisons(m, *m.find_part(node));
        seeds.insert(seeds.end(), node_seeds.begin(), node_seeds.end());
    }
    return seeds;
}

}  // namespace detail

/// Rule 1 / Rule 2 task identification. Tasks are numbered AT1..ATn in a
/// deterministic traversal: depth-first with the master subtree first, then
/// branch subtrees in declaration order; within a node, ascending liaison
/// order with declaration-order tie-breaks.
inline std::vector<AssemblyTask> identify_tasks(const ProductModel& m) {
    std::vector<AssemblyTask> tasks;
    PimContext ctx;  // only line_for is needed here
    for (const auto& [id, p] : m.parts)
        for (const auto& c : p.children) ctx.part_parent[c] = id;
    if (!m.root.empty()) ctx.part_parent.try_emplace(m.root, "");
    ctx.designations = m.subassemblies;

    int n = 0;
    for (auto& seed : detail::all_task_seeds(m)) {
        AssemblyTask t;
        t.id = "AT" + std::to_string(++n);
        t.origin_node = seed.origin;
        t.liaisons = seed.liaisons;
        t.order_key = seed.order_key;
        t.line = ctx.line_for(seed.origin);
        tasks.push_back(std::move(t));
    }
    return tasks;
}

namespace detail {

inline std::optional<std::string> find_cycle(const PrecedenceGraph& g) {
    std::map<std::string, int> state;  // 0 new, 1 on stack, 2 done
    std::vector<std::string> stack;
    std::string cycle;
    std::function<bool(const std::string&)> dfs = [&](const std::string& n) -> bool {
        state[n] = 1;
        stack.push_back(n);
        for (const auto& [a, b] : g.arcs) {
            if (a != n) continue;
            if (state[b] == 1) {
                auto it = std::find(stack.begin(), stack.end(), b);
                std::ostringstream os;
                for (; it != stack.end(); ++it) os << *it << " -> ";
                os << b;
                cycle = os.str();
                return true;
            }
            if (state[b] == 0 && dfs(b)) return true;
        }
        stack.pop_back();
        state[n] = 2;
        return false;
    };
    for (const auto& n : g.nodes)
        if (state[n] == 0 && dfs(n)) return cycle;
    return std::nullopt;
}

}  // namespace detail

/// Constructs the assembly-task precedence graph: MIT/BIT initial nodes,
/// order-chained arcs within each node, and arcs from each child subtree's
/// terminal tasks to the parent task that consumes that child.
inline PrecedenceGraph build_pg(const ProductModel& m, const std::vector<AssemblyTask>& tasks) {
    PrecedenceGraph g;

    // Rebuild per-node chain structure from the deterministic task layout.
    std::map<std::string, std::vector<const AssemblyTask*>> by_node;
    for (const auto& t : tasks) by_node[t.origin_node].push_back(&t);

    auto subtree_tasks = [&](const std::string& root) {
        std::vector<const AssemblyTask*> out;
        for (const auto& t : tasks)
            if (m.within(t.origin_node, root)) out.push_back(&t);
        return out;
    };

    for (const auto& t : tasks) g.nodes.push_back(t.id);

    // Within-node chains: consecutive order levels fully connected.
    for (auto& [node, list] : by_node) {
        std::map<int, std::vector<const AssemblyTask*>> levels;
        for (const auto* t : list) levels[t->order_key].push_back(t);
        const std::vector<const AssemblyTask*>* prev = nullptr;
        for (auto& [key, level] : levels) {
            if (prev)
                for (const auto* a : *prev)
                    for (const auto* b : level) g.arcs.insert({a->id, b->id});
            prev = &level;
        }
    }

    // Cross-level consumption arcs, bottom-up.
    std::vector<std::string> postorder;
    detail::visit_composites(m, m.root, postorder);
    for (const auto& node : postorder) {
        auto it = by_node.find(node);
        if (it == by_node.end()) continue;
        const Part* p = m.find_part(node);
        for (const auto& child : p->children) {
            const Part* c = m.find_part(child);
            if (!c || c->kind != PartKind::Composite) continue;
            auto inner = subtree_tasks(child);
            if (inner.empty()) continue;
            // first task at `node` whose lifted parts include this child
            const AssemblyTask* consumer = nullptr;
            for (const auto* t : it->second) {
                const Liaison* any = nullptr;
                std::set<std::string> lifted;
                for (const auto& lid : t->liaisons) {
                    any = m.find_liaison(lid);
                    if (any) {
                        auto lp = detail::lifted_parts(m, *any, node);
                        lifted.insert(lp.begin(), lp.end());
                    }
                }
                if (lifted.count(child)) { consumer = t; break; }
            }
            if (!consumer) continue;
            // terminal tasks of the child subtree: no successor inside it
            std::set<std::string> inner_ids;
            for (const auto* t : inner) inner_ids.insert(t->id);
            for (const auto* t : inner) {
                bool has_inner_succ = false;
                for (const auto& [a, b] : g.arcs)
                    if (a == t->id && inner_ids.count(b)) has_inner_succ = true;
                if (!has_inner_succ) g.arcs.insert({t->id, consumer->id});
            }
        }
    }

    auto indegree = [&](const std::string& n) {
        int d = 0;
        for (const auto& [a, b] : g.arcs)
            if (b == n) d++;
        return d;
    };

    // BIT per branch designation, preceding the first tasks of its subtree.
    int bit_count = 0;
    for (const auto& d : m.subassemblies) {
        if (d.role != SubAssemblyRole::Branch) continue;
        InitialTask bit;
        bit.id = "BIT" + std::to_string(++bit_count);
        bit.kind = InitialTask::Kind::BIT;
        bit.base_part = d.base_part;
        bit.subassembly = d.composite_part;
        g.initials.push_back(bit);
        g.nodes.insert(g.nodes.begin() + (bit_count - 1), bit.id);
        for (const auto* t : subtree_tasks(d.composite_part))
            if (indegree(t->id) == 0) g.arcs.insert({bit.id, t->id});
    }

    // MIT from the master designation; it precedes everything still unanchored.
    const SubAssemblyDesignation* master = m.master();
    InitialTask mit;
    mit.id = "MIT";
    mit.kind = InitialTask::Kind::MIT;
    if (master) {
        mit.base_part = master->base_part;
        mit.subassembly = master->composite_part;
    }
    g.initials.insert(g.initials.begin(), mit);
    g.nodes.insert(g.nodes.begin(), mit.id);
    for (const auto& t : tasks)
        if (indegree(t.id) == 0) g.arcs.insert({mit.id, t.id});

    if (auto cycle = detail::find_cycle(g)) throw CyclicPrecedence(*cycle);
    return g;
}

struct BranchDecision {
    std::string branch;      // BIT id or the branch sub-assembly's part id
    std::string after_task;  // master task the branch is serialized after
};

struct BranchDecisions {
    std::vector<BranchDecision> inline_on_master;
    std::vector<std::pair<std::string, std::string>> extra_arcs;  // pruning arcs

    bool empty() const { return inline_on_master.empty() && extra_arcs.empty(); }
};

/// Refines an AT-PG with branch decisions: serialized branches gain an arc
/// from the chosen master task to their BIT; extra pruning arcs are added
/// verbatim. The node set never changes.
inline PrecedenceGraph refine_pg(const PrecedenceGraph& graph, const BranchDecisions& decisions) {
    PrecedenceGraph g = graph;
    auto add_arc = [&](const std::string& from, const std::string& to) {
        if (!g.has_node(from)) throw DanglingReference(from);
        if (!g.has_node(to)) throw DanglingReference(to);
        g.arcs.insert({from, to});
        if (auto cycle = detail::find_cycle(g)) throw CyclicPrecedence(*cycle);
    };
    for (const auto& d : decisions.inline_on_master) {
        std::string bit_id;
        for (const auto& init : g.initials)
            if (init.id == d.branch || init.subassembly == d.branch) bit_id = init.id;
        if (bit_id.empty()) throw DanglingReference(d.branch);
        add_arc(d.after_task, bit_id);
    }
    for (const auto& [from, to] : decisions.extra_arcs) add_arc(from, to);
    return g;
}

/// All topological orders in lexicographic node-id order, truncated at cap.
inline std::vector<std::vector<std::string>> enumerate_sequences(const PrecedenceGraph& g,
                                                                 size_t cap) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> nodes = g.nodes;
    std::sort(nodes.begin(), nodes.end());

    std::map<std::string, int> indegree;
    for (const auto& n : nodes) indegree[n] = 0;
    for (const auto& [a, b] : g.arcs) indegree[b]++;

    std::vector<std::string> current;
    std::set<std::string> used;
    std::function<void()> recurse = [&]() {
        if (out.size() >= cap) return;
        if (current.size() == nodes.size()) {
            out.push_back(current);
            return;
        }
        for (const auto& n : nodes) {
            if (used.count(n) || indegree[n] != 0) continue;
            used.insert(n);
            current.push_back(n);
            for (const auto& [a, b] : g.arcs)
                if (a == n) indegree[b]--;
            recurse();
            for (const auto& [a, b] : g.arcs)
                if (a == n) indegree[b]++;
            current.pop_back();
            used.erase(n);
            if (out.size() >= cap) return;
        }
    };
    recurse();
    return out;
}

struct ActivityEmission {
    std::vector<AssemblyTask> tasks;
    std::vector<std::string> warnings;
};

/// Populates activity specifications from the liaison-type mapping table.
/// Pair counts become repeat counts; platform-dependent moves are not
/// emitted here.
inline ActivityEmission emit_activity_specs(const ProductModel& m,
                                            std::vector<AssemblyTask> tasks) {
    ActivityEmission out;
    for (auto& t : tasks) {
        // per-liaison order within the task follows (order, declaration)
        std::vector<std::pair<std::pair<int, int>, std::string>> keyed;
        for (const auto& lid : t.liaisons) {
            const Liaison* l = m.find_liaison(lid);
            const Part* owner = m.find_part(t.origin_node);
            int decl = 0;
            if (owner) {
                auto it = std::find(owner->owned_liaisons.begin(), owner->owned_liaisons.end(),
                                    lid);
                decl = it == owner->owned_liaisons.end()
                           ? 0
                           : static_cast<int>(it - owner->owned_liaisons.begin());
            }
            keyed.push_back({{l ? l->order : 0, decl}, lid});
        }
        std::sort(keyed.begin(), keyed.end());

        t.activities.clear();
        for (const auto& [key, lid] : keyed) {
            const Liaison& l = *m.find_liaison(lid);
            ActivitySpec a;
            a.liaison = lid;
            auto verb = verb_for_liaison_type(l.liaison_type);
            if (!verb) {
                out.warnings.push_back("unknown liaison type \"" + l.liaison_type + "\" on " +
                                       lid + ": emitting no-op activity");
                a.verb = "NoOp";
            } else {
                a.verb = *verb;
            }
            a.repeat = std::max<int>(1, static_cast<int>(l.pairs.size()));
            if (!l.pairs.empty()) {
                const LiaisonPair& pr = l.pairs.front();
                bool a_threaded = pr.end_a.feature.find("ThreadedHole") != std::string::npos;
                bool b_threaded = pr.end_b.feature.find("ThreadedHole") != std::string::npos;
                if (a_threaded && !b_threaded) {
                    // fastenings act on the threaded-hole endpoint
                    a.subject = pr.end_b;
                    a.target = pr.end_a;
                } else {
                    a.subject = pr.end_a;
                    a.target = pr.end_b;
                }
            }
            t.activities.push_back(std::move(a));
        }
    }
    out.tasks = std::move(tasks);
    return out;
}

/// Deterministic DOT rendering of an AT-PG.
inline std::string export_dot(const PrecedenceGraph& g) {
    if (g.nodes.empty()) return "digraph atpg {}\n";
    std::ostringstream os;
    os << "digraph atpg {\n";
    for (const auto& n : g.nodes) {
        bool initial = false;
        for (const auto& init : g.initials)
            if (init.id == n) initial = true;
        os << "  \"" << n << "\"";
        if (initial) os << " [shape=doublecircle]";
        os << ";\n";
    }
    for (const auto& [a, b] : g.arcs) os << "  \"" << a << "\" -> \"" << b << "\";\n";
    os << "}\n";
    return os.str();
}

struct PimGeneration {
    ProcessPim pim;
    std::vector<std::string> warnings;
};

/// Full PIM generation: tasks, graph, activity specs, decomposition report
/// and the context block consumed by the binder.
inline PimGeneration make_pim(const ProductModel& m) {
    PimGeneration out;
    auto tasks = identify_tasks(m);
    out.pim.graph = build_pg(m, tasks);
    auto emission = emit_activity_specs(m, std::move(tasks));
    out.pim.tasks = std::move(emission.tasks);
    out.warnings = std::move(emission.warnings);
    out.pim.report = decomposition_report(m);
    for (const auto& [id, p] : m.parts)
        for (const auto& c : p.children) out.pim.context.part_parent[c] = id;
    if (!m.root.empty()) out.pim.context.part_parent.try_emplace(m.root, "");
    out.pim.context.designations = m.subassemblies;
    return out;
}

// ---- JSON export / import -------------------------------------------------

inline ordered_json endpoint_to_json(const std::optional<LiaisonEndPoint>& ep) {
    if (!ep) return nullptr;
    return ordered_json{{"part", ep->part}, {"feature", ep->feature}};
}

inline std::optional<LiaisonEndPoint> endpoint_from_json(const ordered_json& j) {
    if (j.is_null()) return std::nullopt;
    return LiaisonEndPoint{j.at("part").get<std::string>(), j.at("feature").get<std::string>()};
}

inline ordered_json pim_to_json(const ProcessPim& pim) {
    ordered_json j;
    j["tasks"] = ordered_json::array();
    for (const auto& t : pim.tasks) {
        ordered_json jt;
        jt["id"] = t.id;
        jt["origin"] = t.origin_node;
        jt["order"] = t.order_key;
        jt["line"] = t.line;
        jt["liaisons"] = t.liaisons;
        jt["activities"] = ordered_json::array();
        for (const auto& a : t.activities) {
            ordered_json ja;
            ja["verb"] = a.verb;
            ja["subject"] = endpoint_to_json(a.subject);
            ja["target"] = endpoint_to_json(a.target);
            ja["qos"] = ordered_json::array();
            for (const auto& q : a.qos)
                ja["qos"].push_back({{"key", q.key}, {"op", q.op}, {"threshold", q.threshold}});
            ja["repeat"] = a.repeat;
            ja["liaison"] = a.liaison;
            jt["activities"].push_back(ja);
        }
        j["tasks"].push_back(jt);
    }
    j["graph"]["nodes"] = pim.graph.nodes;
    j["graph"]["arcs"] = ordered_json::array();
    for (const auto& [a, b] : pim.graph.arcs) j["graph"]["arcs"].push_back({a, b});
    j["graph"]["initials"] = ordered_json::array();
    for (const auto& init : pim.graph.initials) {
        j["graph"]["initials"].push_back(
            {{"id", init.id},
             {"kind", init.kind == InitialTask::Kind::MIT ? "MIT" : "BIT"},
             {"basePart", init.base_part},
             {"subassembly", init.subassembly}});
    }
    j["report"] = {{"N", pim.report.n}, {"K", pim.report.k}, {"P", pim.report.p},
                   {"M", pim.report.m}};
    j["context"]["partParents"] = pim.context.part_parent;
    j["context"]["designations"] = ordered_json::array();
    for (const auto& d : pim.context.designations) {
        j["context"]["designations"].push_back(
            {{"role", d.role == SubAssemblyRole::Master ? "master" : "branch"},
             {"of", d.composite_part},
             {"basePart", d.base_part},
             {"line", d.assembly_line}});
    }
    return j;
}

inline ProcessPim pim_from_json(const ordered_json& j) {
    ProcessPim pim;
    for (const auto& jt : j.at("tasks")) {
        AssemblyTask t;
        t.id = jt.at("id").get<std::string>();
        t.origin_node = jt.at("origin").get<std::string>();
        t.order_key = jt.at("order").get<int>();
        t.line = jt.value("line", std::string());
        t.liaisons = jt.at("liaisons").get<std::vector<std::string>>();
        for (const auto& ja : jt.at("activities")) {
            ActivitySpec a;
            a.verb = ja.at("verb").get<std::string>();
            a.subject = endpoint_from_json(ja.at("subject"));
            a.target = endpoint_from_json(ja.at("target"));
            for (const auto& jq : ja.at("qos"))
                a.qos.push_back({jq.at("key").get<std::string>(), jq.at("op").get<std::string>(),
                                 jq.at("threshold").get<double>()});
            a.repeat = ja.at("repeat").get<int>();
            a.liaison = ja.value("liaison", std::string());
            t.activities.push_back(std::move(a));
        }
        pim.tasks.push_back(std::move(t));
    }
    pim.graph.nodes = j.at("graph").at("nodes").get<std::vector<std::string>>();
    for (const auto& ja : j.at("graph").at("arcs"))
        pim.graph.arcs.insert({ja.at(0).get<std::string>(), ja.at(1).get<std::string>()});
    for (const auto& ji : j.at("graph").at("initials")) {
        InitialTask init;
        init.id = ji.at("id").get<std::string>();
        init.kind = ji.at("kind").get<std::string>() == "MIT" ? InitialTask::Kind::MIT
                                                              : InitialTask::Kind::BIT;
        init.base_part = ji.at("basePart").get<std::string>();
        init.subassembly = ji.at("subassembly").get<std::string>();
        pim.graph.initials.push_back(init);
    }
    pim.report.n = j.at("report").at("N").get<int>();
    pim.report.k = j.at("report").at("K").get<int>();
    pim.report.p = j.at("report").at("P").get<int>();
    pim.report.m = j.at("report").at("M").get<int>();
    if (j.contains("context")) {
        pim.context.part_parent =
            j.at("context").at("partParents").get<std::map<std::string, std::string>>();
        for (const auto& jd : j.at("context").at("designations")) {
            SubAssemblyDesignation d;
            d.role = jd.at("role").get<std::string>() == "master" ? SubAssemblyRole::Master
                                                                  : SubAssemblyRole::Branch;
            d.composite_part = jd.at("of").get<std::string>();
            d.base_part = jd.at("basePart").get<std::string>();
            d.assembly_line = jd.value("line", std::string());
            pim.context.designations.push_back(d);
        }
    }
    return pim;
}

/// Canonical text rendering of tasks + graph, used by the golden-file suite.
inline std::string describe_process(const std::vector<AssemblyTask>& tasks,
                                    const PrecedenceGraph& g) {
    std::ostringstream os;
    os << "tasks:\n";
    for (const auto& t : tasks) {
        os << "  " << t.id << " origin=" << t.origin_node << " order=" << t.order_key
           << " liaisons=";
        for (size_t i = 0; i < t.liaisons.size(); i++) os << (i ? "," : "") << t.liaisons[i];
        os << "\n";
        for (const auto& a : t.activities) {
            os << "    " << a.verb << " x" << a.repeat;
            if (a.subject && a.target)
                os << " " << a.subject->part << "." << a.subject->feature << " -> "
                   << a.target->part << "." << a.target->feature;
            os << " [" << a.liaison << "]\n";
        }
    }
    os << "graph:\n  nodes:";
    for (const auto& n : g.nodes) os << " " << n;
    os << "\n";
    for (const auto& [a, b] : g.arcs) os << "  " << a << " -> " << b << "\n";
    return os.str();
}

}  // namespace cpus
