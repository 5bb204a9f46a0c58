#pragma once

// Product structural model: part composition tree, liaisons, connectors and
// sub-assembly designations, with a Turtle-subset file format, validation and
// the dcl-0 decomposition report.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cpus/errors.hpp"
#include "cpus/rdf_text.hpp"

namespace cpus {

inline constexpr const char* kPsmmNamespace = "http://purl.org/net/metamodels/PSMM#";

enum class PartKind { Composite, Primitive };
enum class LiaisonKind { SelfDefined, LoDclDefined, HiDclRealised };
enum class SubAssemblyRole { Master, Branch };

// Closed verb mapping per liaison type; unknown types parse with a warning
// and later map to a no-op activity.
inline const std::vector<std::pair<std::string, std::string>>& liaison_type_verbs() {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"insertion", "PickAndInsert"},
        {"screw-fit", "ScrewPickAndFasten"},
        {"placement", "PickAndPlace"},
        {"snap", "PickAndInsert"},
        {"hold", "Hold"},
    };
    return table;
}

inline std::optional<std::string> verb_for_liaison_type(const std::string& type) {
    for (const auto& [t, v] : liaison_type_verbs())
        if (t == type) return v;
    return std::nullopt;
}

struct LiaisonEndPoint {
    std::string part;
    std::string feature;

    bool operator==(const LiaisonEndPoint&) const = default;
};

struct LiaisonPair {
    LiaisonEndPoint end_a;
    LiaisonEndPoint end_b;
};

struct Liaison {
    std::string id;
    LiaisonKind kind = LiaisonKind::SelfDefined;
    int order = 0;
    std::string liaison_type;
    std::vector<LiaisonPair> pairs;
};

struct Part {
    std::string id;
    std::string name;
    PartKind kind = PartKind::Primitive;
    std::vector<std::string> children;
    std::vector<std::string> owned_liaisons;
    std::vector<std::string> endpoints;
};

struct SubAssemblyDesignation {
    SubAssemblyRole role = SubAssemblyRole::Master;
    std::string composite_part;
    std::string base_part;
    std::string assembly_line;  // optional workbench label
};

struct Connector {
    std::string id;
    std::string name;
    std::vector<std::string> attached_liaisons;
};

struct ProductModel {
    std::string root;
    std::map<std::string, Part> parts;
    std::map<std::string, Liaison> liaisons;
    std::map<std::string, Connector> connectors;
    std::vector<SubAssemblyDesignation> subassemblies;
    std::vector<std::pair<std::string, std::string>> prefixes;

    const Part* find_part(const std::string& id) const {
        auto it = parts.find(id);
        return it == parts.end() ? nullptr : &it->second;
    }
    const Liaison* find_liaison(const std::string& id) const {
        auto it = liaisons.find(id);
        return it == liaisons.end() ? nullptr : &it->second;
    }

    std::optional<std::string> parent_of(const std::string& id) const {
        for (const auto& [pid, p] : parts)
            for (const auto& c : p.children)
                if (c == id) return pid;
        return std::nullopt;
    }

    const SubAssemblyDesignation* master() const {
        for (const auto& d : subassemblies)
            if (d.role == SubAssemblyRole::Master) return &d;
        return nullptr;
    }

    // True when `id` equals `ancestor` or lies in its composition subtree.
    bool within(const std::string& id, const std::string& ancestor) const {
        if (id == ancestor) return true;
        const Part* p = find_part(ancestor);
        if (!p) return false;
        for (const auto& c : p->children)
            if (within(id, c)) return true;
        return false;
    }

    // Maps `id` to the direct child of `node` whose subtree contains it.
    std::optional<std::string> lift_to_child_of(const std::string& id,
                                                const std::string& node) const {
        const Part* p = find_part(node);
        if (!p) return std::nullopt;
        for (const auto& c : p->children)
            if (within(id, c)) return c;
        return std::nullopt;
    }
};

struct DecompositionReport {
    int n = 0;  // parts at dcl-0
    int k = 0;  // dcl-0 composites with >=1 composite child (CCAP)
    int p = 0;  // dcl-0 composites whose children are all primitive (PCAP)
    int m = 0;  // liaisons owned at dcl-0 (PAA)

    bool operator==(const DecompositionReport&) const = default;
};

struct Violation {
    std::string element;
    std::string message;
};

using ValidationReport = std::vector<Violation>;

struct ParsedModel {
    ProductModel model;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string local_id(const rdf::Document& doc, const rdf::Node& n) {
    if (n.kind == rdf::Node::Kind::Iri) {
        // strip the default namespace when the IRI lives in it
        if (auto ns = doc.ns_for(":"); ns && n.text.rfind(*ns, 0) == 0)
            return n.text.substr(ns->size());
        return n.text;
    }
    if (n.kind == rdf::Node::Kind::Name && !n.text.empty() && n.text[0] == ':')
        return n.text.substr(1);
    return n.text;
}

inline bool in_psmm(const rdf::Document& doc, const rdf::Node& n) {
    return doc.resolve(n).first == kPsmmNamespace;
}

inline const rdf::Node* blank_prop(const rdf::Node& blank, const rdf::Document& doc,
                                   const std::string& local) {
    for (const auto& [p, o] : blank.props)
        if (doc.resolve(p) == std::make_pair(std::string(kPsmmNamespace), local)) return &o;
    return nullptr;
}

}  // namespace detail

/// Parses the PSM triple text format. Throws SyntaxError, UnknownVocabulary
/// and DanglingReference; tolerated oddities (foreign-namespace triples,
/// unknown liaison types, missing designations) come back as warnings.
inline ParsedModel parse_product_model(const std::string& text) {
    rdf::Document doc = rdf::Parser(text).parse_document();
    ParsedModel out;
    ProductModel& m = out.model;
    m.prefixes = doc.prefixes;

    auto warn = [&](const std::string& s) { out.warnings.push_back(s); };

    auto endpoint_from_blank = [&](const rdf::Node& blank, int line) {
        LiaisonEndPoint ep;
        if (const auto* p = detail::blank_prop(blank, doc, "part"))
            ep.part = detail::local_id(doc, *p);
        if (const auto* f = detail::blank_prop(blank, doc, "feature")) ep.feature = f->text;
        if (ep.part.empty() || ep.feature.empty())
            throw SyntaxError(line, "liaison endpoint needs psmm:part and psmm:feature");
        return ep;
    };

    auto ensure_part = [&](const std::string& id) -> Part& {
        auto [it, fresh] = m.parts.try_emplace(id);
        if (fresh) it->second.id = id;
        return it->second;
    };
    auto ensure_liaison = [&](const std::string& id) -> Liaison& {
        auto [it, fresh] = m.liaisons.try_emplace(id);
        if (fresh) it->second.id = id;
        return it->second;
    };

    std::set<std::string> declared;  // subjects that received an `a` type

    for (const auto& st : doc.statements) {
        std::string sid = detail::local_id(doc, st.subject);
        for (const auto& [pred, obj] : st.props) {
            auto [pns, plocal] = doc.resolve(pred);
            bool is_a = pred.is("a");
            if (!is_a && pns != kPsmmNamespace) {
                if (pns.empty() && pred.kind == rdf::Node::Kind::Name &&
                    pred.text.find(':') != std::string::npos) {
                    throw SyntaxError(pred.line, "undeclared prefix in '" + pred.text + "'");
                }
                warn("ignored foreign-namespace triple on :" + sid + " (" + pred.text + ")");
                continue;
            }
            if (is_a) {
                auto [ons, olocal] = doc.resolve(obj);
                if (ons != kPsmmNamespace) {
                    warn("ignored foreign type on :" + sid + " (" + obj.text + ")");
                    continue;
                }
                declared.insert(sid);
                if (olocal == "CompositePart") ensure_part(sid).kind = PartKind::Composite;
                else if (olocal == "PrimitivePart") ensure_part(sid).kind = PartKind::Primitive;
                else if (olocal == "SelfDefinedLiaison")
                    ensure_liaison(sid).kind = LiaisonKind::SelfDefined;
                else if (olocal == "LoDclDefinedLiaison")
                    ensure_liaison(sid).kind = LiaisonKind::LoDclDefined;
                else if (olocal == "HiDclRealisedLiaison")
                    ensure_liaison(sid).kind = LiaisonKind::HiDclRealised;
                else if (olocal == "Connector") m.connectors[sid].id = sid;
                else throw UnknownVocabulary("psmm:" + olocal);
                continue;
            }

            if (plocal == "hasPart") {
                ensure_part(sid).children.push_back(detail::local_id(doc, obj));
            } else if (plocal == "name") {
                if (m.connectors.count(sid)) m.connectors[sid].name = obj.text;
                else ensure_part(sid).name = obj.text;
            } else if (plocal == "endpoint") {
                ensure_part(sid).endpoints.push_back(obj.text);
            } else if (plocal == "ownedLiaison") {
                ensure_part(sid).owned_liaisons.push_back(detail::local_id(doc, obj));
            } else if (plocal == "order") {
                auto v = obj.numeric();
                if (!v || *v < 0) throw SyntaxError(obj.line, "psmm:order needs a nonnegative integer");
                ensure_liaison(sid).order = static_cast<int>(*v);
            } else if (plocal == "liaisonType") {
                std::string type = obj.text;
                ensure_liaison(sid).liaison_type = type;
                if (!verb_for_liaison_type(type))
                    warn("unknown liaison type \"" + type + "\" on :" + sid +
                         " (will map to a no-op activity)");
            } else if (plocal == "pair") {
                if (obj.kind != rdf::Node::Kind::Blank)
                    throw SyntaxError(obj.line, "psmm:pair expects a blank node");
                const auto* a = detail::blank_prop(obj, doc, "endA");
                const auto* b = detail::blank_prop(obj, doc, "endB");
                if (!a || !b || a->kind != rdf::Node::Kind::Blank ||
                    b->kind != rdf::Node::Kind::Blank)
                    throw SyntaxError(obj.line, "psmm:pair needs endA and endB blank nodes");
                LiaisonPair lp;
                lp.end_a = endpoint_from_blank(*a, obj.line);
                lp.end_b = endpoint_from_blank(*b, obj.line);
                ensure_liaison(sid).pairs.push_back(lp);
            } else if (plocal == "masterSubAssembly" || plocal == "branchSubAssembly") {
                if (obj.kind != rdf::Node::Kind::Blank)
                    throw SyntaxError(obj.line, "sub-assembly designation expects a blank node");
                SubAssemblyDesignation d;
                d.role = plocal == "masterSubAssembly" ? SubAssemblyRole::Master
                                                       : SubAssemblyRole::Branch;
                if (const auto* of = detail::blank_prop(obj, doc, "of"))
                    d.composite_part = detail::local_id(doc, *of);
                if (const auto* bp = detail::blank_prop(obj, doc, "basePart"))
                    d.base_part = detail::local_id(doc, *bp);
                if (const auto* al = detail::blank_prop(obj, doc, "assemblyLine"))
                    d.assembly_line = al->text;
                if (d.composite_part.empty() || d.base_part.empty())
                    throw SyntaxError(obj.line, "designation needs psmm:of and psmm:basePart");
                m.subassemblies.push_back(d);
            } else if (plocal == "attachedLiaison") {
                m.connectors[sid].id = sid;
                m.connectors[sid].attached_liaisons.push_back(detail::local_id(doc, obj));
            } else {
                throw UnknownVocabulary("psmm:" + plocal);
            }
        }
    }

    // Reference resolution: everything named must exist.
    for (const auto& [id, p] : m.parts) {
        for (const auto& c : p.children)
            if (!m.parts.count(c)) throw DanglingReference(c);
        for (const auto& l : p.owned_liaisons)
            if (!m.liaisons.count(l)) throw DanglingReference(l);
    }
    for (const auto& [id, l] : m.liaisons) {
        for (const auto& pr : l.pairs)
            for (const auto* ep : {&pr.end_a, &pr.end_b})
                if (!m.parts.count(ep->part)) throw DanglingReference(ep->part);
    }
    for (const auto& [id, c] : m.connectors)
        for (const auto& l : c.attached_liaisons)
            if (!m.liaisons.count(l)) throw DanglingReference(l);
    for (const auto& d : m.subassemblies) {
        if (!m.parts.count(d.composite_part)) throw DanglingReference(d.composite_part);
        if (!m.parts.count(d.base_part)) throw DanglingReference(d.base_part);
    }

    // Root inference: the unique part without a parent.
    std::set<std::string> has_parent;
    for (const auto& [id, p] : m.parts)
        for (const auto& c : p.children) has_parent.insert(c);
    std::vector<std::string> roots;
    for (const auto& [id, p] : m.parts)
        if (!has_parent.count(id)) roots.push_back(id);
    if (roots.size() == 1) {
        m.root = roots.front();
    } else if (!roots.empty()) {
        // keep a deterministic candidate; validate() reports the defect
        m.root = roots.front();
        warn("composition graph has " + std::to_string(roots.size()) + " parentless parts");
    }

    if (!m.master()) warn("no master sub-assembly designation");

    return out;
}

/// Checks every type invariant; returns violations as data (empty = valid).
inline ValidationReport validate(const ProductModel& m) {
    ValidationReport report;
    auto flag = [&](const std::string& el, const std::string& msg) {
        report.push_back({el, msg});
    };

    // Composition tree: single root, no part with two parents, acyclic.
    std::map<std::string, int> parent_count;
    for (const auto& [id, p] : m.parts)
        for (const auto& c : p.children) {
            parent_count[c]++;
            if (!m.parts.count(c)) flag(id, "child part does not exist: " + c);
        }
    int roots = 0;
    for (const auto& [id, p] : m.parts)
        if (!parent_count.count(id)) roots++;
    if (roots != 1)
        flag(m.root.empty() ? "(model)" : m.root,
             "composition graph must have exactly one root, found " + std::to_string(roots));
    for (const auto& [id, n] : parent_count)
        if (n > 1) flag(id, "part has " + std::to_string(n) + " parents");

    for (const auto& [id, p] : m.parts) {
        if (p.kind == PartKind::Primitive) {
            if (!p.children.empty()) flag(id, "primitive part must not have children");
            if (!p.owned_liaisons.empty()) flag(id, "primitive part must not own liaisons");
        } else if (p.children.empty()) {
            flag(id, "composite part needs at least one constituent part");
        }
    }

    // Liaisons: pair arity per kind, endpoint features, distinct pair parts,
    // and unique ownership (unowned realizable liaisons would silently drop
    // out of the generated process).
    std::map<std::string, std::vector<std::string>> owners;
    for (const auto& [pid, p] : m.parts)
        for (const auto& lid : p.owned_liaisons) owners[lid].push_back(pid);
    for (const auto& [id, l] : m.liaisons) {
        if (l.kind == LiaisonKind::SelfDefined && l.pairs.empty())
            flag(id, "SelfDefined liaison needs at least one LiaisonPair");
        if (l.kind != LiaisonKind::SelfDefined && !l.pairs.empty())
            flag(id, "only SelfDefined liaisons carry LiaisonPairs");
        for (const auto& pr : l.pairs) {
            if (pr.end_a.part == pr.end_b.part)
                flag(id, "liaison pair endpoints reference the same part: " + pr.end_a.part);
            for (const auto* ep : {&pr.end_a, &pr.end_b}) {
                const Part* part = m.find_part(ep->part);
                if (!part) {
                    flag(id, "endpoint references missing part: " + ep->part);
                } else if (std::find(part->endpoints.begin(), part->endpoints.end(),
                                     ep->feature) == part->endpoints.end()) {
                    flag(id, "feature \"" + ep->feature + "\" not declared on part " + ep->part);
                }
            }
        }
        auto it = owners.find(id);
        size_t owner_count = it == owners.end() ? 0 : it->second.size();
        if (l.kind != LiaisonKind::HiDclRealised && owner_count == 0)
            flag(id, "realizable liaison is not owned by any part");
        if (owner_count > 1) flag(id, "liaison owned by more than one part");
    }

    // Designations: exactly one master; base part a direct child of the composite.
    int masters = 0;
    for (const auto& d : m.subassemblies) {
        if (d.role == SubAssemblyRole::Master) masters++;
        const Part* comp = m.find_part(d.composite_part);
        if (!comp) {
            flag(d.composite_part, "designated composite part does not exist");
            continue;
        }
        if (comp->kind != PartKind::Composite)
            flag(d.composite_part, "sub-assembly designation must reference a composite part");
        if (std::find(comp->children.begin(), comp->children.end(), d.base_part) ==
            comp->children.end())
            flag(d.composite_part,
                 "base part " + d.base_part + " is not a constituent of " + d.composite_part);
    }
    if (masters != 1)
        flag("(model)", "exactly one master sub-assembly required, found " +
                            std::to_string(masters));

    for (const auto& [id, c] : m.connectors)
        for (const auto& l : c.attached_liaisons)
            if (!m.liaisons.count(l)) flag(id, "attached liaison does not exist: " + l);

    return report;
}

/// dcl-0 counts feeding the assembly-process decomposition.
inline DecompositionReport decomposition_report(const ProductModel& m) {
    DecompositionReport r;
    const Part* root = m.find_part(m.root);
    if (!root) return r;
    r.n = static_cast<int>(root->children.size());
    for (const auto& cid : root->children) {
        const Part* c = m.find_part(cid);
        if (!c || c->kind != PartKind::Composite) continue;
        bool has_composite_child = false;
        for (const auto& gid : c->children) {
            const Part* g = m.find_part(gid);
            if (g && g->kind == PartKind::Composite) has_composite_child = true;
        }
        if (has_composite_child) r.k++;
        else r.p++;
    }
    r.m = static_cast<int>(root->owned_liaisons.size());
    return r;
}

/// Canonical serialization: statements sorted by subject id, one predicate
/// per line, designations attached to the root subject. parse/serialize
/// round-trips on the parsed structure.
inline std::string serialize_product_model(const ProductModel& m) {
    std::ostringstream os;
    bool have_psmm = false, have_default = false;
    for (const auto& [p, ns] : m.prefixes) {
        if (ns == kPsmmNamespace) have_psmm = true;
        if (p == ":") have_default = true;
    }
    if (!have_psmm) os << "@prefix psmm: <" << kPsmmNamespace << "> .\n";
    std::string psmm = "psmm:";
    for (const auto& [p, ns] : m.prefixes) {
        os << "@prefix " << p << " <" << ns << "> .\n";
        if (ns == kPsmmNamespace) psmm = p;
    }
    if (!have_default) os << "@prefix : <urn:product:> .\n";
    os << "\n";

    auto q = [](const std::string& s) { return "\"" + rdf::escape_literal(s) + "\""; };
    auto pref = [&](const std::string& local) { return psmm + local; };

    std::vector<std::string> part_ids, liaison_ids, connector_ids;
    for (const auto& [id, _] : m.parts) part_ids.push_back(id);
    for (const auto& [id, _] : m.liaisons) liaison_ids.push_back(id);
    for (const auto& [id, _] : m.connectors) connector_ids.push_back(id);

    for (const auto& id : part_ids) {
        const Part& p = m.parts.at(id);
        os << ":" << id << " a "
           << pref(p.kind == PartKind::Composite ? "CompositePart" : "PrimitivePart");
        if (!p.name.empty()) os << " ;\n    " << pref("name") << " " << q(p.name);
        if (!p.children.empty()) {
            os << " ;\n    " << pref("hasPart") << " ";
            for (size_t i = 0; i < p.children.size(); i++)
                os << (i ? ", " : "") << ":" << p.children[i];
        }
        if (!p.endpoints.empty()) {
            os << " ;\n    " << pref("endpoint") << " ";
            for (size_t i = 0; i < p.endpoints.size(); i++)
                os << (i ? ", " : "") << q(p.endpoints[i]);
        }
        if (!p.owned_liaisons.empty()) {
            os << " ;\n    " << pref("ownedLiaison") << " ";
            for (size_t i = 0; i < p.owned_liaisons.size(); i++)
                os << (i ? ", " : "") << ":" << p.owned_liaisons[i];
        }
        os << " .\n";
        if (id == m.root) {
            for (const auto& d : m.subassemblies) {
                os << ":" << id << " "
                   << pref(d.role == SubAssemblyRole::Master ? "masterSubAssembly"
                                                             : "branchSubAssembly")
                   << " [ " << pref("of") << " :" << d.composite_part << " ; "
                   << pref("basePart") << " :" << d.base_part;
                if (!d.assembly_line.empty())
                    os << " ; " << pref("assemblyLine") << " " << q(d.assembly_line);
                os << " ] .\n";
            }
        }
    }
    for (const auto& id : liaison_ids) {
        const Liaison& l = m.liaisons.at(id);
        const char* kind = l.kind == LiaisonKind::SelfDefined    ? "SelfDefinedLiaison"
                           : l.kind == LiaisonKind::LoDclDefined ? "LoDclDefinedLiaison"
                                                                 : "HiDclRealisedLiaison";
        os << ":" << id << " a " << pref(kind) << " ;\n    " << pref("order") << " " << l.order;
        if (!l.liaison_type.empty())
            os << " ;\n    " << pref("liaisonType") << " " << q(l.liaison_type);
        for (const auto& pr : l.pairs) {
            os << " ;\n    " << pref("pair") << " [ " << pref("endA") << " [" << pref("part")
               << " :" << pr.end_a.part << "; " << pref("feature") << " " << q(pr.end_a.feature)
               << "] ;\n                 " << pref("endB") << " [" << pref("part") << " :"
               << pr.end_b.part << "; " << pref("feature") << " " << q(pr.end_b.feature) << "] ]";
        }
        os << " .\n";
    }
    for (const auto& id : connector_ids) {
        const Connector& c = m.connectors.at(id);
        os << ":" << id << " a " << pref("Connector");
        if (!c.name.empty()) os << " ;\n    " << pref("name") << " " << q(c.name);
        if (!c.attached_liaisons.empty()) {
            os << " ;\n    " << pref("attachedLiaison") << " ";
            for (size_t i = 0; i < c.attached_liaisons.size(); i++)
                os << (i ? ", " : "") << ":" << c.attached_liaisons[i];
        }
        os << " .\n";
    }
    return os.str();
}

}  // namespace cpus
