#pragma once

// Service descriptions (N3 subset) and discovery queries (SPARQL subset)
// with label + QoS matchmaking. The vocabulary is matched on the prefixed
// names as printed (as:Service, rdfs:label, doe:*); prefix declarations are
// retained for round-tripping but not used for recognition, since the
// reference texts use prefixes whose declarations they elide.

#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpus/errors.hpp"
#include "cpus/rdf_text.hpp"

namespace cpus {

struct ParamEntry {
    std::string key;            // uppercase identifier, e.g. "PAYLOAD"
    std::string declared_type;  // FLOAT | INT | STRING
    bool is_number = false;
    double number = 0.0;
    std::string string_value;
};

struct ServiceDescription {
    std::string iri;    // as written, e.g. ":pickAndPlace"
    std::string label;  // human-readable name
    std::string label_lang;
    std::vector<ParamEntry> params;
    std::string state_info;  // retained opaque block, never interpreted

    const ParamEntry* find_param(const std::string& key) const {
        for (const auto& p : params)
            if (p.key == key) return &p;
        return nullptr;
    }
};

struct QueryBinding {
    std::string param_key;
    std::string variable;
    std::string declared_type;  // as written in the pattern, kept for round-trip
};

struct QueryComparison {
    std::string variable;
    std::string op;  // > < >= <= =
    double constant = 0.0;
};

struct ServiceQuery {
    std::string label_pattern;
    std::string label_lang;
    std::vector<QueryBinding> bindings;
    std::vector<QueryComparison> filter;  // conjunction; empty = always true

    const QueryBinding* find_binding_for_variable(const std::string& var) const {
        for (const auto& b : bindings)
            if (b.variable == var) return &b;
        return nullptr;
    }
};

namespace detail {

inline bool qname_is(const rdf::Node& n, const char* text) {
    return n.kind == rdf::Node::Kind::Name && n.text == text;
}

inline std::string upper_type_of_value_predicate(const std::string& pred) {
    if (pred == "doe:paramValueFloat") return "FLOAT";
    if (pred == "doe:paramValueInt") return "INT";
    if (pred == "doe:paramValueString") return "STRING";
    return "";
}

inline ParamEntry param_from_blank(const rdf::Node& blank) {
    ParamEntry pe;
    std::string value_pred;
    const rdf::Node* value_node = nullptr;
    for (const auto& [pred, obj] : blank.props) {
        if (qname_is(pred, "doe:key")) {
            pe.key = obj.text;
        } else if (qname_is(pred, "doe:paramType")) {
            pe.declared_type = obj.text;
        } else {
            std::string t = upper_type_of_value_predicate(pred.text);
            if (!t.empty()) {
                value_pred = t;
                value_node = &obj;
            }
        }
    }
    if (pe.key.empty()) throw SyntaxError(blank.line, "doe:hasParams entry without doe:key");
    if (pe.declared_type.empty()) pe.declared_type = value_pred.empty() ? "STRING" : value_pred;
    if (value_node) {
        if (!value_pred.empty() && value_pred != pe.declared_type) throw TypeMismatch(pe.key);
        if (pe.declared_type == "FLOAT" || pe.declared_type == "INT") {
            auto v = value_node->numeric();
            if (!v) throw TypeMismatch(pe.key);
            pe.is_number = true;
            pe.number = *v;
        } else {
            if (value_node->kind != rdf::Node::Kind::Literal) throw TypeMismatch(pe.key);
            pe.string_value = value_node->text;
        }
    }
    return pe;
}

}  // namespace detail

/// Parses every `a as:Service` subject in the document into a description.
inline std::vector<ServiceDescription> parse_n3_description(const std::string& text) {
    rdf::Document doc = rdf::Parser(text).parse_document();
    std::vector<ServiceDescription> out;
    for (const auto& st : doc.statements) {
        bool is_service = false;
        for (const auto& [pred, obj] : st.props)
            if (pred.is("a") && detail::qname_is(obj, "as:Service")) is_service = true;
        if (!is_service) continue;

        ServiceDescription sd;
        sd.iri = st.subject.text;
        for (const auto& [pred, obj] : st.props) {
            if (detail::qname_is(pred, "rdfs:label")) {
                sd.label = obj.text;
                sd.label_lang = obj.lang;
            } else if (detail::qname_is(pred, "doe:hasParams")) {
                if (obj.kind != rdf::Node::Kind::Blank)
                    throw SyntaxError(obj.line, "doe:hasParams expects blank-node entries");
                ParamEntry pe = detail::param_from_blank(obj);
                for (const auto& existing : sd.params)
                    if (existing.key == pe.key)
                        throw SyntaxError(obj.line, "duplicate parameter key " + pe.key);
                sd.params.push_back(pe);
            } else if (detail::qname_is(pred, "doe:stateInfo")) {
                sd.state_info = obj.text;
            }
        }
        if (sd.label.empty()) throw MissingLabel(sd.iri);
        out.push_back(sd);
    }
    return out;
}

/// Parses the SPARQL-subset discovery query (optionally wrapped in parens,
/// optionally carrying one FILTER conjunction).
inline ServiceQuery parse_query(const std::string& text) {
    rdf::Parser parser(text);
    ServiceQuery q;

    // PREFIX lines
    while (parser.cur().is_name("PREFIX") || parser.cur().kind == rdf::Token::Kind::AtPrefix) {
        parser.advance();
        if (parser.cur().kind != rdf::Token::Kind::Name || parser.cur().text.back() != ':')
            throw SyntaxError(parser.cur().line, "expected prefix name");
        parser.advance();
        if (parser.cur().kind != rdf::Token::Kind::IriRef)
            throw SyntaxError(parser.cur().line, "expected <namespace>");
        parser.advance();
        if (parser.cur().is_punct(".")) parser.advance();
    }

    bool wrapped = parser.cur().is_punct("(");
    if (wrapped) parser.advance();

    if (parser.cur().kind != rdf::Token::Kind::Var)
        throw SyntaxError(parser.cur().line, "expected ?service variable");
    parser.advance();
    parser.expect_name("a");
    parser.expect_name("as:Service");
    if (parser.cur().is_punct(";")) parser.advance();

    // group pattern clauses
    while (!parser.at_end()) {
        if (parser.cur().is_name("rdfs:label")) {
            parser.advance();
            if (parser.cur().kind != rdf::Token::Kind::Literal)
                throw SyntaxError(parser.cur().line, "rdfs:label expects a literal");
            q.label_pattern = parser.cur().text;
            q.label_lang = parser.cur().lang;
            parser.advance();
        } else if (parser.cur().is_name("doe:hasParams")) {
            parser.advance();
            for (;;) {
                rdf::Node blank = parser.parse_term();
                if (blank.kind != rdf::Node::Kind::Blank)
                    throw SyntaxError(blank.line, "doe:hasParams expects [ ... ] patterns");
                QueryBinding b;
                for (const auto& [pred, obj] : blank.props) {
                    if (detail::qname_is(pred, "doe:key")) b.param_key = obj.text;
                    else if (detail::qname_is(pred, "doe:paramType")) b.declared_type = obj.text;
                    else if (!detail::upper_type_of_value_predicate(pred.text).empty()) {
                        if (obj.kind != rdf::Node::Kind::Var)
                            throw SyntaxError(obj.line,
                                              "query parameter value must be a variable");
                        b.variable = obj.text;
                    }
                }
                if (b.param_key.empty() || b.variable.empty())
                    throw SyntaxError(blank.line, "parameter pattern needs doe:key and a variable");
                q.bindings.push_back(b);
                if (parser.cur().is_punct(",")) { parser.advance(); continue; }
                break;
            }
        } else if (parser.cur().is_name("FILTER")) {
            parser.advance();
            parser.expect_punct("(");
            for (;;) {
                if (parser.cur().kind != rdf::Token::Kind::Var)
                    throw SyntaxError(parser.cur().line, "FILTER expects ?var <op> number");
                QueryComparison c;
                c.variable = parser.cur().text;
                parser.advance();
                if (parser.cur().kind != rdf::Token::Kind::Op || parser.cur().text == "&&")
                    throw SyntaxError(parser.cur().line, "expected comparison operator");
                c.op = parser.cur().text;
                parser.advance();
                if (parser.cur().kind != rdf::Token::Kind::Number)
                    throw SyntaxError(parser.cur().line, "comparison constant must be numeric");
                c.constant = std::strtod(parser.cur().text.c_str(), nullptr);
                parser.advance();
                q.filter.push_back(c);
                if (parser.cur().kind == rdf::Token::Kind::Op && parser.cur().text == "&&") {
                    parser.advance();
                    continue;
                }
                break;
            }
            parser.expect_punct(")");
        } else if (parser.cur().is_punct(";")) {
            parser.advance();
        } else if (parser.cur().is_punct(".") || parser.cur().is_punct(")")) {
            parser.advance();
        } else {
            throw SyntaxError(parser.cur().line,
                              "unexpected token '" + parser.cur().text + "' in query");
        }
    }

    if (q.label_pattern.empty())
        throw SyntaxError(1, "query without rdfs:label pattern");
    for (const auto& c : q.filter)
        if (!q.find_binding_for_variable(c.variable)) throw UnboundFilterVariable(c.variable);
    return q;
}

inline bool compare(double lhs, const std::string& op, double rhs) {
    if (op == ">") return lhs > rhs;
    if (op == "<") return lhs < rhs;
    if (op == ">=") return lhs >= rhs;
    if (op == "<=") return lhs <= rhs;
    if (op == "=") return lhs == rhs;  // exact by design: QoS values are declared, not measured
    return false;
}

/// A service matches iff its label equals the pattern, every bound key exists
/// on it, and the filter conjunction holds under the induced substitution.
inline bool matches(const ServiceQuery& q, const ServiceDescription& s) {
    if (s.label != q.label_pattern) return false;
    for (const auto& b : q.bindings)
        if (!s.find_param(b.param_key)) return false;
    for (const auto& c : q.filter) {
        const QueryBinding* b = q.find_binding_for_variable(c.variable);
        if (!b) return false;
        const ParamEntry* p = s.find_param(b->param_key);
        if (!p || !p->is_number) return false;
        if (!compare(p->number, c.op, c.constant)) return false;
    }
    return true;
}

inline std::vector<ServiceDescription> eval_query(const ServiceQuery& q,
                                                  const std::vector<ServiceDescription>& services) {
    std::vector<ServiceDescription> out;
    for (const auto& s : services)
        if (matches(q, s)) out.push_back(s);
    return out;
}

namespace detail {

inline std::string format_number(double v) {
    std::ostringstream os;
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15)
        os << static_cast<long long>(v) << ".0";
    else
        os << v;
    return os.str();
}

}  // namespace detail

inline std::string serialize_description(const ServiceDescription& s) {
    std::ostringstream os;
    os << s.iri << " a as:Service;\n";
    os << "  rdfs:label \"" << rdf::escape_literal(s.label) << "\"";
    if (!s.label_lang.empty()) os << "@" << s.label_lang;
    if (s.params.empty() && s.state_info.empty()) {
        os << ".\n";
        return os.str();
    }
    os << ";\n";
    for (size_t i = 0; i < s.params.size(); i++) {
        const ParamEntry& p = s.params[i];
        os << (i == 0 ? "  doe:hasParams " : "  ") << "[doe:key \"" << p.key
           << "\"^^xsd:string;\n";
        if (p.is_number) {
            const char* pred = p.declared_type == "INT" ? "doe:paramValueInt"
                                                        : "doe:paramValueFloat";
            const char* dt = p.declared_type == "INT" ? "xsd:int" : "xsd:float";
            os << "    " << pred << " \"" << detail::format_number(p.number) << "\"^^" << dt
               << ";\n";
        } else {
            os << "    doe:paramValueString \"" << rdf::escape_literal(p.string_value)
               << "\"^^xsd:string;\n";
        }
        os << "    doe:paramType \"" << p.declared_type << "\"^^xsd:string]";
        os << (i + 1 < s.params.size() ? ",\n" : "");
    }
    if (!s.state_info.empty())
        os << (s.params.empty() ? "  " : ";\n  ") << "doe:stateInfo \""
           << rdf::escape_literal(s.state_info) << "\"";
    os << ".\n";
    return os.str();
}

inline std::string serialize_descriptions(const std::vector<ServiceDescription>& list) {
    std::ostringstream os;
    for (size_t i = 0; i < list.size(); i++) {
        if (i) os << "\n";
        os << serialize_description(list[i]);
    }
    return os.str();
}

inline std::string serialize_query(const ServiceQuery& q) {
    std::ostringstream os;
    os << "(?service a as:Service;\n";
    os << "  rdfs:label '" << q.label_pattern << "'";
    if (!q.label_lang.empty()) os << "@" << q.label_lang;
    os << ";\n";
    for (size_t i = 0; i < q.bindings.size(); i++) {
        const QueryBinding& b = q.bindings[i];
        std::string type = b.declared_type.empty() ? "FLOAT" : b.declared_type;
        const char* pred = type == "INT"      ? "doe:paramValueInt"
                           : type == "STRING" ? "doe:paramValueString"
                                              : "doe:paramValueFloat";
        os << (i == 0 ? "  doe:hasParams " : "  ") << "[doe:key \"" << b.param_key
           << "\"^^xsd:string;\n    " << pred << " ?" << b.variable << ";\n    doe:paramType \""
           << type << "\"^^xsd:string]" << (i + 1 < q.bindings.size() ? ",\n" : "\n");
    }
    if (!q.filter.empty()) {
        os << "  FILTER(";
        for (size_t i = 0; i < q.filter.size(); i++) {
            const QueryComparison& c = q.filter[i];
            os << (i ? " && " : "") << "?" << c.variable << c.op
               << detail::format_number(c.constant);
        }
        os << ")";
    }
    os << ".)\n";
    return os.str();
}

}  // namespace cpus
