#pragma once

// Tokenizer and statement parser for the Turtle/N3-subset documents used by
// the product-model and service-model file formats, and for the SPARQL-subset
// query syntax. One lexer serves all three grammars; each module maps the
// generic parsed statements onto its own vocabulary.

#include <cctype>
#include <cstdlib>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpus/errors.hpp"

namespace cpus::rdf {

struct Token {
    enum class Kind {
        IriRef,     // <...> without the angle brackets
        Name,       // prefixed name (contains ':') or bare word, incl. 'a', PREFIX, FILTER
        Literal,    // quoted string, with optional @lang and ^^datatype
        Number,     // bare numeric literal
        Var,        // ?name
        Punct,      // one of . ; , [ ] ( )
        Op,         // > < >= <= = &&
        AtPrefix,   // the '@prefix' keyword
        End
    };

    Kind kind = Kind::End;
    std::string text;      // iri body, name, literal body, var name, punct/op spelling
    std::string lang;      // literal language tag
    std::string datatype;  // literal ^^ datatype (as written, e.g. "xsd:float")
    int line = 1;

    bool is_punct(const char* p) const { return kind == Kind::Punct && text == p; }
    bool is_name(const char* n) const { return kind == Kind::Name && text == n; }
};

namespace detail {

inline bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
           c == ':' || c == '/';
}

// The paper's figures are printed with leading line-number labels and elided
// ranges. A label is stripped only when what follows could start a statement,
// so bare integer objects inside statements are never eaten.
inline std::string strip_line_labels(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        size_t i = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) i++;
        size_t d = i;
        while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) d++;
        if (d > i && (d == line.size() || line[d] == ' ' || line[d] == '\t')) {
            size_t r = d;
            while (r < line.size() && (line[r] == ' ' || line[r] == '\t')) r++;
            char c = r < line.size() ? line[r] : '\0';
            bool stmt_start = c == '\0' || std::isalpha(static_cast<unsigned char>(c)) ||
                              c == ':' || c == '@' || c == '[' || c == '(' || c == '?' ||
                              c == '<';
            if (stmt_start) line = line.substr(0, i) + line.substr(d);
        }
        out += line;
        if (eol == std::string::npos) break;
        out += '\n';
        pos = eol + 1;
    }
    return out;
}

}  // namespace detail

class Lexer {
public:
    explicit Lexer(const std::string& text) : src_(detail::strip_line_labels(text)) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            Token t = next();
            bool end = t.kind == Token::Kind::End;
            out.push_back(std::move(t));
            if (end) break;
        }
        return out;
    }

private:
    char peek(size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }
    char take() {
        char c = peek();
        pos_++;
        if (c == '\n') line_++;
        return c;
    }

    void skip_ws() {
        for (;;) {
            char c = peek();
            if (c == '#') {
                while (peek() && peek() != '\n') take();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                take();
            } else {
                break;
            }
        }
    }

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        char c = peek();
        if (!c) return t;

        if (c == '<') {
            take();
            while (peek() && peek() != '>') t.text += take();
            if (!peek()) throw SyntaxError(t.line, "unterminated IRI reference");
            take();
            t.kind = Token::Kind::IriRef;
            return t;
        }
        if (c == '"' || c == '\'') {
            char q = take();
            while (peek() && peek() != q) {
                char ch = take();
                if (ch == '\\' && peek()) {
                    char esc = take();
                    switch (esc) {
                        case 'n': t.text += '\n'; break;
                        case 't': t.text += '\t'; break;
                        default: t.text += esc; break;
                    }
                } else {
                    t.text += ch;
                }
            }
            if (!peek()) throw SyntaxError(t.line, "unterminated string literal");
            take();
            if (peek() == '@') {
                take();
                while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '-')
                    t.lang += take();
            }
            if (peek() == '^' && peek(1) == '^') {
                take();
                take();
                while (detail::name_char(peek())) t.datatype += take();
            }
            t.kind = Token::Kind::Literal;
            return t;
        }
        if (c == '?') {
            take();
            while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')
                t.text += take();
            if (t.text.empty()) throw SyntaxError(t.line, "bare '?' without variable name");
            t.kind = Token::Kind::Var;
            return t;
        }
        if (c == '@') {
            take();
            std::string word;
            while (std::isalpha(static_cast<unsigned char>(peek()))) word += take();
            if (word != "prefix") throw SyntaxError(t.line, "unknown directive @" + word);
            t.kind = Token::Kind::AtPrefix;
            t.text = "@prefix";
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            ((c == '-' || c == '+') && std::isdigit(static_cast<unsigned char>(peek(1))))) {
            t.text += take();
            while (std::isdigit(static_cast<unsigned char>(peek()))) t.text += take();
            if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
                t.text += take();
                while (std::isdigit(static_cast<unsigned char>(peek()))) t.text += take();
            }
            if (peek() == 'e' || peek() == 'E') {
                t.text += take();
                if (peek() == '-' || peek() == '+') t.text += take();
                while (std::isdigit(static_cast<unsigned char>(peek()))) t.text += take();
            }
            t.kind = Token::Kind::Number;
            return t;
        }
        if (c == '&' && peek(1) == '&') {
            take(); take();
            t.kind = Token::Kind::Op;
            t.text = "&&";
            return t;
        }
        if (c == '>' || c == '<' || c == '=') {
            t.text += take();
            if ((t.text == ">" || t.text == "<") && peek() == '=') t.text += take();
            t.kind = Token::Kind::Op;
            return t;
        }
        if (c == '.' || c == ';' || c == ',' || c == '[' || c == ']' || c == '(' || c == ')') {
            t.text += take();
            t.kind = Token::Kind::Punct;
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':') {
            while (detail::name_char(peek())) {
                // A trailing '.' is the statement terminator, not part of the name.
                if (peek() == '.' && !detail::name_char(peek(1))) break;
                t.text += take();
            }
            t.kind = Token::Kind::Name;
            return t;
        }
        throw SyntaxError(t.line, std::string("unexpected character '") + c + "'");
    }

    std::string src_;
    size_t pos_ = 0;
    int line_ = 1;
};

// Parsed term. Blank nodes carry their own predicate/object list.
struct Node {
    enum class Kind { Iri, Name, Literal, Number, Var, Blank };

    Kind kind = Kind::Name;
    std::string text;
    std::string lang;
    std::string datatype;
    double number = 0.0;
    bool integral = false;
    std::vector<std::pair<Node, Node>> props;  // blank nodes only
    int line = 1;

    bool is(const char* name) const { return kind == Kind::Name && text == name; }

    std::optional<double> numeric() const {
        if (kind == Kind::Number) return number;
        if (kind == Kind::Literal) {
            char* end = nullptr;
            const char* s = text.c_str();
            double v = std::strtod(s, &end);
            if (end != s && *end == '\0' && !text.empty()) return v;
        }
        return std::nullopt;
    }
};

struct Statement {
    Node subject;
    std::vector<std::pair<Node, Node>> props;
};

struct Document {
    std::vector<std::pair<std::string, std::string>> prefixes;  // prefix (with ':') -> namespace
    std::vector<Statement> statements;

    std::optional<std::string> ns_for(const std::string& prefix) const {
        for (const auto& [p, ns] : prefixes)
            if (p == prefix) return ns;
        return std::nullopt;
    }

    // Splits "psmm:hasPart" into its namespace (if the prefix is declared) and
    // local part. Undeclared prefixes yield an empty namespace.
    std::pair<std::string, std::string> resolve(const Node& n) const {
        if (n.kind == Node::Kind::Iri) {
            auto hash = n.text.find_last_of("#/");
            if (hash != std::string::npos)
                return {n.text.substr(0, hash + 1), n.text.substr(hash + 1)};
            return {"", n.text};
        }
        if (n.kind != Node::Kind::Name) return {"", n.text};
        auto colon = n.text.find(':');
        if (colon == std::string::npos) return {"", n.text};
        auto ns = ns_for(n.text.substr(0, colon + 1));
        return {ns.value_or(""), n.text.substr(colon + 1)};
    }
};

class Parser {
public:
    explicit Parser(const std::string& text) : toks_(Lexer(text).run()) {}

    Document parse_document() {
        Document doc;
        while (!at_end()) {
            if (cur().kind == Token::Kind::AtPrefix || cur().is_name("PREFIX") ||
                cur().is_name("prefix")) {
                bool turtle_style = cur().kind == Token::Kind::AtPrefix;
                advance();
                if (cur().kind != Token::Kind::Name || cur().text.back() != ':')
                    throw SyntaxError(cur().line, "expected prefix name before namespace IRI");
                std::string prefix = cur().text;
                advance();
                if (cur().kind != Token::Kind::IriRef)
                    throw SyntaxError(cur().line, "expected <namespace> after prefix name");
                doc.prefixes.emplace_back(prefix, cur().text);
                advance();
                if (turtle_style) expect_punct(".");
                else if (cur().is_punct(".")) advance();  // tolerate SPARQL-style with dot
                continue;
            }
            doc.statements.push_back(parse_statement());
        }
        return doc;
    }

    // Exposes the token stream for grammars with non-triple top-levels (the
    // query parser drives this directly).
    const std::vector<Token>& tokens() const { return toks_; }

    Statement parse_statement() {
        Statement st;
        st.subject = parse_term();
        if (st.subject.kind == Node::Kind::Literal || st.subject.kind == Node::Kind::Number)
            throw SyntaxError(st.subject.line, "literal cannot be a statement subject");
        st.props = parse_predicate_object_list();
        expect_punct(".");
        return st;
    }

    // Token-level access for grammars layered on the same lexicon.
    const Token& cur() const { return toks_[idx_]; }
    void advance() { if (idx_ + 1 < toks_.size()) idx_++; }
    bool at_end() const { return cur().kind == Token::Kind::End; }

    void expect_name(const char* n) {
        if (!cur().is_name(n))
            throw SyntaxError(cur().line, std::string("expected '") + n + "', got '" +
                                              cur().text + "'");
        advance();
    }

private:

public:
    void expect_punct(const char* p) {
        if (!cur().is_punct(p))
            throw SyntaxError(cur().line, std::string("expected '") + p + "', got '" +
                                              cur().text + "'");
        advance();
    }

    std::vector<std::pair<Node, Node>> parse_predicate_object_list() {
        std::vector<std::pair<Node, Node>> props;
        for (;;) {
            Node pred = parse_term();
            if (pred.kind != Node::Kind::Name && pred.kind != Node::Kind::Iri)
                throw SyntaxError(pred.line, "expected predicate name");
            for (;;) {
                Node obj = parse_term();
                props.emplace_back(pred, obj);
                if (cur().is_punct(",")) { advance(); continue; }
                break;
            }
            if (cur().is_punct(";")) {
                advance();
                // tolerate a trailing ';' before '.' or ']'
                if (cur().is_punct(".") || cur().is_punct("]")) break;
                continue;
            }
            break;
        }
        return props;
    }

    Node parse_term() {
        Node n;
        n.line = cur().line;
        switch (cur().kind) {
            case Token::Kind::IriRef:
                n.kind = Node::Kind::Iri;
                n.text = cur().text;
                advance();
                return n;
            case Token::Kind::Name:
                n.kind = Node::Kind::Name;
                n.text = cur().text;
                advance();
                return n;
            case Token::Kind::Literal:
                n.kind = Node::Kind::Literal;
                n.text = cur().text;
                n.lang = cur().lang;
                n.datatype = cur().datatype;
                advance();
                return n;
            case Token::Kind::Number:
                n.kind = Node::Kind::Number;
                n.text = cur().text;
                n.number = std::strtod(cur().text.c_str(), nullptr);
                n.integral = cur().text.find_first_of(".eE") == std::string::npos;
                advance();
                return n;
            case Token::Kind::Var:
                n.kind = Node::Kind::Var;
                n.text = cur().text;
                advance();
                return n;
            case Token::Kind::Punct:
                if (cur().text == "[") {
                    advance();
                    n.kind = Node::Kind::Blank;
                    if (!cur().is_punct("]")) n.props = parse_predicate_object_list();
                    expect_punct("]");
                    return n;
                }
                break;
            default:
                break;
        }
        throw SyntaxError(cur().line, "unexpected token '" + cur().text + "'");
    }

private:
    std::vector<Token> toks_;
    size_t idx_ = 0;
};

// Escapes a string for emission inside double quotes.
inline std::string escape_literal(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') { out += "\\n"; continue; }
        out += c;
    }
    return out;
}

}  // namespace cpus::rdf
