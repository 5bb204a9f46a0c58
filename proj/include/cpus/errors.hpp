#pragma once

#include <stdexcept>
#include <string>

namespace cpus {

/// Base class for all recoverable pipeline errors. `kind()` carries a stable
/// machine-readable tag so callers can branch without string-matching what().
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

class SyntaxError : public Error {
public:
    SyntaxError(int line, const std::string& reason)
        : Error("SyntaxError", "line " + std::to_string(line) + ": " + reason), line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

class UnknownVocabulary : public Error {
public:
    explicit UnknownVocabulary(const std::string& term)
        : Error("UnknownVocabulary", "unknown vocabulary term: " + term), term_(term) {}

    const std::string& term() const { return term_; }

private:
    std::string term_;
};

class DanglingReference : public Error {
public:
    explicit DanglingReference(const std::string& id)
        : Error("DanglingReference", "reference to undefined element: " + id), id_(id) {}

    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class MissingLabel : public Error {
public:
    explicit MissingLabel(const std::string& iri)
        : Error("MissingLabel", "service description without rdfs:label: " + iri) {}
};

class TypeMismatch : public Error {
public:
    explicit TypeMismatch(const std::string& key)
        : Error("TypeMismatch", "parameter value does not match its declared type: " + key),
          key_(key) {}

    const std::string& key() const { return key_; }

private:
    std::string key_;
};

class UnboundFilterVariable : public Error {
public:
    explicit UnboundFilterVariable(const std::string& name)
        : Error("UnboundFilterVariable", "filter references unbound variable ?" + name) {}
};

class CyclicPrecedence : public Error {
public:
    explicit CyclicPrecedence(const std::string& ids)
        : Error("CyclicPrecedence", "precedence arcs form a cycle through: " + ids) {}
};

class InvalidLifetime : public Error {
public:
    InvalidLifetime() : Error("InvalidLifetime", "registration lifetime must be positive") {}
};

class EmptyLinks : public Error {
public:
    EmptyLinks() : Error("EmptyLinks", "registration must carry at least one resource link") {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& reason) : Error("ConfigError", reason) {}
};

class RegistryUnreachable : public Error {
public:
    explicit RegistryUnreachable(const std::string& addr)
        : Error("RegistryUnreachable", "cannot reach registry at " + addr) {}
};

class UnsatisfiedActivity : public Error {
public:
    UnsatisfiedActivity(const std::string& task_id, const std::string& verb,
                        const std::string& filter)
        : Error("UnsatisfiedActivity",
                "no registered service satisfies " + task_id + "/" + verb +
                    (filter.empty() ? "" : " with " + filter)),
          task_id_(task_id), verb_(verb) {}

    const std::string& task_id() const { return task_id_; }
    const std::string& verb() const { return verb_; }

private:
    std::string task_id_;
    std::string verb_;
};

class ReservationConflict : public Error {
public:
    explicit ReservationConflict(const std::string& worker)
        : Error("ReservationConflict", "worker already reserved: " + worker) {}
};

class RunFailed : public Error {
public:
    RunFailed(const std::string& step, const std::string& cause)
        : Error("RunFailed", "step " + step + " failed: " + cause) {}
};

class DeadlockDetected : public Error {
public:
    explicit DeadlockDetected(const std::string& detail)
        : Error("DeadlockDetected", "no runnable step but process unfinished: " + detail) {}
};

class WireError : public Error {
public:
    explicit WireError(const std::string& reason) : Error("WireError", reason) {}
};

}  // namespace cpus
