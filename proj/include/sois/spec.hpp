#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sois {

enum class ValueType { Boolean, Float, String };

std::string_view to_string(ValueType t);

// One <criteria .../> entry. Legal attribute combinations are exactly those
// exhibited by the specification listings: boolean+value (optionally +after),
// float+minimum, string+pattern. A float criterion with a minimum is both
// restrictive (>= minimum) and comparative (raw value feeds the fitness score).
struct Criterion {
    std::string term;
    ValueType value_type = ValueType::Boolean;
    std::optional<bool> required_value;
    std::optional<double> minimum;
    std::optional<std::string> pattern;
    std::optional<int> after_seconds;

    bool comparative() const { return value_type == ValueType::Float && minimum.has_value(); }

    bool operator==(const Criterion&) const = default;
};

// Fixed(k) or a named parameter (k1, k2, ...). A parameter is unbound until
// bind_cardinality supplies a value; running a simulation with an unbound
// parameter is a configuration error.
struct CardinalitySpec {
    std::string param_name; // empty for fixed cardinalities
    int current = 0;        // >= 1 once fixed or bound, 0 while unbound

    static CardinalitySpec fixed(int k) { return {"", k}; }
    static CardinalitySpec parameter(std::string name) { return {std::move(name), 0}; }

    bool is_parameter() const { return !param_name.empty(); }
    bool bound() const { return current >= 1; }

    // bound value; call sites must check bound() first
    int k() const { return current; }

    bool operator==(const CardinalitySpec&) const = default;
};

struct RoleSpec {
    std::string name;
    CardinalitySpec cardinality;
    std::vector<Criterion> criteria;

    bool operator==(const RoleSpec&) const = default;
};

struct GroupSpec {
    std::string name;
    std::vector<Criterion> group_criteria;
    std::vector<RoleSpec> roles;

    const RoleSpec* find_role(std::string_view role_name) const {
        for (const auto& r : roles)
            if (r.name == role_name) return &r;
        return nullptr;
    }

    bool operator==(const GroupSpec&) const = default;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& what, int line, int col)
        : std::runtime_error(what + " (line " + std::to_string(line) + ", col " + std::to_string(col) + ")"),
          line(line), col(col) {}
    int line;
    int col;
};

struct UnknownRole : std::runtime_error {
    explicit UnknownRole(const std::string& role)
        : std::runtime_error("unknown role '" + role + "'"), role(role) {}
    std::string role;
};

struct BindError : std::runtime_error {
    enum Kind { Missing, NonPositive };
    BindError(Kind kind, const std::string& name)
        : std::runtime_error(kind == Missing ? "missing cardinality binding '" + name + "'"
                                             : "non-positive cardinality binding '" + name + "'"),
          kind(kind), name(name) {}
    Kind kind;
    std::string name;
};

// Parses a specification document. Structure errors (malformed XML, unknown
// elements or attributes, illegal attribute combinations, duplicate role or
// term names, non-positive fixed cardinality) throw ParseError with position.
GroupSpec parse_spec(std::string_view document);

GroupSpec parse_spec_file(const std::string& path);

// Inverse of parse_spec up to formatting; parse_spec(serialize_spec(s)) == s.
std::string serialize_spec(const GroupSpec& spec);

// Group criteria merged with role-local criteria. A role criterion on a term
// already constrained at group level replaces the inherited one in place;
// remaining role criteria follow in document order.
std::vector<Criterion> effective_criteria(const GroupSpec& spec, std::string_view role);

// Copy of the spec with every Parameter cardinality bound. Extra bindings are
// ignored; a missing or non-positive binding throws BindError.
GroupSpec bind_cardinality(const GroupSpec& spec, const std::map<std::string, int>& bindings);

// Human-readable summary for the validate subcommand.
std::string spec_summary(const GroupSpec& spec);

} // namespace sois
