#include "sois/spec.hpp"

#include "sois/xml.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace sois {

namespace {

[[noreturn]] void fail(const std::string& msg, int line, int col) { throw ParseError(msg, line, col); }

const xml::Attr& require_attr(const xml::Node& node, std::string_view name) {
    const xml::Attr* a = node.find_attr(name);
    if (!a) fail("<" + node.name + "> requires attribute '" + std::string(name) + "'", node.line, node.col);
    return *a;
}

void reject_unknown_attrs(const xml::Node& node, std::initializer_list<std::string_view> known) {
    for (const auto& a : node.attrs) {
        if (std::find(known.begin(), known.end(), a.name) == known.end())
            fail("unknown attribute '" + a.name + "' on <" + node.name + ">", a.line, a.col);
    }
}

double parse_float_attr(const xml::Attr& a) {
    const char* begin = a.value.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        fail("attribute '" + a.name + "' is not a number: '" + a.value + "'", a.line, a.col);
    return v;
}

int parse_int_attr(const xml::Attr& a) {
    int v = 0;
    auto [p, ec] = std::from_chars(a.value.data(), a.value.data() + a.value.size(), v);
    if (ec != std::errc{} || p != a.value.data() + a.value.size())
        fail("attribute '" + a.name + "' is not an integer: '" + a.value + "'", a.line, a.col);
    return v;
}

bool parse_bool_attr(const xml::Attr& a) {
    std::string up = a.value;
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
    if (up == "TRUE") return true;
    if (up == "FALSE") return false;
    fail("attribute '" + a.name + "' must be TRUE or FALSE, got '" + a.value + "'", a.line, a.col);
}

bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '-'; });
}

Criterion parse_criterion(const xml::Node& node, std::set<std::string>& seen_terms) {
    reject_unknown_attrs(node, {"type", "term", "value", "minimum", "pattern", "after"});
    if (!node.children.empty())
        fail("<criteria> must be empty", node.children.front().line, node.children.front().col);

    Criterion c;
    const xml::Attr& type = require_attr(node, "type");
    const xml::Attr& term = require_attr(node, "term");
    c.term = term.value;
    if (c.term.empty()) fail("criteria term must be non-empty", term.line, term.col);
    if (!seen_terms.insert(c.term).second)
        fail("duplicate criteria term '" + c.term + "' in this scope", term.line, term.col);

    const xml::Attr* value = node.find_attr("value");
    const xml::Attr* minimum = node.find_attr("minimum");
    const xml::Attr* pattern = node.find_attr("pattern");
    const xml::Attr* after = node.find_attr("after");

    if (type.value == "boolean") {
        c.value_type = ValueType::Boolean;
        if (!value || minimum || pattern)
            fail("boolean criteria take exactly 'value' (and optionally 'after')", node.line, node.col);
        c.required_value = parse_bool_attr(*value);
        if (after) {
            int secs = parse_int_attr(*after);
            if (secs < 0) fail("'after' must be non-negative", after->line, after->col);
            c.after_seconds = secs;
        }
    } else if (type.value == "float") {
        c.value_type = ValueType::Float;
        if (!minimum || value || pattern || after)
            fail("float criteria take exactly 'minimum'", node.line, node.col);
        c.minimum = parse_float_attr(*minimum);
    } else if (type.value == "string") {
        c.value_type = ValueType::String;
        if (!pattern || value || minimum || after)
            fail("string criteria take exactly 'pattern'", node.line, node.col);
        c.pattern = pattern->value;
    } else {
        fail("unknown criteria type '" + type.value + "'", type.line, type.col);
    }
    return c;
}

CardinalitySpec parse_cardinality(const xml::Attr& a) {
    if (!a.value.empty() && std::all_of(a.value.begin(), a.value.end(),
                                        [](unsigned char c) { return std::isdigit(c); })) {
        int k = parse_int_attr(a);
        if (k < 1) fail("fixed cardinality must be >= 1, got " + a.value, a.line, a.col);
        return CardinalitySpec::fixed(k);
    }
    if (!is_identifier(a.value))
        fail("cardinality must be a positive integer or a parameter name, got '" + a.value + "'", a.line, a.col);
    return CardinalitySpec::parameter(a.value);
}

// Digit-only cardinalities parse as fixed, so "0" would round-trip as an
// invalid fixed value; parameter names therefore may never be all digits.

RoleSpec parse_role(const xml::Node& node) {
    reject_unknown_attrs(node, {"name", "cardinality"});
    RoleSpec role;
    const xml::Attr& name = require_attr(node, "name");
    role.name = name.value;
    if (role.name.empty()) fail("role name must be non-empty", name.line, name.col);
    role.cardinality = parse_cardinality(require_attr(node, "cardinality"));

    std::set<std::string> seen_terms;
    for (const auto& child : node.children) {
        if (child.name != "criteria")
            fail("unknown element <" + child.name + "> inside <role>", child.line, child.col);
        role.criteria.push_back(parse_criterion(child, seen_terms));
    }
    return role;
}

} // namespace

std::string_view to_string(ValueType t) {
    switch (t) {
    case ValueType::Boolean: return "boolean";
    case ValueType::Float: return "float";
    case ValueType::String: return "string";
    }
    return "?";
}

GroupSpec parse_spec(std::string_view document) {
    xml::Node root;
    try {
        root = xml::parse(document);
    } catch (const xml::Error& e) {
        throw ParseError(e.what(), e.line, e.col);
    }

    if (root.name != "group")
        fail("root element must be <group>, got <" + root.name + ">", root.line, root.col);
    reject_unknown_attrs(root, {"name"});

    GroupSpec spec;
    const xml::Attr& name = require_attr(root, "name");
    spec.name = name.value;
    if (spec.name.empty()) fail("group name must be non-empty", name.line, name.col);

    std::set<std::string> seen_terms;
    std::set<std::string> seen_roles;
    for (const auto& child : root.children) {
        if (child.name == "criteria") {
            spec.group_criteria.push_back(parse_criterion(child, seen_terms));
        } else if (child.name == "role") {
            RoleSpec role = parse_role(child);
            if (!seen_roles.insert(role.name).second)
                fail("duplicate role name '" + role.name + "'", child.line, child.col);
            spec.roles.push_back(std::move(role));
        } else {
            fail("unknown element <" + child.name + "> inside <group>", child.line, child.col);
        }
    }
    return spec;
}

GroupSpec parse_spec_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open spec file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_spec(buf.str());
}

namespace {

std::string format_number(double v) {
    // integral minima print without a decimal point, matching the listings
    std::ostringstream os;
    if (v == static_cast<long long>(v))
        os << static_cast<long long>(v);
    else
        os << v;
    return os.str();
}

void serialize_criterion(std::ostringstream& os, const Criterion& c, int indent) {
    os << std::string(indent, ' ') << "<criteria type=\"" << to_string(c.value_type) << "\" term=\""
       << xml::escape(c.term) << "\"";
    if (c.required_value) os << " value=\"" << (*c.required_value ? "TRUE" : "FALSE") << "\"";
    if (c.minimum) os << " minimum=\"" << format_number(*c.minimum) << "\"";
    if (c.pattern) os << " pattern=\"" << xml::escape(*c.pattern) << "\"";
    if (c.after_seconds) os << " after=\"" << *c.after_seconds << "\"";
    os << " />\n";
}

} // namespace

std::string serialize_spec(const GroupSpec& spec) {
    std::ostringstream os;
    os << "<group name=\"" << xml::escape(spec.name) << "\">\n";
    for (const auto& c : spec.group_criteria) serialize_criterion(os, c, 2);
    for (const auto& role : spec.roles) {
        os << "  <role name=\"" << xml::escape(role.name) << "\" cardinality=\"";
        if (role.cardinality.is_parameter())
            os << xml::escape(role.cardinality.param_name);
        else
            os << role.cardinality.current;
        os << "\">\n";
        for (const auto& c : role.criteria) serialize_criterion(os, c, 4);
        os << "  </role>\n";
    }
    os << "</group>\n";
    return os.str();
}

std::vector<Criterion> effective_criteria(const GroupSpec& spec, std::string_view role_name) {
    const RoleSpec* role = spec.find_role(role_name);
    if (!role) throw UnknownRole(std::string(role_name));

    std::vector<Criterion> out;
    for (const auto& inherited : spec.group_criteria) {
        auto local = std::find_if(role->criteria.begin(), role->criteria.end(),
                                  [&](const Criterion& c) { return c.term == inherited.term; });
        out.push_back(local != role->criteria.end() ? *local : inherited);
    }
    for (const auto& c : role->criteria) {
        bool overrides_group = std::any_of(spec.group_criteria.begin(), spec.group_criteria.end(),
                                           [&](const Criterion& g) { return g.term == c.term; });
        if (!overrides_group) out.push_back(c);
    }
    return out;
}

GroupSpec bind_cardinality(const GroupSpec& spec, const std::map<std::string, int>& bindings) {
    GroupSpec out = spec;
    for (auto& role : out.roles) {
        if (!role.cardinality.is_parameter()) continue;
        auto it = bindings.find(role.cardinality.param_name);
        if (it == bindings.end()) throw BindError(BindError::Missing, role.cardinality.param_name);
        if (it->second < 1) throw BindError(BindError::NonPositive, role.cardinality.param_name);
        role.cardinality.current = it->second;
    }
    return out;
}

std::string spec_summary(const GroupSpec& spec) {
    std::ostringstream os;
    os << "group " << spec.name << ": " << spec.roles.size() << " role(s), "
       << spec.group_criteria.size() << " group criteria\n";
    auto describe = [&](const Criterion& c) {
        os << c.term;
        if (c.required_value) os << "=" << (*c.required_value ? "TRUE" : "FALSE");
        if (c.minimum) os << " min " << format_number(*c.minimum);
        if (c.pattern) os << " ~ \"" << *c.pattern << "\"";
        if (c.after_seconds) os << " after " << *c.after_seconds << "s";
    };
    for (const auto& c : spec.group_criteria) {
        os << "  criteria ";
        describe(c);
        os << "\n";
    }
    for (const auto& role : spec.roles) {
        os << "  role " << role.name << " cardinality ";
        if (role.cardinality.is_parameter()) {
            os << role.cardinality.param_name;
            if (role.cardinality.bound()) os << "=" << role.cardinality.current;
        } else {
            os << role.cardinality.current;
        }
        os << "\n";
        for (const auto& c : role.criteria) {
            os << "    criteria ";
            describe(c);
            os << "\n";
        }
    }
    return os.str();
}

} // namespace sois
