#include "sois/context.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace sois {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool pattern_matches(const std::string& pattern, const std::string& value, PatternMode mode) {
    if (mode == PatternMode::Exact) return pattern == value;
    if (pattern.empty()) return true;
    return lower(value).find(lower(pattern)) != std::string::npos;
}

} // namespace

bool eval_criterion(const NodeContext& ctx, const Criterion& c, const EvalOptions& opts) {
    switch (c.value_type) {
    case ValueType::Boolean: {
        auto it = ctx.booleans.find(c.term);
        if (it == ctx.booleans.end()) return false;
        if (it->second != c.required_value.value_or(true)) return false;
        if (c.after_seconds && *c.required_value) {
            auto since = ctx.boolean_since.find(c.term);
            if (since == ctx.boolean_since.end()) return false;
            if (ctx.now - since->second < static_cast<double>(*c.after_seconds)) return false;
        }
        return true;
    }
    case ValueType::Float: {
        auto it = ctx.scalars.find(c.term);
        return it != ctx.scalars.end() && c.minimum && it->second >= *c.minimum;
    }
    case ValueType::String: {
        auto it = ctx.strings.find(c.term);
        return it != ctx.strings.end() && c.pattern && pattern_matches(*c.pattern, it->second, opts.pattern_mode);
    }
    }
    return false;
}

bool rrc(const NodeContext& ctx, const std::vector<Criterion>& effective, const EvalOptions& opts) {
    return std::all_of(effective.begin(), effective.end(),
                       [&](const Criterion& c) { return eval_criterion(ctx, c, opts); });
}

FitnessScore fitness(const NodeContext& ctx, const std::vector<Criterion>& effective,
                     const EvalOptions& opts) {
    double value = 1.0;
    for (const auto& c : effective) {
        if (!c.comparative()) continue;
        auto it = ctx.scalars.find(c.term);
        double raw = it != ctx.scalars.end() ? it->second : 0.0;
        double max = opts.norm_max(c.term);
        double factor = max > 0.0 ? raw / max : 0.0;
        value *= std::clamp(factor, 0.0, 1.0);
    }
    return {value, ctx.now};
}

bool group_membership(const NodeContext& ctx, const GroupSpec& spec, const EvalOptions& opts) {
    return std::any_of(spec.roles.begin(), spec.roles.end(), [&](const RoleSpec& role) {
        return rrc(ctx, effective_criteria(spec, role.name), opts);
    });
}

NodeContext parse_context_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    NodeContext ctx;
    ctx.node_id = j.at("node_id").get<std::string>();
    ctx.now = j.value("now", 0.0);
    if (j.contains("booleans"))
        for (auto& [k, v] : j.at("booleans").items()) ctx.booleans[k] = v.get<bool>();
    if (j.contains("scalars"))
        for (auto& [k, v] : j.at("scalars").items()) ctx.scalars[k] = v.get<double>();
    if (j.contains("strings"))
        for (auto& [k, v] : j.at("strings").items()) ctx.strings[k] = v.get<std::string>();
    if (j.contains("boolean_since"))
        for (auto& [k, v] : j.at("boolean_since").items()) ctx.boolean_since[k] = v.get<double>();
    // a true boolean with no recorded transition is treated as true since forever
    for (const auto& [term, value] : ctx.booleans)
        if (value && !ctx.boolean_since.count(term)) ctx.boolean_since[term] = 0.0;
    return ctx;
}

NodeContext load_context_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open context file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_context_json(buf.str());
}

std::string context_to_json(const NodeContext& ctx) {
    nlohmann::json j;
    j["node_id"] = ctx.node_id;
    j["now"] = ctx.now;
    j["booleans"] = ctx.booleans;
    j["scalars"] = ctx.scalars;
    j["strings"] = ctx.strings;
    j["boolean_since"] = ctx.boolean_since;
    return j.dump(2);
}

} // namespace sois
