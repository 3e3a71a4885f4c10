#pragma once

#include "sois/spec.hpp"

#include <map>
#include <string>

namespace sois {

using NodeId = std::string;

// Snapshot of one node's measurable context facts. Terms are open-vocabulary:
// criteria referencing a term absent from every map evaluate restrictively to
// false. boolean_since records when each boolean last became true, which is
// what `after` criteria are checked against.
struct NodeContext {
    NodeId node_id;
    double now = 0.0;
    std::map<std::string, bool> booleans;
    std::map<std::string, double> scalars;
    std::map<std::string, std::string> strings;
    std::map<std::string, double> boolean_since;

    void set_boolean(const std::string& term, bool value) {
        auto it = booleans.find(term);
        bool was = it != booleans.end() && it->second;
        booleans[term] = value;
        if (value && !was) boolean_since[term] = now;
    }

    void set_scalar(const std::string& term, double value) { scalars[term] = value; }
    void set_string(const std::string& term, const std::string& value) { strings[term] = value; }
};

struct FitnessScore {
    double value = 0.0;
    double measured_at = 0.0;
};

enum class PatternMode { SubstringCI, Exact };

struct EvalOptions {
    PatternMode pattern_mode = PatternMode::SubstringCI;
    // Normalization maximum per comparative term; percent terms default to 100.
    std::map<std::string, double> scale_max;

    double norm_max(const std::string& term) const {
        auto it = scale_max.find(term);
        return it != scale_max.end() ? it->second : 100.0;
    }
};

// Total: missing facts evaluate to false, never error.
bool eval_criterion(const NodeContext& ctx, const Criterion& c, const EvalOptions& opts = {});

// Conjunction over the whole effective list (every criterion is restrictive;
// dual-purpose floats contribute their minimum check). Empty list -> true.
bool rrc(const NodeContext& ctx, const std::vector<Criterion>& effective, const EvalOptions& opts = {});

// Product over comparative criteria of the [0,1]-normalized term value.
// Empty comparative set -> 1.0. Only meaningful when rrc() holds.
FitnessScore fitness(const NodeContext& ctx, const std::vector<Criterion>& effective,
                     const EvalOptions& opts = {});

// True iff the node satisfies the RRC of at least one role.
bool group_membership(const NodeContext& ctx, const GroupSpec& spec, const EvalOptions& opts = {});

// Context snapshot file format (JSON): node_id, now, and the four term maps.
NodeContext parse_context_json(const std::string& text);
NodeContext load_context_file(const std::string& path);
std::string context_to_json(const NodeContext& ctx);

} // namespace sois
