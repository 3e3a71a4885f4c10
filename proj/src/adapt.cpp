#include "sois/adapt.hpp"

namespace sois {

std::optional<int> cardinality_feedback(CardinalityController& ctrl, long samples_received) {
    int next = ctrl.current_k;
    if (samples_received < ctrl.target_samples_per_window)
        next = std::min(ctrl.current_k + 1, ctrl.k_max);
    else if (samples_received >= 2L * ctrl.target_samples_per_window)
        next = std::max(ctrl.current_k - 1, ctrl.k_min);
    if (next == ctrl.current_k) return std::nullopt;
    ctrl.current_k = next;
    return next;
}

GroupSpec adjust_group_criteria(const GroupSpec& spec, const CriteriaAdjustment& adj) {
    GroupSpec out = spec;
    for (auto& c : out.group_criteria) {
        if (c.term != adj.term) continue;
        if (c.value_type != ValueType::Float || !c.minimum) throw WrongCriterionType(adj.term);
        c.minimum = adj.new_minimum;
        return out;
    }
    throw UnknownTerm(adj.term);
}

} // namespace sois
