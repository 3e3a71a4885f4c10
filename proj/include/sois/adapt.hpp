#pragma once

#include "sois/spec.hpp"

#include <optional>
#include <string>

namespace sois {

// +-1 hysteresis controller for a parametrized role cardinality: grow when the
// window undershoots the sample target, shrink when it reaches twice the
// target, hold inside the band.
struct CardinalityController {
    std::string role;
    int target_samples_per_window = 1;
    double window = 10.0;
    int k_min = 1;
    int k_max = 1;
    int current_k = 1;
};

struct CriteriaAdjustment {
    std::string term;
    double new_minimum = 0.0;
};

struct UnknownTerm : std::invalid_argument {
    explicit UnknownTerm(const std::string& term)
        : std::invalid_argument("no group-level criterion for term '" + term + "'"), term(term) {}
    std::string term;
};

struct WrongCriterionType : std::invalid_argument {
    explicit WrongCriterionType(const std::string& term)
        : std::invalid_argument("criterion '" + term + "' is not a float minimum"), term(term) {}
    std::string term;
};

// New cardinality when the window's sample count leaves the hysteresis band,
// clamped to [k_min, k_max]; nullopt when no change is needed. Updates
// ctrl.current_k on change.
std::optional<int> cardinality_feedback(CardinalityController& ctrl, long samples_received);

// Copy of the spec with the group-level minimum for the term replaced; the
// next grouping ticks re-evaluate membership against it.
GroupSpec adjust_group_criteria(const GroupSpec& spec, const CriteriaAdjustment& adj);

} // namespace sois
