#pragma once

#include "sois/context.hpp"
#include "sois/rng.hpp"

#include <map>
#include <stdexcept>
#include <vector>

namespace sois {

// One round of peer review: every member's update is checked by exactly one
// other member, and every member reviews exactly once (a derangement of the
// member set).
struct ReviewRound {
    int round = 0;
    std::map<NodeId, NodeId> assignment; // reviewee -> reviewer
    std::uint64_t rng_seed = 0;
};

struct ReviewStats {
    std::map<NodeId, long> times_as_reviewer;
    long injected_cheats = 0;
    long detected_cheats = 0;
    double detection_accuracy = 1.0;

    long reviewer_spread() const {
        if (times_as_reviewer.empty()) return 0;
        long lo = times_as_reviewer.begin()->second, hi = lo;
        for (const auto& [node, n] : times_as_reviewer) {
            lo = std::min(lo, n);
            hi = std::max(hi, n);
        }
        return hi - lo;
    }
};

struct TooFewMembers : std::invalid_argument {
    explicit TooFewMembers(std::size_t n)
        : std::invalid_argument("review needs at least 2 members, got " + std::to_string(n)) {}
};

// Uniformly sampled derangement of the member set, deterministic per
// (seed, round). Every node appears once as reviewer, so reviewer load stays
// balanced across rounds by construction.
ReviewRound assign_reviewers(const std::vector<NodeId>& members, int round, std::uint64_t seed);

enum class Verdict { Accept, Reject };

// Valid updates are always accepted; invalid ones are caught with probability
// stats.detection_accuracy using the supplied stream.
Verdict review_update(const NodeId& reviewer, bool update_valid, ReviewStats& stats, Rng& rng);

} // namespace sois
