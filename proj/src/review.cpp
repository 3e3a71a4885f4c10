#include "sois/review.hpp"

#include <algorithm>

namespace sois {

ReviewRound assign_reviewers(const std::vector<NodeId>& members, int round, std::uint64_t seed) {
    if (members.size() < 2) throw TooFewMembers(members.size());

    std::vector<NodeId> sorted = members;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < 2) throw TooFewMembers(sorted.size());

    ReviewRound out;
    out.round = round;
    out.rng_seed = seed_mix(seed, static_cast<std::uint64_t>(round) + 0x5eedu);
    Rng rng(out.rng_seed);

    // Rejection sampling over uniform permutations conditioned on no fixed
    // point is uniform over derangements; acceptance probability tends to 1/e.
    std::vector<NodeId> reviewers = sorted;
    for (;;) {
        rng.shuffle(reviewers);
        bool fixed_point = false;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (reviewers[i] == sorted[i]) {
                fixed_point = true;
                break;
            }
        }
        if (!fixed_point) break;
    }
    for (std::size_t i = 0; i < sorted.size(); ++i) out.assignment[sorted[i]] = reviewers[i];
    return out;
}

Verdict review_update(const NodeId& reviewer, bool update_valid, ReviewStats& stats, Rng& rng) {
    stats.times_as_reviewer[reviewer]++;
    if (update_valid) return Verdict::Accept;
    stats.injected_cheats++;
    if (rng.chance(stats.detection_accuracy)) {
        stats.detected_cheats++;
        return Verdict::Reject;
    }
    return Verdict::Accept;
}

} // namespace sois
