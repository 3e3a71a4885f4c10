#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sois/review.hpp"

#include <cmath>
#include <set>

using namespace sois;

namespace {

std::vector<NodeId> nodes(int n) {
    std::vector<NodeId> out;
    for (int i = 0; i < n; ++i) out.push_back("n" + std::to_string(100 + i));
    return out;
}

bool is_derangement(const std::vector<NodeId>& members, const ReviewRound& round) {
    std::set<NodeId> reviewers;
    for (const auto& member : members) {
        auto it = round.assignment.find(member);
        if (it == round.assignment.end()) return false;
        if (it->second == member) return false; // self-review
        reviewers.insert(it->second);
    }
    return reviewers.size() == members.size(); // bijection
}

} // namespace

TEST_CASE("two members force the swap assignment") {
    auto members = nodes(2);
    for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
        ReviewRound round = assign_reviewers(members, 0, seed);
        CHECK(round.assignment.at(members[0]) == members[1]);
        CHECK(round.assignment.at(members[1]) == members[0]);
    }
}

TEST_CASE("three members: always one of the two derangements") {
    auto members = nodes(3);
    std::set<std::string> seen;
    for (int round = 0; round < 50; ++round) {
        ReviewRound r = assign_reviewers(members, round, 7);
        CHECK(is_derangement(members, r));
        std::string shape;
        for (const auto& m : members) shape += r.assignment.at(m).back();
        seen.insert(shape);
    }
    CHECK(seen.size() == 2); // both 3-cycles appear over 50 rounds
}

TEST_CASE("fewer than two members is an error") {
    CHECK_THROWS_AS(assign_reviewers({}, 0, 1), TooFewMembers);
    CHECK_THROWS_AS(assign_reviewers({"only"}, 0, 1), TooFewMembers);
}

TEST_CASE("every round is a derangement for 2 <= n <= 50") {
    for (int n = 2; n <= 50; ++n) {
        auto members = nodes(n);
        for (int round = 0; round < 20; ++round)
            CHECK(is_derangement(members, assign_reviewers(members, round, 1234 + n)));
    }
}

TEST_CASE("assignment is deterministic per (seed, round)") {
    auto members = nodes(9);
    CHECK(assign_reviewers(members, 3, 42).assignment == assign_reviewers(members, 3, 42).assignment);
    CHECK(assign_reviewers(members, 3, 42).assignment != assign_reviewers(members, 4, 42).assignment);
}

TEST_CASE("reviewer load spread stays <= 1 across rounds with stable membership") {
    auto members = nodes(7);
    ReviewStats stats;
    Rng rng(5);
    for (int round = 0; round < 100; ++round) {
        ReviewRound r = assign_reviewers(members, round, 99);
        for (const auto& [reviewee, reviewer] : r.assignment)
            review_update(reviewer, true, stats, rng);
    }
    CHECK(stats.reviewer_spread() <= 1);
    for (const auto& [id, count] : stats.times_as_reviewer) CHECK(count == 100);
}

TEST_CASE("valid updates are always accepted") {
    ReviewStats stats;
    stats.detection_accuracy = 0.0;
    Rng rng(1);
    for (int i = 0; i < 100; ++i) CHECK(review_update("r", true, stats, rng) == Verdict::Accept);
    CHECK(stats.injected_cheats == 0);
    CHECK(stats.detected_cheats == 0);
}

TEST_CASE("accuracy 1.0 detects every injected cheat") {
    ReviewStats stats;
    stats.detection_accuracy = 1.0;
    Rng rng(1);
    for (int i = 0; i < 500; ++i) CHECK(review_update("r", false, stats, rng) == Verdict::Reject);
    CHECK(stats.injected_cheats == 500);
    CHECK(stats.detected_cheats == 500);
}

TEST_CASE("detection rate converges to the configured accuracy") {
    ReviewStats stats;
    stats.detection_accuracy = 0.9;
    Rng rng(20240401);
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) review_update("r", false, stats, rng);
    CHECK(stats.injected_cheats == trials);
    double rate = static_cast<double>(stats.detected_cheats) / trials;
    CHECK(rate == doctest::Approx(0.9).epsilon(0.011)); // ~3.3 sigma of Binomial(1e4, 0.9)
    CHECK(stats.detected_cheats <= stats.injected_cheats);
}
