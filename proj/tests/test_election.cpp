#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "sois/election.hpp"
#include "sois/rng.hpp"

#include <algorithm>

using namespace sois;
using namespace sois::test;

namespace {

GroupRegistry registry_with(std::vector<NodeId> members) {
    GroupRegistry r;
    r.group = "g";
    for (auto& m : members) r.members[m] = MemberRecord{0.0, 0.0};
    return r;
}

std::map<NodeId, NodeContext> contexts_for(const std::map<NodeId, double>& scores) {
    std::map<NodeId, NodeContext> ctxs;
    for (const auto& [id, score] : scores) ctxs[id] = score_context(id, score);
    return ctxs;
}

std::set<NodeId> alive_of(const std::map<NodeId, NodeContext>& ctxs) {
    std::set<NodeId> alive;
    for (const auto& [id, ctx] : ctxs) alive.insert(id);
    return alive;
}

} // namespace

TEST_CASE("close_election: highest bid wins, ties break to the smaller id") {
    CHECK(close_election({{"A", 0.8}, {"B", 0.5}}, 1.0)->node == "A");
    CHECK(close_election({{"A", 0.8}, {"B", 0.5}}, 1.0)->fs_e == 0.8);
    CHECK(close_election({{"A", 0.5}, {"B", 0.5}}, 1.0)->node == "A");
    CHECK(close_election({{"B", 0.5}, {"A", 0.5}}, 1.0)->node == "A");
    CHECK_FALSE(close_election({}, 1.0).has_value());
}

TEST_CASE("open_election: e eligible nodes cost e(e-1) unicast or e broadcast bids") {
    GroupSpec spec = single_role_spec(1);
    auto ctxs = contexts_for({{"a", 50}, {"b", 60}, {"c", 70}, {"d", 80}});
    auto registry = registry_with({"a", "b", "c", "d"});
    ElectionTrigger trigger{"g", "worker", TriggerKind::Vacancy, 0, 1.0, {}};

    auto unicast = open_election(trigger, spec, registry, ctxs, alive_of(ctxs), NetMode::Unicast);
    CHECK(unicast.size() == 12); // 4 * 3

    auto broadcast = open_election(trigger, spec, registry, ctxs, alive_of(ctxs), NetMode::Broadcast);
    CHECK(broadcast.size() == 4);
    for (const auto& msg : broadcast) {
        CHECK(msg.kind == MessageKind::Bid);
        CHECK(msg.to == kBroadcastAll);
        const auto& bid = std::get<BidPayload>(msg.payload);
        CHECK(bid.fs == doctest::Approx(ctxs.at(msg.from).scalars.at("SCORE") / 100.0));
    }

    // no eligible nodes -> empty (position stays vacant)
    auto none = open_election(trigger, spec, registry_with({}), ctxs, alive_of(ctxs), NetMode::Unicast);
    CHECK(none.empty());
}

TEST_CASE("eligibility excludes incumbents of the same role and non-members") {
    GroupSpec spec = single_role_spec(2);
    auto ctxs = contexts_for({{"a", 50}, {"b", 60}, {"c", 70}});
    auto registry = registry_with({"a", "b"}); // c is not a member
    registry.ensure_positions("worker", 2);
    registry.assignments["worker"][0] = Assignment{"a", 0.5, 0.0};

    auto eligible = eligible_nodes(spec, "worker", registry, ctxs, alive_of(ctxs));
    CHECK(eligible == std::vector<NodeId>{"b"});
}

TEST_CASE("maybe_challenge: threshold arithmetic is exact at the boundary") {
    GroupSpec spec = single_role_spec(1);
    auto registry = registry_with({"a", "b"});
    registry.ensure_positions("worker", 1);
    registry.assignments["worker"][0] = Assignment{"a", 0.5, 0.0};
    ElectionConfig cfg; // delta 1.2

    auto ctx = score_context("b", 61.0); // FS_a = 0.61 >= 0.6
    auto request = maybe_challenge("b", "worker", spec, registry, ctx, cfg);
    REQUIRE(request.has_value());
    CHECK(request->kind == MessageKind::ChallengeRequest);
    CHECK(request->to == "a");
    CHECK(std::get<ChallengeReqPayload>(request->payload).challenger_fs == doctest::Approx(0.61));

    CHECK(maybe_challenge("b", "worker", spec, registry, score_context("b", 60.0), cfg).has_value());
    CHECK_FALSE(maybe_challenge("b", "worker", spec, registry, score_context("b", 59.0), cfg).has_value());

    // the incumbent itself never challenges
    CHECK_FALSE(maybe_challenge("a", "worker", spec, registry, score_context("a", 90.0), cfg).has_value());
}

TEST_CASE("maybe_challenge targets the lowest-FS_e incumbent and skips vacancies") {
    GroupSpec spec = single_role_spec(3);
    auto registry = registry_with({"a", "b", "c", "d"});
    registry.ensure_positions("worker", 3);
    registry.assignments["worker"][0] = Assignment{"a", 0.8, 0.0};
    registry.assignments["worker"][1] = Assignment{"b", 0.3, 0.0};
    registry.assignments["worker"][2] = Assignment{"c", 0.6, 0.0};
    ElectionConfig cfg;

    auto request = maybe_challenge("d", "worker", spec, registry, score_context("d", 90.0), cfg);
    REQUIRE(request.has_value());
    CHECK(request->to == "b"); // lowest recorded score

    registry.assignments["worker"][2].reset(); // a vacancy pre-empts challenges
    CHECK_FALSE(maybe_challenge("d", "worker", spec, registry, score_context("d", 90.0), cfg).has_value());
}

TEST_CASE("degenerate zero-score tie does not challenge forever") {
    GroupSpec spec = single_role_spec(1, /*min_score=*/0.0);
    auto registry = registry_with({"a", "b"});
    registry.ensure_positions("worker", 1);
    registry.assignments["worker"][0] = Assignment{"a", 0.0, 0.0};
    ElectionConfig cfg;
    CHECK_FALSE(maybe_challenge("b", "worker", spec, registry, score_context("b", 0.0), cfg).has_value());
    CHECK(maybe_challenge("b", "worker", spec, registry, score_context("b", 10.0), cfg).has_value());
}

TEST_CASE("on_challenge: confirm, deny, and stale outcomes") {
    GroupSpec spec = single_role_spec(1);
    ElectionConfig cfg;

    // challenger wins: 0.61 vs incumbent now at 0.55
    auto registry = registry_with({"a", "b"});
    registry.ensure_positions("worker", 1);
    registry.assignments["worker"][0] = Assignment{"a", 0.5, 0.0};
    Message req{MessageKind::ChallengeRequest, "b", "a", "g", 1.0,
                ChallengeReqPayload{"worker", 0, 0.61}};

    auto win = on_challenge("a", registry, req, spec, score_context("a", 55.0));
    CHECK(win.kind == ChallengeOutcome::ChallengerWins);
    CHECK(registry.assignments["worker"][0]->node == "b");
    CHECK(registry.assignments["worker"][0]->fs_e == doctest::Approx(0.61));
    REQUIRE(win.messages.size() == 2);
    CHECK(win.messages[0].kind == MessageKind::ChallengeResponse);
    CHECK(win.messages[0].to == "b");
    CHECK(win.messages[1].kind == MessageKind::ElectionResult);
    CHECK(std::get<ResultPayload>(win.messages[1].payload).winner == "b");

    // incumbent retains: refreshed score is advertised
    auto registry2 = registry_with({"a", "b"});
    registry2.ensure_positions("worker", 1);
    registry2.assignments["worker"][0] = Assignment{"a", 0.5, 0.0};
    auto retain = on_challenge("a", registry2, req, spec, score_context("a", 70.0));
    CHECK(retain.kind == ChallengeOutcome::IncumbentRetains);
    CHECK(registry2.assignments["worker"][0]->node == "a");
    CHECK(registry2.assignments["worker"][0]->fs_e == doctest::Approx(0.70));
    REQUIRE(retain.messages.size() == 2);
    CHECK(retain.messages[1].kind == MessageKind::FitnessUpdate);
    CHECK(std::get<FitnessUpdatePayload>(retain.messages[1].payload).fs == doctest::Approx(0.70));

    // challenge for a role the receiver no longer holds
    auto registry3 = registry_with({"a", "b", "x"});
    registry3.ensure_positions("worker", 1);
    registry3.assignments["worker"][0] = Assignment{"x", 0.9, 0.0};
    auto stale = on_challenge("a", registry3, req, spec, score_context("a", 70.0));
    CHECK(stale.kind == ChallengeOutcome::StaleChallenge);
    REQUIRE(stale.messages.size() == 1);
    const auto& resp = std::get<ChallengeRespPayload>(stale.messages[0].payload);
    CHECK(resp.stale);
    CHECK(resp.current_holder == "x");
}

TEST_CASE("fitness_drift_tick fires outside the (2-delta, delta) band") {
    GroupSpec spec = single_role_spec(1);
    ElectionConfig cfg; // delta 1.2 -> band (0.4, 0.6) around FS_e = 0.5

    auto make = [&](double score) {
        GroupRegistry r = registry_with({"a"});
        r.ensure_positions("worker", 1);
        r.assignments["worker"][0] = Assignment{"a", 0.5, 0.0};
        auto ctx = score_context("a", score);
        auto msg = fitness_drift_tick("a", "worker", 0, r, spec, ctx, cfg);
        return std::make_pair(msg.has_value(), r.assignments["worker"][0]->fs_e);
    };

    auto low = make(39.0); // 0.39 <= 0.4
    CHECK(low.first);
    CHECK(low.second == doctest::Approx(0.39));

    auto low_boundary = make(40.0); // 0.40 <= 0.40 fires
    CHECK(low_boundary.first);

    CHECK_FALSE(make(45.0).first); // inside the band
    CHECK_FALSE(make(50.0).first); // FS_a == FS_e
    CHECK_FALSE(make(59.0).first);

    auto high_boundary = make(60.0); // 0.6 >= 0.6 fires
    CHECK(high_boundary.first);
    CHECK(high_boundary.second == doctest::Approx(0.60));
}

TEST_CASE("allocate_k_positions: top-k by fitness, vacant tail when short") {
    GroupSpec spec = single_role_spec(2);
    auto ctxs = contexts_for({{"A", 90}, {"B", 70}, {"C", 40}});
    auto registry = registry_with({"A", "B", "C"});

    auto slots = allocate_k_positions("worker", 2, spec, registry, ctxs, alive_of(ctxs), 0.0);
    REQUIRE(slots.size() == 2);
    CHECK(slots[0]->node == "A");
    CHECK(slots[1]->node == "B");

    auto short_slots = allocate_k_positions("worker", 3, spec,
                                            registry_with({"A", "B"}), ctxs, alive_of(ctxs), 0.0);
    REQUIRE(short_slots.size() == 3);
    CHECK(short_slots[0]->node == "A");
    CHECK(short_slots[1]->node == "B");
    CHECK_FALSE(short_slots[2].has_value());

    // k = 1 agrees with close_election over the same bids
    auto single = allocate_k_positions("worker", 1, spec, registry, ctxs, alive_of(ctxs), 0.0);
    std::map<NodeId, double> bids;
    for (const auto& [id, ctx] : ctxs) bids[id] = fitness(ctx, effective_criteria(spec, "worker")).value;
    CHECK(single[0]->node == close_election(bids, 0.0)->node);
}

TEST_CASE("allocate_k_positions matches a brute-force top-k oracle") {
    Rng rng(555);
    GroupSpec spec = single_role_spec(1);
    for (int trial = 0; trial < 300; ++trial) {
        int n = 2 + static_cast<int>(rng.below(9));
        int k = 1 + static_cast<int>(rng.below(3));
        spec.roles[0].cardinality = CardinalitySpec::fixed(k);

        std::map<NodeId, double> scores;
        std::vector<NodeId> ids;
        for (int i = 0; i < n; ++i) {
            NodeId id = "n" + std::to_string(10 + i);
            ids.push_back(id);
            scores[id] = std::floor(rng.uniform(1.0, 100.0)); // integral: ties happen
        }
        auto ctxs = contexts_for(scores);
        auto registry = registry_with(ids);

        auto slots = allocate_k_positions("worker", k, spec, registry, ctxs, alive_of(ctxs), 0.0);

        // oracle: sort by (score desc, id asc), take k
        std::vector<NodeId> oracle = ids;
        std::sort(oracle.begin(), oracle.end(), [&](const NodeId& a, const NodeId& b) {
            if (scores[a] != scores[b]) return scores[a] > scores[b];
            return a < b;
        });
        oracle.resize(static_cast<std::size_t>(std::min(k, n)));

        std::set<NodeId> assigned;
        for (const auto& slot : slots)
            if (slot) assigned.insert(slot->node);
        CHECK(assigned == std::set<NodeId>(oracle.begin(), oracle.end()));
    }
}

TEST_CASE("delta suppression: no challenge below the threshold, quantified") {
    Rng rng(777);
    GroupSpec spec = single_role_spec(1);
    ElectionConfig cfg;
    for (int trial = 0; trial < 500; ++trial) {
        cfg.delta = rng.uniform(1.01, 2.0);
        double fs_e = rng.uniform(0.05, 1.0);
        double fs_a = rng.uniform(0.0, 1.0);
        auto registry = registry_with({"a", "b"});
        registry.ensure_positions("worker", 1);
        registry.assignments["worker"][0] = Assignment{"a", fs_e, 0.0};

        auto request = maybe_challenge("b", "worker", spec, registry,
                                       score_context("b", fs_a * 100.0), cfg);
        bool expected = fs_a >= cfg.delta * fs_e;
        CHECK(request.has_value() == expected);
    }
}

TEST_CASE("vacant position with no eligible node is retried once one qualifies") {
    // nobody clears the 50-point bar at first; the position stays vacant
    MiniWorld mini(1, {30.0, 40.0}, NetMode::Broadcast, 5);
    mini.world.spec.roles[0].criteria[0].minimum = 50.0;
    for (auto& [id, agent] : mini.world.agents) agent->spec.roles[0].criteria[0].minimum = 50.0;
    mini.world.run_until(6.0);
    for (auto& [id, agent] : mini.world.agents) CHECK_FALSE(agent->membership.member);

    // n02 recovers; it joins and fills the position on its next ticks
    ContextDelta recover;
    recover.node = mini.node(1);
    recover.scalars["SCORE"] = 80.0;
    mini.world.context_change_at(6.5, recover);
    mini.world.run_until(10.0);

    auto& agent = mini.world.agent(mini.node(1));
    CHECK(agent.membership.member);
    REQUIRE(agent.membership.registry.assignments.count("worker"));
    REQUIRE(agent.membership.registry.assignments["worker"][0].has_value());
    CHECK(agent.membership.registry.assignments["worker"][0]->node == mini.node(1));
}

TEST_CASE("two incumbents crashing together: both positions refill without double-assignment") {
    MiniWorld mini(2, {90.0, 85.0, 70.0, 60.0, 50.0}, NetMode::Broadcast, 8, /*liveness=*/true);
    mini.world.run_until(6.0);

    auto holders = [&](const GroupRegistry& r) {
        std::set<NodeId> out;
        auto it = r.assignments.find("worker");
        if (it != r.assignments.end())
            for (const auto& slot : it->second)
                if (slot) out.insert(slot->node);
        return out;
    };
    auto initial = holders(mini.world.agent(mini.node(4)).membership.registry);
    CHECK(initial == std::set<NodeId>{mini.node(0), mini.node(1)});

    mini.world.crash_at(mini.node(0), 6.3);
    mini.world.crash_at(mini.node(1), 6.3);
    mini.world.run_until(20.0);

    auto& registry = mini.world.agent(mini.node(4)).membership.registry;
    auto refilled = holders(registry);
    CHECK(refilled == std::set<NodeId>{mini.node(2), mini.node(3)}); // next two by fitness
    REQUIRE(registry.assignments["worker"].size() == 2);
    CHECK(registry.assignments["worker"][0].has_value());
    CHECK(registry.assignments["worker"][1].has_value());
    CHECK(registry.assignments["worker"][0]->node != registry.assignments["worker"][1]->node);
    CHECK(registries_agree(mini.world));
}

TEST_CASE("challenge handoff converges every registry to the new incumbent") {
    for (NetMode mode : {NetMode::Broadcast, NetMode::Unicast}) {
        MiniWorld mini(1, {50.0, 40.0, 40.0, 40.0}, mode, 29, /*liveness=*/true);
        mini.world.run_until(5.0);
        for (const auto& [id, agent] : mini.world.agents) {
            REQUIRE(agent->membership.registry.assignments.count("worker"));
            CHECK(agent->membership.registry.assignments["worker"][0]->node == mini.node(0));
        }

        ContextDelta bump;
        bump.node = mini.node(2);
        bump.scalars["SCORE"] = 90.0; // 0.9 >= 1.2 * 0.5
        mini.world.context_change_at(5.5, bump);
        mini.world.run_until(10.0);

        for (const auto& [id, agent] : mini.world.agents) {
            CHECK(agent->membership.registry.assignments["worker"][0]->node == mini.node(2));
            CHECK(agent->membership.registry.assignments["worker"][0]->fs_e == doctest::Approx(0.9));
        }
        CHECK(registries_agree(mini.world));
    }
}

TEST_CASE("a bid window at or below the link latency is rejected up front") {
    AgentConfig cfg;
    cfg.election.bid_window = 0.005; // below the 10 ms default latency
    NetConfig net;
    CHECK_THROWS_AS(SimHarness(single_role_spec(1), net, cfg, 1), std::invalid_argument);
}

TEST_CASE("static contexts after convergence stay challenge-quiescent") {
    Rng rng(0x57a71c);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 3 + int(rng.below(6));
        std::vector<double> scores;
        for (int i = 0; i < n; ++i) scores.push_back(rng.uniform(20, 95));
        MiniWorld mini(1 + int(rng.below(2)), scores, NetMode::Broadcast,
                       600 + std::uint64_t(trial), /*liveness=*/true, /*delta=*/1.2);
        auto mid = mini.world.run_until(15.0);

        // suppression holds whenever no eligible node clears delta * FS_e
        auto& registry = mini.world.agent(mini.node(0)).membership.registry;
        bool any_above = false;
        for (const auto& [role, slots] : registry.assignments)
            for (const auto& slot : slots) {
                if (!slot) continue;
                for (const auto& [id, ctx] : mini.world.contexts) {
                    if (!mini.world.sim.alive(id) || registry.holds_role(id, role)) continue;
                    double fs = fitness(ctx, effective_criteria(mini.world.spec, role)).value;
                    if (fs >= 1.2 * slot->fs_e) any_above = true;
                }
            }
        auto end = mini.world.run_until(40.0);
        if (!any_above)
            CHECK(end.tx(MessageKind::ChallengeRequest) == mid.tx(MessageKind::ChallengeRequest));
    }
}

TEST_CASE("drift band property: no update strictly inside ((2-d)FSe, dFSe)") {
    Rng rng(888);
    GroupSpec spec = single_role_spec(1);
    ElectionConfig cfg;
    for (int trial = 0; trial < 500; ++trial) {
        cfg.delta = rng.uniform(1.01, 1.9);
        double fs_e = rng.uniform(0.05, 1.0);
        double fs_a = rng.uniform(0.0, 1.0);
        GroupRegistry r = registry_with({"a"});
        r.ensure_positions("worker", 1);
        r.assignments["worker"][0] = Assignment{"a", fs_e, 0.0};

        auto msg = fitness_drift_tick("a", "worker", 0, r, spec, score_context("a", fs_a * 100.0), cfg);
        bool outside = fs_a >= cfg.delta * fs_e || fs_a <= (2.0 - cfg.delta) * fs_e;
        bool expected = outside && fs_a != fs_e;
        CHECK(msg.has_value() == expected);
    }
}
