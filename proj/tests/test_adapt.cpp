#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "sois/adapt.hpp"
#include "sois/context.hpp"
#include "sois/rng.hpp"

using namespace sois;
using namespace sois::test;

TEST_CASE("cardinality feedback: +-1 hysteresis with clamping") {
    CardinalityController ctrl{"geolocator", 10, 10.0, 1, 3, 1};

    auto up = cardinality_feedback(ctrl, 4); // 4 < 10
    REQUIRE(up.has_value());
    CHECK(*up == 2);
    CHECK(ctrl.current_k == 2);

    auto down = cardinality_feedback(ctrl, 25); // 25 >= 20
    REQUIRE(down.has_value());
    CHECK(*down == 1);

    CHECK_FALSE(cardinality_feedback(ctrl, 12).has_value()); // inside [10, 20)

    // clamping at both ends
    ctrl.current_k = 3;
    CHECK_FALSE(cardinality_feedback(ctrl, 0).has_value()); // already at k_max
    ctrl.current_k = 1;
    CHECK_FALSE(cardinality_feedback(ctrl, 1000).has_value()); // already at k_min
}

TEST_CASE("current_k stays within [k_min, k_max] over arbitrary feedback") {
    Rng rng(2025);
    CardinalityController ctrl{"r", 5, 10.0, 2, 6, 4};
    for (int i = 0; i < 2000; ++i) {
        cardinality_feedback(ctrl, static_cast<long>(rng.below(30)));
        CHECK(ctrl.current_k >= ctrl.k_min);
        CHECK(ctrl.current_k <= ctrl.k_max);
    }
}

TEST_CASE("adjust_group_criteria replaces the group-level minimum") {
    GroupSpec spec = parse_spec(test::read_file(test::data_path("bus-monitoring.xml")));

    GroupSpec tightened = adjust_group_criteria(spec, {"BATTERY_LEVEL", 25.0});
    CHECK(tightened.group_criteria[0].minimum == 25.0);
    CHECK(spec.group_criteria[0].minimum == 15.0); // original untouched

    // a node at 20% satisfies the old group criterion but not the new one
    NodeContext ctx;
    ctx.set_boolean("ACCELEROMETER", true);
    ctx.set_scalar("BATTERY_LEVEL", 20.0);
    CHECK(group_membership(ctx, spec));
    CHECK_FALSE(group_membership(ctx, tightened));

    GroupSpec same = adjust_group_criteria(spec, {"BATTERY_LEVEL", 15.0});
    CHECK(same == spec); // identity adjustment changes nothing

    CHECK_THROWS_AS(adjust_group_criteria(spec, {"NOPE", 1.0}), UnknownTerm);

    GroupSpec ride = parse_spec(test::read_file(test::data_path("bus-ride.xml")));
    CHECK_THROWS_AS(adjust_group_criteria(ride, {"BSSID", 1.0}), WrongCriterionType);
}

TEST_CASE("criteria adjustment broadcast: tightened minimum sheds members next tick") {
    // worker group with SCORE minimum 15; nodes at 20 are members until the
    // aggregator-equivalent (n01) raises the minimum to 25
    GroupSpec spec = single_role_spec(2, /*min_score=*/15.0);
    spec.group_criteria.push_back(spec.roles[0].criteria[0]); // group-level copy of the minimum
    spec.roles[0].criteria.clear();

    NetConfig net;
    SimHarness world(spec, net, default_agent_config(), 3);
    world.add_node("n01", score_context("n01", 80.0));
    world.add_node("n02", score_context("n02", 20.0));
    world.add_node("n03", score_context("n03", 20.0));
    world.run_until(5.0);

    for (const auto& [id, agent] : world.agents) CHECK(agent->membership.member);

    world.agent("n01").adjust_criteria("SCORE", 25.0);
    world.run_until(8.0);

    CHECK(world.agent("n01").membership.member);
    CHECK_FALSE(world.agent("n02").membership.member);
    CHECK_FALSE(world.agent("n03").membership.member);
    CHECK(registries_agree(world));

    // relaxing it back re-admits them on their next tick
    world.agent("n01").adjust_criteria("SCORE", 15.0);
    world.run_until(12.0);
    CHECK(world.agent("n02").membership.member);
    CHECK(world.agent("n03").membership.member);
    CHECK(registries_agree(world));
}

TEST_CASE("monotone shrink: raising a minimum never adds members") {
    Rng rng(31);
    GroupSpec spec = parse_spec(test::read_file(test::data_path("bus-monitoring.xml")));
    for (int trial = 0; trial < 300; ++trial) {
        NodeContext ctx;
        ctx.set_boolean("GPS", rng.chance(0.6));
        ctx.set_boolean("ACCELEROMETER", rng.chance(0.6));
        ctx.set_boolean("INTERNET", rng.chance(0.6));
        ctx.set_scalar("BATTERY_LEVEL", rng.uniform(0, 100));

        double lo = rng.uniform(0, 50), hi = lo + rng.uniform(0, 50);
        GroupSpec relaxed = adjust_group_criteria(spec, {"BATTERY_LEVEL", lo});
        GroupSpec strict = adjust_group_criteria(spec, {"BATTERY_LEVEL", hi});
        bool in_relaxed = group_membership(ctx, relaxed);
        bool in_strict = group_membership(ctx, strict);
        if (in_strict) CHECK(in_relaxed); // strict membership implies relaxed membership
    }
}
