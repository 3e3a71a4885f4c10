#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sois/rng.hpp"
#include "sois/simnet.hpp"

#include <string>
#include <vector>

using namespace sois;

namespace {

NetConfig net(NetMode mode) {
    NetConfig cfg;
    cfg.mode = mode;
    return cfg;
}

Message advert(const NodeId& from, const NodeId& to) {
    return Message{MessageKind::JoinAdvert, from, to, "g", 1.0, JoinPayload{0.0, false}};
}

std::vector<NodeId> make_nodes(Simulator& sim, int n) {
    std::vector<NodeId> ids;
    for (int i = 0; i < n; ++i) {
        ids.push_back("n" + std::to_string(i));
        sim.add_node(ids.back());
    }
    return ids;
}

} // namespace

TEST_CASE("events at the same instant fire in schedule order") {
    Simulator sim(net(NetMode::Broadcast), 1);
    sim.add_node("a");
    std::vector<int> order;
    sim.on_window = [&](const WindowTimer& w) { order.push_back(w.index); };
    sim.schedule(1.0, WindowTimer{1});
    sim.schedule(1.0, WindowTimer{2});
    sim.schedule(0.5, WindowTimer{0});
    sim.run_until(2.0);
    CHECK(order == std::vector<int>{0, 1, 2});
}

TEST_CASE("scheduling in the past throws") {
    Simulator sim(net(NetMode::Broadcast), 1);
    sim.run_until(5.0);
    CHECK(sim.now() == 5.0);
    CHECK_THROWS_AS(sim.schedule(4.0, WindowTimer{0}), SchedulingInPast);
    sim.schedule(5.0, WindowTimer{0}); // now is fine
}

TEST_CASE("dead senders cannot send") {
    Simulator sim(net(NetMode::Broadcast), 1);
    sim.add_node("a");
    sim.add_node("b");
    sim.kill("a");
    CHECK_THROWS_AS(sim.send(advert("a", kBroadcastAll)), SenderDead);
}

TEST_CASE("broadcast mode: one transmission, full fan-out delivery") {
    Simulator sim(net(NetMode::Broadcast), 1);
    make_nodes(sim, 6);
    sim.send(advert("n0", kBroadcastAll));
    auto counters = sim.run_until(1.0);
    CHECK(counters.tx(MessageKind::JoinAdvert, NetMode::Broadcast) == 1);
    CHECK(counters.tx(MessageKind::JoinAdvert, NetMode::Unicast) == 0);
    CHECK(counters.rx(MessageKind::JoinAdvert) == 5);
    CHECK(counters.tried(MessageKind::JoinAdvert) == 5);
}

TEST_CASE("unicast mode: group-wide advert expands to n-1 transmissions") {
    Simulator sim(net(NetMode::Unicast), 1);
    make_nodes(sim, 6);
    sim.send(advert("n0", kBroadcastAll));
    auto counters = sim.run_until(1.0);
    CHECK(counters.tx(MessageKind::JoinAdvert, NetMode::Unicast) == 5);
    CHECK(counters.rx(MessageKind::JoinAdvert) == 5);
}

TEST_CASE("directed sends are unicast transmissions in both modes") {
    for (NetMode mode : {NetMode::Unicast, NetMode::Broadcast}) {
        Simulator sim(net(mode), 1);
        make_nodes(sim, 3);
        sim.send(advert("n0", "n1"));
        auto counters = sim.run_until(1.0);
        CHECK(counters.tx(MessageKind::JoinAdvert, NetMode::Unicast) == 1);
        CHECK(counters.rx(MessageKind::JoinAdvert) == 1);
    }
}

TEST_CASE("backend requests draw reachability: certain loss is counted") {
    NetConfig cfg = net(NetMode::Broadcast);
    cfg.backend_reachability["n0"] = 0.0;
    Simulator sim(cfg, 1);
    sim.add_node("n0");
    sim.send(Message{MessageKind::BackendRequest, "n0", kBackend, "", 1.0, std::monostate{}});
    auto counters = sim.run_until(1.0);
    CHECK(counters.tx(MessageKind::BackendRequest) == 1);
    CHECK(counters.dropped(MessageKind::BackendRequest) == 1);
    CHECK(counters.rx(MessageKind::BackendRequest) == 0);
}

TEST_CASE("backend reachability 1.0 never loses") {
    NetConfig cfg = net(NetMode::Broadcast);
    cfg.backend_reachability["n0"] = 1.0;
    Simulator sim(cfg, 7);
    sim.add_node("n0");
    for (int i = 0; i < 200; ++i)
        sim.send(Message{MessageKind::BackendRequest, "n0", kBackend, "", 1.0, std::monostate{}});
    auto counters = sim.run_until(1.0);
    CHECK(counters.rx(MessageKind::BackendRequest) == 200);
    CHECK(counters.dropped(MessageKind::BackendRequest) == 0);
}

TEST_CASE("reachability step schedule switches the loss behavior over time") {
    NetConfig cfg = net(NetMode::Broadcast);
    cfg.reachability_schedule["n0"] = {{0.0, 1.0}, {10.0, 0.0}};
    Simulator sim(cfg, 3);
    sim.add_node("n0");

    auto fire = [&](int count) {
        for (int i = 0; i < count; ++i)
            sim.send(Message{MessageKind::BackendRequest, "n0", kBackend, "", 1.0, std::monostate{}});
    };
    fire(20); // t = 0: fully reachable
    sim.run_until(15.0);
    fire(20); // t = 15: unreachable
    auto counters = sim.run_until(20.0);
    CHECK(counters.rx(MessageKind::BackendRequest) == 20);
    CHECK(counters.dropped(MessageKind::BackendRequest) == 20);
}

TEST_CASE("run_until with an empty queue leaves counters untouched") {
    Simulator sim(net(NetMode::Broadcast), 1);
    auto counters = sim.run_until(10.0);
    for (int k = 0; k < kMessageKindCount; ++k) {
        CHECK(counters.tx(static_cast<MessageKind>(k)) == 0);
        CHECK(counters.tried(static_cast<MessageKind>(k)) == 0);
    }
}

TEST_CASE("same seed and schedule give a byte-identical trace") {
    auto run_once = [] {
        NetConfig cfg = net(NetMode::Unicast);
        cfg.backend_reachability["n0"] = 0.5;
        Simulator sim(cfg, 42);
        std::string trace;
        sim.set_trace(&trace);
        auto ids = make_nodes(sim, 4);
        for (int i = 0; i < 50; ++i) {
            sim.send(advert("n0", kBroadcastAll));
            sim.send(Message{MessageKind::BackendRequest, "n0", kBackend, "", 1.0, std::monostate{}});
            sim.run_until(sim.now() + 0.5);
        }
        return trace;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("conservation: delivered + lost = attempted; unicast attempts = transmissions") {
    Rng rng(31337);
    NetConfig cfg = net(NetMode::Unicast);
    Simulator sim(cfg, 9);
    auto ids = make_nodes(sim, 5);
    for (int i = 0; i < 300; ++i) {
        NodeId from = ids[rng.below(ids.size())];
        if (!sim.alive(from)) continue;
        if (rng.chance(0.2)) {
            sim.send(advert(from, kBroadcastAll));
        } else {
            NodeId to = ids[rng.below(ids.size())];
            if (to != from) sim.send(advert(from, to));
        }
        if (rng.chance(0.05)) sim.kill(ids[rng.below(ids.size())]); // in-flight messages drop
        sim.run_until(sim.now() + rng.uniform(0.0, 0.05));
    }
    auto counters = sim.run_until(sim.now() + 1.0);
    auto k = MessageKind::JoinAdvert;
    CHECK(counters.rx(k) + counters.dropped(k) == counters.tried(k));
    CHECK(counters.tried(k) == counters.tx(k, NetMode::Unicast));
}

TEST_CASE("partitioned nodes never receive deliveries from outside their cell") {
    NetConfig cfg = net(NetMode::Broadcast);
    PartitionInterval split;
    split.begin = 1.0;
    split.end = 2.0;
    split.cells = {{"n0", "n1"}, {"n2", "n3"}};
    cfg.partitions.push_back(split);

    Simulator sim(cfg, 1);
    make_nodes(sim, 4);
    std::vector<std::pair<NodeId, NodeId>> received; // (recipient, from)
    sim.on_deliver = [&](const NodeId& to, const Message& m) { received.push_back({to, m.from}); };

    sim.run_until(1.2);
    sim.send(advert("n0", kBroadcastAll)); // inside the partition interval
    sim.send(advert("n2", "n1"));          // cross-cell unicast must drop
    auto counters = sim.run_until(1.5);

    CHECK(received.size() == 1);
    CHECK(received[0] == std::pair<NodeId, NodeId>{"n1", "n0"});
    CHECK(counters.dropped(MessageKind::JoinAdvert) == 1);

    // after the interval the network is whole again
    received.clear();
    sim.run_until(2.5);
    sim.send(advert("n2", "n1"));
    sim.run_until(3.0);
    CHECK(received.size() == 1);
}

TEST_CASE("messages in flight to a crashed node count as lost") {
    Simulator sim(net(NetMode::Unicast), 1);
    make_nodes(sim, 2);
    sim.send(advert("n0", "n1"));
    sim.kill("n1");
    auto counters = sim.run_until(1.0);
    CHECK(counters.dropped(MessageKind::JoinAdvert) == 1);
    CHECK(counters.rx(MessageKind::JoinAdvert) == 0);
}
