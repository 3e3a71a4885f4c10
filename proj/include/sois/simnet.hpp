#pragma once

#include "sois/registry.hpp"
#include "sois/rng.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sois {

// ---------------------------------------------------------------------------
// messages

enum class MessageKind : int {
    JoinAdvert,
    LeaveAdvert,
    RegistryCopy,
    Bid,
    ElectionResult,
    ChallengeRequest,
    ChallengeResponse,
    FitnessUpdate,
    SensorReport,
    AggregateReport,
    BackendRequest,
    ReviewRequest,
    ReviewVerdict,
    SpecUpdate,
};
constexpr int kMessageKindCount = 14;

std::string_view to_string(MessageKind k);

enum class NetMode { Unicast, Broadcast };

std::string_view to_string(NetMode m);

// Destination of a group-wide advert; expands per the network mode.
inline const NodeId kBroadcastAll = "*";
// Back-end sink for BackendRequest; not a simulated node.
inline const NodeId kBackend = "@backend";

enum class TriggerKind { Vacancy, Resignation, Challenge };

std::string_view to_string(TriggerKind k);

struct JoinPayload {
    double joined_at = 0.0;
    bool needs_copy = false; // newcomer still waiting for the registry replica
};

struct BidPayload {
    std::string role;
    int position = 0;
    double opened_at = 0.0;
    TriggerKind trigger = TriggerKind::Vacancy;
    double fs = 0.0;
};

struct ResultPayload {
    std::string role;
    int position = 0;
    NodeId winner;
    double fs_e = 0.0;
    double elected_at = 0.0;
};

struct ChallengeReqPayload {
    std::string role;
    int position = 0;
    double challenger_fs = 0.0;
};

struct ChallengeRespPayload {
    std::string role;
    int position = 0;
    bool challenger_wins = false;
    bool stale = false;     // receiver no longer held the position
    NodeId current_holder;  // informative on stale responses
    double fs = 0.0;        // winner's score (win) or incumbent's refreshed score
};

struct FitnessUpdatePayload {
    std::string role;
    int position = 0;
    double fs = 0.0;
};

struct SensorPayload {
    std::string sensor; // role that produced the reading
    int window = 0;
    double value = 0.0;
};

// Spec adjustment broadcast by the aggregator: either a cardinality rebinding
// (role + new_k) or a group-criteria minimum change (term + new_minimum).
struct SpecUpdatePayload {
    std::string role;
    int new_k = 0;
    double decided_at = 0.0; // origin time; keys election-episode accounting
    std::string term;        // non-empty for criteria adjustments
    double new_minimum = 0.0;
};

struct ReviewPayload {
    int round = 0;
    bool valid = true;
    bool reject = false; // verdict only
};

using MessagePayload = std::variant<std::monostate, JoinPayload, GroupRegistry, BidPayload,
                                    ResultPayload, ChallengeReqPayload, ChallengeRespPayload,
                                    FitnessUpdatePayload, SensorPayload, SpecUpdatePayload,
                                    ReviewPayload>;

struct Message {
    MessageKind kind = MessageKind::JoinAdvert;
    NodeId from;
    NodeId to; // kBroadcastAll for group-wide adverts, kBackend for server traffic
    std::string group;
    double payload_size_hint = 1.0;
    MessagePayload payload;
};

// ---------------------------------------------------------------------------
// counters

// transmitted is per (kind, mode); attempted/delivered/lost are per-recipient
// delivery outcomes. For unicast transmissions and BackendRequest,
// attempted == transmitted, so delivered + lost = transmitted holds exactly;
// a broadcast counts one transmission that fans out into several attempts.
struct MessageCounters {
    std::array<std::array<std::uint64_t, 2>, kMessageKindCount> transmitted{};
    std::array<std::uint64_t, kMessageKindCount> attempted{};
    std::array<std::uint64_t, kMessageKindCount> delivered{};
    std::array<std::uint64_t, kMessageKindCount> lost{};

    std::uint64_t tx(MessageKind k, NetMode m) const {
        return transmitted[static_cast<int>(k)][static_cast<int>(m)];
    }
    std::uint64_t tx(MessageKind k) const { return tx(k, NetMode::Unicast) + tx(k, NetMode::Broadcast); }
    std::uint64_t rx(MessageKind k) const { return delivered[static_cast<int>(k)]; }
    std::uint64_t dropped(MessageKind k) const { return lost[static_cast<int>(k)]; }
    std::uint64_t tried(MessageKind k) const { return attempted[static_cast<int>(k)]; }
};

// ---------------------------------------------------------------------------
// events

struct MessageDelivery {
    Message msg;
    NodeId recipient;
    int sender_cell = 0; // partition cell the sender occupied at send time
};

struct TickTimer {
    NodeId node;
};

struct ElectionDeadline {
    NodeId node;
    std::string role;
    int position = 0;
    double opened_at = 0.0;
};

struct WindowTimer {
    int index = 0;
};

struct ReviewRoundTimer {
    int round = 0;
};

struct DepartTimer {
    NodeId node;
};

struct ContextDelta {
    NodeId node;
    std::map<std::string, bool> booleans;
    std::map<std::string, double> scalars;
    std::map<std::string, std::string> strings;
};

struct NodeJoin {
    NodeId node;
};
struct NodeCrash {
    NodeId node;
};
struct NodeShutdown {
    NodeId node;
};

using EventPayload = std::variant<MessageDelivery, TickTimer, ElectionDeadline, WindowTimer,
                                  ReviewRoundTimer, DepartTimer, ContextDelta, NodeJoin, NodeCrash,
                                  NodeShutdown>;

struct SimEvent {
    double fire_at = 0.0;
    std::uint64_t seq = 0;
    EventPayload payload;
};

struct SchedulingInPast : std::logic_error {
    SchedulingInPast(double fire_at, double now)
        : std::logic_error("event scheduled at " + std::to_string(fire_at) + " before now=" +
                           std::to_string(now)) {}
};

struct SenderDead : std::logic_error {
    explicit SenderDead(const NodeId& node) : std::logic_error("sender is not alive: " + node) {}
};

// ---------------------------------------------------------------------------
// network configuration

struct PartitionInterval {
    double begin = 0.0;
    double end = 0.0;
    std::vector<std::set<NodeId>> cells; // disjoint; unlisted nodes share cell -1
};

struct NetConfig {
    NetMode mode = NetMode::Broadcast;
    double d2d_latency = 0.010;
    double backend_latency = 0.100;
    std::map<NodeId, double> backend_reachability; // default 1.0
    // optional step schedule (from_time, probability) per node; while active
    // it overrides the constant above
    std::map<NodeId, std::vector<std::pair<double, double>>> reachability_schedule;
    std::vector<PartitionInterval> partitions;

    double reachability(const NodeId& node, double t) const {
        auto sched = reachability_schedule.find(node);
        if (sched != reachability_schedule.end() && !sched->second.empty()) {
            double p = backend_reachability.count(node) ? backend_reachability.at(node) : 1.0;
            for (const auto& [from, prob] : sched->second) {
                if (t < from) break;
                p = prob;
            }
            return p;
        }
        auto it = backend_reachability.find(node);
        return it != backend_reachability.end() ? it->second : 1.0;
    }
};

// ---------------------------------------------------------------------------
// simulator

// Seeded deterministic discrete-event scheduler plus the simulated network.
// Single-threaded; handlers run synchronously under the event loop. Identical
// (seed, config, handler logic) yields a bit-identical event trace.
class Simulator {
public:
    Simulator(NetConfig net, std::uint64_t seed);

    double now() const { return now_; }
    const NetConfig& net() const { return net_; }
    const MessageCounters& counters() const { return counters_; }
    Rng& rng() { return rng_; }

    void add_node(const NodeId& node, bool alive = true);
    void kill(const NodeId& node) { alive_.erase(node); }
    bool alive(const NodeId& node) const { return alive_.count(node) > 0; }
    std::vector<NodeId> alive_nodes() const { return {alive_.begin(), alive_.end()}; }
    std::set<NodeId> alive_set() const { return alive_; }

    void schedule(double fire_at, EventPayload payload);
    void send(const Message& msg);

    // Processes every event with fire_at <= t_end; returns the counters.
    MessageCounters run_until(double t_end);

    // handler hooks, owned by the protocol layer
    std::function<void(const NodeId&, const Message&)> on_deliver;
    std::function<void(const TickTimer&)> on_tick;
    std::function<void(const ElectionDeadline&)> on_election_deadline;
    std::function<void(const WindowTimer&)> on_window;
    std::function<void(const ReviewRoundTimer&)> on_review_round;
    std::function<void(const DepartTimer&)> on_depart;
    std::function<void(const ContextDelta&)> on_context_change;
    std::function<void(const NodeId&)> on_node_join;
    std::function<void(const NodeId&)> on_node_crash;
    std::function<void(const NodeId&)> on_node_shutdown;

    // Event-trace log: time, node, event kind, message kind, from, to.
    void set_trace(std::string* sink) { trace_ = sink; }
    void trace_line(const NodeId& node, std::string_view event, std::string_view msg_kind = "-",
                    const NodeId& from = "-", const NodeId& to = "-");

    int partition_cell(const NodeId& node, double t) const;

    // Unreliable back-end draws are consumed in event order; exposed so tests
    // can pin expectations.
    std::uint64_t backend_draws() const { return backend_draws_; }

private:
    struct EventOrder {
        bool operator()(const SimEvent& a, const SimEvent& b) const {
            if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
            return a.seq > b.seq;
        }
    };

    void dispatch(const SimEvent& ev);
    void deliver(const MessageDelivery& d);

    NetConfig net_;
    Rng rng_;
    double now_ = 0.0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t backend_draws_ = 0;
    std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> queue_;
    std::set<NodeId> alive_;
    std::set<NodeId> known_;
    MessageCounters counters_;
    std::string* trace_ = nullptr;
};

} // namespace sois
