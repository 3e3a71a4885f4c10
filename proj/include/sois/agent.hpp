#pragma once

#include "sois/adapt.hpp"
#include "sois/election.hpp"
#include "sois/membership.hpp"
#include "sois/simnet.hpp"

#include <functional>
#include <memory>
#include <tuple>

namespace sois {

struct AgentConfig {
    MembershipConfig membership;
    ElectionConfig election;
    EvalOptions eval;
    bool challenges = true;
    bool drift_updates = true;
    double depart_grace = 1.0; // longest a resigning node keeps serving its positions
};

class SimHarness;

// One node's protocol state machine: self-grouping, position elections,
// challenges, and fitness-drift adverts, driven synchronously by the
// simulator's tick/delivery events. All agents tick at the same aligned
// instants so vacancy detection and election windows coincide.
class NodeAgent {
public:
    NodeAgent(NodeId id, SimHarness& world);

    void on_start();
    void on_tick();
    void on_deliver(const Message& msg);
    void on_deadline(const ElectionDeadline& d);
    void on_shutdown();
    void on_depart();
    void on_crash();

    // True while this node provides the role's functionality: it holds a
    // position, or it resigned and the replacement is not elected yet.
    bool serving(const std::string& role) const;
    std::optional<NodeId> current_holder(const std::string& role, int position = 0) const;

    // Cardinality feedback: rebind the role's parameter locally and broadcast
    // the SpecUpdate so every member adjusts its position table.
    void rebind_cardinality(const std::string& role, int new_k);

    // Group-criteria adjustment, broadcast the same way; membership reacts on
    // the next grouping tick.
    void adjust_criteria(const std::string& term, double new_minimum);

    const NodeId id;
    GroupSpec spec; // node-local copy; SpecUpdate rebinding applies here
    MembershipState membership;
    std::map<std::pair<std::string, int>, ElectionState> elections;
    std::set<std::string> pending_challenge;
    std::set<std::pair<std::string, int>> departing_positions;
    bool leaving = false;
    bool departed = false;
    std::map<std::string, long> window_samples; // SensorReports per role since the last window

private:
    void open_position_election(const ElectionTrigger& trigger);
    void scan_vacancies();
    void record_result(const ResultPayload& r);
    void apply_spec_update(const SpecUpdatePayload& u, double decided_at);
    void emit_group(Message msg);
    void finish_departure();

    SimHarness& world_;
    std::string last_registry_digest_;
};

// Owns the simulator, node contexts, and agents; routes events and keeps the
// election audit counts. Scenario drivers sit on top via the hook functions.
class SimHarness {
public:
    SimHarness(GroupSpec bound_spec, NetConfig net, AgentConfig cfg, std::uint64_t seed);

    NodeAgent& add_node(const NodeId& id, NodeContext ctx, double join_at = 0.0);
    void crash_at(const NodeId& id, double t) { sim.schedule(t, NodeCrash{id}); }
    void shutdown_at(const NodeId& id, double t) { sim.schedule(t, NodeShutdown{id}); }
    void context_change_at(double t, ContextDelta delta) { sim.schedule(t, std::move(delta)); }

    MessageCounters run_until(double t) { return sim.run_until(t); }

    NodeAgent& agent(const NodeId& id) { return *agents.at(id); }
    double next_aligned_tick(double now) const;

    // Election episodes are deduplicated across agents by (role, position,
    // opened-at) so one distributed election counts once.
    void count_election(const std::string& role, int position, double opened_at, TriggerKind kind);

    Simulator sim;
    GroupSpec spec;
    AgentConfig cfg;
    std::map<NodeId, NodeContext> contexts;
    std::map<NodeId, std::unique_ptr<NodeAgent>> agents;

    std::map<TriggerKind, long> election_counts;
    long election_total = 0;

    // scenario hooks
    std::function<void(NodeAgent&, const Message&)> on_sensor_report;
    std::function<void(NodeAgent&, const Message&)> on_review_request;
    std::function<void(NodeAgent&, const Message&)> on_review_verdict;
    std::function<void(const NodeId&, bool joined, double t)> on_membership_change;
    std::function<void(NodeAgent&)> on_agent_tick;

private:
    std::set<std::tuple<std::string, int, double>> election_episodes_;
};

} // namespace sois
