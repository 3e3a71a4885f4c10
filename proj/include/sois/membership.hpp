#pragma once

#include "sois/context.hpp"
#include "sois/election.hpp"
#include "sois/registry.hpp"
#include "sois/simnet.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace sois {

struct MembershipConfig {
    double tick_period = 1.0; // grouping iteration period, simulated seconds
    int lease_ticks = 3;      // evict after this many periods without traffic
    int refresh_ticks = 1;    // re-advertise membership every N ticks
    bool liveness = true;     // refresh + lease eviction (off for count harnesses)
};

// Registry mutations observed between joining and receiving the registry
// replica; replayed on top of the copy so newer adverts win.
struct ObservedJoin {
    NodeId node;
    double joined_at = 0.0;
    double seen_at = 0.0;
};
struct ObservedLeave {
    NodeId node;
};
struct ObservedAssign {
    std::string role;
    int position = 0;
    std::optional<Assignment> value;
};
struct ObservedFs {
    std::string role;
    int position = 0;
    double fs = 0.0;
};
using RegistryObservation = std::variant<ObservedJoin, ObservedLeave, ObservedAssign, ObservedFs>;

struct MembershipState {
    NodeId self;
    GroupRegistry registry;
    bool member = false;
    bool needs_copy = false; // joined but no registry replica yet
    double joined_at = 0.0;
    double last_refresh = -1.0;
    std::vector<RegistryObservation> journal;

    void observe(RegistryObservation obs) {
        if (needs_copy) journal.push_back(std::move(obs));
    }
};

// One self-grouping iteration: joins or leaves per the group-membership
// predicate and advertises the transition. Stable state emits nothing.
// A leave returns the positions the node held so the caller can keep serving
// them through the soft transition.
struct GroupingOutcome {
    std::vector<Message> messages;
    bool joined = false;
    bool left = false;
    std::vector<std::pair<std::string, int>> resigned_positions;
};
GroupingOutcome grouping_tick(MembershipState& st, const GroupSpec& spec, const NodeContext& ctx,
                              const EvalOptions& opts = {});

// Inserts (or refreshes) the advertised member. The oldest member answers a
// newcomer still waiting for its replica with a RegistryCopy.
std::optional<Message> on_join_advert(MembershipState& st, const Message& msg, double now);

// Removes the leaver and returns one Resignation trigger per position it held.
std::vector<ElectionTrigger> on_leave_advert(MembershipState& st, const Message& msg, double now);

// Adopts the replica, then replays adverts observed since joining. Duplicate
// or late copies are ignored.
void on_registry_copy(MembershipState& st, const Message& msg);

// last_seen piggybacks on any received message.
void note_traffic(MembershipState& st, const NodeId& from, double now);

// Periodic liveness work: membership refresh advert when due, lease eviction
// of silent members, Vacancy triggers for positions the evicted nodes held.
struct LivenessOutcome {
    std::vector<Message> messages;
    std::vector<ElectionTrigger> triggers;
    std::vector<NodeId> evicted;
};
LivenessOutcome liveness_tick(MembershipState& st, const MembershipConfig& cfg, double now);

} // namespace sois
