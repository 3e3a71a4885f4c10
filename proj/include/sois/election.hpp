#pragma once

#include "sois/context.hpp"
#include "sois/registry.hpp"
#include "sois/simnet.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sois {

struct ElectionTrigger {
    std::string group;
    std::string role;
    TriggerKind kind = TriggerKind::Vacancy;
    int position = 0;
    double opened_at = 0.0;
    std::optional<NodeId> challenger; // present iff kind == Challenge
};

struct ElectionConfig {
    double delta = 1.2;      // challenge/update threshold, > 1
    double bid_window = 0.5; // seconds of simulated time bids are collected
};

// Per-position bid collection at one node. `bidder` distinguishes a node that
// bid itself from one passively recording bids it overheard.
struct ElectionState {
    ElectionTrigger trigger;
    std::map<NodeId, double> bids;
    double deadline = 0.0;
    bool bidder = false;
    std::optional<Assignment> elected;
};

// Alive members satisfying the role's RRC and not already holding another
// position of this role. Sorted by node id.
std::vector<NodeId> eligible_nodes(const GroupSpec& spec, const std::string& role,
                                   const GroupRegistry& registry,
                                   const std::map<NodeId, NodeContext>& contexts,
                                   const std::set<NodeId>& alive, const EvalOptions& opts = {});

// Every eligible node's Bid messages for one position election: in unicast
// mode each eligible node addresses every other eligible node; in broadcast
// mode each emits a single broadcast. Empty result means no eligible node
// (position stays vacant; retried on the next grouping tick).
std::vector<Message> open_election(const ElectionTrigger& trigger, const GroupSpec& spec,
                                   const GroupRegistry& registry,
                                   const std::map<NodeId, NodeContext>& contexts,
                                   const std::set<NodeId>& alive, NetMode mode,
                                   const EvalOptions& opts = {});

// Winner by highest bid, ties to the smallest node id; nullopt on an empty
// bid set (position stays vacant).
std::optional<Assignment> close_election(const std::map<NodeId, double>& bids, double now);

// ChallengeRequest to the lowest-FS_e incumbent iff FS_a >= delta * FS_e
// (and strictly above FS_e, which only matters at FS_e == 0). Nothing when the
// node holds the role, any position is vacant, or the threshold is not met.
std::optional<Message> maybe_challenge(const NodeId& self, const std::string& role,
                                       const GroupSpec& spec, const GroupRegistry& registry,
                                       const NodeContext& ctx, const ElectionConfig& cfg,
                                       const EvalOptions& opts = {});

struct ChallengeOutcome {
    enum Kind { ChallengerWins, IncumbentRetains, StaleChallenge } kind = StaleChallenge;
    std::vector<Message> messages; // response to the challenger + group advert
};

// Incumbent side of a challenge: recompute the current score, confirm or deny,
// and advertise either the new assignment or the refreshed score.
ChallengeOutcome on_challenge(const NodeId& self, GroupRegistry& registry, const Message& request,
                              const GroupSpec& spec, const NodeContext& ctx,
                              const EvalOptions& opts = {});

// Incumbent drift advert: FitnessUpdate iff FS_a >= delta*FS_e or
// FS_a <= (2-delta)*FS_e (and FS_a != FS_e). Refreshes the local FS_e.
std::optional<Message> fitness_drift_tick(const NodeId& self, const std::string& role, int position,
                                          GroupRegistry& registry, const GroupSpec& spec,
                                          const NodeContext& ctx, const ElectionConfig& cfg,
                                          const EvalOptions& opts = {});

// Quiescent k-out-of-m allocation: fills the k positions with the k
// highest-fitness eligible nodes (each node at most one position of the
// role); fewer eligible than k leaves the tail vacant.
std::vector<std::optional<Assignment>> allocate_k_positions(
    const std::string& role, int k, const GroupSpec& spec, const GroupRegistry& registry,
    const std::map<NodeId, NodeContext>& contexts, const std::set<NodeId>& alive, double now,
    const EvalOptions& opts = {});

} // namespace sois
