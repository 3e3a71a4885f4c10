#include "sois/election.hpp"

#include <algorithm>

namespace sois {

std::vector<NodeId> eligible_nodes(const GroupSpec& spec, const std::string& role,
                                   const GroupRegistry& registry,
                                   const std::map<NodeId, NodeContext>& contexts,
                                   const std::set<NodeId>& alive, const EvalOptions& opts) {
    std::vector<NodeId> out;
    auto effective = effective_criteria(spec, role);
    for (const auto& [node, rec] : registry.members) {
        if (!alive.count(node)) continue;
        if (registry.holds_role(node, role)) continue;
        auto ctx = contexts.find(node);
        if (ctx == contexts.end()) continue;
        if (!rrc(ctx->second, effective, opts)) continue;
        out.push_back(node);
    }
    return out; // map iteration is already id-sorted
}

std::vector<Message> open_election(const ElectionTrigger& trigger, const GroupSpec& spec,
                                   const GroupRegistry& registry,
                                   const std::map<NodeId, NodeContext>& contexts,
                                   const std::set<NodeId>& alive, NetMode mode,
                                   const EvalOptions& opts) {
    std::vector<Message> out;
    auto eligible = eligible_nodes(spec, trigger.role, registry, contexts, alive, opts);
    if (eligible.empty()) return out;

    auto effective = effective_criteria(spec, trigger.role);
    for (const auto& bidder : eligible) {
        FitnessScore fs = fitness(contexts.at(bidder), effective, opts);
        BidPayload bid{trigger.role, trigger.position, trigger.opened_at, trigger.kind, fs.value};
        if (mode == NetMode::Broadcast) {
            out.push_back(Message{MessageKind::Bid, bidder, kBroadcastAll, trigger.group, 1.0, bid});
        } else {
            for (const auto& peer : eligible) {
                if (peer == bidder) continue;
                out.push_back(Message{MessageKind::Bid, bidder, peer, trigger.group, 1.0, bid});
            }
        }
    }
    return out;
}

std::optional<Assignment> close_election(const std::map<NodeId, double>& bids, double now) {
    std::optional<Assignment> winner;
    for (const auto& [node, fs] : bids) {
        if (!winner || fs > winner->fs_e) winner = Assignment{node, fs, now};
        // equal scores keep the earlier (smaller) node id
    }
    return winner;
}

namespace {

// Lowest-FS_e filled position of the role; nullopt when any position is
// vacant (a vacancy election takes precedence over challenges) or none filled.
std::optional<int> challenge_target(const GroupRegistry& registry, const std::string& role) {
    auto it = registry.assignments.find(role);
    if (it == registry.assignments.end() || it->second.empty()) return std::nullopt;
    std::optional<int> target;
    double lowest = 0.0;
    for (int i = 0; i < static_cast<int>(it->second.size()); ++i) {
        const auto& slot = it->second[i];
        if (!slot) return std::nullopt;
        if (!target || slot->fs_e < lowest) {
            target = i;
            lowest = slot->fs_e;
        }
    }
    return target;
}

} // namespace

std::optional<Message> maybe_challenge(const NodeId& self, const std::string& role,
                                       const GroupSpec& spec, const GroupRegistry& registry,
                                       const NodeContext& ctx, const ElectionConfig& cfg,
                                       const EvalOptions& opts) {
    if (!registry.is_member(self)) return std::nullopt;
    if (registry.holds_role(self, role)) return std::nullopt;
    auto effective = effective_criteria(spec, role);
    if (!rrc(ctx, effective, opts)) return std::nullopt;

    auto target = challenge_target(registry, role);
    if (!target) return std::nullopt;
    const Assignment& incumbent = *registry.assignments.at(role)[*target];
    if (incumbent.node == self) return std::nullopt;

    double fs_a = fitness(ctx, effective, opts).value;
    if (fs_a < cfg.delta * incumbent.fs_e) return std::nullopt;
    if (fs_a <= incumbent.fs_e) return std::nullopt; // degenerate FS_e == 0 tie

    ChallengeReqPayload payload{role, *target, fs_a};
    return Message{MessageKind::ChallengeRequest, self, incumbent.node, spec.name, 1.0, payload};
}

ChallengeOutcome on_challenge(const NodeId& self, GroupRegistry& registry, const Message& request,
                              const GroupSpec& spec, const NodeContext& ctx,
                              const EvalOptions& opts) {
    const auto& req = std::get<ChallengeReqPayload>(request.payload);
    ChallengeOutcome out;

    auto it = registry.assignments.find(req.role);
    bool holds = it != registry.assignments.end() && req.position < static_cast<int>(it->second.size()) &&
                 it->second[req.position] && it->second[req.position]->node == self;
    if (!holds) {
        out.kind = ChallengeOutcome::StaleChallenge;
        ChallengeRespPayload resp{req.role, req.position, false, true, "", 0.0};
        if (it != registry.assignments.end() && req.position < static_cast<int>(it->second.size()) &&
            it->second[req.position]) {
            resp.current_holder = it->second[req.position]->node;
            resp.fs = it->second[req.position]->fs_e;
        }
        out.messages.push_back(
            Message{MessageKind::ChallengeResponse, self, request.from, spec.name, 1.0, resp});
        return out;
    }

    double fs_a = fitness(ctx, effective_criteria(spec, req.role), opts).value;
    if (req.challenger_fs > fs_a) {
        out.kind = ChallengeOutcome::ChallengerWins;
        it->second[req.position] = Assignment{request.from, req.challenger_fs, ctx.now};
        out.messages.push_back(Message{MessageKind::ChallengeResponse, self, request.from, spec.name,
                                       1.0,
                                       ChallengeRespPayload{req.role, req.position, true, false,
                                                            request.from, req.challenger_fs}});
        out.messages.push_back(Message{
            MessageKind::ElectionResult, self, kBroadcastAll, spec.name, 1.0,
            ResultPayload{req.role, req.position, request.from, req.challenger_fs, ctx.now}});
    } else {
        out.kind = ChallengeOutcome::IncumbentRetains;
        it->second[req.position]->fs_e = fs_a; // future challenges see the refreshed score
        out.messages.push_back(
            Message{MessageKind::ChallengeResponse, self, request.from, spec.name, 1.0,
                    ChallengeRespPayload{req.role, req.position, false, false, self, fs_a}});
        out.messages.push_back(Message{MessageKind::FitnessUpdate, self, kBroadcastAll, spec.name, 1.0,
                                       FitnessUpdatePayload{req.role, req.position, fs_a}});
    }
    return out;
}

std::optional<Message> fitness_drift_tick(const NodeId& self, const std::string& role, int position,
                                          GroupRegistry& registry, const GroupSpec& spec,
                                          const NodeContext& ctx, const ElectionConfig& cfg,
                                          const EvalOptions& opts) {
    auto it = registry.assignments.find(role);
    if (it == registry.assignments.end() || position >= static_cast<int>(it->second.size())) return std::nullopt;
    auto& slot = it->second[position];
    if (!slot || slot->node != self) return std::nullopt;

    double fs_a = fitness(ctx, effective_criteria(spec, role), opts).value;
    double fs_e = slot->fs_e;
    if (fs_a == fs_e) return std::nullopt;
    if (fs_a < cfg.delta * fs_e && fs_a > (2.0 - cfg.delta) * fs_e) return std::nullopt;

    slot->fs_e = fs_a;
    return Message{MessageKind::FitnessUpdate, self, kBroadcastAll, spec.name, 1.0,
                   FitnessUpdatePayload{role, position, fs_a}};
}

std::vector<std::optional<Assignment>> allocate_k_positions(
    const std::string& role, int k, const GroupSpec& spec, const GroupRegistry& registry,
    const std::map<NodeId, NodeContext>& contexts, const std::set<NodeId>& alive, double now,
    const EvalOptions& opts) {
    std::vector<std::optional<Assignment>> slots(static_cast<std::size_t>(k));
    auto effective = effective_criteria(spec, role);

    GroupRegistry scratch = registry;
    scratch.assignments[role].assign(static_cast<std::size_t>(k), std::nullopt);
    for (int pos = 0; pos < k; ++pos) {
        auto eligible = eligible_nodes(spec, role, scratch, contexts, alive, opts);
        std::map<NodeId, double> bids;
        for (const auto& node : eligible)
            bids[node] = fitness(contexts.at(node), effective, opts).value;
        auto winner = close_election(bids, now);
        if (!winner) break;
        slots[pos] = winner;
        scratch.assignments[role][pos] = winner;
    }
    return slots;
}

} // namespace sois
