#include "sois/membership.hpp"

#include <algorithm>

namespace sois {

GroupingOutcome grouping_tick(MembershipState& st, const GroupSpec& spec, const NodeContext& ctx,
                              const EvalOptions& opts) {
    GroupingOutcome out;
    bool satisfied = group_membership(ctx, spec, opts);

    if (st.member && !satisfied) {
        out.left = true;
        out.resigned_positions = st.registry.remove_node(st.self);
        st.member = false;
        st.needs_copy = false;
        st.journal.clear();
        out.messages.push_back(
            Message{MessageKind::LeaveAdvert, st.self, kBroadcastAll, spec.name, 1.0, std::monostate{}});
        return out;
    }

    if (!st.member && satisfied) {
        out.joined = true;
        st.member = true;
        st.joined_at = ctx.now;
        st.registry.group = spec.name;
        st.registry.members[st.self] = MemberRecord{ctx.now, ctx.now};
        // nothing to fetch while we are the only member we know of; the flag
        // self-clears on the next liveness tick if we stay the oldest
        st.needs_copy = true;
        st.journal.clear();
        st.last_refresh = ctx.now;
        out.messages.push_back(Message{MessageKind::JoinAdvert, st.self, kBroadcastAll, spec.name, 1.0,
                                       JoinPayload{ctx.now, true}});
    }
    return out;
}

std::optional<Message> on_join_advert(MembershipState& st, const Message& msg, double now) {
    if (!st.member || msg.from == st.self) return std::nullopt;
    const auto& payload = std::get<JoinPayload>(msg.payload);

    auto it = st.registry.members.find(msg.from);
    if (it == st.registry.members.end()) {
        st.registry.members[msg.from] = MemberRecord{payload.joined_at, now};
        st.observe(ObservedJoin{msg.from, payload.joined_at, now});
    } else {
        // duplicate join: refresh liveness, keep the sender's join time
        it->second.joined_at = payload.joined_at;
        it->second.last_seen = now;
    }

    if (payload.needs_copy && st.registry.oldest_member() == st.self && !st.needs_copy) {
        GroupRegistry snapshot = st.registry;
        return Message{MessageKind::RegistryCopy, st.self, msg.from, st.registry.group,
                       static_cast<double>(snapshot.members.size()), std::move(snapshot)};
    }
    return std::nullopt;
}

std::vector<ElectionTrigger> on_leave_advert(MembershipState& st, const Message& msg, double now) {
    std::vector<ElectionTrigger> triggers;
    if (!st.member || msg.from == st.self) return triggers;

    st.observe(ObservedLeave{msg.from});
    if (!st.registry.is_member(msg.from)) return triggers; // stale advert

    auto held = st.registry.remove_node(msg.from);
    triggers.reserve(held.size());
    for (const auto& [role, position] : held)
        triggers.push_back(
            ElectionTrigger{st.registry.group, role, TriggerKind::Resignation, position, now, {}});
    return triggers;
}

void on_registry_copy(MembershipState& st, const Message& msg) {
    if (!st.member || !st.needs_copy) return; // duplicate or late copy
    const auto& copy = std::get<GroupRegistry>(msg.payload);

    MemberRecord own{st.joined_at, st.registry.members.count(st.self)
                                       ? st.registry.members[st.self].last_seen
                                       : st.joined_at};
    st.registry = copy;
    st.registry.members[st.self] = own;

    for (const auto& obs : st.journal) {
        std::visit(
            [&](const auto& o) {
                using T = std::decay_t<decltype(o)>;
                if constexpr (std::is_same_v<T, ObservedJoin>) {
                    auto& rec = st.registry.members[o.node];
                    rec.joined_at = o.joined_at;
                    rec.last_seen = std::max(rec.last_seen, o.seen_at);
                } else if constexpr (std::is_same_v<T, ObservedLeave>) {
                    st.registry.remove_node(o.node);
                } else if constexpr (std::is_same_v<T, ObservedAssign>) {
                    st.registry.ensure_positions(o.role, o.position + 1);
                    st.registry.assignments[o.role][o.position] = o.value;
                } else if constexpr (std::is_same_v<T, ObservedFs>) {
                    auto it = st.registry.assignments.find(o.role);
                    if (it != st.registry.assignments.end() &&
                        o.position < static_cast<int>(it->second.size()) && it->second[o.position])
                        it->second[o.position]->fs_e = o.fs;
                }
            },
            obs);
    }
    st.journal.clear();
    st.needs_copy = false;
}

void note_traffic(MembershipState& st, const NodeId& from, double now) {
    if (!st.member || from == st.self) return;
    auto it = st.registry.members.find(from);
    if (it != st.registry.members.end()) it->second.last_seen = now;
}

LivenessOutcome liveness_tick(MembershipState& st, const MembershipConfig& cfg, double now) {
    LivenessOutcome out;
    if (!st.member) return out;

    st.registry.members[st.self].last_seen = now;

    // A node that is still the oldest member it knows of a full tick after
    // joining has nothing to fetch; clearing earlier would race the copy.
    if (st.needs_copy && now - st.joined_at >= cfg.tick_period - 1e-9 &&
        st.registry.oldest_member() == st.self) {
        st.needs_copy = false;
        st.journal.clear();
    }

    if (!cfg.liveness || cfg.refresh_ticks <= 0) return out;

    if (now - st.last_refresh >= cfg.refresh_ticks * cfg.tick_period - 1e-9) {
        st.last_refresh = now;
        out.messages.push_back(Message{MessageKind::JoinAdvert, st.self, kBroadcastAll,
                                       st.registry.group, 1.0,
                                       JoinPayload{st.joined_at, st.needs_copy}});
    }

    const double lease = cfg.lease_ticks * cfg.tick_period;
    std::vector<NodeId> stale;
    for (const auto& [node, rec] : st.registry.members) {
        if (node == st.self) continue;
        if (now - rec.last_seen > lease + 1e-9) stale.push_back(node);
    }
    for (const auto& node : stale) {
        auto held = st.registry.remove_node(node);
        out.evicted.push_back(node);
        for (const auto& [role, position] : held)
            out.triggers.push_back(
                ElectionTrigger{st.registry.group, role, TriggerKind::Vacancy, position, now, {}});
    }
    return out;
}

} // namespace sois
