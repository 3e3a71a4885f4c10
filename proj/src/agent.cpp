#include "sois/agent.hpp"

#include <cmath>

namespace sois {

NodeAgent::NodeAgent(NodeId node_id, SimHarness& world)
    : id(std::move(node_id)), spec(world.spec), world_(world) {
    membership.self = id;
    membership.registry.group = spec.name;
}

void NodeAgent::on_start() {
    world_.sim.schedule(world_.sim.now(), TickTimer{id});
}

void NodeAgent::emit_group(Message msg) {
    if (msg.to != kBroadcastAll || msg.kind == MessageKind::JoinAdvert ||
        world_.sim.net().mode == NetMode::Broadcast) {
        world_.sim.send(msg);
        return;
    }
    // unicast mode: group-wide adverts fan out to the known members
    for (const auto& [member, rec] : membership.registry.members) {
        if (member == id) continue;
        Message copy = msg;
        copy.to = member;
        world_.sim.send(copy);
    }
}

void NodeAgent::open_position_election(const ElectionTrigger& trigger) {
    const auto key = std::make_pair(trigger.role, trigger.position);
    auto effective = effective_criteria(spec, trigger.role);
    const NodeContext& ctx = world_.contexts.at(id);
    double own_fs = fitness(ctx, effective, world_.cfg.eval).value;

    ElectionState st;
    st.trigger = trigger;
    st.deadline = trigger.opened_at + world_.cfg.election.bid_window;
    st.bidder = true;
    st.bids[id] = own_fs;

    BidPayload bid{trigger.role, trigger.position, trigger.opened_at, trigger.kind, own_fs};
    if (world_.sim.net().mode == NetMode::Broadcast) {
        world_.sim.send(Message{MessageKind::Bid, id, kBroadcastAll, spec.name, 1.0, bid});
    } else {
        auto eligible = eligible_nodes(spec, trigger.role, membership.registry, world_.contexts,
                                       world_.sim.alive_set(), world_.cfg.eval);
        for (const auto& peer : eligible) {
            if (peer == id) continue;
            world_.sim.send(Message{MessageKind::Bid, id, peer, spec.name, 1.0, bid});
        }
    }

    elections[key] = std::move(st);
    world_.sim.schedule(trigger.opened_at + world_.cfg.election.bid_window,
                        ElectionDeadline{id, trigger.role, trigger.position, trigger.opened_at});
    world_.count_election(trigger.role, trigger.position, trigger.opened_at, trigger.kind);
    world_.sim.trace_line(id, "elect_open", to_string(trigger.kind), trigger.role,
                          std::to_string(trigger.position));
}

void NodeAgent::scan_vacancies() {
    const NodeContext& ctx = world_.contexts.at(id);
    for (const auto& role : spec.roles) {
        if (!role.cardinality.bound()) continue;
        membership.registry.ensure_positions(role.name, role.cardinality.k());
        auto& slots = membership.registry.assignments[role.name];

        bool self_eligible = !membership.registry.holds_role(id, role.name) &&
                             rrc(ctx, effective_criteria(spec, role.name), world_.cfg.eval);
        if (!self_eligible) continue;

        for (int pos = 0; pos < static_cast<int>(slots.size()); ++pos) {
            if (slots[pos]) continue;
            if (elections.count({role.name, pos})) continue;
            open_position_election(ElectionTrigger{spec.name, role.name, TriggerKind::Vacancy, pos,
                                                   world_.sim.now(), {}});
        }
    }
}

void NodeAgent::on_tick() {
    if (departed || leaving) return;
    NodeContext& ctx = world_.contexts.at(id);
    ctx.now = world_.sim.now();

    auto live = liveness_tick(membership, world_.cfg.membership, ctx.now);
    for (auto& msg : live.messages) emit_group(std::move(msg));
    for (const auto& node : live.evicted) world_.sim.trace_line(id, "evict", "-", node);
    // evicted incumbents leave vacant slots; the scan below opens the elections

    auto grouping = grouping_tick(membership, spec, ctx, world_.cfg.eval);
    if (grouping.joined && world_.on_membership_change)
        world_.on_membership_change(id, true, ctx.now);
    if (grouping.left) {
        // Soft transition: keep serving resigned positions until the election
        // result is recorded, bounded by the departure grace.
        if (!grouping.resigned_positions.empty()) {
            for (const auto& held : grouping.resigned_positions) departing_positions.insert(held);
            world_.sim.schedule(ctx.now + world_.cfg.depart_grace, DepartTimer{id});
        }
        if (world_.on_membership_change) world_.on_membership_change(id, false, ctx.now);
    }
    for (auto& msg : grouping.messages) emit_group(std::move(msg));
    if (grouping.left) {
        // drop the replica after the advert went out; a rejoin rebuilds it
        membership.registry.members.clear();
        membership.registry.assignments.clear();
        elections.clear();
        pending_challenge.clear();
    }

    // A newcomer acts on elections only once it holds the registry replica;
    // until then it would open elections for positions that are not vacant.
    if (membership.member && !membership.needs_copy) {
        scan_vacancies();

        if (world_.cfg.drift_updates) {
            for (auto& [role, slots] : membership.registry.assignments) {
                for (int pos = 0; pos < static_cast<int>(slots.size()); ++pos) {
                    if (!slots[pos] || slots[pos]->node != id) continue;
                    auto update = fitness_drift_tick(id, role, pos, membership.registry, spec, ctx,
                                                     world_.cfg.election, world_.cfg.eval);
                    if (update) emit_group(std::move(*update));
                }
            }
        }

        if (world_.cfg.challenges) {
            for (const auto& role : spec.roles) {
                if (pending_challenge.count(role.name)) continue;
                bool election_open = false;
                for (const auto& [key, st] : elections)
                    if (key.first == role.name) election_open = true;
                if (election_open) continue;
                auto request = maybe_challenge(id, role.name, spec, membership.registry, ctx,
                                               world_.cfg.election, world_.cfg.eval);
                if (request) {
                    world_.count_election(role.name,
                                          std::get<ChallengeReqPayload>(request->payload).position,
                                          ctx.now, TriggerKind::Challenge);
                    pending_challenge.insert(role.name);
                    world_.sim.send(*request);
                }
            }
        }
    }

    if (world_.on_agent_tick) world_.on_agent_tick(*this);

    // registry dump for convergence assertions, emitted only on change
    std::string digest;
    if (membership.member) {
        for (const auto& [member, rec] : membership.registry.members) {
            if (!digest.empty()) digest += '+';
            digest += member;
        }
    } else {
        digest = "-";
    }
    if (digest != last_registry_digest_) {
        world_.sim.trace_line(id, "registry", digest);
        last_registry_digest_ = digest;
    }

    world_.sim.schedule(world_.next_aligned_tick(ctx.now), TickTimer{id});
}

void NodeAgent::record_result(const ResultPayload& r) {
    if (departing_positions.erase({r.role, r.position}) && departing_positions.empty() && leaving)
        finish_departure();
    if (!membership.member) return;

    membership.registry.ensure_positions(r.role, r.position + 1);
    membership.registry.assignments[r.role][r.position] = Assignment{r.winner, r.fs_e, r.elected_at};
    membership.observe(ObservedAssign{r.role, r.position,
                                      Assignment{r.winner, r.fs_e, r.elected_at}});
    elections.erase({r.role, r.position});
    pending_challenge.erase(r.role);
}

void NodeAgent::apply_spec_update(const SpecUpdatePayload& u, double decided_at) {
    if (!u.term.empty()) {
        // group-criteria adjustment; the next grouping tick re-evaluates gm
        spec = adjust_group_criteria(spec, CriteriaAdjustment{u.term, u.new_minimum});
        return;
    }
    for (auto& role : spec.roles) {
        if (role.name != u.role) continue;
        role.cardinality.current = u.new_k;
    }
    if (!membership.member) return;

    auto& slots = membership.registry.assignments[u.role];
    int old_k = static_cast<int>(slots.size());
    if (u.new_k > old_k) {
        slots.resize(static_cast<std::size_t>(u.new_k));
        // new slots are vacant; the next tick's scan opens Vacancy elections
    } else if (u.new_k < old_k) {
        // retire the lowest-FS_e filled position; the incumbent resigns with
        // no replacement election since the position itself disappears
        while (static_cast<int>(slots.size()) > u.new_k) {
            int victim = -1;
            for (int i = 0; i < static_cast<int>(slots.size()); ++i) {
                if (!slots[i]) continue;
                if (victim < 0 || slots[i]->fs_e < slots[victim]->fs_e ||
                    (slots[i]->fs_e == slots[victim]->fs_e && slots[i]->node < slots[victim]->node))
                    victim = i;
            }
            if (victim < 0) victim = static_cast<int>(slots.size()) - 1;
            slots.erase(slots.begin() + victim);
            world_.count_election(u.role, -1, decided_at, TriggerKind::Resignation);
        }
        for (auto it = elections.begin(); it != elections.end();) {
            if (it->first.first == u.role && it->first.second >= u.new_k)
                it = elections.erase(it);
            else
                ++it;
        }
    }
}

void NodeAgent::on_deliver(const Message& msg) {
    if (departed) return;
    NodeContext& ctx = world_.contexts.at(id);
    ctx.now = world_.sim.now();
    note_traffic(membership, msg.from, ctx.now);

    switch (msg.kind) {
    case MessageKind::JoinAdvert: {
        auto copy = on_join_advert(membership, msg, ctx.now);
        if (copy) world_.sim.send(*copy);
        break;
    }
    case MessageKind::LeaveAdvert: {
        auto triggers = on_leave_advert(membership, msg, ctx.now);
        for (const auto& trigger : triggers) {
            if (elections.count({trigger.role, trigger.position})) continue;
            bool eligible = membership.member && !membership.needs_copy &&
                            !membership.registry.holds_role(id, trigger.role) &&
                            rrc(ctx, effective_criteria(spec, trigger.role), world_.cfg.eval);
            if (eligible) open_position_election(trigger);
        }
        break;
    }
    case MessageKind::RegistryCopy:
        on_registry_copy(membership, msg);
        break;
    case MessageKind::Bid: {
        if (!membership.member) break;
        const auto& bid = std::get<BidPayload>(msg.payload);
        const double deadline = bid.opened_at + world_.cfg.election.bid_window;
        if (ctx.now > deadline) break; // late bid, window closed
        auto key = std::make_pair(bid.role, bid.position);
        auto it = elections.find(key);
        if (it == elections.end()) {
            // overheard bid for an election this node did not open: collect
            // passively and close at the same deadline
            ElectionState st;
            st.trigger = ElectionTrigger{spec.name, bid.role, bid.trigger, bid.position,
                                         bid.opened_at, {}};
            st.deadline = deadline;
            st.bidder = false;
            it = elections.emplace(key, std::move(st)).first;
            world_.sim.schedule(deadline, ElectionDeadline{id, bid.role, bid.position, bid.opened_at});
            world_.count_election(bid.role, bid.position, bid.opened_at, bid.trigger);
        }
        it->second.bids[msg.from] = bid.fs;
        break;
    }
    case MessageKind::ElectionResult:
        record_result(std::get<ResultPayload>(msg.payload));
        break;
    case MessageKind::ChallengeRequest: {
        if (!membership.member) break;
        auto outcome = on_challenge(id, membership.registry, msg, spec, ctx, world_.cfg.eval);
        world_.sim.trace_line(id, "challenge",
                              outcome.kind == ChallengeOutcome::ChallengerWins     ? "win"
                              : outcome.kind == ChallengeOutcome::IncumbentRetains ? "retain"
                                                                                   : "stale",
                              msg.from);
        for (auto& reply : outcome.messages) emit_group(std::move(reply));
        break;
    }
    case MessageKind::ChallengeResponse: {
        const auto& resp = std::get<ChallengeRespPayload>(msg.payload);
        pending_challenge.erase(resp.role);
        break;
    }
    case MessageKind::FitnessUpdate: {
        const auto& update = std::get<FitnessUpdatePayload>(msg.payload);
        auto it = membership.registry.assignments.find(update.role);
        if (it != membership.registry.assignments.end() &&
            update.position < static_cast<int>(it->second.size()) && it->second[update.position]) {
            it->second[update.position]->fs_e = update.fs;
            membership.observe(ObservedFs{update.role, update.position, update.fs});
        }
        break;
    }
    case MessageKind::SensorReport:
        ++window_samples[std::get<SensorPayload>(msg.payload).sensor];
        if (world_.on_sensor_report) world_.on_sensor_report(*this, msg);
        break;
    case MessageKind::SpecUpdate: {
        const auto& update = std::get<SpecUpdatePayload>(msg.payload);
        apply_spec_update(update, update.decided_at);
        break;
    }
    case MessageKind::ReviewRequest:
        if (world_.on_review_request) world_.on_review_request(*this, msg);
        break;
    case MessageKind::ReviewVerdict:
        if (world_.on_review_verdict) world_.on_review_verdict(*this, msg);
        break;
    case MessageKind::AggregateReport:
    case MessageKind::BackendRequest:
        break;
    }
}

void NodeAgent::on_deadline(const ElectionDeadline& d) {
    if (departed) return;
    auto key = std::make_pair(d.role, d.position);
    auto it = elections.find(key);
    if (it == elections.end() || it->second.trigger.opened_at != d.opened_at) return;

    // keep bids from current members that have not grabbed another position
    // of the role while this window ran
    std::map<NodeId, double> bids;
    for (const auto& [node, fs] : it->second.bids) {
        if (!membership.registry.is_member(node)) continue;
        if (membership.registry.holds_role(node, d.role)) continue;
        bids[node] = fs;
    }
    elections.erase(it);

    auto& slots = membership.registry.assignments[d.role];
    if (d.position >= static_cast<int>(slots.size()) || slots[d.position]) return;

    auto winner = close_election(bids, world_.sim.now());
    if (!winner) return; // no bids survived; retried on the next tick

    slots[d.position] = *winner;
    membership.observe(ObservedAssign{d.role, d.position, *winner});
    world_.sim.trace_line(id, "elect_close", d.role, winner->node);
    if (winner->node == id)
        emit_group(Message{MessageKind::ElectionResult, id, kBroadcastAll, spec.name, 1.0,
                           ResultPayload{d.role, d.position, winner->node, winner->fs_e,
                                         winner->elected_at}});
}

bool NodeAgent::serving(const std::string& role) const {
    if (departed) return false;
    for (const auto& [r, pos] : departing_positions)
        if (r == role) return true;
    if (!membership.member) return false;
    return membership.registry.holds_role(id, role);
}

void NodeAgent::rebind_cardinality(const std::string& role, int new_k) {
    const double now = world_.sim.now();
    SpecUpdatePayload update{role, new_k, now, "", 0.0};
    apply_spec_update(update, now);
    emit_group(Message{MessageKind::SpecUpdate, id, kBroadcastAll, spec.name, 1.0, update});
    world_.sim.trace_line(id, "rebind", role, std::to_string(new_k));
}

void NodeAgent::adjust_criteria(const std::string& term, double new_minimum) {
    const double now = world_.sim.now();
    SpecUpdatePayload update{"", 0, now, term, new_minimum};
    apply_spec_update(update, now);
    emit_group(Message{MessageKind::SpecUpdate, id, kBroadcastAll, spec.name, 1.0, update});
    world_.sim.trace_line(id, "adjust", term, std::to_string(new_minimum));
}

std::optional<NodeId> NodeAgent::current_holder(const std::string& role, int position) const {
    auto it = membership.registry.assignments.find(role);
    if (it == membership.registry.assignments.end()) return std::nullopt;
    if (position >= static_cast<int>(it->second.size()) || !it->second[position]) return std::nullopt;
    return it->second[position]->node;
}

void NodeAgent::finish_departure() {
    if (departed) return;
    departed = true;
    world_.sim.kill(id);
    world_.sim.trace_line(id, "depart");
}

void NodeAgent::on_shutdown() {
    if (departed || leaving) return;
    NodeContext& ctx = world_.contexts.at(id);
    ctx.now = world_.sim.now();

    if (!membership.member) {
        finish_departure();
        return;
    }
    auto held = membership.registry.positions_held(id);
    membership.registry.remove_node(id);
    membership.member = false;
    membership.needs_copy = false;
    leaving = true;
    emit_group(Message{MessageKind::LeaveAdvert, id, kBroadcastAll, spec.name, 1.0, std::monostate{}});
    membership.registry.members.clear();
    membership.registry.assignments.clear();
    elections.clear();
    pending_challenge.clear();
    if (world_.on_membership_change) world_.on_membership_change(id, false, ctx.now);

    if (held.empty()) {
        finish_departure();
        return;
    }
    for (const auto& position : held) departing_positions.insert(position);
    world_.sim.schedule(ctx.now + world_.cfg.depart_grace, DepartTimer{id});
}

void NodeAgent::on_depart() {
    if (leaving) {
        finish_departure();
    } else {
        // RRC-loss leaver: stop serving but stay in the simulation; it may
        // rejoin when its context recovers
        departing_positions.clear();
    }
}

void NodeAgent::on_crash() {
    departed = true;
}

SimHarness::SimHarness(GroupSpec bound_spec, NetConfig net, AgentConfig agent_cfg, std::uint64_t seed)
    : sim(std::move(net), seed), spec(std::move(bound_spec)), cfg(agent_cfg) {
    for (const auto& role : spec.roles)
        if (!role.cardinality.bound())
            throw std::invalid_argument("unbound cardinality parameter '" +
                                        role.cardinality.param_name + "' for role " + role.name);
    if (cfg.election.bid_window <= sim.net().d2d_latency)
        throw std::invalid_argument("bid_window must exceed the D2D latency or no bid can arrive");

    sim.on_deliver = [this](const NodeId& recipient, const Message& msg) {
        auto it = agents.find(recipient);
        if (it != agents.end()) it->second->on_deliver(msg);
    };
    sim.on_tick = [this](const TickTimer& t) { agents.at(t.node)->on_tick(); };
    sim.on_election_deadline = [this](const ElectionDeadline& d) { agents.at(d.node)->on_deadline(d); };
    sim.on_depart = [this](const DepartTimer& d) { agents.at(d.node)->on_depart(); };
    sim.on_node_join = [this](const NodeId& node) { agents.at(node)->on_start(); };
    sim.on_node_crash = [this](const NodeId& node) { agents.at(node)->on_crash(); };
    sim.on_node_shutdown = [this](const NodeId& node) { agents.at(node)->on_shutdown(); };
    sim.on_context_change = [this](const ContextDelta& delta) {
        auto it = contexts.find(delta.node);
        if (it == contexts.end()) return;
        NodeContext& ctx = it->second;
        ctx.now = sim.now();
        for (const auto& [term, value] : delta.booleans) ctx.set_boolean(term, value);
        for (const auto& [term, value] : delta.scalars) ctx.set_scalar(term, value);
        for (const auto& [term, value] : delta.strings) ctx.set_string(term, value);
    };
}

NodeAgent& SimHarness::add_node(const NodeId& id, NodeContext ctx, double join_at) {
    ctx.node_id = id;
    contexts[id] = std::move(ctx);
    auto agent = std::make_unique<NodeAgent>(id, *this);
    NodeAgent& ref = *agent;
    agents[id] = std::move(agent);
    if (join_at <= sim.now()) {
        sim.add_node(id, true);
        ref.on_start();
    } else {
        sim.add_node(id, false);
        sim.schedule(join_at, NodeJoin{id});
    }
    return ref;
}

double SimHarness::next_aligned_tick(double now) const {
    const double period = cfg.membership.tick_period;
    return (std::floor(now / period + 1e-9) + 1.0) * period;
}

void SimHarness::count_election(const std::string& role, int position, double opened_at,
                                TriggerKind kind) {
    if (!election_episodes_.insert({role, position, opened_at}).second) return;
    election_counts[kind]++;
    election_total++;
}

} // namespace sois
