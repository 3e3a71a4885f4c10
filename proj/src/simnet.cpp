#include "sois/simnet.hpp"

#include <cstdio>

namespace sois {

std::string_view to_string(MessageKind k) {
    switch (k) {
    case MessageKind::JoinAdvert: return "JoinAdvert";
    case MessageKind::LeaveAdvert: return "LeaveAdvert";
    case MessageKind::RegistryCopy: return "RegistryCopy";
    case MessageKind::Bid: return "Bid";
    case MessageKind::ElectionResult: return "ElectionResult";
    case MessageKind::ChallengeRequest: return "ChallengeRequest";
    case MessageKind::ChallengeResponse: return "ChallengeResponse";
    case MessageKind::FitnessUpdate: return "FitnessUpdate";
    case MessageKind::SensorReport: return "SensorReport";
    case MessageKind::AggregateReport: return "AggregateReport";
    case MessageKind::BackendRequest: return "BackendRequest";
    case MessageKind::ReviewRequest: return "ReviewRequest";
    case MessageKind::ReviewVerdict: return "ReviewVerdict";
    case MessageKind::SpecUpdate: return "SpecUpdate";
    }
    return "?";
}

std::string_view to_string(NetMode m) {
    return m == NetMode::Unicast ? "unicast" : "broadcast";
}

std::string_view to_string(TriggerKind k) {
    switch (k) {
    case TriggerKind::Vacancy: return "Vacancy";
    case TriggerKind::Resignation: return "Resignation";
    case TriggerKind::Challenge: return "Challenge";
    }
    return "?";
}

Simulator::Simulator(NetConfig net, std::uint64_t seed) : net_(std::move(net)), rng_(seed) {}

void Simulator::add_node(const NodeId& node, bool alive) {
    known_.insert(node);
    if (alive) alive_.insert(node);
}

void Simulator::schedule(double fire_at, EventPayload payload) {
    if (fire_at < now_) throw SchedulingInPast(fire_at, now_);
    queue_.push(SimEvent{fire_at, next_seq_++, std::move(payload)});
}

int Simulator::partition_cell(const NodeId& node, double t) const {
    for (std::size_t i = 0; i < net_.partitions.size(); ++i) {
        const auto& interval = net_.partitions[i];
        if (t < interval.begin || t >= interval.end) continue;
        for (std::size_t c = 0; c < interval.cells.size(); ++c)
            if (interval.cells[c].count(node)) return static_cast<int>(i * 1000 + c);
        return static_cast<int>(i * 1000) - 1; // unlisted nodes share the remainder cell
    }
    return 0;
}

void Simulator::trace_line(const NodeId& node, std::string_view event, std::string_view msg_kind,
                           const NodeId& from, const NodeId& to) {
    if (!trace_) return;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", now_);
    *trace_ += buf;
    *trace_ += ' ';
    *trace_ += node;
    *trace_ += ' ';
    *trace_ += event;
    *trace_ += ' ';
    *trace_ += msg_kind;
    *trace_ += ' ';
    *trace_ += from;
    *trace_ += ' ';
    *trace_ += to;
    *trace_ += '\n';
}

void Simulator::send(const Message& msg) {
    if (!alive(msg.from)) throw SenderDead(msg.from);
    const int kind = static_cast<int>(msg.kind);
    const int sender_cell = partition_cell(msg.from, now_);

    trace_line(msg.from, "send", to_string(msg.kind), msg.from, msg.to);

    if (msg.kind == MessageKind::BackendRequest) {
        counters_.transmitted[kind][static_cast<int>(NetMode::Unicast)]++;
        counters_.attempted[kind]++;
        ++backend_draws_;
        bool ok = rng_.chance(net_.reachability(msg.from, now_));
        if (ok) {
            counters_.delivered[kind]++;
            trace_line(msg.from, "backend_ok", to_string(msg.kind), msg.from, kBackend);
        } else {
            counters_.lost[kind]++;
            trace_line(msg.from, "backend_lost", to_string(msg.kind), msg.from, kBackend);
        }
        return;
    }

    if (msg.to == kBroadcastAll) {
        std::vector<NodeId> targets;
        for (const auto& node : alive_)
            if (node != msg.from && partition_cell(node, now_) == sender_cell) targets.push_back(node);

        if (net_.mode == NetMode::Broadcast) {
            counters_.transmitted[kind][static_cast<int>(NetMode::Broadcast)]++;
        } else {
            counters_.transmitted[kind][static_cast<int>(NetMode::Unicast)] += targets.size();
        }
        for (const auto& node : targets) {
            counters_.attempted[kind]++;
            schedule(now_ + net_.d2d_latency, MessageDelivery{msg, node, sender_cell});
        }
        return;
    }

    counters_.transmitted[kind][static_cast<int>(NetMode::Unicast)]++;
    counters_.attempted[kind]++;
    schedule(now_ + net_.d2d_latency, MessageDelivery{msg, msg.to, sender_cell});
}

void Simulator::deliver(const MessageDelivery& d) {
    const int kind = static_cast<int>(d.msg.kind);
    if (!alive(d.recipient) || partition_cell(d.recipient, now_) != d.sender_cell) {
        counters_.lost[kind]++;
        trace_line(d.recipient, "lost", to_string(d.msg.kind), d.msg.from, d.msg.to);
        return;
    }
    counters_.delivered[kind]++;
    trace_line(d.recipient, "deliver", to_string(d.msg.kind), d.msg.from, d.msg.to);
    if (on_deliver) on_deliver(d.recipient, d.msg);
}

void Simulator::dispatch(const SimEvent& ev) {
    std::visit(
        [&](const auto& payload) {
            using T = std::decay_t<decltype(payload)>;
            if constexpr (std::is_same_v<T, MessageDelivery>) {
                deliver(payload);
            } else if constexpr (std::is_same_v<T, TickTimer>) {
                if (!alive(payload.node)) return;
                trace_line(payload.node, "tick");
                if (on_tick) on_tick(payload);
            } else if constexpr (std::is_same_v<T, ElectionDeadline>) {
                if (!alive(payload.node)) return;
                if (on_election_deadline) on_election_deadline(payload);
            } else if constexpr (std::is_same_v<T, WindowTimer>) {
                if (on_window) on_window(payload);
            } else if constexpr (std::is_same_v<T, ReviewRoundTimer>) {
                if (on_review_round) on_review_round(payload);
            } else if constexpr (std::is_same_v<T, DepartTimer>) {
                if (on_depart) on_depart(payload);
            } else if constexpr (std::is_same_v<T, ContextDelta>) {
                trace_line(payload.node, "context");
                if (on_context_change) on_context_change(payload);
            } else if constexpr (std::is_same_v<T, NodeJoin>) {
                known_.insert(payload.node);
                alive_.insert(payload.node);
                trace_line(payload.node, "node_join");
                if (on_node_join) on_node_join(payload.node);
            } else if constexpr (std::is_same_v<T, NodeCrash>) {
                alive_.erase(payload.node);
                trace_line(payload.node, "node_crash");
                if (on_node_crash) on_node_crash(payload.node);
            } else if constexpr (std::is_same_v<T, NodeShutdown>) {
                trace_line(payload.node, "node_shutdown");
                if (on_node_shutdown) on_node_shutdown(payload.node);
            }
        },
        ev.payload);
}

MessageCounters Simulator::run_until(double t_end) {
    while (!queue_.empty() && queue_.top().fire_at <= t_end) {
        SimEvent ev = queue_.top();
        queue_.pop();
        now_ = ev.fire_at;
        dispatch(ev);
    }
    if (t_end > now_) now_ = t_end;
    return counters_;
}

} // namespace sois
