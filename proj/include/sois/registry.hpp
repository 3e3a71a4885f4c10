#pragma once

#include "sois/context.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sois {

struct MemberRecord {
    double joined_at = 0.0;
    double last_seen = 0.0;

    bool operator==(const MemberRecord&) const = default;
};

// One filled role position: the elected node and its fitness score at
// election time (FS_e). FS_e is refreshed by FitnessUpdate adverts and
// challenge outcomes.
struct Assignment {
    NodeId node;
    double fs_e = 0.0;
    double elected_at = 0.0;

    bool operator==(const Assignment&) const = default;
};

// Per-node replica of group membership and role assignments. Positions of a
// role with cardinality k are the k slots of the assignments vector; an empty
// slot is a vacant position.
struct GroupRegistry {
    std::string group;
    std::map<NodeId, MemberRecord> members;
    std::map<std::string, std::vector<std::optional<Assignment>>> assignments;

    bool is_member(const NodeId& node) const { return members.count(node) > 0; }

    // Oldest member under (joined_at, node_id) ordering.
    std::optional<NodeId> oldest_member() const {
        std::optional<NodeId> best;
        double best_t = 0.0;
        for (const auto& [id, rec] : members) {
            if (!best || rec.joined_at < best_t || (rec.joined_at == best_t && id < *best)) {
                best = id;
                best_t = rec.joined_at;
            }
        }
        return best;
    }

    void ensure_positions(const std::string& role, int k) {
        auto& slots = assignments[role];
        if (static_cast<int>(slots.size()) < k) slots.resize(k);
    }

    bool holds_role(const NodeId& node, const std::string& role) const {
        auto it = assignments.find(role);
        if (it == assignments.end()) return false;
        for (const auto& slot : it->second)
            if (slot && slot->node == node) return true;
        return false;
    }

    std::vector<std::pair<std::string, int>> positions_held(const NodeId& node) const {
        std::vector<std::pair<std::string, int>> out;
        for (const auto& [role, slots] : assignments)
            for (int i = 0; i < static_cast<int>(slots.size()); ++i)
                if (slots[i] && slots[i]->node == node) out.emplace_back(role, i);
        return out;
    }

    // Removes the node everywhere; returns the positions it held.
    std::vector<std::pair<std::string, int>> remove_node(const NodeId& node) {
        auto held = positions_held(node);
        for (const auto& [role, pos] : held) assignments[role][pos].reset();
        members.erase(node);
        return held;
    }

    // Membership plus assignment agreement; member clocks are node-local and
    // excluded from the comparison.
    static bool agree(const GroupRegistry& a, const GroupRegistry& b) {
        if (a.members.size() != b.members.size()) return false;
        for (const auto& [id, rec] : a.members)
            if (!b.members.count(id)) return false;
        auto normalized = [](const GroupRegistry& r) {
            std::map<std::string, std::vector<std::optional<Assignment>>> out;
            for (const auto& [role, slots] : r.assignments) {
                bool any = false;
                for (const auto& s : slots)
                    if (s) any = true;
                if (any || !slots.empty()) out[role] = slots;
            }
            return out;
        };
        auto na = normalized(a);
        auto nb = normalized(b);
        if (na.size() != nb.size()) return false;
        for (const auto& [role, slots] : na) {
            auto it = nb.find(role);
            if (it == nb.end() || it->second.size() != slots.size()) return false;
            for (std::size_t i = 0; i < slots.size(); ++i) {
                const auto& x = slots[i];
                const auto& y = it->second[i];
                if (x.has_value() != y.has_value()) return false;
                if (x && (x->node != y->node || x->fs_e != y->fs_e)) return false;
            }
        }
        return true;
    }
};

} // namespace sois
