#pragma once

#include "sois/agent.hpp"
#include "sois/scenarios.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace sois::test {

inline std::string data_path(const std::string& name) {
    const char* dir = std::getenv("SOISIM_DATA");
    return std::string(dir ? dir : "data") + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Single-role group: everyone with SCORE >= min_score is eligible; SCORE is
// also the comparative term, so fitness == SCORE / 100.
inline GroupSpec single_role_spec(int k, double min_score = 1.0) {
    GroupSpec spec;
    spec.name = "g";
    RoleSpec role;
    role.name = "worker";
    role.cardinality = CardinalitySpec::fixed(k);
    Criterion c;
    c.term = "SCORE";
    c.value_type = ValueType::Float;
    c.minimum = min_score;
    role.criteria.push_back(c);
    spec.roles.push_back(role);
    return spec;
}

inline NodeContext score_context(const NodeId& id, double score) {
    NodeContext ctx;
    ctx.node_id = id;
    ctx.set_scalar("SCORE", score);
    return ctx;
}

inline AgentConfig default_agent_config(bool liveness = true) {
    AgentConfig cfg;
    cfg.membership.liveness = liveness;
    return cfg;
}

// Harness over the single-role spec with the given per-node scores.
struct MiniWorld {
    MiniWorld(int k, const std::vector<double>& scores, NetMode mode, std::uint64_t seed,
              bool liveness = true, double delta = 1.2)
        : world(single_role_spec(k), make_net(mode), make_cfg(liveness, delta), seed) {
        for (std::size_t i = 0; i < scores.size(); ++i) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "n%02zu", i + 1);
            world.add_node(buf, score_context(buf, scores[i]));
        }
    }

    static NetConfig make_net(NetMode mode) {
        NetConfig net;
        net.mode = mode;
        return net;
    }

    static AgentConfig make_cfg(bool liveness, double delta) {
        AgentConfig cfg;
        cfg.membership.liveness = liveness;
        cfg.election.delta = delta;
        return cfg;
    }

    NodeId node(int i) const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "n%02d", i + 1);
        return buf;
    }

    SimHarness world;
};

// All alive members hold set-equal registries and identical assignments.
inline bool registries_agree(SimHarness& world) {
    const GroupRegistry* reference = nullptr;
    for (const auto& [id, agent] : world.agents) {
        if (!world.sim.alive(id) || !agent->membership.member) continue;
        if (!reference) {
            reference = &agent->membership.registry;
            continue;
        }
        if (!GroupRegistry::agree(*reference, agent->membership.registry)) return false;
    }
    return true;
}

} // namespace sois::test
