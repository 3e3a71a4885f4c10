#include "sois/scenarios.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sois {

const char* const kMusicStreamingXml = R"(<group name="music-streaming">

  <role name="streamer" cardinality="1">
    <criteria type="boolean" term="INTERNET" value="TRUE" />
    <criteria type="boolean" term="BLUETOOTH" value="TRUE" />
    <criteria type="float" term="BATTERY_LEVEL" minimum="20" />
  </role>
</group>
)";

const char* const kBusMonitoringXml = R"(<group name="bus-monitoring">

  <criteria type="float" term="BATTERY_LEVEL" minimum="15"/>

  <role name="geolocator" cardinality="k1">
    <criteria type="boolean" term="GPS" value="TRUE" />
    <criteria type="float" term="BATTERY_LEVEL" minimum="30" />
  </role>

  <role name="accelerometer" cardinality="k2">
    <criteria type="boolean" term="ACCELEROMETER" value="TRUE" />
  </role>

  <role name="aggregator" cardinality="1">
    <criteria type="boolean" term="INTERNET" value="TRUE" />
  </role>
</group>
)";

const char* const kBusRideXml = R"(<group name="bus-monitoring">

  <criteria type="string" term="BSSID" pattern="COMPANY_NAME" />
  <criteria type="float" term="WIFI_SIGNAL" minimum="50" />
  <criteria type="boolean" term="MOOVING" value="TRUE" after="300" />

  <criteria type="float" term="BATTERY_LEVEL" minimum="15"/>

  <role name="geolocator" cardinality="k1">
    <criteria type="boolean" term="GPS" value="TRUE" />
    <criteria type="float" term="BATTERY_LEVEL" minimum="30" />
  </role>

  <role name="accelerometer" cardinality="k2">
    <criteria type="boolean" term="ACCELEROMETER" value="TRUE" />
  </role>

  <role name="aggregator" cardinality="1">
    <criteria type="boolean" term="INTERNET" value="TRUE" />
  </role>
</group>
)";

std::string_view to_string(ScenarioMode m) {
    return m == ScenarioMode::ClientServer ? "client_server" : "sois";
}

std::string_view to_string(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::NodeCount: return "node_count";
    case SweepAxis::Battery: return "battery";
    case SweepAxis::InternetType: return "internet_type";
    case SweepAxis::Gps: return "gps";
    case SweepAxis::Delta: return "delta";
    }
    return "?";
}

std::optional<SweepAxis> sweep_axis_from(const std::string& name) {
    if (name == "node_count") return SweepAxis::NodeCount;
    if (name == "battery") return SweepAxis::Battery;
    if (name == "internet_type") return SweepAxis::InternetType;
    if (name == "gps") return SweepAxis::Gps;
    if (name == "delta") return SweepAxis::Delta;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// configuration

namespace {

using nlohmann::json;

ScenarioMode parse_mode(const std::string& s, const std::string& key) {
    if (s == "client_server" || s == "clientserver" || s == "cs") return ScenarioMode::ClientServer;
    if (s == "sois") return ScenarioMode::Sois;
    throw ConfigError(key, "expected sois or client_server, got '" + s + "'");
}

NetMode parse_net_mode(const std::string& s, const std::string& key) {
    if (s == "unicast") return NetMode::Unicast;
    if (s == "broadcast") return NetMode::Broadcast;
    throw ConfigError(key, "expected unicast or broadcast, got '" + s + "'");
}

NodeTraits parse_node(const json& j, const std::string& key) {
    NodeTraits t;
    for (auto& [k, v] : j.items()) {
        if (k == "id") t.id = v.get<std::string>();
        else if (k == "battery") t.battery = v.get<double>();
        else if (k == "internet") t.internet = v.get<std::string>();
        else if (k == "gps_signal") t.gps_signal = v.get<double>();
        else if (k == "has_gps") t.has_gps = v.get<bool>();
        else if (k == "has_accelerometer") t.has_accelerometer = v.get<bool>();
        else if (k == "reachability") t.reachability = v.get<double>();
        else if (k == "battery_drain") t.battery_drain = v.get<double>();
        else if (k == "join_at") t.join_at = v.get<double>();
        else if (k == "crash_at") t.crash_at = v.get<double>();
        else if (k == "shutdown_at") t.shutdown_at = v.get<double>();
        else if (k == "bssid") t.bssid = v.get<std::string>();
        else if (k == "wifi_signal") t.wifi_signal = v.get<double>();
        else if (k == "moving_at") t.moving_at = v.get<double>();
        else throw ConfigError(key + "." + k, "unknown node key");
    }
    return t;
}

} // namespace

ScenarioConfig parse_scenario_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<document>", e.what());
    }

    ScenarioConfig cfg;
    for (auto& [key, value] : j.items()) {
        try {
            if (key == "scenario") cfg.scenario = value.get<std::string>();
            else if (key == "mode") cfg.mode = parse_mode(value.get<std::string>(), key);
            else if (key == "node_count") cfg.node_count = value.get<int>();
            else if (key == "duration") cfg.duration = value.get<double>();
            else if (key == "sensing_period") cfg.sensing_period = value.get<double>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "net") {
                for (auto& [nk, nv] : value.items()) {
                    if (nk == "mode") cfg.net.mode = parse_net_mode(nv.get<std::string>(), "net.mode");
                    else if (nk == "d2d_latency") cfg.net.d2d_latency = nv.get<double>();
                    else if (nk == "backend_latency") cfg.net.backend_latency = nv.get<double>();
                    else throw ConfigError("net." + nk, "unknown key");
                }
            } else if (key == "k_bindings") {
                cfg.k_bindings.clear();
                for (auto& [bk, bv] : value.items()) cfg.k_bindings[bk] = bv.get<int>();
            } else if (key == "election") {
                for (auto& [ek, ev] : value.items()) {
                    if (ek == "delta") cfg.election.delta = ev.get<double>();
                    else if (ek == "bid_window") cfg.election.bid_window = ev.get<double>();
                    else throw ConfigError("election." + ek, "unknown key");
                }
            } else if (key == "membership") {
                for (auto& [mk, mv] : value.items()) {
                    if (mk == "tick_period") cfg.membership.tick_period = mv.get<double>();
                    else if (mk == "lease_ticks") cfg.membership.lease_ticks = mv.get<int>();
                    else if (mk == "refresh_ticks") cfg.membership.refresh_ticks = mv.get<int>();
                    else if (mk == "liveness") cfg.membership.liveness = mv.get<bool>();
                    else throw ConfigError("membership." + mk, "unknown key");
                }
            } else if (key == "battery") {
                cfg.battery_min = value.value("min", cfg.battery_min);
                cfg.battery_max = value.value("max", cfg.battery_max);
            } else if (key == "gps_signal") {
                cfg.gps_signal_min = value.value("min", cfg.gps_signal_min);
                cfg.gps_signal_max = value.value("max", cfg.gps_signal_max);
            } else if (key == "reachability") {
                cfg.wifi_reachability = value.value("wifi", cfg.wifi_reachability);
                cfg.cellular_reachability = value.value("cellular", cfg.cellular_reachability);
            } else if (key == "gps_active_cutoff") {
                cfg.gps_active_cutoff = value.get<double>();
            } else if (key == "review") {
                for (auto& [rk, rv] : value.items()) {
                    if (rk == "rounds") cfg.review.rounds = rv.get<int>();
                    else if (rk == "cheat_rate") cfg.review.cheat_rate = rv.get<double>();
                    else if (rk == "accuracy") cfg.review.accuracy = rv.get<double>();
                    else throw ConfigError("review." + rk, "unknown key");
                }
            } else if (key == "adapt") {
                for (auto& [ak, av] : value.items()) {
                    if (ak == "enabled") cfg.adapt.enabled = av.get<bool>();
                    else if (ak == "role") cfg.adapt.role = av.get<std::string>();
                    else if (ak == "target_samples") cfg.adapt.target_samples = av.get<int>();
                    else if (ak == "k_min") cfg.adapt.k_min = av.get<int>();
                    else if (ak == "k_max") cfg.adapt.k_max = av.get<int>();
                    else throw ConfigError("adapt." + ak, "unknown key");
                }
            } else if (key == "spec_path") {
                cfg.spec_path = value.get<std::string>();
            } else if (key == "nodes") {
                int index = 0;
                for (const auto& node : value)
                    cfg.nodes.push_back(parse_node(node, "nodes[" + std::to_string(index++) + "]"));
            } else {
                throw ConfigError(key, "unknown key");
            }
        } catch (const json::exception& e) {
            throw ConfigError(key, e.what());
        }
    }
    if (cfg.node_count < 1) throw ConfigError("node_count", "must be >= 1");
    if (cfg.sensing_period <= 0) throw ConfigError("sensing_period", "must be > 0");
    return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_config(buf.str());
}

void apply_override(ScenarioConfig& cfg, const std::string& key_eq_value) {
    auto eq = key_eq_value.find('=');
    if (eq == std::string::npos)
        throw ConfigError(key_eq_value, "expected key=value");
    const std::string key = key_eq_value.substr(0, eq);
    const std::string value = key_eq_value.substr(eq + 1);

    auto as_double = [&] {
        try {
            return std::stod(value);
        } catch (...) {
            throw ConfigError(key, "expected a number, got '" + value + "'");
        }
    };
    auto as_int = [&] {
        try {
            return std::stoi(value);
        } catch (...) {
            throw ConfigError(key, "expected an integer, got '" + value + "'");
        }
    };
    auto as_bool = [&] {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        throw ConfigError(key, "expected true/false, got '" + value + "'");
    };

    if (key == "scenario") cfg.scenario = value;
    else if (key == "mode") cfg.mode = parse_mode(value, key);
    else if (key == "node_count") cfg.node_count = as_int();
    else if (key == "duration") cfg.duration = as_double();
    else if (key == "sensing_period") cfg.sensing_period = as_double();
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "net.mode") cfg.net.mode = parse_net_mode(value, key);
    else if (key == "net.d2d_latency") cfg.net.d2d_latency = as_double();
    else if (key == "net.backend_latency") cfg.net.backend_latency = as_double();
    else if (key == "election.delta") cfg.election.delta = as_double();
    else if (key == "election.bid_window") cfg.election.bid_window = as_double();
    else if (key == "membership.tick_period") cfg.membership.tick_period = as_double();
    else if (key == "membership.lease_ticks") cfg.membership.lease_ticks = as_int();
    else if (key == "membership.refresh_ticks") cfg.membership.refresh_ticks = as_int();
    else if (key == "membership.liveness") cfg.membership.liveness = as_bool();
    else if (key == "battery.min") cfg.battery_min = as_double();
    else if (key == "battery.max") cfg.battery_max = as_double();
    else if (key == "gps_signal.min") cfg.gps_signal_min = as_double();
    else if (key == "gps_signal.max") cfg.gps_signal_max = as_double();
    else if (key == "reachability.wifi") cfg.wifi_reachability = as_double();
    else if (key == "reachability.cellular") cfg.cellular_reachability = as_double();
    else if (key == "gps_active_cutoff") cfg.gps_active_cutoff = as_double();
    else if (key == "review.rounds") cfg.review.rounds = as_int();
    else if (key == "review.cheat_rate") cfg.review.cheat_rate = as_double();
    else if (key == "review.accuracy") cfg.review.accuracy = as_double();
    else if (key == "adapt.enabled") cfg.adapt.enabled = as_bool();
    else if (key == "adapt.role") cfg.adapt.role = value;
    else if (key == "adapt.target_samples") cfg.adapt.target_samples = as_int();
    else if (key == "adapt.k_min") cfg.adapt.k_min = as_int();
    else if (key == "adapt.k_max") cfg.adapt.k_max = as_int();
    else if (key == "spec_path") cfg.spec_path = value;
    else if (key.rfind("k_bindings.", 0) == 0) cfg.k_bindings[key.substr(11)] = as_int();
    else throw ConfigError(key, "unknown override key");
}

std::vector<NodeTraits> materialize_nodes(const ScenarioConfig& cfg) {
    std::vector<NodeTraits> nodes = cfg.nodes;
    if (nodes.empty()) {
        Rng rng(seed_mix(cfg.seed, 0x6e0de5));
        for (int i = 0; i < cfg.node_count; ++i) {
            NodeTraits t;
            t.battery = rng.uniform(cfg.battery_min, cfg.battery_max);
            t.internet = rng.chance(0.5) ? "wifi" : "cellular";
            t.gps_signal = rng.uniform(cfg.gps_signal_min, cfg.gps_signal_max);
            nodes.push_back(std::move(t));
        }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id.empty()) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "n%02zu", i + 1);
            nodes[i].id = buf;
        }
    }
    return nodes;
}

GroupSpec scenario_spec(const ScenarioConfig& cfg) {
    GroupSpec spec;
    if (!cfg.spec_xml.empty())
        spec = parse_spec(cfg.spec_xml);
    else if (!cfg.spec_path.empty())
        spec = parse_spec_file(cfg.spec_path);
    else if (cfg.scenario == "bus_ride")
        spec = parse_spec(kBusRideXml);
    else
        spec = parse_spec(kBusMonitoringXml);
    return bind_cardinality(spec, cfg.k_bindings);
}

// ---------------------------------------------------------------------------
// shared scenario plumbing

namespace {

double node_reachability(const NodeTraits& t, const ScenarioConfig& cfg) {
    if (t.reachability) return *t.reachability;
    if (t.internet == "wifi") return cfg.wifi_reachability;
    if (t.internet == "cellular") return cfg.cellular_reachability;
    return 0.0;
}

NodeContext make_context(const NodeTraits& t, const ScenarioConfig& cfg) {
    NodeContext ctx;
    ctx.node_id = t.id;
    ctx.set_boolean("GPS", t.has_gps);
    ctx.set_boolean("ACCELEROMETER", t.has_accelerometer);
    ctx.set_boolean("INTERNET", t.internet != "none");
    ctx.set_scalar("BATTERY_LEVEL", t.battery);
    ctx.set_scalar("GPS_SIGNAL", t.gps_signal);
    if (cfg.scenario == "bus_ride") {
        ctx.set_string("BSSID", t.bssid);
        ctx.set_scalar("WIFI_SIGNAL", t.wifi_signal);
        ctx.set_boolean("MOOVING", false);
    }
    return ctx;
}

int sensing_windows(const ScenarioConfig& cfg) {
    return static_cast<int>(std::floor(cfg.duration / cfg.sensing_period + 1e-9));
}

// Battery drain as explicit context-change events at each grouping tick.
void schedule_battery_drain(SimHarness& world, const NodeTraits& t, const ScenarioConfig& cfg) {
    if (t.battery_drain <= 0.0) return;
    const double period = cfg.membership.tick_period;
    for (double at = t.join_at + period; at <= cfg.duration; at += period) {
        double level = std::max(0.0, t.battery - t.battery_drain * (at - t.join_at));
        ContextDelta delta;
        delta.node = t.id;
        delta.scalars["BATTERY_LEVEL"] = level;
        world.context_change_at(at, std::move(delta));
    }
}

void schedule_churn(SimHarness& world, const NodeTraits& t) {
    if (t.crash_at) world.crash_at(t.id, *t.crash_at);
    if (t.shutdown_at) world.shutdown_at(t.id, *t.shutdown_at);
}

bool gps_active(const NodeTraits& t, const ScenarioConfig& cfg) {
    return t.has_gps && t.gps_signal >= cfg.gps_active_cutoff;
}

MetricsReport base_report(const ScenarioConfig& cfg) {
    MetricsReport report;
    report.scenario = cfg.scenario;
    report.seed = cfg.seed;
    report.mode = std::string(to_string(cfg.mode));
    report.duration = cfg.duration;
    report.windows = sensing_windows(cfg);
    return report;
}

} // namespace

// ---------------------------------------------------------------------------
// client-server baseline: every node sends each sensor reading upstream

MetricsReport run_client_server(const ScenarioConfig& cfg, std::string* trace) {
    MetricsReport report = base_report(cfg);
    report.mode = "client_server";

    auto nodes = materialize_nodes(cfg);
    NetConfig net = cfg.net;
    for (const auto& t : nodes) net.backend_reachability[t.id] = node_reachability(t, cfg);

    Simulator sim(net, seed_mix(cfg.seed, 0xc5));
    if (trace) sim.set_trace(trace);
    std::map<NodeId, NodeTraits> traits;
    for (const auto& t : nodes) {
        traits[t.id] = t;
        if (t.join_at <= 0.0)
            sim.add_node(t.id, true);
        else {
            sim.add_node(t.id, false);
            sim.schedule(t.join_at, NodeJoin{t.id});
        }
        if (t.crash_at) sim.schedule(*t.crash_at, NodeCrash{t.id});
        if (t.shutdown_at) sim.schedule(*t.shutdown_at, NodeShutdown{t.id});
    }
    sim.on_node_shutdown = [&](const NodeId& node) { sim.kill(node); };

    sim.on_window = [&](const WindowTimer& w) {
        for (const auto& [id, t] : traits) {
            if (!sim.alive(id)) continue;
            int readings = (gps_active(t, cfg) ? 1 : 0) + (t.has_accelerometer ? 1 : 0);
            for (int r = 0; r < readings; ++r)
                sim.send(Message{MessageKind::BackendRequest, id, kBackend, "", 1.0,
                                 SensorPayload{r == 0 && gps_active(t, cfg) ? "gps" : "accelerometer",
                                               w.index, 0.0}});
        }
    };
    const int windows = sensing_windows(cfg);
    for (int w = 1; w <= windows; ++w) sim.schedule(w * cfg.sensing_period, WindowTimer{w});

    report.counters = sim.run_until(cfg.duration);
    report.m1_requests = report.counters.tx(MessageKind::BackendRequest);
    report.m2_failed = report.counters.dropped(MessageKind::BackendRequest);
    return report;
}

// ---------------------------------------------------------------------------
// SOIS mode: membership + elections; sensing roles feed the aggregator, the
// aggregator batches one upstream request per window

MetricsReport run_sois(const ScenarioConfig& cfg, const GroupSpec& bound_spec, std::string* trace,
                       const std::function<void(SimHarness&)>& inspect) {
    if (cfg.mode != ScenarioMode::Sois)
        throw ConfigError("mode", "run_sois requires mode=sois");
    if (!bound_spec.find_role("aggregator"))
        throw ConfigError("spec", "bus scenario needs an 'aggregator' role in the spec");

    MetricsReport report = base_report(cfg);
    auto nodes = materialize_nodes(cfg);

    NetConfig net = cfg.net;
    for (const auto& t : nodes) net.backend_reachability[t.id] = node_reachability(t, cfg);

    AgentConfig acfg;
    acfg.membership = cfg.membership;
    acfg.election = cfg.election;

    SimHarness world(bound_spec, net, acfg, seed_mix(cfg.seed, 0x5015));
    if (trace) world.sim.set_trace(trace);

    std::map<NodeId, NodeTraits> traits;
    for (const auto& t : nodes) {
        traits[t.id] = t;
        world.add_node(t.id, make_context(t, cfg), t.join_at);
        schedule_battery_drain(world, t, cfg);
        schedule_churn(world, t);
    }

    CardinalityController controller{cfg.adapt.role, cfg.adapt.target_samples, cfg.sensing_period,
                                     cfg.adapt.k_min, cfg.adapt.k_max, 1};
    if (cfg.adapt.enabled) {
        const RoleSpec* adapted = bound_spec.find_role(cfg.adapt.role);
        if (!adapted) throw ConfigError("adapt.role", "role not present in the spec");
        controller.current_k = adapted->cardinality.k();
    }

    const std::vector<std::string> sensing_roles = {"geolocator", "accelerometer"};
    int adapt_cooldown = 0; // skip one evaluation after actuating; reports lag a window
    world.sim.on_window = [&](const WindowTimer& w) {
        // aggregator uptime accounting happens before any emission this window
        std::vector<NodeId> serving_aggregators;
        for (const auto& [id, agent] : world.agents)
            if (world.sim.alive(id) && agent->serving("aggregator")) serving_aggregators.push_back(id);
        if (!serving_aggregators.empty()) report.aggregator_windows++;

        for (const auto& role : sensing_roles) {
            if (!world.spec.find_role(role)) continue;
            for (const auto& [id, agent] : world.agents) {
                if (!world.sim.alive(id) || !agent->serving(role)) continue;
                if (role == "geolocator" && !gps_active(traits.at(id), cfg)) continue;
                auto target = agent->current_holder("aggregator");
                if (!target || *target == id) {
                    if (target && *target == id) agent->window_samples[role]++; // local hand-off
                    continue;
                }
                world.sim.send(Message{MessageKind::SensorReport, id, *target, world.spec.name, 1.0,
                                       SensorPayload{role, w.index, 0.0}});
            }
        }

        for (const auto& id : serving_aggregators) {
            auto& agent = *world.agents.at(id);
            long samples = 0;
            for (const auto& [role, count] : agent.window_samples) samples += count;
            world.sim.send(Message{MessageKind::BackendRequest, id, kBackend, world.spec.name,
                                   1.0 + static_cast<double>(samples),
                                   SensorPayload{"aggregate", w.index, 0.0}});
            if (cfg.adapt.enabled && w.index >= 2) {
                if (adapt_cooldown > 0) {
                    --adapt_cooldown;
                } else {
                    auto new_k = cardinality_feedback(controller,
                                                      agent.window_samples[cfg.adapt.role]);
                    if (new_k) {
                        agent.rebind_cardinality(cfg.adapt.role, *new_k);
                        adapt_cooldown = 1;
                    }
                }
            }
        }
        for (const auto& [id, agent] : world.agents) agent->window_samples.clear();
    };

    const int windows = sensing_windows(cfg);
    for (int w = 1; w <= windows; ++w) world.sim.schedule(w * cfg.sensing_period, WindowTimer{w});

    report.counters = world.run_until(cfg.duration);
    report.m1_requests = report.counters.tx(MessageKind::BackendRequest);
    report.m2_failed = report.counters.dropped(MessageKind::BackendRequest);
    report.elections = world.election_counts;
    report.election_total = world.election_total;
    if (inspect) inspect(world);
    return report;
}

// ---------------------------------------------------------------------------

std::vector<MembershipEvent> run_bus_ride_detection(const ScenarioConfig& cfg,
                                                    const GroupSpec& bound_spec,
                                                    std::string* trace) {
    auto nodes = materialize_nodes(cfg);
    NetConfig net = cfg.net;

    AgentConfig acfg;
    acfg.membership = cfg.membership;
    acfg.election = cfg.election;

    SimHarness world(bound_spec, net, acfg, seed_mix(cfg.seed, 0xb5));
    if (trace) world.sim.set_trace(trace);

    std::vector<MembershipEvent> events;
    world.on_membership_change = [&](const NodeId& node, bool joined, double at) {
        events.push_back(MembershipEvent{node, joined, at});
        world.sim.trace_line(node, joined ? "group_join" : "group_leave");
    };

    for (const auto& t : nodes) {
        world.add_node(t.id, make_context(t, cfg), t.join_at);
        schedule_battery_drain(world, t, cfg);
        schedule_churn(world, t);
        if (t.moving_at) {
            ContextDelta delta;
            delta.node = t.id;
            delta.booleans["MOOVING"] = true;
            world.context_change_at(*t.moving_at, std::move(delta));
        }
    }

    world.run_until(cfg.duration);
    return events;
}

// ---------------------------------------------------------------------------

MetricsReport run_review_scenario(const ScenarioConfig& cfg, int rounds, double cheat_rate,
                                  double accuracy, std::string* trace) {
    if (cfg.node_count < 2) throw ConfigError("node_count", "review scenario needs >= 2 nodes");

    MetricsReport report = base_report(cfg);
    report.scenario = "review";

    GroupSpec spec = parse_spec(R"(<group name="mmg"><role name="player" cardinality="1"/></group>)");

    AgentConfig acfg;
    acfg.membership = cfg.membership;
    acfg.election = cfg.election;

    SimHarness world(spec, cfg.net, acfg, seed_mix(cfg.seed, 0x4ee));
    if (trace) world.sim.set_trace(trace);

    auto nodes = materialize_nodes(cfg);
    for (const auto& t : nodes) {
        world.add_node(t.id, make_context(t, cfg), t.join_at);
        schedule_churn(world, t);
    }

    ReviewStats stats;
    stats.detection_accuracy = accuracy;
    Rng cheat_rng(seed_mix(cfg.seed, 0xc43a7));
    Rng detect_rng(seed_mix(cfg.seed, 0xd47ec7));

    world.on_review_request = [&](NodeAgent& reviewer, const Message& msg) {
        const auto& payload = std::get<ReviewPayload>(msg.payload);
        Verdict verdict = review_update(reviewer.id, payload.valid, stats, detect_rng);
        if (verdict == Verdict::Reject)
            world.sim.send(Message{MessageKind::ReviewVerdict, reviewer.id, msg.from, "mmg", 1.0,
                                   ReviewPayload{payload.round, payload.valid, true}});
    };

    // rounds start after membership has converged
    const double t0 = 5.0;
    const double round_period = 1.0;
    world.sim.on_review_round = [&](const ReviewRoundTimer& r) {
        std::vector<NodeId> members;
        for (const auto& [id, agent] : world.agents)
            if (world.sim.alive(id) && agent->membership.member) members.push_back(id);
        if (members.size() < 2) return;

        ReviewRound round = assign_reviewers(members, r.round, cfg.seed);
        for (const auto& [reviewee, reviewer] : round.assignment) {
            bool valid = !cheat_rng.chance(cheat_rate);
            world.sim.send(Message{MessageKind::ReviewRequest, reviewee, reviewer, "mmg", 1.0,
                                   ReviewPayload{r.round, valid, false}});
        }
    };
    for (int r = 0; r < rounds; ++r)
        world.sim.schedule(t0 + r * round_period, ReviewRoundTimer{r});

    double end = std::max(cfg.duration, t0 + rounds * round_period + 1.0);
    report.counters = world.run_until(end);
    report.duration = end;
    report.review = stats;
    report.elections = world.election_counts;
    report.election_total = world.election_total;
    return report;
}

// ---------------------------------------------------------------------------

MetricsReport run_scenario(const ScenarioConfig& cfg, std::string* trace) {
    if (cfg.scenario == "review")
        return run_review_scenario(cfg, cfg.review.rounds, cfg.review.cheat_rate,
                                   cfg.review.accuracy, trace);
    if (cfg.scenario == "bus_ride") {
        // the membership trace is the product here; the metrics row only
        // carries the run coordinates
        auto spec = scenario_spec(cfg);
        run_bus_ride_detection(cfg, spec, trace);
        return base_report(cfg);
    }
    if (cfg.mode == ScenarioMode::ClientServer) return run_client_server(cfg, trace);
    return run_sois(cfg, scenario_spec(cfg), trace);
}

std::vector<MetricsReport> sweep(const ScenarioConfig& base, SweepAxis axis,
                                 const std::vector<std::string>& values,
                                 const std::vector<std::uint64_t>& seeds) {
    std::vector<MetricsReport> rows;
    for (const auto& value : values) {
        for (auto seed : seeds) {
            for (ScenarioMode mode : {ScenarioMode::ClientServer, ScenarioMode::Sois}) {
                ScenarioConfig cfg = base;
                cfg.seed = seed;
                cfg.mode = mode;
                switch (axis) {
                case SweepAxis::NodeCount:
                    apply_override(cfg, "node_count=" + value);
                    break;
                case SweepAxis::Battery:
                    apply_override(cfg, "battery.min=" + value);
                    apply_override(cfg, "battery.max=" + value);
                    break;
                case SweepAxis::InternetType:
                    for (auto& node : cfg.nodes) node.internet = value;
                    if (cfg.nodes.empty()) {
                        cfg.nodes = materialize_nodes(cfg);
                        for (auto& node : cfg.nodes) node.internet = value;
                    }
                    break;
                case SweepAxis::Gps:
                    apply_override(cfg, "gps_signal.min=" + value);
                    apply_override(cfg, "gps_signal.max=" + value);
                    break;
                case SweepAxis::Delta:
                    apply_override(cfg, "election.delta=" + value);
                    break;
                }
                MetricsReport report = run_scenario(cfg);
                report.sweep_axis = to_string(axis);
                report.sweep_value = value;
                rows.push_back(std::move(report));
            }
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

std::string metrics_csv_header() {
    std::ostringstream os;
    os << "scenario,seed,mode,sweep_axis,sweep_value,m1,m2";
    for (int k = 0; k < kMessageKindCount; ++k)
        os << ",tx_" << to_string(static_cast<MessageKind>(k));
    os << ",elections_vacancy,elections_resignation,elections_challenge,elections_total";
    os << ",review_spread,review_injected,review_detected";
    os << ",windows,aggregator_windows,duration";
    os << "\n";
    return os.str();
}

std::string metrics_csv_row(const MetricsReport& r) {
    std::ostringstream os;
    os << r.scenario << ',' << r.seed << ',' << r.mode << ',' << r.sweep_axis << ','
       << r.sweep_value << ',' << r.m1_requests << ',' << r.m2_failed;
    for (int k = 0; k < kMessageKindCount; ++k)
        os << ',' << r.counters.tx(static_cast<MessageKind>(k));
    auto count = [&](TriggerKind kind) {
        auto it = r.elections.find(kind);
        return it == r.elections.end() ? 0L : it->second;
    };
    os << ',' << count(TriggerKind::Vacancy) << ',' << count(TriggerKind::Resignation) << ','
       << count(TriggerKind::Challenge) << ',' << r.election_total;
    if (r.review)
        os << ',' << r.review->reviewer_spread() << ',' << r.review->injected_cheats << ','
           << r.review->detected_cheats;
    else
        os << ",,,";
    os << ',' << r.windows << ',' << r.aggregator_windows << ',' << format_double(r.duration);
    os << "\n";
    return os.str();
}

std::string metrics_csv(const std::vector<MetricsReport>& rows) {
    std::string out = metrics_csv_header();
    for (const auto& r : rows) out += metrics_csv_row(r);
    return out;
}

std::string sweep_csv(const std::vector<MetricsReport>& rows) {
    std::string out = metrics_csv(rows);

    // cell key: (sweep value, mode); rows arrive grouped by value then seed
    std::vector<std::pair<std::string, std::string>> cells;
    std::map<std::pair<std::string, std::string>, std::vector<const MetricsReport*>> by_cell;
    for (const auto& r : rows) {
        auto key = std::make_pair(r.sweep_value, r.mode);
        if (!by_cell.count(key)) cells.push_back(key);
        by_cell[key].push_back(&r);
    }

    for (const auto& key : cells) {
        const auto& cell = by_cell[key];
        const double n = static_cast<double>(cell.size());
        double m1_mean = 0, m2_mean = 0;
        for (const auto* r : cell) {
            m1_mean += static_cast<double>(r->m1_requests);
            m2_mean += static_cast<double>(r->m2_failed);
        }
        m1_mean /= n;
        m2_mean /= n;
        double m1_var = 0, m2_var = 0;
        for (const auto* r : cell) {
            m1_var += (static_cast<double>(r->m1_requests) - m1_mean) *
                      (static_cast<double>(r->m1_requests) - m1_mean);
            m2_var += (static_cast<double>(r->m2_failed) - m2_mean) *
                      (static_cast<double>(r->m2_failed) - m2_mean);
        }
        m1_var /= n;
        m2_var /= n;

        const MetricsReport& first = *cell.front();
        auto emit = [&](const char* stat, double m1, double m2) {
            std::ostringstream os;
            os << first.scenario << ',' << stat << ',' << first.mode << ',' << first.sweep_axis
               << ',' << first.sweep_value << ',' << format_double(m1) << ',' << format_double(m2);
            for (int k = 0; k < kMessageKindCount; ++k) os << ',';
            os << ",,,,"    // election columns
               << ",,,"     // review columns
               << ",,,";    // windows, aggregator_windows, duration
            out += os.str();
            out += "\n";
        };
        emit("mean", m1_mean, m2_mean);
        emit("stddev", std::sqrt(m1_var), std::sqrt(m2_var));
    }
    return out;
}

} // namespace sois
