#pragma once

#include "sois/agent.hpp"
#include "sois/review.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sois {

enum class ScenarioMode { ClientServer, Sois };

std::string_view to_string(ScenarioMode m);

struct NodeTraits {
    NodeId id;
    double battery = 50.0;
    std::string internet = "wifi"; // wifi | cellular | none
    double gps_signal = 100.0;
    bool has_gps = true;
    bool has_accelerometer = true;
    std::optional<double> reachability; // overrides the internet-type default
    double battery_drain = 0.0;         // percent per simulated second
    double join_at = 0.0;
    std::optional<double> crash_at;
    std::optional<double> shutdown_at;
    // bus-ride trace fields
    std::string bssid;
    double wifi_signal = 0.0;
    std::optional<double> moving_at;
};

struct ReviewParams {
    int rounds = 100;
    double cheat_rate = 0.1;
    double accuracy = 1.0;
};

struct AdaptParams {
    bool enabled = false;
    std::string role = "geolocator";
    int target_samples = 2;
    int k_min = 1;
    int k_max = 3;
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& key, const std::string& why)
        : std::runtime_error("config error at '" + key + "': " + why), key(key) {}
    std::string key;
};

struct ScenarioConfig {
    std::string scenario = "bus"; // bus | bus_ride | review
    ScenarioMode mode = ScenarioMode::Sois;
    int node_count = 4;
    double duration = 100.0;
    double sensing_period = 10.0;
    std::uint64_t seed = 1;
    NetConfig net;
    std::map<std::string, int> k_bindings = {{"k1", 2}, {"k2", 2}};
    ElectionConfig election;
    MembershipConfig membership;
    double battery_min = 10.0;
    double battery_max = 90.0;
    double gps_signal_min = 0.0;
    double gps_signal_max = 100.0;
    double wifi_reachability = 0.99;
    double cellular_reachability = 0.95;
    double gps_active_cutoff = 10.0;
    std::vector<NodeTraits> nodes; // explicit traits; generated from ranges when empty
    ReviewParams review;
    AdaptParams adapt;
    std::string spec_path; // empty -> built-in listing for the scenario
    std::string spec_xml;  // inline document; takes precedence over spec_path
};

struct MetricsReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string mode;
    std::string sweep_axis;
    std::string sweep_value;
    std::uint64_t m1_requests = 0;
    std::uint64_t m2_failed = 0;
    MessageCounters counters;
    std::map<TriggerKind, long> elections;
    long election_total = 0;
    std::optional<ReviewStats> review;
    double duration = 0.0;
    int windows = 0;
    int aggregator_windows = 0; // windows at which some node served the aggregator
};

struct MembershipEvent {
    NodeId node;
    bool joined = false;
    double at = 0.0;
};

ScenarioConfig parse_scenario_config(const std::string& json_text);
ScenarioConfig load_scenario_config(const std::string& path);

// Dotted-key override applied after config parse, e.g. "election.delta=1.5"
// or "mode=client_server". Unknown keys throw ConfigError.
void apply_override(ScenarioConfig& cfg, const std::string& key_eq_value);

// Explicit traits or seeded generation from the configured ranges.
std::vector<NodeTraits> materialize_nodes(const ScenarioConfig& cfg);

// Bound group spec for the scenario (inline > file > built-in listing).
GroupSpec scenario_spec(const ScenarioConfig& cfg);

extern const char* const kBusMonitoringXml;
extern const char* const kMusicStreamingXml;
extern const char* const kBusRideXml;

MetricsReport run_client_server(const ScenarioConfig& cfg, std::string* trace = nullptr);
// `inspect` runs against the final world state before teardown (test hooks).
MetricsReport run_sois(const ScenarioConfig& cfg, const GroupSpec& bound_spec,
                       std::string* trace = nullptr,
                       const std::function<void(SimHarness&)>& inspect = {});
std::vector<MembershipEvent> run_bus_ride_detection(const ScenarioConfig& cfg,
                                                    const GroupSpec& bound_spec,
                                                    std::string* trace = nullptr);
MetricsReport run_review_scenario(const ScenarioConfig& cfg, int rounds, double cheat_rate,
                                  double accuracy, std::string* trace = nullptr);

// Dispatch on cfg.scenario / cfg.mode.
MetricsReport run_scenario(const ScenarioConfig& cfg, std::string* trace = nullptr);

enum class SweepAxis { NodeCount, Battery, InternetType, Gps, Delta };

std::optional<SweepAxis> sweep_axis_from(const std::string& name);
std::string_view to_string(SweepAxis axis);

// Both modes per value per seed, row order (value, seed, mode).
std::vector<MetricsReport> sweep(const ScenarioConfig& base, SweepAxis axis,
                                 const std::vector<std::string>& values,
                                 const std::vector<std::uint64_t>& seeds);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& report);
std::string metrics_csv(const std::vector<MetricsReport>& rows);

// Per-seed rows plus one mean and one stddev row per (sweep value, mode) cell;
// aggregate rows carry "mean"/"stddev" in the seed column.
std::string sweep_csv(const std::vector<MetricsReport>& rows);

} // namespace sois
