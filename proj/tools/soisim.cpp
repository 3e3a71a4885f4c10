#include "sois/context.hpp"
#include "sois/scenarios.hpp"
#include "sois/spec.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

// exit codes: 0 ok, 2 spec/XML parse error, 3 I/O error, 4 config error
constexpr int kExitParse = 2;
constexpr int kExitIo = 3;
constexpr int kExitConfig = 4;

int write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        return kExitIo;
    }
    out << content;
    return 0;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed, std::uint64_t config_seed) {
    if (flag_seed) return *flag_seed;
    if (const char* env = std::getenv("SOISIM_SEED")) return std::strtoull(env, nullptr, 10);
    return config_seed;
}

int cmd_validate(const std::string& spec_path) {
    try {
        sois::GroupSpec spec = sois::parse_spec_file(spec_path);
        std::cout << sois::spec_summary(spec);
        return 0;
    } catch (const sois::ParseError& e) {
        std::cerr << spec_path << ": " << e.what() << "\n";
        return kExitParse;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

int cmd_eval(const std::string& spec_path, const std::string& context_path) {
    sois::GroupSpec spec;
    sois::NodeContext ctx;
    try {
        spec = sois::parse_spec_file(spec_path);
    } catch (const sois::ParseError& e) {
        std::cerr << spec_path << ": " << e.what() << "\n";
        return kExitParse;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    try {
        ctx = sois::load_context_file(context_path);
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << context_path << ": " << e.what() << "\n";
        return kExitParse;
    }

    bool gm = sois::group_membership(ctx, spec);
    std::cout << "group " << spec.name << ": node " << ctx.node_id << " membership="
              << (gm ? "true" : "false") << "\n";
    for (const auto& role : spec.roles) {
        auto effective = sois::effective_criteria(spec, role.name);
        bool ok = sois::rrc(ctx, effective);
        std::cout << "  role " << role.name << ": rrc=" << (ok ? "true" : "false");
        if (ok) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", sois::fitness(ctx, effective).value);
            std::cout << " fitness=" << buf;
        }
        std::cout << "\n";
    }
    return 0;
}

struct RunOptions {
    std::string config_path;
    std::string spec_path;
    std::optional<std::uint64_t> seed;
    std::string out_path = "metrics.csv";
    std::string trace_path;
    std::vector<std::string> overrides;
};

int load_config(const RunOptions& opts, sois::ScenarioConfig& cfg) {
    try {
        if (!opts.config_path.empty()) cfg = sois::load_scenario_config(opts.config_path);
        if (!opts.spec_path.empty()) cfg.spec_path = opts.spec_path;
        for (const auto& kv : opts.overrides) sois::apply_override(cfg, kv);
        cfg.seed = resolve_seed(opts.seed, cfg.seed);
    } catch (const sois::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return 0;
}

int cmd_run(const RunOptions& opts, bool trace_to_stdout) {
    sois::ScenarioConfig cfg;
    if (int rc = load_config(opts, cfg)) return rc;

    std::string trace;
    std::string* trace_sink = (!opts.trace_path.empty() || trace_to_stdout) ? &trace : nullptr;
    sois::MetricsReport report;
    try {
        report = sois::run_scenario(cfg, trace_sink);
    } catch (const sois::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sois::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }

    if (trace_to_stdout) {
        std::cout << trace;
    } else {
        std::string csv = sois::metrics_csv({report});
        if (int rc = write_file(opts.out_path, csv)) return rc;
        std::cout << "wrote " << opts.out_path << " (m1=" << report.m1_requests
                  << " m2=" << report.m2_failed << ")\n";
        if (!opts.trace_path.empty()) {
            if (int rc = write_file(opts.trace_path, trace)) return rc;
            std::cout << "wrote " << opts.trace_path << "\n";
        }
    }
    return 0;
}

int cmd_sweep(const RunOptions& opts, const std::string& axis_name,
              const std::vector<std::string>& values, int seed_count) {
    sois::ScenarioConfig cfg;
    if (int rc = load_config(opts, cfg)) return rc;

    auto axis = sois::sweep_axis_from(axis_name);
    if (!axis) {
        std::cerr << "error: unknown sweep axis '" << axis_name
                  << "' (node_count|battery|internet_type|gps|delta)\n";
        return kExitConfig;
    }
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < seed_count; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));

    std::vector<sois::MetricsReport> rows;
    try {
        rows = sois::sweep(cfg, *axis, values, seeds);
    } catch (const sois::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (int rc = write_file(opts.out_path, sois::sweep_csv(rows))) return rc;
    std::cout << "wrote " << opts.out_path << " (" << rows.size() << " rows)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"soisim: group-role specs, self-organizing membership/elections, and the "
                 "bus-monitoring simulation harness"};
    app.require_subcommand(1);

    std::string spec_path;
    std::string context_path;
    RunOptions run_opts;
    std::string axis;
    std::vector<std::string> sweep_values;
    int sweep_seeds = 10;

    auto* validate = app.add_subcommand("validate", "parse a group-role spec and print a summary");
    validate->add_option("--spec", spec_path, "specification XML file")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a context snapshot against a spec");
    eval->add_option("--spec", spec_path, "specification XML file")->required();
    eval->add_option("--context", context_path, "context snapshot JSON file")->required();

    auto add_run_flags = [&](CLI::App* cmd, bool need_out) {
        cmd->add_option("--config", run_opts.config_path, "scenario config JSON file");
        cmd->add_option("--spec", run_opts.spec_path, "specification XML file override");
        cmd->add_option("--seed", run_opts.seed, "simulation seed (falls back to SOISIM_SEED)");
        if (need_out) cmd->add_option("--out", run_opts.out_path, "output CSV path");
        cmd->add_option("--set", run_opts.overrides, "config override key=value (repeatable)");
    };

    auto* run = app.add_subcommand("run", "run one scenario and write metrics CSV");
    add_run_flags(run, true);
    run->add_option("--trace", run_opts.trace_path, "also write the event trace to this file");

    auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment grid over one variable");
    add_run_flags(sweep_cmd, true);
    sweep_cmd->add_option("--axis", axis, "node_count|battery|internet_type|gps|delta")->required();
    sweep_cmd->add_option("--values", sweep_values, "axis values")->required()->delimiter(',');
    sweep_cmd->add_option("--seeds", sweep_seeds, "number of seeds (base..base+n-1)");

    auto* trace_cmd = app.add_subcommand("trace", "run one scenario and print the event trace");
    add_run_flags(trace_cmd, false);

    CLI11_PARSE(app, argc, argv);

    if (validate->parsed()) return cmd_validate(spec_path);
    if (eval->parsed()) return cmd_eval(spec_path, context_path);
    if (run->parsed()) return cmd_run(run_opts, false);
    if (sweep_cmd->parsed()) return cmd_sweep(run_opts, axis, sweep_values, sweep_seeds);
    if (trace_cmd->parsed()) return cmd_run(run_opts, true);
    return 0;
}
