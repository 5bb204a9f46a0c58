#pragma once

// Command-line surface for the whole pipeline. Every stage reads and writes
// plain files so the steps compose in batch:
//
//   cpus gen-pim chair.psm -o pim.json
//   cpus bind pim.json --scenario scenario.json --mode static -o psm.json
//   cpus run psm.json --scenario scenario.json --metrics metrics.csv
//
// Exit codes: 0 success, 1 validation/bind/run failure, 2 usage error.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cpus/binder.hpp"
#include "cpus/errors.hpp"
#include "cpus/platform.hpp"
#include "cpus/process_gen.hpp"
#include "cpus/product_model.hpp"
#include "cpus/registry.hpp"
#include "cpus/runtime.hpp"
#include "cpus/service_model.hpp"
#include "cpus/wire.hpp"

namespace cpus::cli {

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << content;
}

// In-process pipeline world: scheduler-backed registry and platform loaded
// from a scenario file. Used whenever no remote registry address is given.
struct LocalWorld {
    Scheduler scheduler;
    EventBus bus;
    Registry registry;
    LocalRegistryLink link;
    Platform platform;
    LocalServiceSource source;

    explicit LocalWorld(const Scenario& scenario)
        : registry(&scheduler.clock()), link(registry), platform(scheduler, bus, &link),
          source(registry) {
        platform.load(scenario);
    }
};

struct PipelineIo {
    std::ostream& out;
    std::ostream& err;
};

inline int cmd_validate(const std::string& psm_file, PipelineIo io) {
    auto parsed = parse_product_model(slurp(psm_file));
    for (const auto& w : parsed.warnings) io.err << "warning: " << w << "\n";
    auto report = validate(parsed.model);
    if (report.empty()) {
        io.out << "OK\n";
        return 0;
    }
    for (const auto& v : report) io.out << v.element << ": " << v.message << "\n";
    return 1;
}

inline int cmd_gen_pim(const std::string& psm_file, const std::string& out_file,
                       const std::string& dot_file, PipelineIo io) {
    auto parsed = parse_product_model(slurp(psm_file));
    for (const auto& w : parsed.warnings) io.err << "warning: " << w << "\n";
    auto violations = validate(parsed.model);
    if (!violations.empty()) {
        for (const auto& v : violations) io.err << v.element << ": " << v.message << "\n";
        return 1;
    }
    auto gen = make_pim(parsed.model);
    for (const auto& w : gen.warnings) io.err << "warning: " << w << "\n";
    spit(out_file, pim_to_json(gen.pim).dump(2) + "\n");
    if (!dot_file.empty()) spit(dot_file, export_dot(gen.pim.graph));
    io.out << "wrote " << out_file << " (" << gen.pim.tasks.size() << " tasks, "
           << gen.pim.graph.nodes.size() << " graph nodes)\n";
    return 0;
}

inline int cmd_graph(const std::string& pim_file, const std::string& dot_file, PipelineIo io) {
    auto pim = pim_from_json(nlohmann::ordered_json::parse(slurp(pim_file)));
    spit(dot_file, export_dot(pim.graph));
    io.out << "wrote " << dot_file << "\n";
    return 0;
}

inline int cmd_sequences(const std::string& pim_file, size_t cap, PipelineIo io) {
    auto pim = pim_from_json(nlohmann::ordered_json::parse(slurp(pim_file)));
    auto seqs = enumerate_sequences(pim.graph, cap);
    for (const auto& seq : seqs) {
        for (size_t i = 0; i < seq.size(); i++) io.out << (i ? " " : "") << seq[i];
        io.out << "\n";
    }
    io.out << seqs.size() << " sequence(s)" << (seqs.size() == cap ? " (capped)" : "") << "\n";
    return 0;
}

inline int cmd_bind(const std::string& pim_file, const std::string& registry_addr,
                    const std::string& scenario_file, const std::string& mode_name,
                    const std::string& out_file, const std::string& holder, PipelineIo io) {
    auto pim = pim_from_json(nlohmann::ordered_json::parse(slurp(pim_file)));
    BindingMode mode = binding_mode_from_string(mode_name);

    std::optional<Scenario> scenario;
    if (!scenario_file.empty()) scenario = load_scenario_file(slurp(scenario_file));

    ProcessPsm psm;
    if (!registry_addr.empty()) {
        auto [host, port] = wire::parse_address(registry_addr);
        WireServiceSource source(host, port);
        psm = cpus::bind(pim, source, mode, scenario ? &*scenario : nullptr, holder);
    } else if (scenario) {
        LocalWorld world(*scenario);
        psm = cpus::bind(pim, world.source, mode, &*scenario, holder);
    } else {
        throw ConfigError("bind needs --registry <host:port> or --scenario <cfg>");
    }
    spit(out_file, psm_to_json(psm).dump(2) + "\n");
    io.out << "wrote " << out_file << " (" << psm.steps.size() << " steps, mode "
           << to_string(psm.mode) << ", " << psm.reservations.size() << " reservations)\n";
    return 0;
}

inline int cmd_run(const std::string& psm_file, const std::string& scenario_file,
                   const std::string& style_name, const std::string& metrics_file,
                   const std::string& report_file, const std::string& timeline_file,
                   PipelineIo io) {
    ProcessPsm psm = psm_from_json(nlohmann::ordered_json::parse(slurp(psm_file)));
    Scenario scenario = load_scenario_file(slurp(scenario_file));
    LocalWorld world(scenario);
    Runtime runtime(world.platform, world.source);
    RunReport report = runtime.run(psm, run_style_from_string(style_name));

    if (!metrics_file.empty()) spit(metrics_file, metrics_csv(report));
    if (!report_file.empty()) spit(report_file, run_report_to_json(report).dump(2) + "\n");
    if (!timeline_file.empty()) spit(timeline_file, timeline_log(report));

    io.out << (report.completed() ? "completed" : "FAILED") << " in " << report.makespan_us
           << " us simulated, " << report.trace.size() << " steps, "
           << report.rtt_samples.size() << " rtt samples\n";
    if (!report.completed())
        io.out << "failed at " << report.failed_step << ": " << report.failure_reason << "\n";
    for (const auto& [service, st] : rtt_report(report))
        io.out << "  " << service << ": n=" << st.count << " min=" << st.min
               << " p50=" << st.p50 << " p95=" << st.p95 << " max=" << st.max << " us\n";
    int realized = 0;
    for (const auto& [l, n] : report.liaisons_realized) realized += n;
    io.out << "  liaisons realized: " << realized << "\n";
    return report.completed() ? 0 : 1;
}

inline int cmd_query(const std::string& registry_addr, const std::string& query_file,
                     const std::string& resource_type, PipelineIo io) {
    ServiceQuery query = parse_query(slurp(query_file));
    std::vector<std::pair<std::string, ResourceLink>> hits;
    auto rt = resource_type.empty() ? std::nullopt : std::optional<std::string>(resource_type);
    if (registry_addr.rfind("scenario:", 0) == 0) {
        Scenario scenario = load_scenario_file(slurp(registry_addr.substr(9)));
        LocalWorld world(scenario);
        hits = world.source.lookup(rt, &query);
    } else {
        auto [host, port] = wire::parse_address(registry_addr);
        WireServiceSource source(host, port);
        hits = source.lookup(rt, &query);
    }
    for (const auto& [ep, link] : hits) io.out << wire::link_line(link, ep) << "\n";
    io.out << hits.size() << " match(es)\n";
    return 0;
}

inline int cmd_registry_serve(uint16_t port, PipelineIo io) {
    WallClock wall;
    Registry registry(&wall);
    RegistryWireService service(registry);
    WireServer server([&](const WireRequest& req) { return service.handle(req); });
    uint16_t bound = server.start(port);
    io.out << "resource directory listening on 127.0.0.1:" << bound << "\n";
    io.out.flush();
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
}

inline int cmd_platform_run(const std::string& scenario_file, const std::string& registry_addr,
                            uint16_t port, PipelineIo io) {
    Scenario scenario = load_scenario_file(slurp(scenario_file));
    auto [host, rport] = wire::parse_address(registry_addr);
    WireRegistryLink link(host, rport);

    Scheduler scheduler;
    EventBus bus;
    Platform platform(scheduler, bus, &link);
    platform.load(scenario);

    auto route = execute_wire_route(platform);
    WireServer server([&](const WireRequest& req) -> WireResponse {
        if (req.method != "POST") return {"4.00 Bad Request only POST", ""};
        auto [status, body] = route(req.path, req.params, req.body);
        return {status, body};
    });
    uint16_t bound = server.start(port);
    io.out << "platform " << scenario.name << " serving EXECUTE on 127.0.0.1:" << bound
           << " (registry " << registry_addr << ")\n";
    io.out.flush();
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
}

/// Entry point shared by the binary and the tests.
inline int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"CPuS-IoT assembly pipeline"};
    app.require_subcommand(1);
    int64_t seed = 0;
    app.add_option("--seed", seed, "determinism seed recorded into artifacts");

    std::string psm_file, pim_file, out_file, dot_file, scenario_file, registry_addr,
        query_file, resource_type;
    std::string mode_name = "static", style_name = "orchestration", holder;
    std::string metrics_file, report_file, timeline_file;
    size_t cap = 1000;
    uint16_t port = 0;

    const char* env_registry = std::getenv("CPUS_REGISTRY_ADDR");
    std::string default_registry = env_registry ? env_registry : "";

    auto* validate_cmd = app.add_subcommand("validate", "check a product structural model");
    validate_cmd->add_option("psm", psm_file, "PSM triple file")->required();

    auto* gen_cmd = app.add_subcommand("gen-pim", "generate the platform-independent process");
    gen_cmd->add_option("psm", psm_file)->required();
    gen_cmd->add_option("-o,--out", out_file, "PIM JSON output")->required();
    gen_cmd->add_option("--dot", dot_file, "also write the AT-PG as DOT");

    auto* graph_cmd = app.add_subcommand("graph", "render a PIM's precedence graph");
    graph_cmd->add_option("pim", pim_file)->required();
    graph_cmd->add_option("--dot", dot_file)->required();

    auto* seq_cmd = app.add_subcommand("sequences", "enumerate valid assembly sequences");
    seq_cmd->add_option("pim", pim_file)->required();
    seq_cmd->add_option("--cap", cap, "maximum sequences to list");

    auto* bind_cmd = app.add_subcommand("bind", "resolve a PIM to services (PIM -> PSM)");
    bind_cmd->add_option("pim", pim_file)->required();
    bind_cmd->add_option("--registry", registry_addr, "resource directory host:port")
        ->default_val(default_registry);
    bind_cmd->add_option("--scenario", scenario_file, "platform scenario (topology)");
    bind_cmd->add_option("--mode", mode_name, "static|eager|lazy");
    bind_cmd->add_option("-o,--out", out_file, "PSM JSON output")->required();
    bind_cmd->add_option("--holder", holder, "reservation holder token");

    auto* run_cmd = app.add_subcommand("run", "execute a PSM on the simulated platform");
    run_cmd->add_option("psm", psm_file)->required();
    run_cmd->add_option("--scenario", scenario_file)->required();
    run_cmd->add_option("--style", style_name, "orchestration|choreography");
    run_cmd->add_option("--metrics", metrics_file, "write RTT metrics CSV");
    run_cmd->add_option("--report", report_file, "write run report JSON");
    run_cmd->add_option("--timeline", timeline_file, "write timeline text log");

    auto* query_cmd = app.add_subcommand("query", "evaluate a discovery query");
    query_cmd->add_option("registry", registry_addr, "host:port or scenario:<cfg>")->required();
    query_cmd->add_option("query", query_file, "SPARQL-subset query file")->required();
    query_cmd->add_option("--rt", resource_type, "resource type filter");

    auto* serve_cmd = app.add_subcommand("registry", "resource directory server");
    auto* serve_sub = serve_cmd->add_subcommand("serve", "serve the wire protocol");
    serve_sub->add_option("--port", port, "listen port (0 = ephemeral)");

    auto* platform_cmd = app.add_subcommand("platform", "platform simulator");
    auto* platform_sub = platform_cmd->add_subcommand("run", "register workers and serve EXECUTE");
    platform_sub->add_option("--scenario", scenario_file)->required();
    platform_sub->add_option("--registry", registry_addr)->default_val(default_registry);
    platform_sub->add_option("--port", port, "EXECUTE listen port");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    PipelineIo io{out, err};
    try {
        if (validate_cmd->parsed()) return cmd_validate(psm_file, io);
        if (gen_cmd->parsed()) return cmd_gen_pim(psm_file, out_file, dot_file, io);
        if (graph_cmd->parsed()) return cmd_graph(pim_file, dot_file, io);
        if (seq_cmd->parsed()) return cmd_sequences(pim_file, cap, io);
        if (bind_cmd->parsed()) {
            if (holder.empty()) holder = "seed-" + std::to_string(seed);
            return cmd_bind(pim_file, registry_addr, scenario_file, mode_name, out_file, holder,
                            io);
        }
        if (run_cmd->parsed())
            return cmd_run(psm_file, scenario_file, style_name, metrics_file, report_file,
                           timeline_file, io);
        if (query_cmd->parsed()) return cmd_query(registry_addr, query_file, resource_type, io);
        if (serve_cmd->parsed() && serve_sub->parsed()) return cmd_registry_serve(port, io);
        if (platform_cmd->parsed() && platform_sub->parsed()) {
            if (registry_addr.empty())
                throw ConfigError("platform run needs --registry or CPUS_REGISTRY_ADDR");
            return cmd_platform_run(scenario_file, registry_addr, port, io);
        }
        err << "usage error: no subcommand\n";
        return 2;
    } catch (const Error& e) {
        err << e.kind() << ": " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "InvalidDocument: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace cpus::cli
