#include <catch2/catch_amalgamated.hpp>

#include "cpus/platform.hpp"
#include "cpus/wire.hpp"
#include "test_util.hpp"

using namespace cpus;

namespace {

struct World {
    Scheduler scheduler;
    EventBus bus;
    Registry registry;
    LocalRegistryLink link;
    Platform platform;

    World() : registry(&scheduler.clock()), link(registry), platform(scheduler, bus, &link) {}

    void load_gregor(const char* file = "gregor/scenario.json") {
        platform.load(load_scenario_file(testutil::read_file(testutil::shared_data(file))));
    }

    ExecResult exec(const std::string& worker, const std::string& path,
                    const std::string& object, int repeat = 1) {
        ExecResult out;
        bool done = false;
        platform.execute(worker, path, object, repeat, [&](const ExecResult& r) {
            out = r;
            done = true;
        });
        scheduler.run_until_idle();
        REQUIRE(done);
        return out;
    }

    ExecResult do_rotate(const std::string& bench) {
        ExecResult out;
        platform.rotate(bench, [&](const ExecResult& r) { out = r; });
        scheduler.run_until_idle();
        return out;
    }
};

}  // namespace

TEST_CASE("gregor scenario loads and self-registers services") {
    World w;
    w.load_gregor();
    auto hits = w.registry.lookup();
    std::set<std::string> labels;
    for (const auto& [ep, link] : hits) labels.insert(link.description.label);
    REQUIRE(labels.count("PickAndPlace") == 1);
    REQUIRE(labels.count("ScrewPickAndFasten") == 1);
    REQUIRE(labels.count("Hold") == 1);
    REQUIRE(w.registry.live_count() == 5);  // R1 R2 R3 W1 W2
}

TEST_CASE("empty worker list yields no registrations") {
    World w;
    w.platform.load(load_scenario_file(R"({"workbenches":[],"workers":[],"objects":[]})"));
    REQUIRE(w.registry.live_count() == 0);
}

TEST_CASE("duplicate worker name is a config error") {
    std::string cfg = R"({
      "workbenches": [{"name":"W1","fixtures":["F1"],"positions":["pos1"]}],
      "workers": [
        {"name":"R1","reach":["W1.pos1"],"services":[{"path":"/a","label":"A","latency_us":10}]},
        {"name":"R1","reach":["W1.pos1"],"services":[{"path":"/b","label":"B","latency_us":10}]}
      ],
      "objects": []
    })";
    REQUIRE_THROWS_AS(load_scenario_file(cfg), ConfigError);
}

TEST_CASE("execute honors the operation space") {
    World w;
    w.load_gregor();

    // object still at pos1: R2's pickAndPlace requires pos2
    auto fail = w.exec("R2", "/pickAndPlace", "baseAsm");
    REQUIRE(fail.status == ExecResult::Status::PreconditionFailed);
    REQUIRE(fail.detail.find("W1.pos2") != std::string::npos);
    REQUIRE(w.platform.object("baseAsm")->state == "empty");  // no effect

    // after one rotation of W1 the fixture is at pos2
    REQUIRE(w.do_rotate("W1").ok());
    REQUIRE(w.platform.object("baseAsm")->location == "W1.pos2");
    auto ok = w.exec("R2", "/pickAndPlace", "baseAsm");
    REQUIRE(ok.ok());
    REQUIRE(ok.rtt_us >= 2000);  // at least the configured latency
    REQUIRE(w.platform.object("baseAsm")->state == "placed");
}

TEST_CASE("busy and failed workers reject requests") {
    World w;
    w.load_gregor();

    ExecResult first, second;
    w.platform.execute("R1", "/pickAndInsert", "baseAsm", 1,
                       [&](const ExecResult& r) { first = r; });
    w.platform.execute("R1", "/pickAndInsert", "baseAsm", 1,
                       [&](const ExecResult& r) { second = r; });
    w.scheduler.run_until_idle();
    REQUIRE(first.ok());
    REQUIRE(second.status == ExecResult::Status::WorkerBusy);

    w.platform.inject_failure("R3");
    auto failed = w.exec("R3", "/pickAndInsert", "upperAsm");
    REQUIRE(failed.status == ExecResult::Status::WorkerFailed);

    auto missing = w.exec("R1", "/weld", "baseAsm");
    REQUIRE(missing.status == ExecResult::Status::NoSuchService);
}

TEST_CASE("rotation shifts occupancy cyclically with period 3") {
    World w;
    w.load_gregor();
    auto occupancy = [&] { return w.platform.bench("W1")->occupancy; };
    auto initial = occupancy();
    REQUIRE(initial.at("W1.pos1") == "F1");

    REQUIRE(w.do_rotate("W1").ok());
    auto once = occupancy();
    REQUIRE(once.at("W1.pos2") == "F1");
    REQUIRE(once.at("W1.pos3") == "F2");
    REQUIRE(once.at("W1.pos1") == "F3");

    REQUIRE(w.do_rotate("W1").ok());
    REQUIRE(w.do_rotate("W1").ok());
    REQUIRE(occupancy() == initial);  // period 3
}

TEST_CASE("rotate during an active execute reports BenchBusy") {
    World w;
    w.load_gregor();
    ExecResult exec_result, rotate_result;
    bool rotated = false;
    w.platform.execute("R1", "/pickAndInsert", "baseAsm", 4,
                       [&](const ExecResult& r) { exec_result = r; });
    w.platform.rotate("W1", [&](const ExecResult& r) {
        rotate_result = r;
        rotated = true;
    });
    w.scheduler.run_until_idle();
    REQUIRE(exec_result.ok());
    REQUIRE(rotated);
    REQUIRE(rotate_result.status == ExecResult::Status::BenchBusy);
}

TEST_CASE("failure removes the registration, recovery restores it") {
    World w;
    w.load_gregor();
    auto count_for = [&](const std::string& ep) {
        size_t n = 0;
        for (const auto& [e, link] : w.registry.lookup())
            if (e == ep) n++;
        return n;
    };
    REQUIRE(count_for("R2") == 2);
    w.platform.inject_failure("R2");
    REQUIRE(count_for("R2") == 0);
    w.platform.recover("R2");
    REQUIRE(count_for("R2") == 2);
}

TEST_CASE("failure mid-execute completes as WorkerFailed without effect") {
    World w;
    w.load_gregor();
    ExecResult result;
    w.platform.execute("R1", "/pickAndInsert", "baseAsm", 4,
                       [&](const ExecResult& r) { result = r; });
    w.scheduler.schedule_in(100, [&] { w.platform.inject_failure("R1"); });
    w.scheduler.run_until_idle();
    REQUIRE(result.status == ExecResult::Status::WorkerFailed);
    REQUIRE(w.platform.object("baseAsm")->state == "empty");
}

TEST_CASE("objects are conserved under execute and rotate") {
    World w;
    w.load_gregor();
    auto ids_before = w.platform.object_ids();
    w.exec("R1", "/pickAndInsert", "baseAsm", 4);
    w.do_rotate("W1");
    w.do_rotate("W2");
    auto ids_after = w.platform.object_ids();
    REQUIRE(ids_before == ids_after);
    for (const auto& id : ids_after) REQUIRE(!w.platform.object(id)->location.empty());
}

TEST_CASE("transfer moves one object across benches") {
    World w;
    w.load_gregor();
    ExecResult r;
    w.platform.transfer("upperAsm", "W1.pos1", [&](const ExecResult& res) { r = res; });
    w.scheduler.run_until_idle();
    REQUIRE(r.ok());
    REQUIRE(w.platform.object("upperAsm")->location == "W1.pos1");
    REQUIRE(w.platform.object("baseAsm")->location == "W1.pos1");  // co-located
}

TEST_CASE("EXECUTE is exposed over the wire") {
    World w;
    w.load_gregor();
    // bring the fixture to pos2 for R2
    w.do_rotate("W1");

    auto route = execute_wire_route(w.platform);
    WireServer server([&](const WireRequest& req) -> WireResponse {
        auto [status, body] = route(req.path, req.params, req.body);
        return {status, body};
    });
    uint16_t port = server.start(0);

    WireResponse resp = wire_call("127.0.0.1", port,
                                  {"POST", "/R2/pickAndPlace", {}, R"({"object":"baseAsm"})"});
    REQUIRE(resp.ok());
    auto j = nlohmann::ordered_json::parse(resp.body);
    REQUIRE(j.at("outcome") == "success");
    REQUIRE(j.at("rtt_us").get<int64_t>() >= 2000);
    REQUIRE(w.platform.object("baseAsm")->state == "placed");

    WireResponse fail = wire_call("127.0.0.1", port,
                                  {"POST", "/R1/pickAndInsert", {}, R"({"object":"baseAsm"})"});
    REQUIRE(!fail.ok());  // object is at pos2, R1 requires pos1
    server.stop();
}

TEST_CASE("wildcard operation space is still gated by the worker's reach") {
    World w;
    w.load_gregor();
    // R3 serves W1.pos3 and W2.pos1 with a wildcard operation space; an
    // object at W1.pos1 is out of reach
    auto fail = w.exec("R3", "/pickAndInsert", "baseAsm");
    REQUIRE(fail.status == ExecResult::Status::PreconditionFailed);
    REQUIRE(fail.detail.find("reach") != std::string::npos);

    auto ok = w.exec("R3", "/pickAndInsert", "upperAsm");  // W2.pos1 is in reach
    REQUIRE(ok.ok());
}
