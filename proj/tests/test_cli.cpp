#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <sstream>

#include "cpus/cli.hpp"
#include "test_util.hpp"

using namespace cpus;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli::dispatch(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("cpus-test-" + std::to_string(::getpid()) + "-" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

}  // namespace

TEST_CASE("validate accepts the fixture and reports violations") {
    auto ok = run_cli({"validate", testutil::shared_data("gregor/chair.psm")});
    REQUIRE(ok.code == 0);
    REQUIRE(ok.out == "OK\n");

    TempDir tmp;
    std::string broken = testutil::read_file(testutil::shared_data("gregor/chair.psm"));
    auto pos = broken.find("psmm:basePart :LegsConnector");
    broken.replace(pos, 28, "psmm:basePart :Seat");
    cli::spit(tmp.file("broken.psm"), broken);
    auto bad = run_cli({"validate", tmp.file("broken.psm")});
    REQUIRE(bad.code == 1);
    REQUIRE(bad.out.find("not a constituent") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    REQUIRE(run_cli({}).code == 2);
    REQUIRE(run_cli({"frobnicate"}).code == 2);
    REQUIRE(run_cli({"gen-pim"}).code == 2);  // missing required args
}

TEST_CASE("gen-pim and graph produce the documented artifacts") {
    TempDir tmp;
    auto gen = run_cli({"gen-pim", testutil::shared_data("gregor/chair.psm"), "-o",
                        tmp.file("pim.json"), "--dot", tmp.file("atpg.dot")});
    REQUIRE(gen.code == 0);

    auto pim = pim_from_json(nlohmann::ordered_json::parse(testutil::read_file(tmp.file("pim.json"))));
    REQUIRE(pim.tasks.size() == 6);
    REQUIRE(pim.graph.nodes.size() == 8);

    std::string dot = testutil::read_file(tmp.file("atpg.dot"));
    REQUIRE(dot.find("\"BIT1\" -> \"AT4\"") != std::string::npos);

    auto graph = run_cli({"graph", tmp.file("pim.json"), "--dot", tmp.file("again.dot")});
    REQUIRE(graph.code == 0);
    REQUIRE(testutil::read_file(tmp.file("again.dot")) == dot);
}

TEST_CASE("sequences lists linear extensions up to the cap") {
    TempDir tmp;
    run_cli({"gen-pim", testutil::shared_data("gregor/chair.psm"), "-o", tmp.file("pim.json")});
    auto all = run_cli({"sequences", tmp.file("pim.json"), "--cap", "1000"});
    REQUIRE(all.code == 0);
    REQUIRE(all.out.find("35 sequence(s)") != std::string::npos);

    auto capped = run_cli({"sequences", tmp.file("pim.json"), "--cap", "5"});
    REQUIRE(capped.out.find("5 sequence(s) (capped)") != std::string::npos);
}

TEST_CASE("pipeline composes from files alone: gen-pim, bind, run") {
    TempDir tmp;
    std::string scenario = testutil::shared_data("gregor/scenario.json");

    REQUIRE(run_cli({"gen-pim", testutil::shared_data("gregor/chair.psm"), "-o",
                     tmp.file("pim.json")})
                .code == 0);
    auto bind_res = run_cli({"bind", tmp.file("pim.json"), "--scenario", scenario, "--mode",
                             "static", "-o", tmp.file("psm.json")});
    REQUIRE(bind_res.code == 0);
    auto run_res = run_cli({"run", tmp.file("psm.json"), "--scenario", scenario, "--metrics",
                            tmp.file("metrics.csv"), "--report", tmp.file("report.json"),
                            "--timeline", tmp.file("timeline.log")});
    REQUIRE(run_res.code == 0);
    REQUIRE(run_res.out.find("completed") == 0);

    std::string csv = testutil::read_file(tmp.file("metrics.csv"));
    REQUIRE(csv.rfind("step_id,task_id,service,endpoint,rtt_us,outcome\n", 0) == 0);
    auto report = nlohmann::ordered_json::parse(testutil::read_file(tmp.file("report.json")));
    REQUIRE(report.at("outcome") == "completed");
    REQUIRE(report.at("liaisons_realized").size() == 9);
}

TEST_CASE("bind against a worker-less scenario names the unsatisfied activity") {
    TempDir tmp;
    cli::spit(tmp.file("empty.json"),
              R"({"workbenches":[{"name":"W1","fixtures":["F1"],"positions":["pos1"]}],)"
              R"("workers":[],"objects":[]})");
    run_cli({"gen-pim", testutil::shared_data("gregor/chair.psm"), "-o", tmp.file("pim.json")});
    auto res = run_cli({"bind", tmp.file("pim.json"), "--scenario", tmp.file("empty.json"),
                        "--mode", "static", "-o", tmp.file("psm.json")});
    REQUIRE(res.code == 1);
    REQUIRE(res.err.find("UnsatisfiedActivity") != std::string::npos);
    REQUIRE(res.err.find("AT1") != std::string::npos);
}

TEST_CASE("same seed reproduces byte-identical artifacts") {
    TempDir a, b;
    std::string scenario = testutil::shared_data("gregor/scenario.json");
    for (const TempDir* dir : {&a, &b}) {
        REQUIRE(run_cli({"--seed", "7", "gen-pim", testutil::shared_data("gregor/chair.psm"),
                         "-o", dir->file("pim.json"), "--dot", dir->file("atpg.dot")})
                    .code == 0);
        REQUIRE(run_cli({"--seed", "7", "bind", dir->file("pim.json"), "--scenario", scenario,
                         "--mode", "eager", "-o", dir->file("psm.json")})
                    .code == 0);
        REQUIRE(run_cli({"--seed", "7", "run", dir->file("psm.json"), "--scenario", scenario,
                         "--metrics", dir->file("metrics.csv")})
                    .code == 0);
    }
    for (const char* f : {"pim.json", "atpg.dot", "psm.json", "metrics.csv"})
        REQUIRE(testutil::read_file(a.file(f)) == testutil::read_file(b.file(f)));
}

TEST_CASE("query evaluates against an in-process scenario registry") {
    auto res = run_cli({"query", "scenario:" + testutil::shared_data("gregor/scenario.json"),
                        testutil::shared_data("pickandplace_query.rq")});
    REQUIRE(res.code == 0);
    // R2 (reference description params) and R3 (payload 8 > 7, opening 120 > 100) both match
    REQUIRE(res.out.find("2 match(es)") != std::string::npos);
    REQUIRE(res.out.find("ep=\"R2\"") != std::string::npos);
    REQUIRE(res.out.find("ep=\"R3\"") != std::string::npos);
}

TEST_CASE("lazy and eager binds both complete the run") {
    TempDir tmp;
    std::string scenario = testutil::shared_data("gregor/scenario.json");
    run_cli({"gen-pim", testutil::shared_data("gregor/chair.psm"), "-o", tmp.file("pim.json")});
    for (const char* mode : {"lazy", "eager"}) {
        auto bind_res = run_cli({"bind", tmp.file("pim.json"), "--scenario", scenario, "--mode",
                                 mode, "-o", tmp.file("psm.json")});
        REQUIRE(bind_res.code == 0);
        auto run_res =
            run_cli({"run", tmp.file("psm.json"), "--scenario", scenario, "--style",
                     std::string(mode) == "lazy" ? "choreography" : "orchestration"});
        REQUIRE(run_res.code == 0);
    }
}

TEST_CASE("CPUS_REGISTRY_ADDR supplies the default registry address") {
    TempDir tmp;
    run_cli({"gen-pim", testutil::shared_data("gregor/chair.psm"), "-o", tmp.file("pim.json")});
    ::setenv("CPUS_REGISTRY_ADDR", "127.0.0.1:1", 1);  // nothing listens there
    auto res = run_cli({"bind", tmp.file("pim.json"), "--mode", "static", "-o",
                        tmp.file("psm.json")});
    ::unsetenv("CPUS_REGISTRY_ADDR");
    REQUIRE(res.code == 1);
    REQUIRE(res.err.find("RegistryUnreachable") != std::string::npos);
}
