#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "cpus/process_gen.hpp"
#include "test_util.hpp"

using namespace cpus;
namespace fs = std::filesystem;

namespace {

std::string generated_for(const std::string& psm_path) {
    auto parsed = parse_product_model(testutil::read_file(psm_path));
    REQUIRE(validate(parsed.model).empty());
    auto tasks = identify_tasks(parsed.model);
    auto g = build_pg(parsed.model, tasks);
    auto emitted = emit_activity_specs(parsed.model, tasks);
    return describe_process(emitted.tasks, g);
}

std::vector<fs::path> corpus() {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(testutil::test_data("micro")))
        if (entry.path().extension() == ".psm") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    REQUIRE(files.size() >= 20);
    return files;
}

}  // namespace

TEST_CASE("rule-compliance corpus matches the hand-derived goldens") {
    for (const auto& psm : corpus()) {
        std::string name = psm.stem().string();
        INFO(name);
        std::string expected = testutil::read_file(testutil::test_data("golden/" + name + ".golden"));
        REQUIRE(generated_for(psm.string()) == expected);
    }

    // the case-study model is part of the corpus too
    std::string gregor = generated_for(testutil::shared_data("gregor/chair.psm"));
    REQUIRE(gregor == testutil::read_file(testutil::test_data("golden/m22_gregor_chair.golden")));
}

TEST_CASE("sequence enumeration equals the permutation-filter oracle on every corpus graph") {
    auto check = [](const std::string& path) {
        auto parsed = parse_product_model(testutil::read_file(path));
        auto tasks = identify_tasks(parsed.model);
        auto g = build_pg(parsed.model, tasks);
        if (g.nodes.size() > 10) return;

        auto seqs = enumerate_sequences(g, 10'000'000);

        std::vector<std::string> nodes = g.nodes;
        std::sort(nodes.begin(), nodes.end());
        std::vector<std::vector<std::string>> oracle;
        do {
            std::map<std::string, size_t> pos;
            for (size_t i = 0; i < nodes.size(); i++) pos[nodes[i]] = i;
            bool ok = true;
            for (const auto& [a, b] : g.arcs)
                if (pos[a] > pos[b]) { ok = false; break; }
            if (ok) oracle.push_back(nodes);
        } while (std::next_permutation(nodes.begin(), nodes.end()));
        std::sort(oracle.begin(), oracle.end());

        INFO(path);
        REQUIRE(seqs.size() == oracle.size());
        REQUIRE(seqs == oracle);
    };
    for (const auto& psm : corpus()) check(psm.string());
    check(testutil::shared_data("gregor/chair.psm"));
}
