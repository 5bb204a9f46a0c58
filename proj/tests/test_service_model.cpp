#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "cpus/service_model.hpp"
#include "test_util.hpp"

using namespace cpus;

namespace {

std::string reference_description() { return testutil::read_file(testutil::shared_data("pickandplace_r2.n3")); }
std::string reference_query() { return testutil::read_file(testutil::shared_data("pickandplace_query.rq")); }

}  // namespace

TEST_CASE("reference pick-and-place description parses verbatim") {
    auto services = parse_n3_description(reference_description());
    REQUIRE(services.size() == 1);
    const auto& s = services[0];
    REQUIRE(s.iri == ":pickAndPlace");
    REQUIRE(s.label == "PickAndPlace");
    REQUIRE(s.label_lang == "en");
    REQUIRE(s.params.size() == 5);
    REQUIRE(s.find_param("PAYLOAD")->number == 10.0);
    REQUIRE(s.find_param("FORCE")->number == 100.0);
    REQUIRE(s.find_param("FORCE_ACCURACY")->number == 5.5);
    REQUIRE(s.find_param("GRIPPER_OPENING")->number == 155.0);
    REQUIRE(s.find_param("RANGE")->number == 1300.0);
    for (const auto& p : s.params) REQUIRE(p.declared_type == "FLOAT");
}

TEST_CASE("label-only description is valid; missing label is not") {
    auto services = parse_n3_description(":hold a as:Service; rdfs:label \"Hold\"@en.");
    REQUIRE(services.size() == 1);
    REQUIRE(services[0].params.empty());

    REQUIRE_THROWS_AS(parse_n3_description(":x a as:Service; doe:hasParams [doe:key \"K\"^^xsd:string].") ,
                      MissingLabel);
}

TEST_CASE("non-numeric float parameter raises TypeMismatch") {
    std::string text =
        ":x a as:Service; rdfs:label \"X\"@en;\n"
        "  doe:hasParams [doe:key \"PAYLOAD\"^^xsd:string;\n"
        "    doe:paramValueFloat \"heavy\"^^xsd:float;\n"
        "    doe:paramType \"FLOAT\"^^xsd:string].";
    REQUIRE_THROWS_AS(parse_n3_description(text), TypeMismatch);

    // declared STRING but numeric value predicate
    std::string text2 =
        ":x a as:Service; rdfs:label \"X\"@en;\n"
        "  doe:hasParams [doe:key \"K\"^^xsd:string;\n"
        "    doe:paramValueFloat \"1.0\"^^xsd:float;\n"
        "    doe:paramType \"STRING\"^^xsd:string].";
    REQUIRE_THROWS_AS(parse_n3_description(text2), TypeMismatch);
}

TEST_CASE("reference discovery query parses verbatim") {
    auto q = parse_query(reference_query());
    REQUIRE(q.label_pattern == "PickAndPlace");
    REQUIRE(q.bindings.size() == 2);
    REQUIRE(q.bindings[0].param_key == "PAYLOAD");
    REQUIRE(q.bindings[0].variable == "payload");
    REQUIRE(q.bindings[1].param_key == "GRIPPER_OPENING");
    REQUIRE(q.bindings[1].variable == "grOpening");
    REQUIRE(q.filter.size() == 2);
    REQUIRE(q.filter[0].op == ">");
    REQUIRE(q.filter[0].constant == 7.0);
    REQUIRE(q.filter[1].constant == 100.0);
}

TEST_CASE("query without FILTER matches on label and key presence") {
    auto q = parse_query(
        "(?service a as:Service; rdfs:label 'Hold'@en;\n"
        "  doe:hasParams [doe:key \"PAYLOAD\"^^xsd:string; doe:paramValueFloat ?p;\n"
        "    doe:paramType \"FLOAT\"^^xsd:string].)");
    REQUIRE(q.filter.empty());
    ServiceDescription with, without;
    with.label = "Hold";
    with.params.push_back({"PAYLOAD", "FLOAT", true, 3.0, ""});
    without.label = "Hold";
    REQUIRE(eval_query(q, {with, without}).size() == 1);
}

TEST_CASE("filter over an unbound variable is rejected") {
    std::string text =
        "(?service a as:Service; rdfs:label 'X'@en;\n"
        "  doe:hasParams [doe:key \"A\"^^xsd:string; doe:paramValueFloat ?a;\n"
        "    doe:paramType \"FLOAT\"^^xsd:string]\n"
        "  FILTER(?b>1.0).)";
    REQUIRE_THROWS_AS(parse_query(text), UnboundFilterVariable);
}

TEST_CASE("reference query matches the reference service; mutations do not") {
    auto services = parse_n3_description(reference_description());
    auto q = parse_query(reference_query());
    REQUIRE(eval_query(q, services).size() == 1);

    auto low_payload = services;
    for (auto& p : low_payload[0].params)
        if (p.key == "PAYLOAD") p.number = 5.0;
    REQUIRE(eval_query(q, low_payload).empty());

    auto relabeled = services;
    relabeled[0].label = "Hold";
    REQUIRE(eval_query(q, relabeled).empty());
}

TEST_CASE("a service missing a bound key never matches") {
    auto base = parse_n3_description(reference_description());
    auto q = parse_query(reference_query());
    for (size_t drop = 0; drop < base[0].params.size(); drop++) {
        auto mutated = base;
        mutated[0].params.erase(mutated[0].params.begin() + drop);
        std::string dropped_key = base[0].params[drop].key;
        bool bound = dropped_key == "PAYLOAD" || dropped_key == "GRIPPER_OPENING";
        REQUIRE(eval_query(q, mutated).size() == (bound ? 0 : 1));
    }
}

TEST_CASE("descriptions and queries round-trip through their serializers") {
    auto services = parse_n3_description(reference_description());
    auto again = parse_n3_description(serialize_descriptions(services));
    REQUIRE(serialize_descriptions(again) == serialize_descriptions(services));

    auto q = parse_query(reference_query());
    auto q2 = parse_query(serialize_query(q));
    REQUIRE(serialize_query(q2) == serialize_query(q));
    REQUIRE(q2.label_pattern == q.label_pattern);
    REQUIRE(q2.filter.size() == q.filter.size());
}

TEST_CASE("eval_query is monotone over service-list union") {
    ServiceDescription a, b;
    a.label = "PickAndPlace";
    a.params.push_back({"PAYLOAD", "FLOAT", true, 9.0, ""});
    b.label = "PickAndPlace";
    b.params.push_back({"PAYLOAD", "FLOAT", true, 2.0, ""});
    auto q = parse_query(
        "(?service a as:Service; rdfs:label 'PickAndPlace'@en;\n"
        "  doe:hasParams [doe:key \"PAYLOAD\"^^xsd:string; doe:paramValueFloat ?p;\n"
        "    doe:paramType \"FLOAT\"^^xsd:string]\n"
        "  FILTER(?p>5.0).)");
    auto m_a = eval_query(q, {a});
    auto m_b = eval_query(q, {b});
    auto m_ab = eval_query(q, {a, b});
    REQUIRE(m_ab.size() == m_a.size() + m_b.size());
}

TEST_CASE("1000 random services x 100 random queries agree with a brute-force oracle") {
    std::mt19937 rng(99);
    const std::vector<std::string> labels = {"PickAndPlace", "Hold", "ScrewPickAndFasten"};
    const std::vector<std::string> keys = {"PAYLOAD", "FORCE", "RANGE", "GRIPPER_OPENING"};
    const std::vector<std::string> ops = {">", "<", ">=", "<=", "="};

    std::vector<ServiceDescription> services(1000);
    for (auto& s : services) {
        s.label = labels[rng() % labels.size()];
        for (const auto& k : keys) {
            if (rng() % 4 == 0) continue;  // leave some keys out
            ParamEntry p;
            p.key = k;
            p.declared_type = "FLOAT";
            p.is_number = true;
            p.number = static_cast<double>(rng() % 200) / 10.0;
            s.params.push_back(p);
        }
    }

    for (int qi = 0; qi < 100; qi++) {
        ServiceQuery q;
        q.label_pattern = labels[rng() % labels.size()];
        int nbind = 1 + static_cast<int>(rng() % 3);
        for (int b = 0; b < nbind; b++) {
            std::string key = keys[rng() % keys.size()];
            std::string var = "v" + std::to_string(b);
            bool dup = false;
            for (auto& bb : q.bindings) dup |= bb.param_key == key;
            if (dup) continue;
            q.bindings.push_back({key, var, "FLOAT"});
            if (rng() % 3 != 0)
                q.filter.push_back({var, ops[rng() % ops.size()],
                                    static_cast<double>(rng() % 200) / 10.0});
        }

        auto result = eval_query(q, services);

        // independent straight-line check per service
        std::vector<const ServiceDescription*> expect;
        for (const auto& s : services) {
            if (s.label != q.label_pattern) continue;
            bool ok = true;
            for (const auto& b : q.bindings)
                if (!s.find_param(b.param_key)) ok = false;
            for (const auto& c : q.filter) {
                const ParamEntry* p = nullptr;
                for (const auto& b : q.bindings)
                    if (b.variable == c.variable) p = s.find_param(b.param_key);
                if (!p || !p->is_number) { ok = false; continue; }
                double v = p->number;
                bool holds = (c.op == ">" && v > c.constant) || (c.op == "<" && v < c.constant) ||
                             (c.op == ">=" && v >= c.constant) ||
                             (c.op == "<=" && v <= c.constant) || (c.op == "=" && v == c.constant);
                if (!holds) ok = false;
            }
            if (ok) expect.push_back(&s);
        }
        REQUIRE(result.size() == expect.size());
        for (size_t i = 0; i < result.size(); i++) REQUIRE(result[i].label == expect[i]->label);
    }
}
