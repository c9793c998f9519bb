#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cfiwb/base_graph.hpp"
#include "cfiwb/errors.hpp"
#include "oracles.hpp"

using namespace cfiwb;

TEST_CASE("catalog graphs have the advertised shape") {
    BaseGraph k4 = catalog_graph("k4");
    CHECK(k4.n == 4);
    CHECK(k4.edges.size() == 6);
    CHECK(k4.is_regular());
    CHECK(k4.degree(0) == 3);

    BaseGraph cage = catalog_graph("cage-3-5");
    CHECK(cage.n == 10);
    CHECK(cage.edges.size() == 15);
    CHECK(cage.is_regular());
    CHECK(cage.degree(0) == 3);
    CHECK(girth(cage) == 5);

    BaseGraph c6 = catalog_graph("c6");
    CHECK(c6.degree(3) == 2);
    CHECK(girth(c6) == 6);

    BaseGraph k33 = catalog_graph("k33");
    CHECK(k33.n == 6);
    CHECK(k33.edges.size() == 9);
    CHECK(girth(k33) == 4);

    BaseGraph heawood = catalog_graph("cage-3-6");
    CHECK(heawood.n == 14);
    CHECK(heawood.edges.size() == 21);
    CHECK(girth(heawood) == 6);

    CHECK_THROWS_AS(catalog_graph("nope"), UsageError);
    CHECK_THROWS_AS(catalog_graph("k9"), UsageError);
}

TEST_CASE("girth matches the exhaustive cycle oracle") {
    CHECK(girth(catalog_graph("k4")) == 3);
    // paths are acyclic
    BaseGraph p3 = BaseGraph::from_edges(3, {{0, 1}, {1, 2}});
    CHECK(!girth(p3).has_value());

    for (const char* name : {"k4", "k5", "c5", "c9", "k33", "cage-3-5"}) {
        BaseGraph g = catalog_graph(name);
        CAPTURE(name);
        CHECK(girth(g) == oracle::girth_exhaustive(g));
    }
    CHECK(oracle::girth_exhaustive(catalog_graph("cage-3-5")) == 5);
}

TEST_CASE("vertex connectivity matches the separator oracle") {
    CHECK(vertex_connectivity(catalog_graph("k4")) == 3);
    CHECK(vertex_connectivity(catalog_graph("c6")) == 2);
    CHECK(vertex_connectivity(catalog_graph("cage-3-5")) == 3);
    for (const char* name : {"k4", "k6", "c5", "c8", "k33", "cage-3-5"}) {
        BaseGraph g = catalog_graph(name);
        CAPTURE(name);
        CHECK(vertex_connectivity(g) == oracle::connectivity_exhaustive(g));
    }
    // disconnected
    BaseGraph two = BaseGraph::from_edges(4, {{0, 1}, {2, 3}});
    CHECK(vertex_connectivity(two) == 0);
}

TEST_CASE("requirement checks report actual values") {
    BaseGraph k4 = catalog_graph("k4");
    GraphRequirements r1{3, true, 0, 0};
    CHECK(check_requirements(k4, r1).pass);

    GraphRequirements r2;
    r2.min_girth = 4;
    auto rep = check_requirements(k4, r2);
    CHECK(!rep.pass);
    bool found = false;
    for (const auto& c : rep.checks)
        if (c.name == "min_girth") {
            found = true;
            CHECK(c.actual == "3");
            CHECK(!c.pass);
        }
    CHECK(found);

    GraphRequirements r3;
    r3.min_connectivity = 3;
    r3.min_girth = 6;
    CHECK(check_requirements(catalog_graph("cage-3-6"), r3).pass);
}

TEST_CASE("random regular sampling") {
    BaseGraph g = random_regular(3, 10, 7);
    CHECK(g.n == 10);
    CHECK(g.is_regular());
    CHECK(g.degree(0) == 3);
    CHECK(g.is_connected());
    GraphRequirements req{3, true, 0, 0};
    CHECK(check_requirements(g, req).pass);

    // deterministic per seed
    CHECK(random_regular(3, 10, 7) == g);
    bool any_different = false;
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
        any_different = any_different || !(random_regular(3, 10, seed) == g);
    CHECK(any_different);

    // K4 is the only 3-regular graph on 4 vertices
    CHECK(random_regular(3, 4, 1) == catalog_graph("k4"));

    CHECK_THROWS_AS(random_regular(3, 5, 1), UsageError); // odd n*d
    CHECK_THROWS_AS(random_regular(3, 3, 1), UsageError); // n <= d
}

TEST_CASE("graph json round trip") {
    BaseGraph g = catalog_graph("cage-3-5");
    auto doc = graph_to_json(g);
    CHECK(graph_from_json(doc) == g);
    CHECK(doc["schema_version"] == 1);
    CHECK(doc["edges"].size() == 15);

    CHECK_THROWS_AS(graph_from_json(nlohmann::json::object()), DataError);
    auto bad = graph_to_json(g);
    bad["edges"].push_back(nlohmann::ordered_json::array({0, 0}));
    CHECK_THROWS_AS(graph_from_json(bad), DataError);
}

TEST_CASE("dot export mentions every edge") {
    BaseGraph k4 = catalog_graph("k4");
    std::string dot = graph_to_dot(k4);
    CHECK(dot.find("0 -- 1") != std::string::npos);
    CHECK(dot.find("2 -- 3") != std::string::npos);
}
