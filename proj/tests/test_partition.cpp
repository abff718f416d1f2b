#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>

#include "sgm/oracle.hpp"
#include "sgm/partition.hpp"

using namespace sgm;

TEST_CASE("default threshold is an eighth of the clip, at least one frame", "[partition]") {
    CHECK(default_tau(8).frames == 1);
    CHECK(default_tau(16).frames == 2);
    CHECK(default_tau(32).frames == 4);
    CHECK(default_tau(7).frames == 1);
    CHECK(default_tau(2).frames == 1);
    CHECK_THROWS_AS(default_tau(1), ParamError);
    CHECK_THROWS_AS(default_tau(0), ParamError);
}

TEST_CASE("threshold bounds", "[partition]") {
    CHECK_NOTHROW(check_tau(8, TemporalThreshold{7}));
    CHECK_THROWS_AS(check_tau(8, TemporalThreshold{8}), ParamError);
    CHECK_THROWS_AS(check_tau(8, TemporalThreshold{0}), ParamError);
}

TEST_CASE("scheme names parse and roundtrip", "[partition]") {
    CHECK(parse_scheme("full") == PartitionScheme::full());
    CHECK(parse_scheme("local-global") == PartitionScheme::local_global());
    CHECK(parse_scheme("lg") == PartitionScheme::local_global());
    CHECK(parse_scheme("directional") == PartitionScheme::directional());
    CHECK(parse_scheme("fullx4") == PartitionScheme::full_replicated(4));
    CHECK(parse_scheme(PartitionScheme::directional().name()) == PartitionScheme::directional());
    CHECK(parse_scheme(PartitionScheme::full_replicated(2).name()) ==
          PartitionScheme::full_replicated(2));
    CHECK_THROWS_AS(parse_scheme("diagonal"), ParamError);
    CHECK_THROWS_AS(parse_scheme("fullx"), ParamError);
    CHECK_THROWS_AS(PartitionScheme::full_replicated(0), ParamError);
}

TEST_CASE("directional masks for a 3-frame clip, threshold 1", "[partition]") {
    const EdgeMaskSet set = build_masks(3, TemporalThreshold{1}, PartitionScheme::directional());
    REQUIRE(set.count() == 4);
    CHECK(set.names ==
          std::vector<std::string>{"global-backward", "local-backward", "local-forward", "global-forward"});

    const auto edges = [&](int k) {
        std::set<std::pair<int, int>> s;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (set.masks[static_cast<std::size_t>(k)].at(i, j)) s.insert({i, j});
        return s;
    };

    // edge (i, j) runs from frame j into frame i
    CHECK(edges(0) == std::set<std::pair<int, int>>{{0, 2}});
    CHECK(edges(1) == std::set<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}});
    CHECK(edges(2) == std::set<std::pair<int, int>>{{1, 0}, {2, 1}});
    CHECK(edges(3) == std::set<std::pair<int, int>>{{2, 0}});
}

TEST_CASE("self-loops live in local-backward only", "[partition]") {
    for (int t : {2, 5, 8, 16}) {
        const EdgeMaskSet set = build_masks(t, default_tau(t), PartitionScheme::directional());
        for (int i = 0; i < t; ++i) {
            CHECK(set.masks[1].at(i, i));
            CHECK_FALSE(set.masks[0].at(i, i));
            CHECK_FALSE(set.masks[2].at(i, i));
            CHECK_FALSE(set.masks[3].at(i, i));
        }
        CHECK(set.self_loop_convention == "self-loops-in-local-backward");
    }
}

TEST_CASE("both decompositions cover all pairs disjointly", "[partition]") {
    for (int t = 2; t <= 32; ++t)
        for (int tau = 1; tau <= t - 1; ++tau)
            for (const PartitionScheme scheme :
                 {PartitionScheme::local_global(), PartitionScheme::directional()}) {
                const EdgeMaskSet set = build_masks(t, TemporalThreshold{tau}, scheme);
                const ValidationReport report = validate_partition(set);
                INFO("T=" << t << " tau=" << tau << " scheme=" << scheme.name());
                CHECK(report.ok());
                int total = 0;
                for (const EdgeMask& m : set.masks) total += m.count();
                CHECK(total == t * t);
            }
}

TEST_CASE("masks agree with the per-edge oracle", "[partition]") {
    for (int t : {2, 3, 4, 8, 16, 31}) {
        for (int tau : {1, t / 2 > 0 ? t / 2 : 1, t - 1}) {
            for (const PartitionScheme scheme :
                 {PartitionScheme::local_global(), PartitionScheme::directional()}) {
                const EdgeMaskSet set = build_masks(t, TemporalThreshold{tau}, scheme);
                for (int i = 0; i < t; ++i)
                    for (int j = 0; j < t; ++j) {
                        const std::string expect =
                            oracle::classify_edge(i, j, t, TemporalThreshold{tau}, scheme);
                        int hits = 0;
                        for (std::size_t k = 0; k < set.masks.size(); ++k)
                            if (set.masks[k].at(i, j)) {
                                CHECK(set.names[k] == expect);
                                ++hits;
                            }
                        CHECK(hits == 1);
                    }
            }
        }
    }
}

TEST_CASE("oracle rejects out-of-range edges and replicated schemes", "[partition]") {
    CHECK_THROWS_AS(oracle::classify_edge(0, 3, 3, TemporalThreshold{1}, PartitionScheme::full()),
                    IndexError);
    CHECK_THROWS_AS(oracle::classify_edge(-1, 0, 3, TemporalThreshold{1}, PartitionScheme::full()),
                    IndexError);
    CHECK_THROWS_AS(
        oracle::classify_edge(0, 0, 3, TemporalThreshold{1}, PartitionScheme::full_replicated(2)),
        ParamError);
    CHECK(oracle::classify_edge(0, 0, 3, TemporalThreshold{1}, PartitionScheme::full()) == "full");
}

TEST_CASE("interval split is symmetric in distance", "[partition]") {
    const EdgeMaskSet set = build_masks(9, TemporalThreshold{2}, PartitionScheme::local_global());
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) {
            CHECK(set.masks[0].at(i, j) == set.masks[0].at(j, i));
            CHECK(set.masks[1].at(i, j) == set.masks[1].at(j, i));
            CHECK(set.masks[0].at(i, j) == (std::abs(i - j) <= 2));
        }
}

TEST_CASE("full and replicated-full masks keep every edge", "[partition]") {
    const EdgeMaskSet full = build_masks(5, TemporalThreshold{1}, PartitionScheme::full());
    REQUIRE(full.count() == 1);
    CHECK(full.masks[0].count() == 25);
    CHECK(validate_partition(full).ok());

    const EdgeMaskSet rep = build_masks(5, TemporalThreshold{1}, PartitionScheme::full_replicated(4));
    REQUIRE(rep.count() == 4);
    CHECK(rep.names == std::vector<std::string>{"full-0", "full-1", "full-2", "full-3"});
    for (const EdgeMask& m : rep.masks) CHECK(m.count() == 25);
    // replicas overlap on purpose; every edge belongs to each copy
    CHECK(validate_partition(rep).overlaps.size() == 6u * 25u);
    CHECK(validate_partition(rep).coverage_holes.empty());
}

TEST_CASE("union of the directional masks rebuilds the complete graph", "[partition]") {
    const EdgeMaskSet set = build_masks(6, TemporalThreshold{2}, PartitionScheme::directional());
    EdgeMask u = set.masks[0];
    for (int k = 1; k < 4; ++k) u = mask_or(u, set.masks[static_cast<std::size_t>(k)]);
    CHECK(u.count() == 36);
}

TEST_CASE("mask set serializes with its convention", "[partition]") {
    const EdgeMaskSet set = build_masks(3, TemporalThreshold{1}, PartitionScheme::directional());
    const auto doc = set.to_json();
    CHECK(doc.at("frames") == 3);
    CHECK(doc.at("scheme") == "directional");
    CHECK(doc.at("tau") == 1);
    CHECK(doc.at("self_loop_convention") == "self-loops-in-local-backward");
    REQUIRE(doc.at("subgraphs").size() == 4);
    CHECK(doc.at("subgraphs")[0].at("name") == "global-backward");
    CHECK(doc.at("subgraphs")[0].at("mask")[0][2] == 1);
    CHECK(doc.at("subgraphs")[0].at("mask")[0][0] == 0);
}

TEST_CASE("row in-degrees used for adjacency init", "[partition]") {
    const EdgeMaskSet set = build_masks(4, TemporalThreshold{1}, PartitionScheme::directional());
    // local-backward row 0 sees its self-loop plus frame 1; row 3 has nothing
    // after it, so only the self-loop remains
    CHECK(set.masks[1].row_count(0) == 2);
    CHECK(set.masks[1].row_count(3) == 1);
    // global-backward row 3 is empty: nothing lies more than tau ahead
    CHECK(set.masks[0].row_count(3) == 0);
}
