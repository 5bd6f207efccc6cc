#include <doctest.h>

#include <algorithm>

#include "qpn/errors.hpp"
#include "qpn/occurrence.hpp"
#include "support/net_gen.hpp"

using namespace qpn;
using namespace qpn::testing;

namespace {

constexpr auto kNeg = Polarity::Negative;
constexpr auto kNeu = Polarity::Neutral;
constexpr auto kPos = Polarity::Positive;

// Four places, four transitions, initial marking {1, 4}: a choice at place 1,
// one branch synchronising with place 4.
PetriNet four_place_net() {
    NetBuilder b;
    for (NodeId p : {1, 2, 3, 4}) b.place(p);
    b.transition(11, kNeu, {1}, {2});
    b.transition(12, kNeu, {1}, {3});
    b.transition(13, kNeu, {2, 4}, {1, 4});
    b.transition(14, kNeu, {3}, {1});
    return PetriNet(b.build(), {1, 4});
}

// Prefix of the unfolding of four_place_net: both branches, each followed by
// the transition returning the token to place 1.
OccurrenceNet four_place_prefix() {
    NetBuilder b;
    for (NodeId c : {100, 101, 102, 103, 104, 105, 106}) b.place(c);
    b.transition(200, kNeu, {100}, {102});
    b.transition(201, kNeu, {100}, {103});
    b.transition(202, kNeu, {102, 101}, {104, 105});
    b.transition(203, kNeu, {103}, {106});
    return OccurrenceNet(b.build(), {100, 101});
}

// Chain c1 -e1-> c2 -e2-> c3 with x = {}, y = {e1}, z = {e1, e2}.
OccurrenceNet chain_xyz() {
    NetBuilder b;
    for (NodeId c : {1, 2, 3}) b.place(c);
    b.transition(10, kPos, {1}, {2});
    b.transition(11, kPos, {2}, {3});
    return OccurrenceNet(b.build(), {1});
}

}  // namespace

TEST_CASE("firing on the four-place net stays safe") {
    const auto net = four_place_net();
    const auto en = enabled(net, net.initial_marking());
    CHECK(en == NodeSet{11, 12});
    for (NodeId t : en) {
        const auto m = fire(net, net.initial_marking(), t);
        CHECK(m.size() == 2);
    }
    const auto all = reachable_markings(net);
    CHECK(all.size() == 3);
    for (const auto& m : all) {
        for (NodeId t : enabled(net, m)) CHECK_NOTHROW(fire(net, m, t));
    }
}

TEST_CASE("fire basics") {
    NetBuilder loop;
    loop.place(1);
    loop.transition(2, kNeu, {1}, {1});
    const PetriNet self_loop(loop.build(), {1});
    CHECK(fire(self_loop, {1}, 2) == Marking{1});

    NetBuilder chain;
    chain.place(1);
    chain.place(3);
    chain.transition(2, kNeu, {1}, {3});
    const PetriNet c(chain.build(), {1});
    CHECK(fire(c, {1}, 2) == Marking{3});
    CHECK_THROWS_AS(fire(c, {3}, 2), NotEnabled);
    CHECK_THROWS_AS(fire(c, {1, 3}, 2), SafetyViolation);
}

TEST_CASE("enabled and reachable markings") {
    NetBuilder iso;
    iso.place(1);
    const PetriNet isolated(iso.build(), {1});
    CHECK(enabled(isolated, {1}).empty());
    CHECK(reachable_markings(isolated, 5) == std::vector<Marking>{{1}});

    NetBuilder chain;
    chain.place(1);
    chain.place(3);
    chain.transition(2, kNeu, {1}, {3});
    const PetriNet c(chain.build(), {1});
    CHECK(reachable_markings(c, 3) == std::vector<Marking>{{1}, {3}});

    NetBuilder two;
    for (NodeId p : {1, 2, 3, 4}) two.place(p);
    two.transition(5, kNeu, {1}, {2});
    two.transition(6, kNeu, {3}, {4});
    const PetriNet par(two.build(), {1, 3});
    auto ms = reachable_markings(par, 10);
    std::sort(ms.begin(), ms.end());
    // Each chain is independently at its start or end.
    CHECK(ms == std::vector<Marking>{{1, 3}, {1, 4}, {2, 3}, {2, 4}});
    CHECK(reachable_markings(par, 1).size() == 3);
    CHECK_THROWS_AS(reachable_markings(par, 10, 2), CapExceeded);
    CHECK_THROWS_AS(reachable_markings(par, 0), InvalidInput);
}

TEST_CASE("skeleton construction rejects malformed input") {
    CHECK_THROWS_AS(NetSkeleton({1, 2}, {}, {{1, 2}}), InvalidInput);
    CHECK_THROWS_AS(NetSkeleton({1}, {{1, kNeu}}, {}), InvalidInput);
    CHECK_THROWS_AS(NetSkeleton({1}, {{2, kNeu}}, {{1, 3}}), InvalidInput);
    CHECK_THROWS_AS(PetriNet(NetSkeleton({1}, {{2, kNeu}}, {}), {2}), InvalidInput);
}

TEST_CASE("occurrence-net validation") {
    const auto prefix = four_place_prefix();
    const auto ok = validate_occurrence_net(prefix.skeleton(), prefix.initial_cut());
    CHECK(ok.ok());
    CHECK(ok.clauses.size() == 5);

    NetBuilder back;
    for (NodeId c : {1, 2, 3}) back.place(c);
    back.transition(4, kNeu, {1}, {3});
    back.transition(5, kNeu, {2}, {3});
    const auto r = validate_occurrence_net(back.build(), {1, 2});
    REQUIRE(r.first_failure() != nullptr);
    CHECK(r.first_failure()->clause == "no-backward-branching");
    CHECK(*r.first_failure()->witness == 3);

    NetBuilder cyc;
    cyc.place(1);
    cyc.place(3);
    cyc.transition(2, kNeu, {1}, {3});
    cyc.transition(4, kNeu, {3}, {1});
    const auto rc = validate_occurrence_net(cyc.build(), {});
    CHECK_FALSE(rc.clauses[0].passed);
    CHECK(rc.clauses[0].clause == "acyclic");
    CHECK_THROWS_AS(OccurrenceNet(cyc.build(), {}), InvalidInput);

    // An event consuming a condition and a causal successor of a rival is
    // in conflict with itself.
    NetBuilder sc;
    for (NodeId c : {1, 2, 3}) sc.place(c);
    sc.transition(10, kNeu, {1}, {2});
    sc.transition(11, kNeu, {1, 2}, {3});
    const auto rs = validate_occurrence_net(sc.build(), {1});
    CHECK_FALSE(rs.ok());
    bool self_conflict_failed = false;
    for (const auto& c : rs.clauses) {
        if (c.clause == "no-self-conflict") self_conflict_failed = !c.passed;
    }
    CHECK(self_conflict_failed);

    const auto rm = validate_occurrence_net(prefix.skeleton(), {100});
    CHECK(rm.first_failure()->clause == "minimal-nodes");
    CHECK(*rm.first_failure()->witness == 101);
}

TEST_CASE("conflict relation") {
    const auto o = four_place_prefix();
    CHECK(conflict(o, 200, 201));
    CHECK_FALSE(conflict(o, 200, 202));
    CHECK(conflict(o, 202, 201));
    CHECK(conflict(o, 202, 203));
    CHECK_THROWS_AS(conflict(o, 100, 200), InvalidInput);
    CHECK_THROWS_AS(conflict(o, 999, 200), InvalidInput);
}

TEST_CASE("conflict is inherited along causality") {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const auto o = random_occurrence_net(rng);
        std::vector<NodeId> nodes(o.conditions().begin(), o.conditions().end());
        for (NodeId e : o.events()) nodes.push_back(e);
        for (NodeId a : nodes) {
            for (NodeId b : nodes) {
                if (!o.conflict(a, b)) continue;
                CHECK(o.conflict(b, a));
                for (NodeId c : nodes) {
                    if (o.leq(b, c)) CHECK(o.conflict(a, c));
                }
            }
        }
    }
}

TEST_CASE("minimal conflict differs from immediate conflict") {
    // e and b share c1; a (after e) and b share c2: a # b is inherited from e # b.
    NetBuilder nb;
    for (NodeId c : {1, 2, 3, 4, 5}) nb.place(c);
    nb.transition(10, kNeu, {1}, {3});
    nb.transition(11, kNeu, {3, 2}, {4});
    nb.transition(12, kNeu, {1, 2}, {5});
    const auto pairs = minimal_conflicts(nb.build());
    CHECK(pairs == std::vector<std::pair<NodeId, NodeId>>{{10, 12}});
}

TEST_CASE("configurations and cuts") {
    const auto o = four_place_prefix();
    CHECK(cut_of(o, {}) == o.initial_cut());
    const auto all = configurations(o);
    CHECK(all.size() == 5);
    CHECK(all.front().empty());
    CHECK(is_configuration(o, {200, 202}));
    CHECK_FALSE(is_configuration(o, {202}));
    CHECK_FALSE(is_configuration(o, {200, 201}));
    CHECK(cut_of(o, {200, 202}) == Marking{104, 105});
    CHECK(config_of_marking(o, {104, 105}) == Configuration{200, 202});
    CHECK_THROWS_AS(config_of_marking(o, {102, 103}), NotReachable);
    CHECK_THROWS_AS(configurations(o, 3), CapExceeded);

    const auto xyz = chain_xyz();
    CHECK(cut_of(xyz, {}) == Marking{1});
    CHECK(cut_of(xyz, {10}) == Marking{2});
    CHECK(cut_of(xyz, {10, 11}) == Marking{3});
}

TEST_CASE("cut and configuration are mutually inverse") {
    Rng rng(103);
    OccurrenceGenOptions opt;
    opt.max_events = 8;
    for (int trial = 0; trial < 200; ++trial) {
        const auto o = random_occurrence_net(rng, opt);
        const auto configs = configurations(o);
        std::set<Marking> cuts;
        for (const auto& x : configs) {
            CHECK(is_configuration(o, x));
            const Marking m = cut_of(o, x);
            CHECK(config_of_marking(o, m) == x);
            cuts.insert(m);
        }
        CHECK(cuts.size() == configs.size());
        // Reachable markings of the net are exactly the cuts.
        const auto reach = reachable_markings(o.as_petri_net());
        CHECK(std::set<Marking>(reach.begin(), reach.end()) == cuts);
    }
}

TEST_CASE("intervals and restriction") {
    const auto xyz = chain_xyz();
    const auto full = interval(xyz, {1}, {3});
    CHECK(full.conditions == NodeSet{1, 2, 3});
    CHECK(full.transitions == NodeSet{10, 11});

    const auto empty = interval(xyz, {2}, {2});
    CHECK(empty.conditions == NodeSet{2});
    CHECK(empty.transitions.empty());
    CHECK_THROWS_AS(interval(xyz, {3}, {1}), NotReachable);

    const auto r = restrict(xyz, interval(xyz, {2}, {3}));
    CHECK(r.places() == NodeSet{2, 3});
    CHECK(r.transition_ids() == NodeSet{11});
    CHECK(r.flow().size() == 2);
}

TEST_CASE("every firing sequence between two markings covers the same interval") {
    Rng rng(107);
    for (int trial = 0; trial < 100; ++trial) {
        const auto o = random_occurrence_net(rng);
        const auto configs = configurations(o);
        const auto net = o.as_petri_net();
        for (const auto& x : configs) {
            for (const auto& y : configs) {
                if (!std::includes(y.begin(), y.end(), x.begin(), x.end())) continue;
                const Marking m = cut_of(o, x);
                const Marking m2 = cut_of(o, y);
                const auto i = interval(o, m, m2);
                const auto seqs = firing_sequences(net, m, m2, y.size() - x.size());
                REQUIRE_FALSE(seqs.empty());
                for (const auto& seq : seqs) {
                    NodeSet touched = m;
                    Marking cur = m;
                    for (NodeId t : seq) {
                        cur = fire(net, cur, t);
                        touched.insert(cur.begin(), cur.end());
                    }
                    CHECK(touched == i.conditions);
                    CHECK(NodeSet(seq.begin(), seq.end()) == i.transitions);
                }
            }
        }
    }
}

TEST_CASE("single extensions and clusters") {
    const auto xyz = chain_xyz();
    CHECK(single_extensions(xyz, {}) == NodeSet{10});
    // {} -> {e1} is a single extension; {} -> {e1, e2} is not.
    CHECK_FALSE(single_extensions(xyz, {}).count(11));

    NetBuilder pair;
    for (NodeId c : {1, 2, 3}) pair.place(c);
    pair.transition(10, kPos, {1}, {2});
    pair.transition(11, kPos, {1}, {3});
    const OccurrenceNet two(pair.build(), {1});
    const auto cl = conflict_clusters(two, {});
    REQUIRE(cl.size() == 1);
    CHECK(cl[0].events.size() == 2);
    CHECK(cl[0].is_clique);

    NetBuilder path;
    for (NodeId c : {1, 2, 3, 4, 5}) path.place(c);
    path.transition(10, kPos, {1}, {3});
    path.transition(11, kNeu, {1, 2}, {4});
    path.transition(12, kPos, {2}, {5});
    const OccurrenceNet p(path.build(), {1, 2});
    const auto pc = conflict_clusters(p, {});
    REQUIRE(pc.size() == 1);
    CHECK(pc[0].events == std::vector<NodeId>{10, 11, 12});
    CHECK(pc[0].edges.size() == 2);
    CHECK_FALSE(pc[0].is_clique);

    // Negative events are left out of clusters.
    NetBuilder neg;
    for (NodeId c : {1, 2, 3}) neg.place(c);
    neg.transition(10, kNeg, {1}, {2});
    neg.transition(11, kPos, {1}, {3});
    const auto nc = conflict_clusters(OccurrenceNet(neg.build(), {1}), {});
    REQUIRE(nc.size() == 1);
    CHECK(nc[0].events == std::vector<NodeId>{11});
}

TEST_CASE("clusters partition the enabled non-negative events") {
    Rng rng(109);
    for (int trial = 0; trial < 200; ++trial) {
        const auto o = random_occurrence_net(rng);
        for (const auto& x : configurations(o)) {
            NodeSet expected;
            for (NodeId e : single_extensions(o, x)) {
                if (o.skeleton().polarity(e) != kNeg) expected.insert(e);
            }
            const auto clusters = conflict_clusters(o, x);
            NodeSet seen;
            for (const auto& c : clusters) {
                for (NodeId e : c.events) CHECK(seen.insert(e).second);
                for (const auto& [a, b] : c.edges) CHECK(o.conflict(a, b));
            }
            CHECK(seen == expected);
            // No conflict crosses two clusters.
            for (std::size_t i = 0; i < clusters.size(); ++i) {
                for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                    for (NodeId a : clusters[i].events) {
                        for (NodeId b : clusters[j].events) CHECK_FALSE(o.conflict(a, b));
                    }
                }
            }
        }
    }
}

TEST_CASE("race freedom") {
    auto conflict_pair = [](Polarity a, Polarity b) {
        NetBuilder nb;
        for (NodeId c : {1, 2, 3}) nb.place(c);
        nb.transition(10, a, {1}, {2});
        nb.transition(11, b, {1}, {3});
        return nb.build();
    };
    CHECK(is_race_free(conflict_pair(kNeg, kNeg)));
    CHECK_FALSE(is_race_free(conflict_pair(kNeg, kPos)));
    CHECK(is_race_free(conflict_pair(kPos, kPos)));
    CHECK(is_race_free(conflict_pair(kNeu, kPos)));
    CHECK(conflict_components(conflict_pair(kPos, kPos)).size() == 1);
}

TEST_CASE("single extensions agree with the configuration definition") {
    Rng rng(113);
    for (int trial = 0; trial < 200; ++trial) {
        const auto o = random_occurrence_net(rng);
        for (const auto& x : configurations(o)) {
            const auto ext = single_extensions(o, x);
            for (NodeId e : o.events()) {
                if (x.count(e)) continue;
                Configuration y = x;
                y.insert(e);
                CHECK(ext.count(e) == static_cast<std::size_t>(is_configuration(o, y)));
            }
        }
    }
}
