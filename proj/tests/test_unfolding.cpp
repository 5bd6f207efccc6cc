#include <doctest.h>

#include <algorithm>

#include "qpn/errors.hpp"
#include "qpn/unfolding.hpp"
#include "support/annotation_gen.hpp"
#include "support/net_gen.hpp"

using namespace qpn;
using namespace qpn::testing;

namespace {

constexpr auto kNeu = Polarity::Neutral;

PetriNet single_transition() {
    NetBuilder b;
    b.place(1);
    b.place(2);
    b.transition(7, Polarity::Positive, {1}, {2});
    return PetriNet(b.build(), {1});
}

PetriNet self_loop() {
    NetBuilder b;
    b.place(1);
    b.transition(5, kNeu, {1}, {1});
    return PetriNet(b.build(), {1});
}

PetriNet four_place_net() {
    NetBuilder b;
    for (NodeId p : {1, 2, 3, 4}) b.place(p);
    b.transition(11, kNeu, {1}, {2});
    b.transition(12, kNeu, {1}, {3});
    b.transition(13, kNeu, {2, 4}, {1, 4});
    b.transition(14, kNeu, {3}, {1});
    return PetriNet(b.build(), {1, 4});
}


}  // namespace

TEST_CASE("unfolding a single transition") {
    const auto net = single_transition();
    const auto bp = unfold(net);
    const auto& s = bp.occ.skeleton();
    CHECK(bp.occ.events().size() == 1);
    CHECK(s.places().size() == 2);
    const NodeId e = *bp.occ.events().begin();
    CHECK(bp.labels.at(e) == 7);
    CHECK(s.polarity(e) == Polarity::Positive);
    CHECK(bp.project(s.preset(e)) == NodeSet{1});
    CHECK(bp.project(s.postset(e)) == NodeSet{2});
    CHECK(bp.saturated);
}

TEST_CASE("the four-place net unfolds to its two-branch prefix") {
    const auto net = four_place_net();
    const auto bp = unfold(net, {100, 2});
    const auto& s = bp.occ.skeleton();
    REQUIRE(bp.occ.events().size() == 4);
    // Deterministic numbering: initial conditions 0 (place 1) and 1 (place 4).
    CHECK(bp.occ.initial_cut() == NodeSet{0, 1});
    CHECK(bp.labels.at(2) == 11);
    CHECK(bp.labels.at(4) == 12);
    CHECK(bp.labels.at(6) == 13);
    CHECK(bp.labels.at(9) == 14);
    CHECK(s.preset(2) == NodeSet{0});
    CHECK(s.preset(4) == NodeSet{0});
    CHECK(s.preset(6) == NodeSet{1, 3});
    CHECK(s.preset(9) == NodeSet{5});
    CHECK(bp.project(s.postset(6)) == NodeSet{1, 4});
    CHECK(bp.occ.conflict(2, 4));
    CHECK(bp.occ.conflict(6, 9));
    CHECK(validate_branching_process(net, bp).ok());
}

TEST_CASE("self-loop unfolds into a causal chain") {
    const auto net = self_loop();
    const auto bp = unfold(net, {100, 3});
    const auto events = bp.occ.events();
    REQUIRE(events.size() == 3);
    const std::vector<NodeId> ev(events.begin(), events.end());
    CHECK(bp.occ.leq(ev[0], ev[1]));
    CHECK(bp.occ.leq(ev[1], ev[2]));
    for (NodeId e : ev) CHECK(bp.labels.at(e) == 5);
    CHECK(bp.depth.at(ev[2]) == 3);
}

TEST_CASE("zero limits give the event-free process") {
    const auto net = four_place_net();
    for (const UnfoldLimit lim : {UnfoldLimit{0, 5}, UnfoldLimit{5, 0}}) {
        const auto bp = unfold(net, lim);
        CHECK(bp.occ.events().empty());
        CHECK(bp.project(bp.occ.initial_cut()) == net.initial_marking());
    }
    CHECK_FALSE(unfold(net, {0, 5}).saturated);
    CHECK(unfold(net, {5, 0}).saturated);
}

TEST_CASE("unsafe nets are rejected while unfolding") {
    NetBuilder b;
    b.place(1);
    b.place(2);
    b.transition(3, kNeu, {1}, {1, 2});
    CHECK_THROWS_AS(unfold(PetriNet(b.build(), {1}), {10, 4}), SafetyViolation);

    NetBuilder empty_pre;
    empty_pre.place(1);
    empty_pre.transition(2, kNeu, {}, {1});
    CHECK_THROWS_AS(unfold(PetriNet(empty_pre.build(), {}), {10, 4}), InvalidInput);
}

TEST_CASE("validation catches duplicated and relabelled events") {
    const auto net = four_place_net();
    const auto bp = unfold(net, {100, 2});
    const auto r = validate_branching_process(net, bp);
    REQUIRE(r.clauses.size() == 4);
    CHECK(r.ok());

    // Duplicate of event 2 (label 11, pre-set {0}).
    NetBuilder dup;
    const auto& s = bp.occ.skeleton();
    dup.places = s.places();
    dup.transitions = s.transitions();
    dup.flow.assign(s.flow().begin(), s.flow().end());
    dup.place(50);
    dup.transition(51, kNeu, {0}, {50});
    BranchingProcess bad{OccurrenceNet(dup.build(), bp.occ.initial_cut()), bp.labels, bp.depth, true};
    bad.labels[50] = 2;
    bad.labels[51] = 11;
    const auto rd = validate_branching_process(net, bad);
    CHECK(rd.clauses[0].passed);
    CHECK(rd.clauses[1].passed);
    CHECK(rd.clauses[2].passed);
    CHECK_FALSE(rd.clauses[3].passed);
    CHECK(*rd.clauses[3].witness == 51);

    // Condition 3 (place 2) relabelled to place 3: the pre-set of event 6 no
    // longer matches transition 13.
    BranchingProcess relabelled = bp;
    relabelled.labels[3] = 3;
    const auto rr = validate_branching_process(net, relabelled);
    CHECK(rr.clauses[0].passed);
    CHECK_FALSE(rr.clauses[1].passed);
    CHECK(rr.clauses[1].witness.has_value());

    BranchingProcess wrong_kind = bp;
    wrong_kind.labels[2] = 1;
    CHECK_FALSE(validate_branching_process(net, wrong_kind).clauses[0].passed);

    BranchingProcess wrong_initial = bp;
    wrong_initial.labels[1] = 2;
    CHECK_FALSE(validate_branching_process(net, wrong_initial).clauses[2].passed);
}

TEST_CASE("lifting copies maps onto every instance") {
    const auto net = self_loop();
    LocalAnnotation ann;
    ann.qdim[1] = 2;
    Rng rng(7);
    ann.event_map.emplace(5, random_map(rng, 2, 2, MapKind::Channel));
    const auto bp = unfold(net, {100, 3});
    const auto lifted = lift_annotation(bp, ann);
    CHECK(signature_issues(bp.occ.skeleton(), lifted).empty());
    for (NodeId e : bp.occ.events()) CHECK(choi_distance(lifted.event_map.at(e), ann.event_map.at(5)) < 1e-14);

    LocalAnnotation missing = ann;
    missing.event_map.clear();
    CHECK_THROWS_AS(lift_annotation(bp, missing), IllTypedAnnotation);
}

TEST_CASE("lifting reorders slots when condition order differs from place order") {
    // Place 1 is refilled by transition 8, so the instance of place 1 consumed
    // by transition 9 has a larger id than the instance of place 2.
    NetBuilder b;
    for (NodeId p : {1, 2, 3}) b.place(p);
    b.transition(8, kNeu, {3}, {1});
    b.transition(9, kNeu, {1, 2}, {2, 3});
    const PetriNet net(b.build(), {2, 3});
    Rng rng(3);
    LocalAnnotation ann;
    ann.qdim = {{1, 2}, {2, 3}, {3, 3}};
    ann.event_map.emplace(8, random_map(rng, 3, 2, MapKind::Channel));
    ann.event_map.emplace(9, random_map(rng, 6, 9, MapKind::Channel));
    const auto bp = unfold(net, {100, 6});
    const auto lifted = lift_annotation(bp, ann);
    const auto& s = bp.occ.skeleton();
    CHECK(signature_issues(s, lifted).empty());
    std::size_t reversed = 0;
    for (NodeId e : bp.occ.events()) {
        if (bp.labels.at(e) != 9) continue;
        const Matrix r1 = random_density(rng, 2);
        const Matrix r2 = random_density(rng, 3);
        const Matrix base_out = ann.event_map.at(9).apply(kron(r1, r2));
        const std::vector<NodeId> pre(s.preset(e).begin(), s.preset(e).end());
        const bool place_order = bp.labels.at(pre[0]) == 1;
        if (!place_order) ++reversed;
        const Matrix in = place_order ? kron(r1, r2) : kron(r2, r1);
        const std::vector<NodeId> post(s.postset(e).begin(), s.postset(e).end());
        REQUIRE(bp.labels.at(post[0]) == 2);
        CHECK((lifted.event_map.at(e).apply(in) - base_out).norm() < 1e-12);
    }
    CHECK(reversed > 0);
}

TEST_CASE("unfolding properties on random safe nets") {
    Rng rng(2024);
    for (int round = 0; round < 60; ++round) {
        const PetriNet net = random_safe_net(rng);
        const UnfoldLimit small{200, 3};
        const UnfoldLimit large{200, 4};
        const auto bp = unfold(net, small);
        CAPTURE(round);
        CHECK(validate_branching_process(net, bp).ok());

        // Label soundness: every reachable prefix marking projects onto a
        // reachable marking of the base net.
        const auto base_reach = reachable_markings(net);
        const std::set<Marking> reach(base_reach.begin(), base_reach.end());
        for (const auto& m : reachable_markings(bp.occ.as_petri_net())) {
            const Marking projected = bp.project(m);
            CHECK(projected.size() == m.size());
            CHECK(reach.count(projected) == 1);
        }

        // Determinism and monotonicity.
        const auto again = unfold(net, small);
        CHECK(again.labels == bp.labels);
        CHECK(again.occ.skeleton().flow() == bp.occ.skeleton().flow());
        const auto bigger = unfold(net, large);
        if (bigger.saturated && bp.saturated) {
            for (const auto& [n, l] : bp.labels) CHECK(bigger.labels.at(n) == l);
            for (const Arc& a : bp.occ.skeleton().flow()) {
                const auto& f = bigger.occ.skeleton().flow();
                CHECK(f.count(a) == 1);
            }
        }

        // Lifted annotations stay well typed.
        const LocalAnnotation ann = random_annotation(rng, net.skeleton());
        REQUIRE(signature_issues(net.skeleton(), ann).empty());
        CHECK(signature_issues(bp.occ.skeleton(), lift_annotation(bp, ann)).empty());
    }
}
