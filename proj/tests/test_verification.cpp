#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qpn/errors.hpp"
#include "qpn/verification.hpp"
#include "support/annotation_gen.hpp"
#include "support/net_gen.hpp"

using namespace qpn;
using namespace qpn::testing;

namespace {

constexpr auto kNeg = Polarity::Negative;
constexpr auto kNeu = Polarity::Neutral;
constexpr auto kPos = Polarity::Positive;

/// Conditions with given dimensions, all initially marked; each event gets a
/// fresh post-condition of the same dimension as its input.
struct CutFixture {
    NetBuilder b;
    LocalAnnotation ann;
    NodeSet c0;

    void condition(NodeId c, std::size_t d) {
        b.place(c);
        ann.qdim[c] = d;
        c0.insert(c);
    }
    void event(NodeId e, Polarity pol, const std::vector<NodeId>& pre, std::vector<Matrix> kraus) {
        const NodeId post = 1000 + e;
        b.place(post);
        b.transition(e, pol, pre, {post});
        std::size_t din = 1;
        for (NodeId c : pre) din *= ann.qdim.at(c);
        ann.qdim[post] = din;
        if (pol != kNeu) ann.hdim[e] = 1;
        ann.event_map.emplace(e, QuantumMap::from_kraus(din, din, std::move(kraus)));
    }
    OccurrenceNet occ() const { return OccurrenceNet(b.build(), c0); }
    PetriNet net() const { return PetriNet(b.build(), c0); }
};

Matrix eye(std::size_t d) { return Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)); }

Matrix basis_projector(std::size_t d, std::size_t i) { return projector(d, {i}); }

/// Path e1 # e2 # ... where neighbours share one condition; all spaces are
/// one-dimensional and every event has effect `p`.
CutFixture conflict_path(NodeId n, double p) {
    CutFixture f;
    for (NodeId c = 0; c <= n; ++c) f.condition(c, 1);
    for (NodeId e = 1; e <= n; ++e) f.event(10 + e, kNeu, {e - 1, e}, {std::sqrt(p) * eye(1)});
    return f;
}

CutFixture path_of_four() { return conflict_path(4, 1.0); }

double quadratic_form(const Matrix& m, const Vector& v) { return (v.adjoint() * m * v)(0, 0).real(); }

}  // namespace

TEST_CASE("obliviousness of negative events") {
    CutFixture f;
    f.condition(1, 2);
    f.event(10, kNeg, {1}, {eye(2)});
    f.event(11, kNeu, {1}, {Matrix(basis_projector(2, 0))});
    const auto o = f.occ();
    const auto ok = check_local_obliviousness(o.skeleton(), f.ann);
    CHECK(ok.verdict == Verdict::Pass);
    CHECK(ok.witnesses.empty());
    CHECK(ok.distance.size() == 1);
    CHECK(ok.distance.at(10) < 1e-14);

    LocalAnnotation flipped = f.ann;
    Matrix x = Matrix::Zero(2, 2);
    x(0, 1) = 1.0;
    x(1, 0) = 1.0;
    flipped.event_map.erase(10);
    flipped.event_map.emplace(10, QuantumMap::from_kraus(2, 2, {x}));
    const auto bad = check_local_obliviousness(o.skeleton(), flipped);
    CHECK(bad.verdict == Verdict::Fail);
    CHECK(bad.witnesses == std::vector<NodeId>{10});
    CHECK(bad.distance.at(10) > 0.1);

    // Well typed but not square: pre 2, H 2, post 3.
    NetBuilder b;
    b.place(1);
    b.place(2);
    b.transition(10, kNeg, {1}, {2});
    LocalAnnotation rect;
    rect.qdim = {{1, 2}, {2, 3}};
    rect.hdim[10] = 2;
    Matrix k = Matrix::Zero(3, 4);
    k(0, 0) = 1.0;
    rect.event_map.emplace(10, QuantumMap::from_kraus(4, 3, {k}));
    const auto r = check_local_obliviousness(b.build(), rect);
    CHECK(r.verdict == Verdict::Fail);
    CHECK(r.witnesses == std::vector<NodeId>{10});
}

TEST_CASE("drop effects of small clusters") {
    SUBCASE("complete measurement gives zero") {
        CutFixture f;
        f.condition(1, 2);
        f.event(10, kPos, {1}, {Matrix(basis_projector(2, 0))});
        f.event(11, kPos, {1}, {Matrix(basis_projector(2, 1))});
        const auto o = f.occ();
        const auto ctx = make_extension_context(o.skeleton(), f.ann, o.initial_cut(), {11, 10});
        CHECK(ctx.events == std::vector<NodeId>{10, 11});
        CHECK(drop_effect(ctx, o.skeleton(), f.ann).norm() < 1e-14);
        CHECK(drop_effect_clique_fast(ctx, o.skeleton(), f.ann).norm() < 1e-14);
        CHECK(check_local_drop(o, f.ann).verdict == Verdict::Pass);
    }
    SUBCASE("two identities in conflict give minus the identity") {
        CutFixture f;
        f.condition(1, 2);
        f.event(10, kNeu, {1}, {eye(2)});
        f.event(11, kNeu, {1}, {eye(2)});
        const auto o = f.occ();
        const auto ctx = make_extension_context(o.skeleton(), f.ann, o.initial_cut(), {10, 11});
        CHECK((drop_effect(ctx, o.skeleton(), f.ann) + eye(2)).norm() < 1e-14);
        const auto report = check_local_drop(o, f.ann);
        CHECK(report.verdict == Verdict::Fail);
        const DropEntry* bad = report.first_failure();
        REQUIRE(bad != nullptr);
        CHECK(bad->min_eigenvalue == doctest::Approx(-1.0));
        CHECK(quadratic_form(bad->effect, bad->witness) == doctest::Approx(-1.0));
        CHECK(bad->witness.norm() == doctest::Approx(1.0));
    }
    SUBCASE("a single sub-normalised event") {
        Rng rng(3);
        CutFixture f;
        f.condition(1, 3);
        const Matrix k = random_contraction(rng, 3, 3, 0.8);
        f.event(10, kPos, {1}, {k});
        const auto o = f.occ();
        const auto ctx = make_extension_context(o.skeleton(), f.ann, o.initial_cut(), {10});
        const Matrix expected = eye(3) - k.adjoint() * k;
        CHECK((drop_effect_clique_fast(ctx, o.skeleton(), f.ann) - expected).norm() < 1e-12);
        CHECK((drop_effect(ctx, o.skeleton(), f.ann) - expected).norm() < 1e-12);
    }
    SUBCASE("independent events multiply") {
        CutFixture f;
        f.condition(1, 2);
        f.condition(2, 2);
        f.event(10, kNeu, {1}, {Matrix(basis_projector(2, 0))});
        f.event(11, kNeu, {2}, {Matrix(basis_projector(2, 1))});
        const auto o = f.occ();
        const auto ctx = make_extension_context(o.skeleton(), f.ann, o.initial_cut(), {10, 11});
        const Matrix expected = kron(basis_projector(2, 1), basis_projector(2, 0));
        CHECK((drop_effect(ctx, o.skeleton(), f.ann) - expected).norm() < 1e-14);
        CHECK_THROWS_AS(drop_effect_clique_fast(ctx, o.skeleton(), f.ann), InvalidInput);
    }
}

TEST_CASE("extension contexts reject bad events") {
    CutFixture f;
    f.condition(1, 2);
    f.condition(2, 2);
    f.event(10, kNeg, {1}, {eye(2)});
    f.event(11, kNeu, {2}, {eye(2)});
    const auto o = f.occ();
    CHECK_THROWS_AS(make_extension_context(o.skeleton(), f.ann, o.initial_cut(), {10}), InvalidInput);
    CHECK_THROWS_AS(make_extension_context(o.skeleton(), f.ann, {1}, {11}), InvalidInput);
    CHECK_THROWS_AS(make_extension_context(o.skeleton(), f.ann, o.initial_cut(), {1}), InvalidInput);
    const auto ctx = make_extension_context(o.skeleton(), f.ann, o.initial_cut(), {11, 11});
    CHECK(ctx.events.size() == 1);
    CHECK(ctx.untouched() == NodeSet{1});
}

TEST_CASE("a path of conflicts fails on a connected sub-family") {
    const CutFixture f = path_of_four();
    const auto o = f.occ();
    const auto ctx = make_extension_context(o.skeleton(), f.ann, o.initial_cut(), {11, 12, 13, 14});
    // The whole cluster sums to 1 - 4 + 3 = 0.
    CHECK(std::abs(drop_effect(ctx, o.skeleton(), f.ann)(0, 0).real()) < 1e-14);
    const auto report = check_local_drop(o, f.ann);
    CHECK(report.verdict == Verdict::Fail);
    const DropEntry* bad = report.first_failure();
    REQUIRE(bad != nullptr);
    CHECK(bad->cluster.size() == 4);
    CHECK_FALSE(bad->clique);
    CHECK(bad->family.size() < 4);
    CHECK(bad->min_eigenvalue == doctest::Approx(-1.0));
    // The global oracle agrees.
    const auto oracle = global_drop_oracle(o, f.ann, {4096, 4, 200000});
    CHECK(oracle.verdict == Verdict::Fail);
}

TEST_CASE("caps make the local check inconclusive") {
    // Effects 0.3 on a path of three: every sub-family passes.
    const CutFixture f = conflict_path(3, 0.3);
    const auto o = f.occ();
    CHECK(check_local_drop(o, f.ann).verdict == Verdict::Pass);
    DropBounds one;
    one.max_subfamilies = 1;
    const auto r = check_local_drop(o, f.ann, one);
    CHECK(r.verdict == Verdict::Inconclusive);
    CHECK_FALSE(r.note.empty());

    DropBounds few_states;
    few_states.max_states = 2;
    CHECK(check_local_drop(o, f.ann, few_states).verdict == Verdict::Inconclusive);
    CHECK(check_local_drop(f.net(), f.ann, few_states).verdict == Verdict::Inconclusive);

    DropBounds few_subsets;
    few_subsets.max_subsets = 3;
    CHECK(check_local_drop(o, f.ann, few_subsets).verdict != Verdict::Pass);

    OracleBounds tiny;
    tiny.max_configs = 2;
    CHECK(global_drop_oracle(o, f.ann, tiny).verdict == Verdict::Inconclusive);
}

TEST_CASE("clique shortcut agrees with the full sum") {
    Rng rng(11);
    for (int round = 0; round < 100; ++round) {
        CutFixture f;
        const std::size_t d = static_cast<std::size_t>(rng.range(1, 3));
        f.condition(1, d);
        f.condition(2, 2);
        const int n = rng.range(1, 4);
        std::vector<NodeId> events;
        for (int i = 0; i < n; ++i) {
            const NodeId e = 10 + i;
            const bool wide = rng.coin();
            const std::size_t din = wide ? d * 2 : d;
            const auto m = random_map(rng, din, din, MapKind::Channel);
            f.event(e, kNeu, wide ? std::vector<NodeId>{1, 2} : std::vector<NodeId>{1}, m.kraus());
            events.push_back(e);
        }
        const auto o = f.occ();
        const auto ctx = make_extension_context(o.skeleton(), f.ann, o.initial_cut(), events);
        const Matrix slow = drop_effect(ctx, o.skeleton(), f.ann);
        const Matrix fast = drop_effect_clique_fast(ctx, o.skeleton(), f.ann);
        CHECK((slow - fast).norm() <= 1e-12);
    }
}

TEST_CASE("drop of independent groups factorises") {
    Rng rng(12);
    for (int round = 0; round < 60; ++round) {
        CutFixture f;
        for (NodeId c = 1; c <= 4; ++c) f.condition(c, static_cast<std::size_t>(rng.range(1, 2)));
        // Group A on conditions 1, 2 and group B on 3, 4.
        std::vector<NodeId> a;
        std::vector<NodeId> b;
        NodeId next = 10;
        for (auto* group : {&a, &b}) {
            const NodeId lo = group == &a ? 1 : 3;
            const int n = rng.range(1, 3);
            for (int i = 0; i < n; ++i) {
                std::vector<NodeId> pre;
                const int shape = rng.range(0, 2);
                if (shape != 1) pre.push_back(lo);
                if (shape != 0) pre.push_back(lo + 1);
                std::size_t din = 1;
                for (NodeId c : pre) din *= f.ann.qdim.at(c);
                f.event(next, kPos, pre, random_map(rng, din, din, random_kind(rng, {})).kraus());
                group->push_back(next++);
            }
        }
        const auto o = f.occ();
        const auto& s = o.skeleton();
        std::vector<NodeId> all = a;
        all.insert(all.end(), b.begin(), b.end());
        const auto whole = make_extension_context(s, f.ann, o.initial_cut(), all);
        const auto ca = make_extension_context(s, f.ann, o.initial_cut(), a);
        const auto cb = make_extension_context(s, f.ann, o.initial_cut(), b);
        const Matrix product = drop_effect(ca, s, f.ann) * drop_effect(cb, s, f.ann);
        CHECK((drop_effect(whole, s, f.ann) - product).norm() <= 1e-10);
    }
}

TEST_CASE("local sums match the global definition on single extensions") {
    Rng rng(21);
    OccurrenceGenOptions net_opt;
    net_opt.negative_weight = 0.5;
    AnnotationGenOptions ann_opt;
    ann_opt.max_qdim = 2;
    std::size_t compared = 0;
    for (int round = 0; round < 60; ++round) {
        const OccurrenceNet o = random_occurrence_net(rng, net_opt);
        const LocalAnnotation ann = random_annotation(rng, o.skeleton(), ann_opt);
        for (const auto& x : configurations(o)) {
            for (const auto& cluster : conflict_clusters(o, x)) {
                std::vector<Configuration> family;
                for (NodeId e : cluster.events) {
                    Configuration y = x;
                    y.insert(e);
                    family.push_back(y);
                }
                const auto ctx = make_extension_context(o.skeleton(), ann, cut_of(o, x), cluster.events);
                const Matrix local = drop_effect(ctx, o.skeleton(), ann);
                CHECK((local - drop_effect_direct(o, ann, x, family)).norm() <= 1e-10);
                ++compared;
            }
        }
    }
    CHECK(compared > 60);
}

TEST_CASE("recursive and direct drop agree") {
    Rng rng(31);
    OccurrenceGenOptions net_opt;
    net_opt.negative_weight = 0.3;
    net_opt.max_events = 6;
    AnnotationGenOptions ann_opt;
    ann_opt.max_qdim = 2;
    std::size_t compared = 0;
    for (int round = 0; round < 80; ++round) {
        const OccurrenceNet o = random_occurrence_net(rng, net_opt);
        const LocalAnnotation ann = random_annotation(rng, o.skeleton(), ann_opt);
        const auto configs = configurations(o);
        const Configuration& x = rng.pick(configs);
        const auto ext = positive_extensions(o, x);
        if (ext.empty()) continue;
        std::vector<Configuration> family;
        const int n = rng.range(1, 3);
        for (int i = 0; i < n; ++i) family.push_back(rng.pick(ext));
        if (rng.coin(0.2)) family.push_back(x);
        const Matrix direct = drop_effect_direct(o, ann, x, family);
        const Matrix rec = drop_effect_recursive(o, ann, x, family);
        CAPTURE(round);
        CHECK((direct - rec).norm() <= 1e-9);
        ++compared;
    }
    CHECK(compared > 30);

    // A member equal to x cancels everything.
    CutFixture f;
    f.condition(1, 2);
    f.event(10, kPos, {1}, {Matrix(basis_projector(2, 0))});
    const auto o = f.occ();
    const std::vector<Configuration> with_x{{}, {10}};
    CHECK(drop_effect_direct(o, f.ann, {}, with_x).norm() < 1e-14);
    CHECK(drop_effect_recursive(o, f.ann, {}, with_x).norm() < 1e-14);
    CHECK_THROWS_AS(drop_effect_direct(o, f.ann, {10}, {Configuration{}}), InvalidInput);
}

TEST_CASE("positive extensions skip negative events") {
    NetBuilder b;
    for (NodeId c : {1, 2, 3, 4}) b.place(c);
    b.transition(10, kPos, {1}, {2});
    b.transition(11, kNeg, {2}, {3});
    b.transition(12, kNeu, {2}, {4});
    const OccurrenceNet o(b.build(), {1});
    const auto ext = positive_extensions(o, {});
    REQUIRE(ext.size() == 2);
    CHECK(ext[0] == Configuration{10});
    CHECK(ext[1] == Configuration{10, 12});
    CHECK(positive_extensions(o, {10, 11}).empty());
    CHECK_THROWS_AS(positive_extensions(o, {}, 1), CapExceeded);
}

TEST_CASE("local check agrees with the global oracle") {
    Rng rng(41);
    OccurrenceGenOptions net_opt;
    net_opt.max_events = 5;
    AnnotationGenOptions ann_opt;
    ann_opt.max_qdim = 2;
    ann_opt.channel_weight = 0.3;
    int pass = 0;
    int fail = 0;
    for (int round = 0; round < 120; ++round) {
        const OccurrenceNet o = random_occurrence_net(rng, net_opt);
        const LocalAnnotation ann = random_annotation(rng, o.skeleton(), ann_opt);
        const auto local = check_local_drop(o, ann);
        std::size_t widest = 1;
        for (const auto& x : configurations(o)) {
            for (const auto& c : conflict_clusters(o, x)) widest = std::max(widest, c.events.size());
        }
        OracleBounds ob;
        ob.max_family = std::max<std::size_t>(widest, 3);
        const auto oracle = global_drop_oracle(o, ann, ob);
        CAPTURE(round);
        REQUIRE(local.verdict != Verdict::Inconclusive);
        REQUIRE(oracle.verdict != Verdict::Inconclusive);
        CHECK(local.verdict == oracle.verdict);
        (local.verdict == Verdict::Pass ? pass : fail)++;
    }
    CHECK(pass > 10);
    CHECK(fail > 10);
}

TEST_CASE("workers do not change the report") {
    Rng rng(51);
    for (int round = 0; round < 20; ++round) {
        const PetriNet net = random_safe_net(rng);
        const LocalAnnotation ann = random_annotation(rng, net.skeleton());
        DropBounds serial;
        DropBounds parallel;
        parallel.workers = 4;
        const auto a = check_local_drop(net, ann, serial);
        const auto b = check_local_drop(net, ann, parallel);
        CHECK(a.verdict == b.verdict);
        CHECK(a.states == b.states);
        CHECK(a.families == b.families);
        REQUIRE(a.entries.size() == b.entries.size());
        for (std::size_t i = 0; i < a.entries.size(); ++i) {
            CHECK(a.entries[i].cut == b.entries[i].cut);
            CHECK(a.entries[i].family == b.entries[i].family);
            CHECK(a.entries[i].min_eigenvalue == b.entries[i].min_eigenvalue);
        }
    }
}

TEST_CASE("certifying annotated nets") {
    // A measurement on place 1, followed by a negative event that hands the
    // qubit back together with a fresh environment qubit.
    NetBuilder b;
    for (NodeId p : {1, 2, 3}) b.place(p);
    b.transition(10, kPos, {1}, {2});
    b.transition(11, kPos, {1}, {2});
    b.transition(12, kNeg, {2}, {3});
    const PetriNet net(b.build(), {1});
    LocalAnnotation ann;
    ann.qdim = {{1, 2}, {2, 2}, {3, 4}};
    ann.hdim = {{10, 1}, {11, 1}, {12, 2}};
    ann.event_map.emplace(10, QuantumMap::from_kraus(2, 2, {basis_projector(2, 0)}));
    ann.event_map.emplace(11, QuantumMap::from_kraus(2, 2, {basis_projector(2, 1)}));
    ann.event_map.emplace(12, identity_map(4));

    CertifyOptions opt;
    opt.corroborate = UnfoldLimit{64, 4};
    const auto good = certify_qpn(net, ann, opt);
    CHECK(good.certified() == Verdict::Pass);
    CHECK(good.race_free);
    REQUIRE(good.corroboration.has_value());
    CHECK(good.corroboration->events == 4);
    CHECK(good.corroboration->drop == Verdict::Pass);

    LocalAnnotation doubled = ann;
    doubled.event_map.erase(11);
    doubled.event_map.emplace(11, identity_map(2));
    const auto bad = certify_qpn(net, doubled, opt);
    CHECK(bad.certified() == Verdict::Fail);
    CHECK(bad.drop.verdict == Verdict::Fail);
    CHECK(bad.corroboration->drop == Verdict::Fail);

    LocalAnnotation leaky = ann;
    leaky.event_map.erase(12);
    leaky.event_map.emplace(12, QuantumMap::from_kraus(4, 4, {basis_projector(4, 0)}));
    CHECK(certify_qpn(net, leaky).certified() == Verdict::Fail);

    LocalAnnotation untyped = ann;
    untyped.hdim[12] = 3;
    const auto ill = certify_qpn(net, untyped);
    CHECK(ill.certified() == Verdict::Fail);
    CHECK_FALSE(ill.signature.empty());
}

TEST_CASE("prefix corroboration never contradicts a passing net") {
    Rng rng(61);
    AnnotationGenOptions ann_opt;
    ann_opt.channel_weight = 0.2;
    int passing = 0;
    for (int round = 0; round < 50; ++round) {
        const PetriNet net = random_safe_net(rng);
        const LocalAnnotation ann = random_annotation(rng, net.skeleton(), ann_opt);
        CertifyOptions opt;
        opt.corroborate = UnfoldLimit{60, 3};
        const auto r = certify_qpn(net, ann, opt);
        REQUIRE(r.corroboration.has_value());
        CAPTURE(round);
        if (r.drop.verdict == Verdict::Pass) {
            ++passing;
            CHECK(r.corroboration->drop != Verdict::Fail);
        }
        if (r.obliviousness.verdict == Verdict::Pass) CHECK(r.corroboration->obliviousness == Verdict::Pass);
    }
    CHECK(passing > 5);
}
