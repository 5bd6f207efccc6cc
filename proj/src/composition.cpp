#include "qpn/composition.hpp"

#include <algorithm>
#include <set>

#include "qpn/errors.hpp"

namespace qpn {

namespace {

NodeSet all_ids(const NetSkeleton& s) {
    NodeSet ids = s.places();
    for (const auto& [t, pol] : s.transitions()) ids.insert(t);
    return ids;
}

std::string id(NodeId n) { return std::to_string(n); }

bool intersects(const NodeSet& a, const NodeSet& b) {
    return std::any_of(a.begin(), a.end(), [&](NodeId x) { return b.count(x) != 0; });
}

void require_certified(const AnnotatedNet& n, const CertifyOptions& options, const std::string& which) {
    const CertificationReport r = certify_qpn(n.net, n.ann, options);
    const Verdict v = r.certified();
    if (v != Verdict::Pass) throw InvalidInput(which + " is not certified (" + to_string(v) + ")");
}

using ConflictGraph = std::map<NodeId, NodeSet>;

ConflictGraph conflict_graph(const NetSkeleton& s) {
    ConflictGraph g;
    for (const auto& [a, b] : minimal_conflicts(s)) {
        g[a].insert(b);
        g[b].insert(a);
    }
    return g;
}

bool related(const ConflictGraph& g, NodeId a, NodeId b) {
    auto it = g.find(a);
    return it != g.end() && it->second.count(b) != 0;
}

/// True when `nodes` is connected in `g` restricted to `nodes`.
bool connected_within(const ConflictGraph& g, const NodeSet& nodes) {
    if (nodes.empty()) return false;
    NodeSet seen{*nodes.begin()};
    std::vector<NodeId> stack{*nodes.begin()};
    while (!stack.empty()) {
        const NodeId a = stack.back();
        stack.pop_back();
        auto it = g.find(a);
        if (it == g.end()) continue;
        for (NodeId b : it->second) {
            if (nodes.count(b) && seen.insert(b).second) stack.push_back(b);
        }
    }
    return seen.size() == nodes.size();
}

bool is_identity(const QuantumMap& m, double tol) {
    return m.input_dim() == m.output_dim() && choi_distance(m, identity_map(m.input_dim())) <= tol;
}

}  // namespace

AnnotatedNet shift_ids(const AnnotatedNet& n, NodeId offset) {
    const NetSkeleton& s = n.net.skeleton();
    NodeSet places;
    for (NodeId p : s.places()) places.insert(p + offset);
    std::map<NodeId, Polarity> transitions;
    for (const auto& [t, pol] : s.transitions()) transitions[t + offset] = pol;
    std::vector<Arc> flow;
    for (const Arc& a : s.flow()) flow.push_back({a.from + offset, a.to + offset});
    Marking m0;
    for (NodeId p : n.net.initial_marking()) m0.insert(p + offset);

    AnnotatedNet out{PetriNet(NetSkeleton(places, transitions, flow), m0), {}};
    for (const auto& [c, d] : n.ann.qdim) out.ann.qdim[c + offset] = d;
    for (const auto& [t, d] : n.ann.hdim) out.ann.hdim[t + offset] = d;
    for (const auto& [t, m] : n.ann.event_map) out.ann.event_map.emplace(t + offset, m);
    return out;
}

ParallelComposition parallel_compose(const AnnotatedNet& left, const AnnotatedNet& right,
                                     const CertifyOptions& options, bool recheck) {
    require_certified(left, options, "left operand");
    require_certified(right, options, "right operand");

    ParallelComposition out;
    const NodeSet lids = all_ids(left.net.skeleton());
    const NodeSet rids = all_ids(right.net.skeleton());
    if (!lids.empty() && !rids.empty() && intersects(lids, rids)) out.right_offset = *lids.rbegin() + 1 - *rids.begin();
    const AnnotatedNet r = shift_ids(right, out.right_offset);

    const NetSkeleton& ls = left.net.skeleton();
    const NetSkeleton& rs = r.net.skeleton();
    NodeSet places = ls.places();
    places.insert(rs.places().begin(), rs.places().end());
    std::map<NodeId, Polarity> transitions = ls.transitions();
    transitions.insert(rs.transitions().begin(), rs.transitions().end());
    std::vector<Arc> flow(ls.flow().begin(), ls.flow().end());
    flow.insert(flow.end(), rs.flow().begin(), rs.flow().end());
    Marking m0 = left.net.initial_marking();
    m0.insert(r.net.initial_marking().begin(), r.net.initial_marking().end());

    out.result.net = PetriNet(NetSkeleton(places, transitions, flow), m0);
    out.result.ann = left.ann;
    out.result.ann.qdim.insert(r.ann.qdim.begin(), r.ann.qdim.end());
    out.result.ann.hdim.insert(r.ann.hdim.begin(), r.ann.hdim.end());
    for (const auto& [t, m] : r.ann.event_map) out.result.ann.event_map.emplace(t, m);
    if (recheck) out.recheck = certify_qpn(out.result.net, out.result.ann, options);
    return out;
}

SingleJoin single_join(const AnnotatedNet& n, NodeId e, NodeId e2, std::optional<NodeId> fresh, double tol) {
    const NetSkeleton& s = n.net.skeleton();
    if (!s.is_transition(e) || !s.is_transition(e2)) {
        throw InvalidInput("join of " + id(e) + " and " + id(e2) + ": both must be events");
    }
    if (s.polarity(e) != Polarity::Positive || s.polarity(e2) != Polarity::Negative) {
        throw InvalidInput("polarity mismatch: join needs a positive and a negative event, got " + id(e) + " (" +
                           polarity_symbol(s.polarity(e)) + ") and " + id(e2) + " (" + polarity_symbol(s.polarity(e2)) +
                           ")");
    }
    const std::size_t h = effective_hdim(s, n.ann, e);
    if (h != effective_hdim(s, n.ann, e2)) {
        throw InvalidInput("H dimension mismatch between " + id(e) + " and " + id(e2));
    }
    if (intersects(s.preset(e), s.preset(e2))) throw InvalidInput("pre-sets of " + id(e) + " and " + id(e2) + " overlap");
    if (intersects(s.postset(e), s.postset(e2))) {
        throw InvalidInput("post-sets of " + id(e) + " and " + id(e2) + " overlap");
    }
    if (intersects(s.postset(e), s.preset(e2))) {
        throw InvalidInput("event " + id(e2) + " consumes a post-condition of " + id(e));
    }
    check_signatures(s, n.ann);
    if (!is_identity(n.ann.event_map.at(e2), tol)) {
        throw InvalidInput("negative event " + id(e2) + " is not annotated with the identity");
    }
    const NodeId j = fresh.value_or(s.max_id() + 1);
    if (s.contains(j)) throw InvalidInput("fresh id " + id(j) + " is already in use");

    // Q0(e) (x) Id on pre(e2), then Id on post(e) (x) Q0(e2), with the output
    // H slot of e feeding the input H slot of e2.
    const GlobalOperator op_e{n.ann.event_map.at(e), event_input_layout(s, n.ann, e), event_output_layout(s, n.ann, e)};
    std::vector<Factor> in2 = space_of_marking(n.ann, s.preset(e2)).factors();
    in2.push_back(output_h_factor(e, h));
    const GlobalOperator op_e2{n.ann.event_map.at(e2), FactorLayout(in2), event_output_layout(s, n.ann, e2)};
    const GlobalOperator first = tensor(op_e, identity_operator(space_of_marking(n.ann, s.preset(e2))));
    const GlobalOperator second = tensor(identity_operator(space_of_marking(n.ann, s.postset(e))), op_e2);
    const GlobalOperator joined = canonicalize(compose(second, first));

    std::map<NodeId, Polarity> transitions = s.transitions();
    transitions.erase(e);
    transitions.erase(e2);
    transitions[j] = Polarity::Neutral;
    std::vector<Arc> flow;
    for (const Arc& a : s.flow()) {
        Arc b = a;
        if (b.from == e || b.from == e2) b.from = j;
        if (b.to == e || b.to == e2) b.to = j;
        flow.push_back(b);
    }

    SingleJoin out;
    out.event = {j, e, e2};
    out.result.net = PetriNet(NetSkeleton(s.places(), transitions, flow), n.net.initial_marking());
    out.result.ann = n.ann;
    out.result.ann.event_map.erase(e);
    out.result.ann.event_map.erase(e2);
    out.result.ann.hdim.erase(e);
    out.result.ann.hdim.erase(e2);
    out.result.ann.event_map.emplace(j, joined.map);
    return out;
}

NodeSet JoinSpec::negatives() const {
    NodeSet out;
    for (const auto& [a, b] : f) out.insert(a);
    return out;
}

NodeSet JoinSpec::positives() const {
    NodeSet out;
    for (const auto& [a, b] : f) out.insert(b);
    return out;
}

std::vector<NodeSet> cluster_sets(const NetSkeleton& s) {
    std::vector<NodeSet> out;
    for (const auto& c : conflict_components(s)) out.emplace_back(c.events.begin(), c.events.end());
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

/// The enclosing cluster of P: the given one, or the conflict component
/// holding the first positive event.
std::optional<NodeSet> enclosing_cluster(const NetSkeleton& s, const JoinSpec& spec) {
    if (spec.enclosing) return spec.enclosing;
    const NodeSet pos = spec.positives();
    if (pos.empty()) return std::nullopt;
    for (const auto& c : cluster_sets(s)) {
        if (c.count(*pos.begin())) return c;
    }
    return std::nullopt;
}

}  // namespace

ValidationReport validate_drop_preserving(const AnnotatedNet& n, const JoinSpec& spec, double tol) {
    const NetSkeleton& s = n.net.skeleton();
    const ConflictGraph g = conflict_graph(s);
    const NodeSet neg = spec.negatives();
    const NodeSet pos = spec.positives();
    ValidationReport r;

    {
        std::optional<NodeId> bad;
        std::string why;
        for (NodeId a : neg) {
            if (!s.is_transition(a) || s.polarity(a) != Polarity::Negative) {
                bad = a;
                why = "event " + id(a) + " is not a negative event";
                break;
            }
        }
        if (!bad && neg.empty()) why = "N is empty";
        if (!bad && !neg.empty() && !connected_within(g, neg)) {
            bad = *neg.begin();
            why = "N is not connected under minimal conflict";
        }
        if (!bad && why.empty()) {
            for (NodeId a : neg) {
                auto it = g.find(a);
                if (it == g.end()) continue;
                for (NodeId b : it->second) {
                    if (!neg.count(b) && s.polarity(b) == Polarity::Negative) {
                        bad = b;
                        why = "negative event " + id(b) + " conflicts with " + id(a) + " but is not in N";
                        break;
                    }
                }
                if (bad) break;
            }
        }
        if (why.empty()) {
            r.pass("negative-cluster");
        } else {
            r.fail("negative-cluster", bad, why);
        }
    }

    {
        std::optional<NodeId> bad;
        std::string why;
        for (NodeId p : pos) {
            if (!s.is_transition(p) || s.polarity(p) != Polarity::Positive) {
                bad = p;
                why = "event " + id(p) + " is not a positive event";
                break;
            }
        }
        if (!bad && !pos.empty() && !connected_within(g, pos)) {
            bad = *pos.begin();
            why = "P is not connected under minimal conflict";
        }
        const auto encl = enclosing_cluster(s, spec);
        if (why.empty() && encl) {
            const auto clusters = cluster_sets(s);
            if (!std::includes(encl->begin(), encl->end(), pos.begin(), pos.end())) {
                why = "the enclosing cluster does not contain P";
            } else if (std::find(clusters.begin(), clusters.end(), *encl) == clusters.end()) {
                why = "the enclosing set is not a conflict cluster";
            } else {
                for (NodeId t : *encl) {
                    if (s.polarity(t) == Polarity::Negative) {
                        bad = t;
                        why = "the enclosing cluster contains negative event " + id(t);
                        break;
                    }
                }
            }
        }
        if (why.empty()) {
            r.pass("positive-cluster");
        } else {
            r.fail("positive-cluster", bad, why);
        }
    }

    {
        std::map<NodeId, int> dom;
        std::map<NodeId, int> img;
        std::optional<NodeId> bad;
        std::string why;
        for (const auto& [a, b] : spec.f) {
            if (++dom[a] > 1) {
                bad = a;
                why = "event " + id(a) + " is mapped twice";
                break;
            }
            if (++img[b] > 1) {
                bad = b;
                why = "event " + id(b) + " is the image of two negative events";
                break;
            }
        }
        if (why.empty()) {
            r.pass("bijection");
        } else {
            r.fail("bijection", bad, why);
        }
    }

    {
        std::map<NodeId, NodeId> f(spec.f.begin(), spec.f.end());
        std::optional<NodeId> bad;
        std::string why;
        for (NodeId a : neg) {
            for (NodeId b : neg) {
                if (a < b && related(g, a, b) && !related(g, f.at(a), f.at(b))) {
                    bad = a;
                    why = id(a) + " ~ " + id(b) + " but " + id(f.at(a)) + " and " + id(f.at(b)) + " are not in conflict";
                    break;
                }
            }
            if (bad) break;
        }
        if (why.empty()) {
            r.pass("conflict-preservation");
        } else {
            r.fail("conflict-preservation", bad, why);
        }
    }

    const bool typed = std::all_of(spec.f.begin(), spec.f.end(),
                                   [&](const auto& ab) { return s.is_transition(ab.first) && s.is_transition(ab.second); });
    {
        std::optional<NodeId> bad;
        for (const auto& [a, b] : spec.f) {
            if (typed && effective_hdim(s, n.ann, a) != effective_hdim(s, n.ann, b)) {
                bad = a;
                break;
            }
        }
        if (!typed) {
            r.fail("environment-dimension", std::nullopt, "not checked: unknown events in f");
        } else if (bad) {
            r.fail("environment-dimension", bad, "H of " + id(*bad) + " differs from H of its partner");
        } else {
            r.pass("environment-dimension");
        }
    }

    if (is_race_free(s)) {
        r.pass("race-free");
    } else {
        r.fail("race-free", std::nullopt, "the source net is not race-free");
    }

    {
        std::optional<NodeId> bad;
        for (const auto& [a, b] : spec.f) {
            if (!typed) break;
            if (intersects(s.preset(a), s.preset(b)) || intersects(s.postset(a), s.postset(b)) ||
                intersects(s.postset(b), s.preset(a))) {
                bad = a;
                break;
            }
        }
        if (!typed) {
            r.fail("disjoint-arcs", std::nullopt, "not checked: unknown events in f");
        } else if (bad) {
            r.fail("disjoint-arcs", bad, "event " + id(*bad) + " shares places with its partner");
        } else {
            r.pass("disjoint-arcs");
        }
    }

    {
        std::optional<NodeId> bad;
        for (NodeId a : neg) {
            auto it = n.ann.event_map.find(a);
            if (it == n.ann.event_map.end() || !is_identity(it->second, tol)) {
                bad = a;
                break;
            }
        }
        if (bad) {
            r.fail("oblivious-negatives", bad, "negative event " + id(*bad) + " is not annotated with the identity");
        } else {
            r.pass("oblivious-negatives");
        }
    }
    return r;
}

DropPreservingJoin drop_preserving_join(const AnnotatedNet& n, const JoinSpec& spec, const JoinOptions& options) {
    const ValidationReport v = validate_drop_preserving(n, spec, options.certify.tol);
    if (const ClauseVerdict* bad = v.first_failure()) {
        throw InvalidInput("join rejected: " + bad->clause + ": " + bad->detail);
    }
    require_certified(n, options.certify, "source net");

    const NodeSet neg = spec.negatives();
    std::vector<NodeId> order = options.order;
    if (order.empty()) order.assign(neg.begin(), neg.end());
    if (NodeSet(order.begin(), order.end()) != neg || order.size() != neg.size()) {
        throw InvalidInput("join order must list every negative event of the spec exactly once");
    }
    const std::map<NodeId, NodeId> f(spec.f.begin(), spec.f.end());

    DropPreservingJoin out;
    out.enclosing = *enclosing_cluster(n.net.skeleton(), spec);
    AnnotatedNet cur = n;
    for (NodeId a : order) {
        SingleJoin j = single_join(cur, f.at(a), a, std::nullopt, options.certify.tol);
        out.joined.push_back(j.event);
        cur = std::move(j.result);
    }
    out.result = std::move(cur);

    NodeSet merged;
    for (NodeId t : out.enclosing) {
        if (!spec.positives().count(t)) merged.insert(t);
    }
    for (const auto& j : out.joined) merged.insert(j.id);
    for (const auto& c : cluster_sets(n.net.skeleton())) {
        if (c != neg && c != out.enclosing) out.expected_clusters.push_back(c);
    }
    out.expected_clusters.push_back(merged);
    std::sort(out.expected_clusters.begin(), out.expected_clusters.end());
    out.clusters_match = cluster_sets(out.result.net.skeleton()) == out.expected_clusters;
    out.race_free = is_race_free(out.result.net.skeleton());
    if (options.recheck) out.recheck = certify_qpn(out.result.net, out.result.ann, options.certify);
    return out;
}

}  // namespace qpn
