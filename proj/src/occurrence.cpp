#include "qpn/occurrence.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>

#include "qpn/errors.hpp"

namespace qpn {

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

std::vector<ConflictCluster> components(const std::vector<NodeId>& nodes,
                                        const std::vector<std::pair<NodeId, NodeId>>& edges) {
    std::map<NodeId, std::size_t> pos;
    for (std::size_t i = 0; i < nodes.size(); ++i) pos[nodes[i]] = i;
    UnionFind uf(nodes.size());
    for (const auto& [a, b] : edges) uf.unite(pos.at(a), pos.at(b));
    std::map<std::size_t, ConflictCluster> by_root;
    for (std::size_t i = 0; i < nodes.size(); ++i) by_root[uf.find(i)].events.push_back(nodes[i]);
    for (const auto& e : edges) by_root[uf.find(pos.at(e.first))].edges.push_back(e);
    std::vector<ConflictCluster> out;
    for (auto& [root, c] : by_root) {
        std::sort(c.events.begin(), c.events.end());
        std::sort(c.edges.begin(), c.edges.end());
        const std::size_t k = c.events.size();
        c.is_clique = c.edges.size() == k * (k - 1) / 2;
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(),
              [](const ConflictCluster& a, const ConflictCluster& b) { return a.events.front() < b.events.front(); });
    return out;
}

bool share_pre_place(const NetSkeleton& s, NodeId a, NodeId b) {
    const auto& pa = s.preset(a);
    const auto& pb = s.preset(b);
    auto i = pa.begin();
    auto j = pb.begin();
    while (i != pa.end() && j != pb.end()) {
        if (*i == *j) return true;
        if (*i < *j) {
            ++i;
        } else {
            ++j;
        }
    }
    return false;
}

}  // namespace

bool ValidationReport::ok() const {
    return std::all_of(clauses.begin(), clauses.end(), [](const ClauseVerdict& c) { return c.passed; });
}

const ClauseVerdict* ValidationReport::first_failure() const {
    for (const auto& c : clauses) {
        if (!c.passed) return &c;
    }
    return nullptr;
}

void ValidationReport::pass(std::string clause) { clauses.push_back({std::move(clause), true, std::nullopt, ""}); }

void ValidationReport::fail(std::string clause, std::optional<NodeId> witness, std::string detail) {
    clauses.push_back({std::move(clause), false, witness, std::move(detail)});
}

OrderStructure::OrderStructure(const NetSkeleton& s) {
    std::vector<NodeId> ids;
    for (NodeId p : s.places()) ids.push_back(p);
    for (const auto& [t, pol] : s.transitions()) ids.push_back(t);
    std::sort(ids.begin(), ids.end());
    const std::size_t n = ids.size();
    for (std::size_t i = 0; i < n; ++i) index_[ids[i]] = i;

    leq_.assign(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        leq_[i][i] = 1;
        std::deque<NodeId> queue(s.postset(ids[i]).begin(), s.postset(ids[i]).end());
        std::vector<char> seen(n, 0);
        while (!queue.empty()) {
            NodeId v = queue.front();
            queue.pop_front();
            const std::size_t j = index_.at(v);
            if (seen[j]) continue;
            seen[j] = 1;
            leq_[i][j] = 1;
            if (j == i && !cycle_witness_) cycle_witness_ = ids[i];
            for (NodeId w : s.postset(v)) queue.push_back(w);
        }
    }

    conflict_.assign(n, std::vector<char>(n, 0));
    std::set<std::pair<NodeId, NodeId>> immediate;
    for (NodeId c : s.places()) {
        const auto& consumers = s.postset(c);
        for (NodeId e : consumers) {
            for (NodeId f : consumers) {
                if (e != f) immediate.emplace(e, f);
            }
        }
    }
    for (const auto& [e, f] : immediate) {
        const std::size_t ie = index_.at(e);
        const std::size_t jf = index_.at(f);
        for (std::size_t x = 0; x < n; ++x) {
            if (!leq_[ie][x]) continue;
            for (std::size_t y = 0; y < n; ++y) {
                if (leq_[jf][y]) conflict_[x][y] = 1;
            }
        }
    }
}

std::size_t OrderStructure::index(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InvalidInput("unknown node " + std::to_string(id));
    return it->second;
}

bool OrderStructure::leq(NodeId a, NodeId b) const { return leq_[index(a)][index(b)] != 0; }

bool OrderStructure::conflict(NodeId x, NodeId y) const { return conflict_[index(x)][index(y)] != 0; }

ValidationReport validate_occurrence_net(const NetSkeleton& s, const NodeSet& c0) {
    ValidationReport report;
    const OrderStructure order(s);

    if (auto w = order.cycle_witness()) {
        report.fail("acyclic", *w, "node " + std::to_string(*w) + " lies on a directed cycle");
    } else {
        report.pass("acyclic");
    }

    std::optional<NodeId> self_conflict;
    for (NodeId p : s.places()) {
        if (!self_conflict && order.conflict(p, p)) self_conflict = p;
    }
    for (const auto& [t, pol] : s.transitions()) {
        if (!self_conflict && order.conflict(t, t)) self_conflict = t;
    }
    if (self_conflict) {
        report.fail("no-self-conflict", *self_conflict,
                    "node " + std::to_string(*self_conflict) + " is in conflict with itself");
    } else {
        report.pass("no-self-conflict");
    }

    // Every cone of a finite net is finite.
    report.pass("finite-cones");

    std::optional<NodeId> backward;
    for (NodeId p : s.places()) {
        if (s.preset(p).size() > 1) {
            backward = p;
            break;
        }
    }
    if (backward) {
        report.fail("no-backward-branching", *backward,
                    "condition " + std::to_string(*backward) + " has " +
                        std::to_string(s.preset(*backward).size()) + " pre-events");
    } else {
        report.pass("no-backward-branching");
    }

    NodeSet minimal;
    for (NodeId p : s.places()) {
        if (s.preset(p).empty()) minimal.insert(p);
    }
    for (const auto& [t, pol] : s.transitions()) {
        if (s.preset(t).empty()) minimal.insert(t);
    }
    std::vector<NodeId> diff;
    std::set_symmetric_difference(minimal.begin(), minimal.end(), c0.begin(), c0.end(), std::back_inserter(diff));
    if (!diff.empty()) {
        const NodeId w = diff.front();
        report.fail("minimal-nodes", w,
                    minimal.count(w) ? "minimal node " + std::to_string(w) + " is missing from the initial cut"
                                     : "node " + std::to_string(w) + " in the initial cut is not minimal");
    } else {
        report.pass("minimal-nodes");
    }
    return report;
}

OccurrenceNet::OccurrenceNet(NetSkeleton skeleton, NodeSet c0) : skeleton_(std::move(skeleton)), c0_(std::move(c0)) {
    const auto report = validate_occurrence_net(skeleton_, c0_);
    if (const auto* f = report.first_failure()) {
        throw InvalidInput("not an occurrence net: " + f->clause + ": " + f->detail);
    }
    order_ = std::make_shared<const OrderStructure>(skeleton_);
}

bool conflict(const OccurrenceNet& o, NodeId x, NodeId y) {
    if (!o.skeleton().is_transition(x) || !o.skeleton().is_transition(y)) {
        throw InvalidInput("conflict: " + std::to_string(x) + " and " + std::to_string(y) + " must be events");
    }
    return o.conflict(x, y);
}

bool is_configuration(const OccurrenceNet& o, const Configuration& x) {
    const auto& s = o.skeleton();
    for (NodeId e : x) {
        if (!s.is_transition(e)) return false;
        for (NodeId c : s.preset(e)) {
            for (NodeId pre : s.preset(c)) {
                if (!x.count(pre)) return false;
            }
        }
    }
    for (auto i = x.begin(); i != x.end(); ++i) {
        for (auto j = std::next(i); j != x.end(); ++j) {
            if (o.conflict(*i, *j)) return false;
        }
    }
    return true;
}

std::vector<Configuration> configurations(const OccurrenceNet& o, std::size_t cap) {
    std::set<Configuration> seen{Configuration{}};
    std::deque<Configuration> queue{Configuration{}};
    while (!queue.empty()) {
        Configuration x = std::move(queue.front());
        queue.pop_front();
        for (NodeId e : single_extensions(o, x)) {
            Configuration y = x;
            y.insert(e);
            if (seen.insert(y).second) {
                if (seen.size() > cap) {
                    throw CapExceeded("more than " + std::to_string(cap) + " configurations");
                }
                queue.push_back(std::move(y));
            }
        }
    }
    std::vector<Configuration> out(seen.begin(), seen.end());
    std::stable_sort(out.begin(), out.end(),
                     [](const Configuration& a, const Configuration& b) { return a.size() < b.size(); });
    return out;
}

Marking cut_of(const OccurrenceNet& o, const Configuration& x) {
    const auto& s = o.skeleton();
    Marking produced = o.initial_cut();
    NodeSet consumed;
    for (NodeId e : x) {
        if (!s.is_transition(e)) throw InvalidInput("cut_of: " + std::to_string(e) + " is not an event");
        produced.insert(s.postset(e).begin(), s.postset(e).end());
        consumed.insert(s.preset(e).begin(), s.preset(e).end());
    }
    Marking out;
    std::set_difference(produced.begin(), produced.end(), consumed.begin(), consumed.end(),
                        std::inserter(out, out.end()));
    return out;
}

Configuration config_of_marking(const OccurrenceNet& o, const Marking& m) {
    const auto& s = o.skeleton();
    Configuration x;
    std::deque<NodeId> work;
    for (NodeId c : m) {
        if (!s.is_place(c)) throw NotReachable("marking contains non-condition " + std::to_string(c));
        for (NodeId e : s.preset(c)) work.push_back(e);
    }
    while (!work.empty()) {
        NodeId e = work.front();
        work.pop_front();
        if (!x.insert(e).second) continue;
        for (NodeId c : s.preset(e)) {
            for (NodeId pre : s.preset(c)) work.push_back(pre);
        }
    }
    if (!is_configuration(o, x) || cut_of(o, x) != m) {
        throw NotReachable("marking " + format_set(m) + " is not reachable");
    }
    return x;
}

MarkingInterval interval(const OccurrenceNet& o, const Marking& m, const Marking& m2) {
    const Configuration x = config_of_marking(o, m);
    const Configuration x2 = config_of_marking(o, m2);
    if (!std::includes(x2.begin(), x2.end(), x.begin(), x.end())) {
        throw NotReachable("marking " + format_set(m2) + " is not reachable from " + format_set(m));
    }
    MarkingInterval i{m, m2, m, {}};
    std::set_difference(x2.begin(), x2.end(), x.begin(), x.end(), std::inserter(i.transitions, i.transitions.end()));
    for (NodeId e : i.transitions) {
        const auto& post = o.skeleton().postset(e);
        i.conditions.insert(post.begin(), post.end());
    }
    return i;
}

NetSkeleton restrict(const OccurrenceNet& o, const MarkingInterval& i) {
    const auto& s = o.skeleton();
    std::map<NodeId, Polarity> transitions;
    for (NodeId e : i.transitions) transitions[e] = s.polarity(e);
    std::vector<Arc> flow;
    for (const auto& arc : s.flow()) {
        const bool from_in = i.conditions.count(arc.from) || i.transitions.count(arc.from);
        const bool to_in = i.conditions.count(arc.to) || i.transitions.count(arc.to);
        if (from_in && to_in) flow.push_back(arc);
    }
    return NetSkeleton(i.conditions, std::move(transitions), std::move(flow));
}

NodeSet single_extensions(const OccurrenceNet& o, const Configuration& x) {
    // In an occurrence net, x + {e} is a configuration iff the pre-set of e
    // is contained in the cut of x.
    const Marking cut = cut_of(o, x);
    NodeSet out;
    for (const auto& [e, pol] : o.skeleton().transitions()) {
        if (x.count(e)) continue;
        const auto& pre = o.skeleton().preset(e);
        if (std::includes(cut.begin(), cut.end(), pre.begin(), pre.end())) out.insert(e);
    }
    return out;
}

std::vector<ConflictCluster> immediate_conflict_clusters(const NetSkeleton& s, const NodeSet& events) {
    std::vector<NodeId> nodes(events.begin(), events.end());
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            if (share_pre_place(s, nodes[i], nodes[j])) edges.emplace_back(nodes[i], nodes[j]);
        }
    }
    return components(nodes, edges);
}

std::vector<ConflictCluster> conflict_clusters(const OccurrenceNet& o, const Configuration& x) {
    NodeSet enabled;
    for (NodeId e : single_extensions(o, x)) {
        if (o.skeleton().polarity(e) != Polarity::Negative) enabled.insert(e);
    }
    return immediate_conflict_clusters(o.skeleton(), enabled);
}

std::vector<std::pair<NodeId, NodeId>> minimal_conflicts(const NetSkeleton& s) {
    const auto ts = s.transition_ids();
    const std::vector<NodeId> nodes(ts.begin(), ts.end());
    std::vector<std::pair<NodeId, NodeId>> out;
    const OrderStructure order(s);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            const NodeId a = nodes[i];
            const NodeId b = nodes[j];
            if (!order.acyclic()) {
                if (share_pre_place(s, a, b)) out.emplace_back(a, b);
                continue;
            }
            if (!order.conflict(a, b)) continue;
            bool minimal = true;
            for (NodeId c : nodes) {
                if ((order.less(c, a) && order.conflict(c, b)) || (order.less(c, b) && order.conflict(a, c))) {
                    minimal = false;
                    break;
                }
            }
            if (minimal) out.emplace_back(a, b);
        }
    }
    return out;
}

std::vector<ConflictCluster> conflict_components(const NetSkeleton& s) {
    const auto ts = s.transition_ids();
    return components(std::vector<NodeId>(ts.begin(), ts.end()), minimal_conflicts(s));
}

bool is_race_free(const NetSkeleton& s) {
    for (const auto& [a, b] : minimal_conflicts(s)) {
        const bool na = s.polarity(a) == Polarity::Negative;
        const bool nb = s.polarity(b) == Polarity::Negative;
        if (na != nb) return false;
    }
    return true;
}

}  // namespace qpn
