#include "qpn/net.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "qpn/errors.hpp"

namespace qpn {

char polarity_symbol(Polarity p) {
    switch (p) {
        case Polarity::Negative:
            return '-';
        case Polarity::Neutral:
            return '0';
        case Polarity::Positive:
            return '+';
    }
    return '?';
}

Polarity parse_polarity(std::string_view s) {
    if (s == "-") return Polarity::Negative;
    if (s == "0") return Polarity::Neutral;
    if (s == "+") return Polarity::Positive;
    throw InvalidInput("unknown polarity '" + std::string(s) + "' (expected -, 0 or +)");
}

NetSkeleton::NetSkeleton(NodeSet places, std::map<NodeId, Polarity> transitions, std::vector<Arc> flow)
    : places_(std::move(places)), transitions_(std::move(transitions)) {
    for (const auto& [t, pol] : transitions_) {
        if (places_.count(t)) throw InvalidInput("id " + std::to_string(t) + " is both a place and a transition");
    }
    for (NodeId id : places_) {
        if (id < 0) throw InvalidInput("node ids must be non-negative");
        pre_[id];
        post_[id];
    }
    for (const auto& [t, pol] : transitions_) {
        if (t < 0) throw InvalidInput("node ids must be non-negative");
        pre_[t];
        post_[t];
    }
    for (const auto& arc : flow) {
        if (!contains(arc.from) || !contains(arc.to)) {
            throw InvalidInput("arc " + std::to_string(arc.from) + "->" + std::to_string(arc.to) +
                               " has an unknown endpoint");
        }
        if (is_place(arc.from) == is_place(arc.to)) {
            throw InvalidInput("arc " + std::to_string(arc.from) + "->" + std::to_string(arc.to) +
                               " is not bipartite");
        }
        flow_.insert(arc);
        post_[arc.from].insert(arc.to);
        pre_[arc.to].insert(arc.from);
    }
}

NodeSet NetSkeleton::transition_ids() const {
    NodeSet out;
    for (const auto& [t, pol] : transitions_) out.insert(t);
    return out;
}

Polarity NetSkeleton::polarity(NodeId t) const {
    auto it = transitions_.find(t);
    if (it == transitions_.end()) throw InvalidInput("unknown transition " + std::to_string(t));
    return it->second;
}

const NodeSet& NetSkeleton::preset(NodeId id) const {
    auto it = pre_.find(id);
    if (it == pre_.end()) throw InvalidInput("unknown node " + std::to_string(id));
    return it->second;
}

const NodeSet& NetSkeleton::postset(NodeId id) const {
    auto it = post_.find(id);
    if (it == post_.end()) throw InvalidInput("unknown node " + std::to_string(id));
    return it->second;
}

NodeId NetSkeleton::max_id() const {
    NodeId m = -1;
    if (!places_.empty()) m = std::max(m, *places_.rbegin());
    if (!transitions_.empty()) m = std::max(m, transitions_.rbegin()->first);
    return m;
}

PetriNet::PetriNet(NetSkeleton skeleton, Marking m0) : skeleton_(std::move(skeleton)), m0_(std::move(m0)) {
    for (NodeId p : m0_) {
        if (!skeleton_.is_place(p)) throw InvalidInput("initial marking contains non-place " + std::to_string(p));
    }
}

NodeSet enabled(const PetriNet& net, const Marking& m) {
    NodeSet out;
    for (const auto& [t, pol] : net.skeleton().transitions()) {
        const auto& pre = net.skeleton().preset(t);
        if (std::includes(m.begin(), m.end(), pre.begin(), pre.end())) out.insert(t);
    }
    return out;
}

Marking fire(const PetriNet& net, const Marking& m, NodeId t) {
    const auto& s = net.skeleton();
    if (!s.is_transition(t)) throw InvalidInput("unknown transition " + std::to_string(t));
    const auto& pre = s.preset(t);
    if (!std::includes(m.begin(), m.end(), pre.begin(), pre.end())) {
        throw NotEnabled("transition " + std::to_string(t) + " is not enabled at " + format_set(m));
    }
    Marking out;
    std::set_difference(m.begin(), m.end(), pre.begin(), pre.end(), std::inserter(out, out.end()));
    for (NodeId p : s.postset(t)) {
        if (!out.insert(p).second) {
            throw SafetyViolation("firing " + std::to_string(t) + " marks place " + std::to_string(p) + " twice");
        }
    }
    return out;
}

std::vector<Marking> reachable_markings(const PetriNet& net, std::size_t bound, std::size_t cap) {
    if (bound == 0) throw InvalidInput("reachable_markings: bound must be at least 1");
    std::vector<Marking> order{net.initial_marking()};
    std::set<Marking> seen{net.initial_marking()};
    std::deque<std::pair<Marking, std::size_t>> queue{{net.initial_marking(), 0}};
    while (!queue.empty()) {
        auto [m, depth] = queue.front();
        queue.pop_front();
        if (depth >= bound) continue;
        for (NodeId t : enabled(net, m)) {
            Marking next = fire(net, m, t);
            if (seen.insert(next).second) {
                if (seen.size() > cap) {
                    throw CapExceeded("more than " + std::to_string(cap) + " reachable markings");
                }
                order.push_back(next);
                queue.emplace_back(std::move(next), depth + 1);
            }
        }
    }
    return order;
}

std::string format_set(const NodeSet& s) {
    std::string out = "{";
    bool first = true;
    for (NodeId id : s) {
        if (!first) out += ",";
        out += std::to_string(id);
        first = false;
    }
    return out + "}";
}

}  // namespace qpn
