#pragma once

#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qpn/layout.hpp"

namespace qpn {

enum class Polarity { Negative, Neutral, Positive };

char polarity_symbol(Polarity p);
Polarity parse_polarity(std::string_view s);

struct Arc {
    NodeId from = 0;
    NodeId to = 0;

    auto operator<=>(const Arc&) const = default;
};

/// Bipartite place/transition graph with a polarity on every transition.
///
/// Places and transitions share one id space. Pre- and post-sets are
/// computed once at construction; the skeleton is immutable afterwards.
class NetSkeleton {
public:
    NetSkeleton() = default;
    NetSkeleton(NodeSet places, std::map<NodeId, Polarity> transitions, std::vector<Arc> flow);

    const NodeSet& places() const { return places_; }
    const std::map<NodeId, Polarity>& transitions() const { return transitions_; }
    const std::set<Arc>& flow() const { return flow_; }
    NodeSet transition_ids() const;

    bool is_place(NodeId id) const { return places_.count(id) != 0; }
    bool is_transition(NodeId id) const { return transitions_.count(id) != 0; }
    bool contains(NodeId id) const { return is_place(id) || is_transition(id); }

    Polarity polarity(NodeId t) const;
    const NodeSet& preset(NodeId id) const;
    const NodeSet& postset(NodeId id) const;

    /// Largest id in use, or -1 for an empty skeleton.
    NodeId max_id() const;

private:
    NodeSet places_;
    std::map<NodeId, Polarity> transitions_;
    std::set<Arc> flow_;
    std::map<NodeId, NodeSet> pre_;
    std::map<NodeId, NodeSet> post_;
};

using Marking = NodeSet;
using Configuration = NodeSet;

/// Safe Petri net: markings are sets of places.
class PetriNet {
public:
    PetriNet() = default;
    PetriNet(NetSkeleton skeleton, Marking m0);

    const NetSkeleton& skeleton() const { return skeleton_; }
    const Marking& initial_marking() const { return m0_; }

private:
    NetSkeleton skeleton_;
    Marking m0_;
};

inline constexpr std::size_t kDefaultStateCap = 10000;
inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

/// Transitions whose preset is contained in `m`.
NodeSet enabled(const PetriNet& net, const Marking& m);
/// Throws NotEnabled or SafetyViolation.
Marking fire(const PetriNet& net, const Marking& m, NodeId t);
/// Markings reachable within `bound` firings, in BFS discovery order.
/// Throws CapExceeded once more than `cap` markings are found.
std::vector<Marking> reachable_markings(const PetriNet& net, std::size_t bound = kUnbounded,
                                        std::size_t cap = kDefaultStateCap);

std::string format_set(const NodeSet& s);

}  // namespace qpn
