#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpn/net.hpp"

namespace qpn {

struct ClauseVerdict {
    std::string clause;
    bool passed = true;
    std::optional<NodeId> witness;
    std::string detail;
};

struct ValidationReport {
    std::vector<ClauseVerdict> clauses;

    bool ok() const;
    const ClauseVerdict* first_failure() const;
    void pass(std::string clause);
    void fail(std::string clause, std::optional<NodeId> witness, std::string detail);
};

/// Causality (reflexive-transitive closure of the flow) and the inherited
/// conflict relation, computed once over every node of a skeleton.
class OrderStructure {
public:
    explicit OrderStructure(const NetSkeleton& s);

    bool acyclic() const { return !cycle_witness_.has_value(); }
    /// Some node lying on a directed cycle, if any.
    std::optional<NodeId> cycle_witness() const { return cycle_witness_; }

    bool leq(NodeId a, NodeId b) const;
    bool less(NodeId a, NodeId b) const { return a != b && leq(a, b); }
    /// x # y: distinct events e <= x and e' <= y share a pre-condition.
    bool conflict(NodeId x, NodeId y) const;

private:
    std::size_t index(NodeId id) const;

    std::map<NodeId, std::size_t> index_;
    std::vector<std::vector<char>> leq_;
    std::vector<std::vector<char>> conflict_;
    std::optional<NodeId> cycle_witness_;
};

ValidationReport validate_occurrence_net(const NetSkeleton& s, const NodeSet& c0);

class OccurrenceNet {
public:
    OccurrenceNet() = default;
    /// Throws InvalidInput naming the first failing clause.
    OccurrenceNet(NetSkeleton skeleton, NodeSet c0);

    const NetSkeleton& skeleton() const { return skeleton_; }
    const NodeSet& initial_cut() const { return c0_; }
    const NodeSet& conditions() const { return skeleton_.places(); }
    NodeSet events() const { return skeleton_.transition_ids(); }

    bool leq(NodeId a, NodeId b) const { return order_->leq(a, b); }
    bool conflict(NodeId x, NodeId y) const { return order_->conflict(x, y); }

    PetriNet as_petri_net() const { return PetriNet(skeleton_, c0_); }

private:
    NetSkeleton skeleton_;
    NodeSet c0_;
    std::shared_ptr<const OrderStructure> order_;
};

bool conflict(const OccurrenceNet& o, NodeId x, NodeId y);

bool is_configuration(const OccurrenceNet& o, const Configuration& x);
/// All finite configurations ordered by size, then lexicographically.
/// Throws CapExceeded past `cap`.
std::vector<Configuration> configurations(const OccurrenceNet& o, std::size_t cap = kDefaultStateCap);

Marking cut_of(const OccurrenceNet& o, const Configuration& x);
/// Throws NotReachable when `m` is not the cut of any configuration.
Configuration config_of_marking(const OccurrenceNet& o, const Marking& m);

struct MarkingInterval {
    Marking from;
    Marking to;
    NodeSet conditions;
    NodeSet transitions;
};

/// Throws NotReachable unless m ->* m2.
MarkingInterval interval(const OccurrenceNet& o, const Marking& m, const Marking& m2);
NetSkeleton restrict(const OccurrenceNet& o, const MarkingInterval& i);

/// Events e with x + {e} a configuration.
NodeSet single_extensions(const OccurrenceNet& o, const Configuration& x);

struct ConflictCluster {
    std::vector<NodeId> events;
    std::vector<std::pair<NodeId, NodeId>> edges;
    bool is_clique = true;
};

/// Components of the shared-pre-place graph restricted to `events`.
std::vector<ConflictCluster> immediate_conflict_clusters(const NetSkeleton& s, const NodeSet& events);
/// Clusters among the non-negative events enabled at `x`.
std::vector<ConflictCluster> conflict_clusters(const OccurrenceNet& o, const Configuration& x);

/// Minimal conflict pairs (a < b by id). Acyclic skeletons use inherited
/// conflict with minimality; cyclic skeletons fall back to shared pre-places.
std::vector<std::pair<NodeId, NodeId>> minimal_conflicts(const NetSkeleton& s);
/// Components of the minimal-conflict graph over all transitions.
std::vector<ConflictCluster> conflict_components(const NetSkeleton& s);
bool is_race_free(const NetSkeleton& s);

}  // namespace qpn
