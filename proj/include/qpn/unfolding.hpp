#pragma once

#include <cstddef>
#include <map>

#include "qpn/annotation.hpp"
#include "qpn/occurrence.hpp"

namespace qpn {

struct UnfoldLimit {
    std::size_t max_events = 256;
    /// Causal depth: events whose pre-set is initial have depth 1.
    std::size_t max_depth = 8;
};

/// An occurrence net labelled over a Petri net.
struct BranchingProcess {
    OccurrenceNet occ;
    /// Conditions to places, events to transitions.
    std::map<NodeId, NodeId> labels;
    std::map<NodeId, std::size_t> depth;
    /// False when some extension was left out because of `max_events`.
    bool saturated = true;

    /// Projection of a set of occurrence-net nodes through the labels.
    NodeSet project(const NodeSet& nodes) const;
};

/// Depth-bounded prefix of the unfolding. New nodes take consecutive ids in
/// creation order; each round adds the possible extensions sorted by
/// (transition, pre-set). Throws SafetyViolation when two concurrent
/// conditions carry the same place.
BranchingProcess unfold(const PetriNet& net, const UnfoldLimit& limit = {});

/// Clauses "label-kinds", "environment-bijection", "initial-bijection",
/// "no-duplicate-events", in that order.
ValidationReport validate_branching_process(const PetriNet& net, const BranchingProcess& bp);

/// Copies spaces and maps along the labels, reordering map slots from place
/// order to condition order. Throws IllTypedAnnotation on a missing base entry.
LocalAnnotation lift_annotation(const BranchingProcess& bp, const LocalAnnotation& base);

}  // namespace qpn
