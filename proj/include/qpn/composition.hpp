#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "qpn/verification.hpp"

namespace qpn {

struct AnnotatedNet {
    PetriNet net;
    LocalAnnotation ann;
};

// --------------------------------------------------------- parallel composition

struct ParallelComposition {
    AnnotatedNet result;
    /// Added to every id of the right operand.
    NodeId right_offset = 0;
    /// Set when the result was re-certified.
    std::optional<CertificationReport> recheck;
};

/// Copies `n` with every id increased by `offset`. Shifting keeps the id
/// order, so the slot order of every map is unchanged.
AnnotatedNet shift_ids(const AnnotatedNet& n, NodeId offset);

/// Disjoint union. The left operand keeps its ids; the right one is shifted
/// above the left's largest id when the two overlap. Throws InvalidInput if
/// either operand fails certification.
ParallelComposition parallel_compose(const AnnotatedNet& left, const AnnotatedNet& right,
                                     const CertifyOptions& options = {}, bool recheck = true);

// ----------------------------------------------------------------- single join

struct JoinedEvent {
    NodeId id = 0;
    NodeId positive = 0;
    NodeId negative = 0;
};

struct SingleJoin {
    AnnotatedNet result;
    JoinedEvent event;
};

/// Merges positive `e` with negative `e2` into one neutral event fed by
/// both pre-sets and feeding both post-sets. The output environment slot of
/// `e` is wired into the input environment slot of `e2`.
///
/// Throws InvalidInput on polarity or H mismatch, overlapping pre-sets or
/// post-sets, a post-condition of `e` consumed by `e2`, or a non-identity
/// map on `e2`.
SingleJoin single_join(const AnnotatedNet& n, NodeId e, NodeId e2, std::optional<NodeId> fresh = std::nullopt,
                       double tol = kDefaultTolerance);

// ------------------------------------------------------- drop-preserving joins

struct JoinSpec {
    /// Negative event -> positive partner.
    std::vector<std::pair<NodeId, NodeId>> f;
    /// Conflict cluster around the positive side; derived when absent.
    std::optional<NodeSet> enclosing;

    NodeSet negatives() const;
    NodeSet positives() const;
};

/// Clauses: negative-cluster, positive-cluster, bijection,
/// conflict-preservation, environment-dimension, race-free, disjoint-arcs,
/// oblivious-negatives.
ValidationReport validate_drop_preserving(const AnnotatedNet& n, const JoinSpec& spec, double tol = kDefaultTolerance);

/// Event sets of the conflict components, for cluster bookkeeping.
std::vector<NodeSet> cluster_sets(const NetSkeleton& s);

struct JoinOptions {
    CertifyOptions certify;
    /// Join order over the negative events; ascending when empty.
    std::vector<NodeId> order;
    bool recheck = true;
};

struct DropPreservingJoin {
    AnnotatedNet result;
    std::vector<JoinedEvent> joined;
    NodeSet enclosing;
    /// Clusters predicted from the source: the untouched ones plus
    /// (enclosing minus P) together with the joined events.
    std::vector<NodeSet> expected_clusters;
    bool clusters_match = false;
    bool race_free = false;
    std::optional<CertificationReport> recheck;
};

/// Throws InvalidInput when validation fails or the source is not
/// certified.
DropPreservingJoin drop_preserving_join(const AnnotatedNet& n, const JoinSpec& spec, const JoinOptions& options = {});

}  // namespace qpn
