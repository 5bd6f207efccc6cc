#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "qpn/linalg.hpp"
#include "qpn/occurrence.hpp"

namespace qpn {

/// Spaces on conditions, CPTNI maps and environment (H) dimensions on events.
///
/// The map of transition t goes from  Q0(pre t) (x) H_in(t)  to
/// Q0(post t) (x) H_out(t), conditions in ascending id order followed by the
/// H slot. Only negative events carry an input H slot and only positive
/// events an output H slot; neutral events have H of dimension 1.
struct LocalAnnotation {
    std::map<NodeId, std::size_t> qdim;
    std::map<NodeId, QuantumMap> event_map;
    std::map<NodeId, std::size_t> hdim;
};

/// H(t): 1 for neutral events and for events without an entry.
std::size_t effective_hdim(const NetSkeleton& s, const LocalAnnotation& ann, NodeId t);

FactorLayout event_input_layout(const NetSkeleton& s, const LocalAnnotation& ann, NodeId t);
FactorLayout event_output_layout(const NetSkeleton& s, const LocalAnnotation& ann, NodeId t);

struct SignatureIssue {
    NodeId node = 0;
    std::string detail;
};

/// Every missing entry or dimension mismatch, in ascending node order.
std::vector<SignatureIssue> signature_issues(const NetSkeleton& s, const LocalAnnotation& ann);
/// Throws IllTypedAnnotation naming the first offending node.
void check_signatures(const NetSkeleton& s, const LocalAnnotation& ann);

/// Ascending-id layout of the condition spaces of `m`.
FactorLayout space_of_marking(const LocalAnnotation& ann, const Marking& m);

/// A map together with the factor carried by each tensor slot.
struct GlobalOperator {
    QuantumMap map;
    FactorLayout in_layout;
    FactorLayout out_layout;
};

GlobalOperator identity_operator(const FactorLayout& layout);
GlobalOperator tensor(const GlobalOperator& a, const GlobalOperator& b);
/// `before` output is permuted onto `after` input before composing.
GlobalOperator compose(const GlobalOperator& after, const GlobalOperator& before);
GlobalOperator canonicalize(const GlobalOperator& op);
/// Both operators are brought to canonical layouts first; throws
/// DimensionError when they act on different factors.
double choi_distance(const GlobalOperator& a, const GlobalOperator& b);

enum class VertexKind { Event, Condition, HCarry };

struct LayerVertex {
    VertexKind kind = VertexKind::Condition;
    NodeId node = 0;
    FactorLayout in;
    FactorLayout out;
    QuantumMap label = identity_map(1);
};

struct LayerEdge {
    std::size_t layer = 0;  // edge runs from `layer` to `layer + 1`
    std::size_t from = 0;
    std::size_t to = 0;
    FactorKey wire;
};

/// Layers alternate between wire layers (even, identities only) and event
/// layers (odd). Wires not touched by an event layer pass through it as
/// identity vertices.
struct LayerGraph {
    std::vector<std::vector<LayerVertex>> layers;
    std::vector<LayerEdge> edges;
    FactorLayout domain;
    FactorLayout codomain;
};

LayerGraph build_layer_graph(const NetSkeleton& restricted, const LocalAnnotation& ann, const Marking& from,
                             const Marking& to);

struct EvaluationOptions {
    bool elide_identity_layers = true;
    /// Kraus sets larger than this are recompressed through the Choi matrix.
    std::size_t kraus_cap = 64;
};

GlobalOperator evaluate_diagram(const LayerGraph& g, const EvaluationOptions& options = {});

GlobalOperator induced_global(const OccurrenceNet& o, const LocalAnnotation& ann, const Marking& m,
                              const Marking& m2, const EvaluationOptions& options = {});

}  // namespace qpn
