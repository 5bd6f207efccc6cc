#include "qpn/annotation.hpp"

#include <algorithm>

#include "qpn/errors.hpp"

namespace qpn {

namespace {

std::size_t qdim_of(const LocalAnnotation& ann, NodeId c) {
    auto it = ann.qdim.find(c);
    if (it == ann.qdim.end()) throw IllTypedAnnotation("condition " + std::to_string(c) + " has no space");
    return it->second;
}

const QuantumMap& map_of(const LocalAnnotation& ann, NodeId t) {
    auto it = ann.event_map.find(t);
    if (it == ann.event_map.end()) throw IllTypedAnnotation("event " + std::to_string(t) + " has no map");
    return it->second;
}

std::string dims_text(std::size_t in, std::size_t out) { return std::to_string(in) + "->" + std::to_string(out); }

}  // namespace

std::size_t effective_hdim(const NetSkeleton& s, const LocalAnnotation& ann, NodeId t) {
    if (s.polarity(t) == Polarity::Neutral) return 1;
    auto it = ann.hdim.find(t);
    return it == ann.hdim.end() ? 1 : it->second;
}

FactorLayout event_input_layout(const NetSkeleton& s, const LocalAnnotation& ann, NodeId t) {
    std::vector<Factor> fs;
    for (NodeId c : s.preset(t)) fs.push_back(condition_factor(c, qdim_of(ann, c)));
    if (s.polarity(t) == Polarity::Negative) fs.push_back(input_h_factor(t, effective_hdim(s, ann, t)));
    return FactorLayout(std::move(fs));
}

FactorLayout event_output_layout(const NetSkeleton& s, const LocalAnnotation& ann, NodeId t) {
    std::vector<Factor> fs;
    for (NodeId c : s.postset(t)) fs.push_back(condition_factor(c, qdim_of(ann, c)));
    if (s.polarity(t) == Polarity::Positive) fs.push_back(output_h_factor(t, effective_hdim(s, ann, t)));
    return FactorLayout(std::move(fs));
}

std::vector<SignatureIssue> signature_issues(const NetSkeleton& s, const LocalAnnotation& ann) {
    std::vector<SignatureIssue> issues;
    for (NodeId c : s.places()) {
        auto it = ann.qdim.find(c);
        if (it == ann.qdim.end()) {
            issues.push_back({c, "condition " + std::to_string(c) + " has no space"});
        } else if (it->second == 0) {
            issues.push_back({c, "condition " + std::to_string(c) + " has dimension 0"});
        }
    }
    if (!issues.empty()) return issues;
    for (const auto& [t, pol] : s.transitions()) {
        if (pol != Polarity::Neutral) {
            auto h = ann.hdim.find(t);
            if (h != ann.hdim.end() && h->second == 0) {
                issues.push_back({t, "event " + std::to_string(t) + " has H dimension 0"});
                continue;
            }
        }
        auto it = ann.event_map.find(t);
        if (it == ann.event_map.end()) {
            issues.push_back({t, "event " + std::to_string(t) + " has no map"});
            continue;
        }
        const std::size_t in = event_input_layout(s, ann, t).total_dim();
        const std::size_t out = event_output_layout(s, ann, t).total_dim();
        const auto& m = it->second;
        if (m.input_dim() != in || m.output_dim() != out) {
            issues.push_back({t, "event " + std::to_string(t) + ": map is " + dims_text(m.input_dim(), m.output_dim()) +
                                     ", signature requires " + dims_text(in, out)});
            continue;
        }
        if (!is_cptni(m).tni) {
            issues.push_back({t, "event " + std::to_string(t) + ": map is not trace non-increasing"});
        }
    }
    return issues;
}

void check_signatures(const NetSkeleton& s, const LocalAnnotation& ann) {
    const auto issues = signature_issues(s, ann);
    if (!issues.empty()) throw IllTypedAnnotation(issues.front().detail);
}

FactorLayout space_of_marking(const LocalAnnotation& ann, const Marking& m) {
    std::vector<Factor> fs;
    for (NodeId c : m) fs.push_back(condition_factor(c, qdim_of(ann, c)));
    return FactorLayout(std::move(fs));
}

GlobalOperator identity_operator(const FactorLayout& layout) {
    return {identity_map(layout.total_dim()), layout, layout};
}

GlobalOperator tensor(const GlobalOperator& a, const GlobalOperator& b) {
    return {tensor(a.map, b.map), a.in_layout.concat(b.in_layout), a.out_layout.concat(b.out_layout)};
}

GlobalOperator compose(const GlobalOperator& after, const GlobalOperator& before) {
    if (!before.out_layout.is_permutation_of(after.in_layout)) {
        throw DimensionError("compose: producing and consuming layouts carry different factors");
    }
    const QuantumMap aligned =
        permute_factors(before.map, before.in_layout, before.in_layout, before.out_layout, after.in_layout);
    return {compose(after.map, aligned), before.in_layout, after.out_layout};
}

GlobalOperator canonicalize(const GlobalOperator& op) {
    const FactorLayout in = op.in_layout.canonical();
    const FactorLayout out = op.out_layout.canonical();
    return {permute_factors(op.map, op.in_layout, in, op.out_layout, out), in, out};
}

double choi_distance(const GlobalOperator& a, const GlobalOperator& b) {
    const GlobalOperator ca = canonicalize(a);
    const GlobalOperator cb = canonicalize(b);
    if (!(ca.in_layout == cb.in_layout) || !(ca.out_layout == cb.out_layout)) {
        throw DimensionError("choi_distance: operators act on different factors");
    }
    return choi_distance(ca.map, cb.map);
}

LayerGraph build_layer_graph(const NetSkeleton& restricted, const LocalAnnotation& ann, const Marking& from,
                             const Marking& to) {
    const auto& s = restricted;
    check_signatures(s, ann);
    for (NodeId c : from) {
        if (!s.is_place(c)) throw InvalidInput("marking condition " + std::to_string(c) + " is outside the net");
    }

    // Causal depth of each event inside the restricted net.
    std::map<NodeId, std::size_t> depth;
    std::size_t max_depth = 0;
    std::vector<NodeId> pending;
    for (const auto& [t, pol] : s.transitions()) pending.push_back(t);
    while (!pending.empty()) {
        std::vector<NodeId> next;
        for (NodeId t : pending) {
            std::size_t d = 1;
            bool ready = true;
            for (NodeId c : s.preset(t)) {
                for (NodeId producer : s.preset(c)) {
                    auto it = depth.find(producer);
                    if (it == depth.end()) {
                        ready = false;
                    } else {
                        d = std::max(d, it->second + 1);
                    }
                }
            }
            if (ready) {
                depth[t] = d;
                max_depth = std::max(max_depth, d);
            } else {
                next.push_back(t);
            }
        }
        if (next.size() == pending.size()) throw InvalidInput("restricted net is cyclic");
        pending = std::move(next);
    }

    auto identity_vertex = [](const Factor& f) {
        LayerVertex v;
        v.kind = f.key.kind == FactorKind::Condition ? VertexKind::Condition : VertexKind::HCarry;
        v.node = f.key.id;
        v.in = FactorLayout({f});
        v.out = v.in;
        v.label = identity_map(f.dim);
        return v;
    };

    std::vector<Factor> live;
    for (NodeId c : from) live.push_back(condition_factor(c, qdim_of(ann, c)));
    for (const auto& [t, pol] : s.transitions()) {
        if (pol == Polarity::Negative) live.push_back(input_h_factor(t, effective_hdim(s, ann, t)));
    }
    std::sort(live.begin(), live.end(), [](const Factor& a, const Factor& b) { return a.key < b.key; });

    LayerGraph g;
    g.domain = FactorLayout(live);
    auto wire_layer = [&] {
        std::vector<LayerVertex> layer;
        for (const auto& f : live) layer.push_back(identity_vertex(f));
        return layer;
    };
    g.layers.push_back(wire_layer());

    for (std::size_t k = 1; k <= max_depth; ++k) {
        std::vector<LayerVertex> layer;
        std::set<FactorKey> consumed;
        std::vector<Factor> produced;
        for (const auto& [t, d] : depth) {
            if (d != k) continue;
            LayerVertex v;
            v.kind = VertexKind::Event;
            v.node = t;
            v.in = event_input_layout(s, ann, t);
            v.out = event_output_layout(s, ann, t);
            v.label = map_of(ann, t);
            for (const auto& f : v.in.factors()) consumed.insert(f.key);
            produced.insert(produced.end(), v.out.factors().begin(), v.out.factors().end());
            layer.push_back(std::move(v));
        }
        std::vector<Factor> next_live;
        std::size_t found = 0;
        for (const auto& f : live) {
            if (consumed.count(f.key)) {
                ++found;
            } else {
                layer.push_back(identity_vertex(f));
                next_live.push_back(f);
            }
        }
        if (found != consumed.size()) throw DimensionError("layer graph: an event consumes a wire that is not live");
        next_live.insert(next_live.end(), produced.begin(), produced.end());
        std::sort(next_live.begin(), next_live.end(), [](const Factor& a, const Factor& b) { return a.key < b.key; });
        live = std::move(next_live);
        g.layers.push_back(std::move(layer));
        g.layers.push_back(wire_layer());
    }

    std::vector<Factor> expected;
    for (NodeId c : to) expected.push_back(condition_factor(c, qdim_of(ann, c)));
    for (const auto& [t, pol] : s.transitions()) {
        if (pol == Polarity::Positive) expected.push_back(output_h_factor(t, effective_hdim(s, ann, t)));
    }
    g.codomain = FactorLayout(live);
    if (!(g.codomain == FactorLayout(expected).canonical())) {
        throw NotReachable("restricted net does not lead from " + format_set(from) + " to " + format_set(to));
    }

    for (std::size_t i = 0; i + 1 < g.layers.size(); ++i) {
        std::map<FactorKey, std::size_t> producer;
        for (std::size_t v = 0; v < g.layers[i].size(); ++v) {
            for (const auto& f : g.layers[i][v].out.factors()) producer[f.key] = v;
        }
        for (std::size_t v = 0; v < g.layers[i + 1].size(); ++v) {
            for (const auto& f : g.layers[i + 1][v].in.factors()) {
                g.edges.push_back({i, producer.at(f.key), v, f.key});
            }
        }
    }
    return g;
}

GlobalOperator evaluate_diagram(const LayerGraph& g, const EvaluationOptions& options) {
    GlobalOperator state = identity_operator(g.domain);
    for (std::size_t i = 1; i < g.layers.size(); ++i) {
        const auto& layer = g.layers[i];
        const bool identities_only = std::all_of(layer.begin(), layer.end(),
                                                 [](const LayerVertex& v) { return v.kind != VertexKind::Event; });
        if (identities_only && options.elide_identity_layers) continue;
        GlobalOperator op = identity_operator(FactorLayout());
        for (const auto& v : layer) op = tensor(op, GlobalOperator{v.label, v.in, v.out});
        state = compose(op, state);
        if (state.map.kraus().size() > options.kraus_cap) state.map = compress(state.map);
    }
    return canonicalize(state);
}

GlobalOperator induced_global(const OccurrenceNet& o, const LocalAnnotation& ann, const Marking& m,
                              const Marking& m2, const EvaluationOptions& options) {
    const MarkingInterval i = interval(o, m, m2);
    return evaluate_diagram(build_layer_graph(restrict(o, i), ann, m, m2), options);
}

}  // namespace qpn
