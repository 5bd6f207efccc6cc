#include "qpn/unfolding.hpp"

#include <algorithm>
#include <tuple>

#include "qpn/errors.hpp"

namespace qpn {

NodeSet BranchingProcess::project(const NodeSet& nodes) const {
    NodeSet out;
    for (NodeId n : nodes) out.insert(labels.at(n));
    return out;
}

namespace {

struct Candidate {
    NodeId transition;
    std::vector<NodeId> preset;

    bool operator<(const Candidate& o) const { return std::tie(transition, preset) < std::tie(o.transition, o.preset); }
};

struct PrefixBuilder {
    NodeSet places;
    std::map<NodeId, Polarity> events;
    std::vector<Arc> flow;
    std::map<NodeId, NodeId> labels;
    std::map<NodeId, std::size_t> depth;
    NodeId next = 0;

    NodeId add_condition(NodeId place, std::size_t d) {
        const NodeId id = next++;
        places.insert(id);
        labels[id] = place;
        depth[id] = d;
        return id;
    }

    NetSkeleton skeleton() const { return NetSkeleton(places, events, flow); }
};

bool co(const OrderStructure& order, NodeId a, NodeId b) {
    return a != b && !order.leq(a, b) && !order.leq(b, a) && !order.conflict(a, b);
}

void check_safe(const PrefixBuilder& b, const OrderStructure& order) {
    std::map<NodeId, std::vector<NodeId>> by_place;
    for (NodeId c : b.places) by_place[b.labels.at(c)].push_back(c);
    for (const auto& [place, conds] : by_place) {
        for (std::size_t i = 0; i < conds.size(); ++i) {
            for (std::size_t j = i + 1; j < conds.size(); ++j) {
                if (co(order, conds[i], conds[j])) {
                    throw SafetyViolation("place " + std::to_string(place) + " can hold two tokens (conditions " +
                                          std::to_string(conds[i]) + " and " + std::to_string(conds[j]) + ")");
                }
            }
        }
    }
}

}  // namespace

BranchingProcess unfold(const PetriNet& net, const UnfoldLimit& limit) {
    const NetSkeleton& base = net.skeleton();
    for (const auto& [t, pol] : base.transitions()) {
        if (base.preset(t).empty()) {
            throw InvalidInput("transition " + std::to_string(t) + " has an empty pre-set and cannot be unfolded");
        }
    }

    PrefixBuilder b;
    NodeSet c0;
    for (NodeId p : net.initial_marking()) c0.insert(b.add_condition(p, 0));

    std::set<Candidate> seen;
    std::map<NodeId, std::vector<NodeId>> conditions_of;  // place -> conditions, ascending
    for (NodeId c : c0) conditions_of[b.labels[c]].push_back(c);

    bool saturated = true;
    while (true) {
        const NetSkeleton s = b.skeleton();
        const OrderStructure order(s);
        check_safe(b, order);

        std::vector<Candidate> round;
        for (const auto& [t, pol] : base.transitions()) {
            const std::vector<NodeId> pre(base.preset(t).begin(), base.preset(t).end());
            std::vector<NodeId> chosen;
            auto rec = [&](auto&& self, std::size_t k) -> void {
                if (k == pre.size()) {
                    std::size_t d = 0;
                    for (NodeId c : chosen) d = std::max(d, b.depth.at(c));
                    if (d + 1 > limit.max_depth) return;
                    std::vector<NodeId> sorted = chosen;
                    std::sort(sorted.begin(), sorted.end());
                    Candidate cand{t, sorted};
                    if (!seen.count(cand)) round.push_back(std::move(cand));
                    return;
                }
                auto it = conditions_of.find(pre[k]);
                if (it == conditions_of.end()) return;
                for (NodeId c : it->second) {
                    bool ok = true;
                    for (NodeId prev : chosen) ok = ok && co(order, prev, c);
                    if (!ok) continue;
                    chosen.push_back(c);
                    self(self, k + 1);
                    chosen.pop_back();
                }
            };
            rec(rec, 0);
        }
        if (round.empty()) break;
        std::sort(round.begin(), round.end());

        for (const auto& cand : round) {
            if (b.events.size() >= limit.max_events) {
                saturated = false;
                break;
            }
            seen.insert(cand);
            const NodeId e = b.next++;
            b.events[e] = base.polarity(cand.transition);
            b.labels[e] = cand.transition;
            std::size_t d = 0;
            for (NodeId c : cand.preset) {
                b.flow.push_back({c, e});
                d = std::max(d, b.depth.at(c));
            }
            b.depth[e] = d + 1;
            for (NodeId p : base.postset(cand.transition)) {
                const NodeId c = b.add_condition(p, d + 1);
                b.flow.push_back({e, c});
                conditions_of[p].push_back(c);
            }
        }
        if (!saturated) {
            check_safe(b, OrderStructure(b.skeleton()));
            break;
        }
    }

    BranchingProcess bp{OccurrenceNet(b.skeleton(), c0), std::move(b.labels), std::move(b.depth), saturated};
    return bp;
}

ValidationReport validate_branching_process(const PetriNet& net, const BranchingProcess& bp) {
    const NetSkeleton& base = net.skeleton();
    const NetSkeleton& s = bp.occ.skeleton();
    ValidationReport r;

    auto label_of = [&](NodeId n) -> std::optional<NodeId> {
        auto it = bp.labels.find(n);
        if (it == bp.labels.end()) return std::nullopt;
        return it->second;
    };

    {
        std::optional<NodeId> bad;
        std::string detail;
        for (NodeId c : s.places()) {
            auto l = label_of(c);
            if (!l || !base.is_place(*l)) {
                bad = c;
                detail = "condition " + std::to_string(c) + " is not labelled with a place";
                break;
            }
        }
        if (!bad) {
            for (const auto& [e, pol] : s.transitions()) {
                auto l = label_of(e);
                if (!l || !base.is_transition(*l)) {
                    bad = e;
                    detail = "event " + std::to_string(e) + " is not labelled with a transition";
                    break;
                }
                if (base.polarity(*l) != pol) {
                    bad = e;
                    detail = "event " + std::to_string(e) + " has a polarity different from its label";
                    break;
                }
            }
        }
        if (bad) {
            r.fail("label-kinds", bad, detail);
            // The remaining clauses assume well-kinded labels.
            r.fail("environment-bijection", std::nullopt, "not checked: labels are ill-kinded");
            r.fail("initial-bijection", std::nullopt, "not checked: labels are ill-kinded");
            r.fail("no-duplicate-events", std::nullopt, "not checked: labels are ill-kinded");
            return r;
        }
        r.pass("label-kinds");
    }

    auto bijective = [&](const NodeSet& conds, const NodeSet& places) {
        NodeSet image;
        for (NodeId c : conds) image.insert(bp.labels.at(c));
        return image.size() == conds.size() && image == places;
    };

    {
        std::optional<NodeId> bad;
        std::string detail;
        for (const auto& [e, pol] : s.transitions()) {
            const NodeId t = bp.labels.at(e);
            if (!bijective(s.preset(e), base.preset(t))) {
                bad = e;
                detail = "pre-set of event " + std::to_string(e) + " does not match transition " + std::to_string(t);
                break;
            }
            if (!bijective(s.postset(e), base.postset(t))) {
                bad = e;
                detail = "post-set of event " + std::to_string(e) + " does not match transition " + std::to_string(t);
                break;
            }
        }
        if (bad) {
            r.fail("environment-bijection", bad, detail);
        } else {
            r.pass("environment-bijection");
        }
    }

    NodeSet minimal;
    for (NodeId c : s.places()) {
        if (s.preset(c).empty()) minimal.insert(c);
    }
    if (bijective(minimal, net.initial_marking())) {
        r.pass("initial-bijection");
    } else {
        r.fail("initial-bijection", minimal.empty() ? std::nullopt : std::optional<NodeId>(*minimal.begin()),
               "minimal conditions " + format_set(minimal) + " do not match the initial marking");
    }

    std::map<std::pair<NodeId, NodeSet>, NodeId> owner;
    std::optional<NodeId> dup;
    for (const auto& [e, pol] : s.transitions()) {
        auto [it, inserted] = owner.emplace(std::make_pair(bp.labels.at(e), s.preset(e)), e);
        if (!inserted) {
            dup = e;
            r.fail("no-duplicate-events", e,
                   "events " + std::to_string(it->second) + " and " + std::to_string(e) +
                       " share their label and pre-set");
            break;
        }
    }
    if (!dup) r.pass("no-duplicate-events");
    return r;
}

LocalAnnotation lift_annotation(const BranchingProcess& bp, const LocalAnnotation& base) {
    const NetSkeleton& s = bp.occ.skeleton();
    LocalAnnotation out;
    for (NodeId c : s.places()) {
        const NodeId p = bp.labels.at(c);
        auto it = base.qdim.find(p);
        if (it == base.qdim.end()) throw IllTypedAnnotation("place " + std::to_string(p) + " has no space");
        out.qdim[c] = it->second;
    }
    for (const auto& [e, pol] : s.transitions()) {
        const NodeId t = bp.labels.at(e);
        auto m = base.event_map.find(t);
        if (m == base.event_map.end()) throw IllTypedAnnotation("transition " + std::to_string(t) + " has no map");
        if (auto h = base.hdim.find(t); h != base.hdim.end()) out.hdim[e] = h->second;

        // Slots of the base map follow place order; the instance uses condition order.
        auto by_label = [&](const NodeSet& conds) {
            std::vector<NodeId> v(conds.begin(), conds.end());
            std::sort(v.begin(), v.end(), [&](NodeId a, NodeId b) { return bp.labels.at(a) < bp.labels.at(b); });
            std::vector<Factor> fs;
            for (NodeId c : v) fs.push_back(condition_factor(c, out.qdim.at(c)));
            return fs;
        };
        std::vector<Factor> in_from = by_label(s.preset(e));
        std::vector<Factor> out_from = by_label(s.postset(e));
        const std::size_t hd = effective_hdim(s, out, e);
        if (pol == Polarity::Negative) in_from.push_back(input_h_factor(e, hd));
        if (pol == Polarity::Positive) out_from.push_back(output_h_factor(e, hd));
        const FactorLayout in_from_l(in_from);
        const FactorLayout out_from_l(out_from);
        if (m->second.input_dim() != in_from_l.total_dim() || m->second.output_dim() != out_from_l.total_dim()) {
            throw IllTypedAnnotation("transition " + std::to_string(t) + ": map dimensions do not match its signature");
        }
        out.event_map.emplace(e, permute_factors(m->second, in_from_l, in_from_l.canonical(), out_from_l,
                                                 out_from_l.canonical()));
    }
    return out;
}

}  // namespace qpn
