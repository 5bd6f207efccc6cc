#include "qpn/verification.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <exception>
#include <limits>
#include <thread>

#include "qpn/errors.hpp"

namespace qpn {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass:
            return "pass";
        case Verdict::Fail:
            return "fail";
        case Verdict::Inconclusive:
            return "inconclusive";
    }
    return "?";
}

ObliviousnessReport check_local_obliviousness(const NetSkeleton& s, const LocalAnnotation& ann, double tol) {
    check_signatures(s, ann);
    ObliviousnessReport r;
    for (const auto& [t, pol] : s.transitions()) {
        if (pol != Polarity::Negative) continue;
        const QuantumMap& m = ann.event_map.at(t);
        if (m.input_dim() != m.output_dim()) {
            r.witnesses.push_back(t);
            r.details.push_back("event " + std::to_string(t) + ": output dimension " +
                                std::to_string(m.output_dim()) + " differs from pre-set and H dimension " +
                                std::to_string(m.input_dim()));
            continue;
        }
        const double d = choi_distance(m, identity_map(m.input_dim()));
        r.distance[t] = d;
        if (d > tol) {
            r.witnesses.push_back(t);
            r.details.push_back("event " + std::to_string(t) + " is not the identity (Choi distance " +
                                std::to_string(d) + ")");
        }
    }
    r.verdict = r.witnesses.empty() ? Verdict::Pass : Verdict::Fail;
    return r;
}

NodeSet ClusterExtensionContext::untouched() const {
    std::vector<std::size_t> all(events.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return constant(all);
}

NodeSet ClusterExtensionContext::constant(const std::vector<std::size_t>& subset) const {
    NodeSet k = cut;
    for (std::size_t i : subset) {
        for (NodeId c : presets.at(i)) k.erase(c);
    }
    return k;
}

bool ClusterExtensionContext::compatible(const std::vector<std::size_t>& subset) const {
    NodeSet seen;
    for (std::size_t i : subset) {
        for (NodeId c : presets.at(i)) {
            if (!seen.insert(c).second) return false;
        }
    }
    return true;
}

ClusterExtensionContext make_extension_context(const NetSkeleton& s, const LocalAnnotation& ann, const Marking& cut,
                                               std::vector<NodeId> events) {
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());
    ClusterExtensionContext ctx;
    ctx.cut = cut;
    ctx.layout = space_of_marking(ann, cut);
    for (NodeId e : events) {
        if (!s.is_transition(e)) throw InvalidInput(std::to_string(e) + " is not an event");
        if (s.polarity(e) == Polarity::Negative) {
            throw InvalidInput("event " + std::to_string(e) + " is negative and cannot enter a drop sum");
        }
        const NodeSet& pre = s.preset(e);
        if (!std::includes(cut.begin(), cut.end(), pre.begin(), pre.end())) {
            throw InvalidInput("event " + std::to_string(e) + " is not enabled at " + format_set(cut));
        }
        ctx.presets.push_back(pre);
    }
    ctx.events = std::move(events);
    return ctx;
}

namespace {

struct EventEffect {
    Matrix effect;
    FactorLayout layout;
};

std::vector<EventEffect> event_effects(const ClusterExtensionContext& ctx, const NetSkeleton& s,
                                       const LocalAnnotation& ann) {
    std::vector<EventEffect> out;
    for (NodeId e : ctx.events) {
        auto it = ann.event_map.find(e);
        if (it == ann.event_map.end()) throw IllTypedAnnotation("event " + std::to_string(e) + " has no map");
        out.push_back({effect_of(it->second).matrix(), event_input_layout(s, ann, e)});
    }
    return out;
}

bool presets_overlap(const NodeSet& a, const NodeSet& b) {
    for (NodeId c : a) {
        if (b.count(c)) return true;
    }
    return false;
}

}  // namespace

Matrix drop_effect(const ClusterExtensionContext& ctx, const NetSkeleton& s, const LocalAnnotation& ann,
                   DropStats* stats, std::size_t subset_cap) {
    const auto effects = event_effects(ctx, s, ann);
    const std::size_t dim = ctx.layout.total_dim();
    Matrix d = Matrix::Identity(dim, dim);
    DropStats local;
    local.subsets_visited = 1;
    local.terms = 1;

    std::vector<std::vector<std::size_t>> level{{}};
    while (!level.empty()) {
        std::vector<std::vector<std::size_t>> next;
        for (const auto& subset : level) {
            const std::size_t start = subset.empty() ? 0 : subset.back() + 1;
            for (std::size_t j = start; j < ctx.events.size(); ++j) {
                bool ok = true;
                for (std::size_t i : subset) ok = ok && !presets_overlap(ctx.presets[i], ctx.presets[j]);
                ++local.subsets_visited;
                if (local.subsets_visited > subset_cap) throw CapExceeded("drop sum: subset cap exceeded");
                if (!ok) continue;
                auto grown = subset;
                grown.push_back(j);
                next.push_back(std::move(grown));
            }
        }
        for (const auto& subset : next) {
            Matrix op = Matrix::Identity(1, 1);
            FactorLayout sub;
            for (std::size_t i : subset) {
                op = kron(op, effects[i].effect);
                sub = sub.concat(effects[i].layout);
            }
            const double sign = subset.size() % 2 == 0 ? 1.0 : -1.0;
            d += sign * extend_operator(op, sub, ctx.layout);
            ++local.terms;
        }
        level = std::move(next);
    }
    if (stats) {
        stats->subsets_visited += local.subsets_visited;
        stats->terms += local.terms;
    }
    return d;
}

Matrix drop_effect_clique_fast(const ClusterExtensionContext& ctx, const NetSkeleton& s, const LocalAnnotation& ann,
                               DropStats* stats) {
    for (std::size_t i = 0; i < ctx.events.size(); ++i) {
        for (std::size_t j = i + 1; j < ctx.events.size(); ++j) {
            if (!presets_overlap(ctx.presets[i], ctx.presets[j])) {
                throw InvalidInput("events " + std::to_string(ctx.events[i]) + " and " +
                                   std::to_string(ctx.events[j]) + " are compatible; not a clique");
            }
        }
    }
    const auto effects = event_effects(ctx, s, ann);
    const std::size_t dim = ctx.layout.total_dim();
    Matrix d = Matrix::Identity(dim, dim);
    for (const auto& e : effects) d -= extend_operator(e.effect, e.layout, ctx.layout);
    if (stats) {
        stats->subsets_visited += effects.size() + 1;
        stats->terms += effects.size() + 1;
    }
    return d;
}

const DropEntry* DropReport::first_failure() const {
    for (const auto& e : entries) {
        if (!e.pass) return &e;
    }
    return nullptr;
}

namespace {

struct State {
    Marking cut;
    std::optional<Configuration> config;
    std::vector<ConflictCluster> clusters;
};

struct StateResult {
    std::vector<DropEntry> entries;
    std::size_t families = 0;
    std::size_t terms = 0;
    bool inconclusive = false;
    std::string note;
};

bool mask_connected(std::uint32_t mask, const std::vector<std::uint32_t>& adj) {
    const std::uint32_t first = mask & (~mask + 1);
    std::uint32_t seen = first;
    std::uint32_t frontier = first;
    while (frontier) {
        std::uint32_t grow = 0;
        for (std::size_t i = 0; i < adj.size(); ++i) {
            if (frontier & (1u << i)) grow |= adj[i];
        }
        grow &= mask & ~seen;
        seen |= grow;
        frontier = grow;
    }
    return seen == mask;
}

StateResult examine_state(const NetSkeleton& s, const LocalAnnotation& ann, const State& st, const DropBounds& bounds,
                          double tol) {
    StateResult out;
    for (const auto& cluster : st.clusters) {
        DropEntry entry;
        entry.cut = st.cut;
        entry.config = st.config;
        entry.cluster = cluster.events;
        entry.clique = cluster.is_clique;
        entry.min_eigenvalue = std::numeric_limits<double>::infinity();

        auto consider = [&](const std::vector<NodeId>& family, bool clique) {
            DropStats stats;
            // Conditions outside the family's pre-sets only contribute an
            // identity factor, which leaves the spectrum unchanged.
            Marking local;
            for (NodeId e : family) local.insert(s.preset(e).begin(), s.preset(e).end());
            const auto ctx = make_extension_context(s, ann, local, family);
            Matrix d;
            try {
                d = clique ? drop_effect_clique_fast(ctx, s, ann, &stats)
                           : drop_effect(ctx, s, ann, &stats, bounds.max_subsets);
            } catch (const CapExceeded& e) {
                out.inconclusive = true;
                out.note = e.what();
                return;
            }
            out.terms += stats.terms;
            ++out.families;
            const EigenProbe probe = min_eigen(d);
            if (probe.value < entry.min_eigenvalue) {
                entry.min_eigenvalue = probe.value;
                entry.family = family;
                entry.effect = std::move(d);
                entry.layout = ctx.layout;
                entry.witness = probe.vector;
            }
        };

        const std::size_t k = cluster.events.size();
        if (cluster.is_clique) {
            // Sub-families of a clique only remove PSD terms, so the whole
            // clique is the binding case.
            consider(cluster.events, true);
        } else if (k > 24) {
            out.inconclusive = true;
            out.note = "cluster of " + std::to_string(k) + " events is too large to enumerate";
            continue;
        } else {
            std::map<NodeId, std::size_t> pos;
            for (std::size_t i = 0; i < k; ++i) pos[cluster.events[i]] = i;
            std::vector<std::uint32_t> adj(k, 0);
            for (const auto& [a, b] : cluster.edges) {
                adj[pos.at(a)] |= 1u << pos.at(b);
                adj[pos.at(b)] |= 1u << pos.at(a);
            }
            std::size_t examined = 0;
            bool capped = false;
            for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
                if (!mask_connected(mask, adj)) continue;
                if (++examined > bounds.max_subfamilies) {
                    capped = true;
                    break;
                }
                std::vector<NodeId> family;
                bool clique = true;
                for (std::size_t i = 0; i < k; ++i) {
                    if (!(mask & (1u << i))) continue;
                    family.push_back(cluster.events[i]);
                    if ((adj[i] | (1u << i)) != ((adj[i] | (1u << i)) | mask)) clique = false;
                }
                consider(family, clique);
            }
            if (capped) {
                out.inconclusive = true;
                out.note = "sub-family cap reached on cluster " + format_set(NodeSet(entry.cluster.begin(),
                                                                                     entry.cluster.end()));
            }
        }
        if (entry.family.empty()) continue;
        entry.pass = entry.min_eigenvalue >= -tol;
        out.entries.push_back(std::move(entry));
    }
    return out;
}

DropReport run_states(const NetSkeleton& s, const LocalAnnotation& ann, const std::vector<State>& states,
                      const DropBounds& bounds, double tol) {
    std::vector<StateResult> results(states.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(bounds.workers, states.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < states.size(); ++i) results[i] = examine_state(s, ann, states[i], bounds, tol);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = next++; i < states.size(); i = next++) {
                        results[i] = examine_state(s, ann, states[i], bounds, tol);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                    next = states.size();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    DropReport r;
    r.tol = tol;
    r.states = states.size();
    bool inconclusive = false;
    for (auto& res : results) {
        r.families += res.families;
        r.terms += res.terms;
        if (res.inconclusive) {
            inconclusive = true;
            if (r.note.empty()) r.note = res.note;
        }
        for (auto& e : res.entries) r.entries.push_back(std::move(e));
    }
    if (r.first_failure()) {
        r.verdict = Verdict::Fail;
    } else if (inconclusive) {
        r.verdict = Verdict::Inconclusive;
    }
    return r;
}

DropReport capped_report(double tol, const std::string& what) {
    DropReport r;
    r.tol = tol;
    r.verdict = Verdict::Inconclusive;
    r.note = what;
    return r;
}

}  // namespace

DropReport check_local_drop(const OccurrenceNet& o, const LocalAnnotation& ann, const DropBounds& bounds, double tol) {
    check_signatures(o.skeleton(), ann);
    std::vector<Configuration> configs;
    try {
        configs = configurations(o, bounds.max_states);
    } catch (const CapExceeded&) {
        return capped_report(tol, "more than " + std::to_string(bounds.max_states) + " configurations");
    }
    std::vector<State> states;
    for (const auto& x : configs) states.push_back({cut_of(o, x), x, conflict_clusters(o, x)});
    return run_states(o.skeleton(), ann, states, bounds, tol);
}

DropReport check_local_drop(const PetriNet& net, const LocalAnnotation& ann, const DropBounds& bounds, double tol) {
    const NetSkeleton& s = net.skeleton();
    check_signatures(s, ann);
    std::vector<Marking> markings;
    try {
        markings = reachable_markings(net, kUnbounded, bounds.max_states);
    } catch (const CapExceeded&) {
        return capped_report(tol, "more than " + std::to_string(bounds.max_states) + " reachable markings");
    }
    std::vector<State> states;
    for (const auto& m : markings) {
        NodeSet candidates;
        for (NodeId t : enabled(net, m)) {
            if (s.polarity(t) != Polarity::Negative) candidates.insert(t);
        }
        states.push_back({m, std::nullopt, immediate_conflict_clusters(s, candidates)});
    }
    return run_states(s, ann, states, bounds, tol);
}

std::vector<Configuration> positive_extensions(const OccurrenceNet& o, const Configuration& x, std::size_t cap) {
    const NetSkeleton& s = o.skeleton();
    std::set<Configuration> seen{x};
    std::vector<Configuration> frontier{x};
    std::vector<Configuration> out;
    while (!frontier.empty()) {
        std::vector<Configuration> next;
        for (const auto& y : frontier) {
            for (NodeId e : single_extensions(o, y)) {
                if (s.polarity(e) == Polarity::Negative) continue;
                Configuration z = y;
                z.insert(e);
                if (!seen.insert(z).second) continue;
                if (seen.size() > cap + 1) throw CapExceeded("positive extensions exceed " + std::to_string(cap));
                out.push_back(z);
                next.push_back(std::move(z));
            }
        }
        frontier = std::move(next);
    }
    std::sort(out.begin(), out.end(), [](const Configuration& a, const Configuration& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

namespace {

Matrix interval_effect(const OccurrenceNet& o, const LocalAnnotation& ann, const Marking& from, const Marking& to) {
    const GlobalOperator g = induced_global(o, ann, from, to);
    if (!(g.in_layout == space_of_marking(ann, from))) {
        throw InvalidInput("interval " + format_set(from) + " -> " + format_set(to) + " contains a negative event");
    }
    return effect_of(g.map).matrix();
}

Configuration join_all(const Configuration& x, const std::vector<Configuration>& family, std::uint64_t mask) {
    Configuration u = x;
    for (std::size_t i = 0; i < family.size(); ++i) {
        if (mask & (std::uint64_t{1} << i)) u.insert(family[i].begin(), family[i].end());
    }
    return u;
}

void check_family(const OccurrenceNet& o, const Configuration& x, const std::vector<Configuration>& family) {
    if (family.size() > 20) throw CapExceeded("family larger than 20 members");
    for (const auto& y : family) {
        if (!std::includes(y.begin(), y.end(), x.begin(), x.end()) || !is_configuration(o, y)) {
            throw InvalidInput("family member " + format_set(y) + " is not a configuration above " + format_set(x));
        }
    }
}

}  // namespace

Matrix drop_effect_direct(const OccurrenceNet& o, const LocalAnnotation& ann, const Configuration& x,
                          const std::vector<Configuration>& family) {
    check_family(o, x, family);
    const Marking from = cut_of(o, x);
    const std::size_t dim = space_of_marking(ann, from).total_dim();
    Matrix d = Matrix::Zero(dim, dim);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << family.size()); ++mask) {
        const Configuration y = join_all(x, family, mask);
        if (!is_configuration(o, y)) continue;
        const double sign = std::popcount(mask) % 2 == 0 ? 1.0 : -1.0;
        d += sign * interval_effect(o, ann, from, cut_of(o, y));
    }
    return d;
}

namespace {

Matrix recursive_drop(const OccurrenceNet& o, const LocalAnnotation& ann, const Configuration& x,
                      std::vector<Configuration> family, std::size_t depth, std::size_t max_depth) {
    if (depth > max_depth) throw CapExceeded("drop recursion deeper than " + std::to_string(max_depth));
    const Marking from = cut_of(o, x);
    if (family.empty()) {
        const std::size_t dim = space_of_marking(ann, from).total_dim();
        return Matrix::Identity(dim, dim);
    }
    const Configuration last = family.back();
    family.pop_back();
    Matrix d = recursive_drop(o, ann, x, family, depth + 1, max_depth);

    std::vector<Configuration> above;
    for (const auto& y : family) {
        Configuration u = y;
        u.insert(last.begin(), last.end());
        if (is_configuration(o, u)) above.push_back(std::move(u));
    }
    const Marking to = cut_of(o, last);
    const Matrix inner = recursive_drop(o, ann, last, std::move(above), depth + 1, max_depth);
    const GlobalOperator g = induced_global(o, ann, from, to);
    if (!(g.in_layout == space_of_marking(ann, from))) {
        throw InvalidInput("interval " + format_set(from) + " -> " + format_set(to) + " contains a negative event");
    }
    // Trace the output H factors and pull the inner effect back through O.
    d -= g.map.apply_dual(extend_operator(inner, space_of_marking(ann, to), g.out_layout));
    return d;
}

}  // namespace

Matrix drop_effect_recursive(const OccurrenceNet& o, const LocalAnnotation& ann, const Configuration& x,
                             const std::vector<Configuration>& family, std::size_t max_depth) {
    check_family(o, x, family);
    return recursive_drop(o, ann, x, family, 0, max_depth);
}

OracleReport global_drop_oracle(const OccurrenceNet& o, const LocalAnnotation& ann, const OracleBounds& bounds,
                                double tol) {
    check_signatures(o.skeleton(), ann);
    OracleReport r;
    std::vector<Configuration> configs;
    try {
        configs = configurations(o, bounds.max_configs);
    } catch (const CapExceeded&) {
        r.verdict = Verdict::Inconclusive;
        r.note = "more than " + std::to_string(bounds.max_configs) + " configurations";
        return r;
    }
    r.configurations = configs.size();
    bool capped = false;

    for (const auto& x : configs) {
        const Marking from = cut_of(o, x);
        const std::vector<Configuration> ext = positive_extensions(o, x, bounds.max_configs);
        if (ext.empty()) continue;
        const std::size_t dim = space_of_marking(ann, from).total_dim();
        std::map<Configuration, Matrix> cache;
        auto effect = [&](const Configuration& y) -> const Matrix& {
            auto it = cache.find(y);
            if (it == cache.end()) it = cache.emplace(y, interval_effect(o, ann, from, cut_of(o, y))).first;
            return it->second;
        };

        std::vector<std::size_t> pick;
        bool stop = false;
        auto rec = [&](auto&& self, std::size_t start) -> void {
            if (stop) return;
            if (!pick.empty()) {
                if (++r.families > bounds.max_families) {
                    capped = true;
                    stop = true;
                    return;
                }
                Matrix d = Matrix::Zero(dim, dim);
                std::vector<Configuration> family;
                for (std::size_t i : pick) family.push_back(ext[i]);
                for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << family.size()); ++mask) {
                    const double sign = std::popcount(mask) % 2 == 0 ? 1.0 : -1.0;
                    if (mask == 0) {
                        d += Matrix::Identity(dim, dim);
                        continue;
                    }
                    const Configuration y = join_all(x, family, mask);
                    if (!is_configuration(o, y)) continue;
                    d += sign * effect(y);
                }
                const double lambda = min_eigen(d).value;
                r.min_eigenvalue = std::min(r.min_eigenvalue, lambda);
                if (lambda < -tol) {
                    r.failure = OracleWitness{x, std::move(family), std::move(d), lambda};
                    stop = true;
                    return;
                }
            }
            if (pick.size() == bounds.max_family) return;
            for (std::size_t j = start; j < ext.size() && !stop; ++j) {
                pick.push_back(j);
                self(self, j + 1);
                pick.pop_back();
            }
        };
        rec(rec, 0);
        if (r.failure) {
            r.verdict = Verdict::Fail;
            return r;
        }
        if (capped) break;
    }
    if (capped) {
        r.verdict = Verdict::Inconclusive;
        r.note = "more than " + std::to_string(bounds.max_families) + " families";
    }
    return r;
}

Verdict CertificationReport::certified() const {
    if (!signature.empty()) return Verdict::Fail;
    if (obliviousness.verdict == Verdict::Fail || drop.verdict == Verdict::Fail) return Verdict::Fail;
    if (drop.verdict == Verdict::Inconclusive) return Verdict::Inconclusive;
    return Verdict::Pass;
}

CertificationReport certify_qpn(const PetriNet& net, const LocalAnnotation& ann, const CertifyOptions& options) {
    CertificationReport r;
    const NetSkeleton& s = net.skeleton();
    r.race_free = is_race_free(s);
    r.signature = signature_issues(s, ann);
    if (!r.signature.empty()) {
        r.obliviousness.verdict = Verdict::Inconclusive;
        r.drop.verdict = Verdict::Inconclusive;
        r.drop.note = "annotation is ill-typed";
        return r;
    }
    r.obliviousness = check_local_obliviousness(s, ann, options.tol);
    r.drop = check_local_drop(net, ann, options.drop, options.tol);
    if (options.corroborate) {
        Corroboration c;
        try {
            const BranchingProcess bp = unfold(net, *options.corroborate);
            const LocalAnnotation lifted = lift_annotation(bp, ann);
            c.events = bp.occ.events().size();
            c.obliviousness = check_local_obliviousness(bp.occ.skeleton(), lifted, options.tol).verdict;
            c.drop = check_local_drop(bp.occ, lifted, options.drop, options.tol).verdict;
        } catch (const SafetyViolation& e) {
            c.obliviousness = Verdict::Inconclusive;
            c.drop = Verdict::Inconclusive;
            c.note = e.what();
        }
        r.corroboration = c;
    }
    return r;
}

}  // namespace qpn
