#pragma once

// Random local annotations and small annotated fixtures.

#include <numeric>
#include <vector>

#include "qpn/annotation.hpp"
#include "support/random.hpp"

namespace qpn::testing {

enum class MapKind { Projective, Contraction, Channel, Identity };

/// A CPTNI map din -> dout.
///  Projective: one Kraus operator W P with P a coordinate projector and W an
///  isometry or co-isometry. Contraction: one operator of norm <= 1.
///  Channel: trace preserving with 1-3 operators.
inline QuantumMap random_map(Rng& rng, std::size_t din, std::size_t dout, MapKind kind) {
    switch (kind) {
        case MapKind::Identity:
            return identity_map(din);
        case MapKind::Projective: {
            std::vector<std::size_t> basis;
            for (std::size_t i = 0; i < din; ++i) {
                if (rng.coin()) basis.push_back(i);
            }
            const Matrix w = dout >= din ? random_isometry(rng, dout, din) : Matrix(random_isometry(rng, din, dout).adjoint());
            return QuantumMap::from_kraus(din, dout, {w * projector(din, basis)});
        }
        case MapKind::Contraction:
            return QuantumMap::from_kraus(din, dout, {random_contraction(rng, dout, din, rng.uniform())});
        case MapKind::Channel:
            return QuantumMap::from_kraus(din, dout,
                                          random_channel_kraus(rng, din, dout, static_cast<std::size_t>(rng.range(1, 3))));
    }
    return identity_map(din);
}

struct AnnotationGenOptions {
    int max_qdim = 3;
    int max_hdim = 2;
    /// Negative events get identity maps, with post-condition spaces chosen
    /// so that the dimensions match. Needs events numbered in causal order.
    bool oblivious_negatives = false;
    double projective_weight = 1.0;
    double contraction_weight = 1.0;
    double channel_weight = 1.0;
};

inline MapKind random_kind(Rng& rng, const AnnotationGenOptions& opt) {
    const double total = opt.projective_weight + opt.contraction_weight + opt.channel_weight;
    const double u = rng.uniform() * total;
    if (u < opt.projective_weight) return MapKind::Projective;
    if (u < opt.projective_weight + opt.contraction_weight) return MapKind::Contraction;
    return MapKind::Channel;
}

inline std::size_t product_of(const LocalAnnotation& ann, const NodeSet& conds) {
    std::size_t p = 1;
    for (NodeId c : conds) p *= ann.qdim.at(c);
    return p;
}

inline LocalAnnotation random_annotation(Rng& rng, const NetSkeleton& s, const AnnotationGenOptions& opt = {}) {
    LocalAnnotation ann;
    for (NodeId c : s.places()) ann.qdim[c] = static_cast<std::size_t>(rng.range(1, opt.max_qdim));
    for (const auto& [t, pol] : s.transitions()) {
        if (pol != Polarity::Neutral) ann.hdim[t] = static_cast<std::size_t>(rng.range(1, opt.max_hdim));
        if (pol == Polarity::Negative && opt.oblivious_negatives) {
            std::vector<std::size_t> factors;
            for (NodeId c : s.preset(t)) factors.push_back(ann.qdim.at(c));
            factors.push_back(ann.hdim[t]);
            const std::vector<NodeId> post(s.postset(t).begin(), s.postset(t).end());
            for (NodeId c : post) ann.qdim[c] = 1;
            for (std::size_t i = 0; i < factors.size(); ++i) ann.qdim[post[i % post.size()]] *= factors[i];
        }
    }
    for (const auto& [t, pol] : s.transitions()) {
        const std::size_t din = event_input_layout(s, ann, t).total_dim();
        const std::size_t dout = event_output_layout(s, ann, t).total_dim();
        if (pol == Polarity::Negative && opt.oblivious_negatives) {
            ann.event_map.emplace(t, identity_map(din));
        } else {
            ann.event_map.emplace(t, random_map(rng, din, dout, random_kind(rng, opt)));
        }
    }
    return ann;
}

/// Identity on every condition-to-condition slot pair; used where only the
/// structure matters.
inline LocalAnnotation uniform_annotation(const NetSkeleton& s, std::size_t qdim) {
    LocalAnnotation ann;
    for (NodeId c : s.places()) ann.qdim[c] = qdim;
    for (const auto& [t, pol] : s.transitions()) {
        const std::size_t din = event_input_layout(s, ann, t).total_dim();
        const std::size_t dout = event_output_layout(s, ann, t).total_dim();
        Matrix k = Matrix::Zero(static_cast<Eigen::Index>(dout), static_cast<Eigen::Index>(din));
        for (std::size_t i = 0; i < std::min(din, dout); ++i) k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
        ann.event_map.emplace(t, QuantumMap::from_kraus(din, dout, {k}));
    }
    return ann;
}

}  // namespace qpn::testing
