#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpn/annotation.hpp"
#include "qpn/unfolding.hpp"

namespace qpn {

enum class Verdict { Pass, Fail, Inconclusive };

std::string to_string(Verdict v);

inline constexpr double kDefaultTolerance = 1e-9;

// ---------------------------------------------------------------- obliviousness

struct ObliviousnessReport {
    Verdict verdict = Verdict::Pass;
    /// Choi distance to the identity for every negative event.
    std::map<NodeId, double> distance;
    std::vector<NodeId> witnesses;
    std::vector<std::string> details;
};

/// Every negative event must carry the identity from Q0(pre e) (x) H(e) onto
/// Q0(post e), slots taken in canonical order.
ObliviousnessReport check_local_obliviousness(const NetSkeleton& s, const LocalAnnotation& ann,
                                              double tol = kDefaultTolerance);

// ------------------------------------------------------- single-extension drop

/// Events enabled together at one cut, with the bookkeeping of the drop sum.
struct ClusterExtensionContext {
    Marking cut;
    std::vector<NodeId> events;
    FactorLayout layout;  // canonical layout of Q(cut)
    /// Pre-set of every event, aligned with `events`.
    std::vector<NodeSet> presets;

    /// Conditions of the cut consumed by no event of the context.
    NodeSet untouched() const;
    /// Conditions that stay marked when the events indexed by `subset` fire.
    NodeSet constant(const std::vector<std::size_t>& subset) const;
    /// True when the indexed events have pairwise disjoint pre-sets.
    bool compatible(const std::vector<std::size_t>& subset) const;
};

/// Throws InvalidInput if some event is negative or not enabled at `cut`.
ClusterExtensionContext make_extension_context(const NetSkeleton& s, const LocalAnnotation& ann, const Marking& cut,
                                               std::vector<NodeId> events);

struct DropStats {
    std::size_t subsets_visited = 0;
    std::size_t terms = 0;
};

inline constexpr std::size_t kDefaultSubsetCap = std::size_t{1} << 16;

/// Sum over compatible subsets I of (-1)^|I| (x)_{i in I} E(e_i) (x) I_{K_I},
/// in the canonical layout of the cut. Subsets are visited by size, then
/// lexicographically, extending only pairwise compatible ones.
Matrix drop_effect(const ClusterExtensionContext& ctx, const NetSkeleton& s, const LocalAnnotation& ann,
                   DropStats* stats = nullptr, std::size_t subset_cap = kDefaultSubsetCap);

/// I - sum_e E(e) (x) I for a family of pairwise conflicting events.
/// Throws InvalidInput if two events of the context are compatible.
Matrix drop_effect_clique_fast(const ClusterExtensionContext& ctx, const NetSkeleton& s, const LocalAnnotation& ann,
                               DropStats* stats = nullptr);

struct DropBounds {
    std::size_t max_states = kDefaultStateCap;
    /// Connected sub-families examined per cluster before giving up.
    std::size_t max_subfamilies = 4096;
    std::size_t max_subsets = kDefaultSubsetCap;
    unsigned workers = 1;
};

struct DropEntry {
    Marking cut;
    std::optional<Configuration> config;
    std::vector<NodeId> cluster;
    bool clique = false;
    /// The sub-family with the smallest eigenvalue.
    std::vector<NodeId> family;
    /// Drop sum of `family` on the conditions its events consume.
    Matrix effect;
    FactorLayout layout;
    double min_eigenvalue = 0.0;
    Vector witness;
    bool pass = true;
};

struct DropReport {
    Verdict verdict = Verdict::Pass;
    double tol = kDefaultTolerance;
    std::vector<DropEntry> entries;
    std::size_t states = 0;
    std::size_t families = 0;
    std::size_t terms = 0;
    std::string note;

    const DropEntry* first_failure() const;
};

/// Checks every cluster of enabled non-negative events at every configuration.
DropReport check_local_drop(const OccurrenceNet& o, const LocalAnnotation& ann, const DropBounds& bounds = {},
                            double tol = kDefaultTolerance);
/// Same check over the reachable markings of a safe net.
DropReport check_local_drop(const PetriNet& net, const LocalAnnotation& ann, const DropBounds& bounds = {},
                            double tol = kDefaultTolerance);

// ----------------------------------------------------------- global evaluators

/// Configurations strictly above x whose extra events are all non-negative,
/// by size then lexicographically.
std::vector<Configuration> positive_extensions(const OccurrenceNet& o, const Configuration& x,
                                               std::size_t cap = kDefaultStateCap);

/// Sum over I with y_I a configuration of (-1)^|I| effect(Q([x; y_I])).
Matrix drop_effect_direct(const OccurrenceNet& o, const LocalAnnotation& ann, const Configuration& x,
                          const std::vector<Configuration>& family);

/// The same quantity through the inductive relation on the last member.
/// Throws CapExceeded beyond `max_depth` nested calls.
Matrix drop_effect_recursive(const OccurrenceNet& o, const LocalAnnotation& ann, const Configuration& x,
                             const std::vector<Configuration>& family, std::size_t max_depth = 16);

struct OracleBounds {
    std::size_t max_configs = 4096;
    std::size_t max_family = 3;
    std::size_t max_families = 200000;
};

struct OracleWitness {
    Configuration x;
    std::vector<Configuration> family;
    Matrix effect;
    double min_eigenvalue = 0.0;
};

struct OracleReport {
    Verdict verdict = Verdict::Pass;
    std::size_t configurations = 0;
    std::size_t families = 0;
    double min_eigenvalue = 1.0;
    std::optional<OracleWitness> failure;
    std::string note;
};

/// Brute force over every configuration x and every family of at most
/// `max_family` distinct positive extensions of x.
OracleReport global_drop_oracle(const OccurrenceNet& o, const LocalAnnotation& ann, const OracleBounds& bounds = {},
                                double tol = kDefaultTolerance);

// -------------------------------------------------------------- certification

struct CertifyOptions {
    DropBounds drop;
    double tol = kDefaultTolerance;
    /// When set, the check is repeated on a lifted unfolding prefix.
    std::optional<UnfoldLimit> corroborate;
};

struct Corroboration {
    std::size_t events = 0;
    Verdict obliviousness = Verdict::Pass;
    Verdict drop = Verdict::Pass;
    std::string note;
};

struct CertificationReport {
    std::vector<SignatureIssue> signature;
    ObliviousnessReport obliviousness;
    DropReport drop;
    bool race_free = false;
    std::optional<Corroboration> corroboration;

    /// Pass needs obliviousness and the drop condition; race-freeness is
    /// reported but not required.
    Verdict certified() const;
};

CertificationReport certify_qpn(const PetriNet& net, const LocalAnnotation& ann, const CertifyOptions& options = {});

}  // namespace qpn
