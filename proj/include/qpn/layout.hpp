#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qpn {

using NodeId = std::int64_t;
using NodeSet = std::set<NodeId>;

// Canonical order: every condition factor comes first, then the input-H block,
// then the output-H block; ids ascend inside each block.
enum class FactorKind : std::uint8_t { Condition = 0, InputH = 1, OutputH = 2 };

struct FactorKey {
    FactorKind kind = FactorKind::Condition;
    NodeId id = 0;

    auto operator<=>(const FactorKey&) const = default;
};

struct Factor {
    FactorKey key;
    std::size_t dim = 1;

    bool operator==(const Factor&) const = default;
};

inline Factor condition_factor(NodeId id, std::size_t dim) { return {{FactorKind::Condition, id}, dim}; }
inline Factor input_h_factor(NodeId id, std::size_t dim) { return {{FactorKind::InputH, id}, dim}; }
inline Factor output_h_factor(NodeId id, std::size_t dim) { return {{FactorKind::OutputH, id}, dim}; }

std::string to_string(const FactorKey& key);

/// Ordered list of tensor factors describing a composite Hilbert space.
///
/// Keys are unique. Any order is representable so that explicit
/// permutations between layouts can be expressed; `canonical()` yields the
/// sorted form used for every public result.
class FactorLayout {
public:
    FactorLayout() = default;
    explicit FactorLayout(std::vector<Factor> factors);

    const std::vector<Factor>& factors() const { return factors_; }
    std::size_t size() const { return factors_.size(); }
    bool empty() const { return factors_.empty(); }
    std::size_t total_dim() const;

    bool is_canonical() const;
    FactorLayout canonical() const;

    std::optional<std::size_t> position(const FactorKey& key) const;
    bool contains(const FactorKey& key) const { return position(key).has_value(); }
    std::size_t dim_of(const FactorKey& key) const;

    /// True when both layouts carry the same factors, in any order.
    bool is_permutation_of(const FactorLayout& other) const;

    /// Concatenation; the key sets must be disjoint.
    FactorLayout concat(const FactorLayout& other) const;

    /// Factors whose key is not in `keys`, in this layout's order.
    FactorLayout without(const std::set<FactorKey>& keys) const;
    /// Factors whose key is in `keys`, in this layout's order.
    FactorLayout only(const std::set<FactorKey>& keys) const;

    std::set<FactorKey> keys() const;

    bool operator==(const FactorLayout&) const = default;

private:
    std::vector<Factor> factors_;
};

}  // namespace qpn
