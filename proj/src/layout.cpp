#include "qpn/layout.hpp"

#include <algorithm>

#include "qpn/errors.hpp"

namespace qpn {

std::string to_string(const FactorKey& key) {
    switch (key.kind) {
        case FactorKind::Condition:
            return "q" + std::to_string(key.id);
        case FactorKind::InputH:
            return "hin" + std::to_string(key.id);
        case FactorKind::OutputH:
            return "hout" + std::to_string(key.id);
    }
    return "?";
}

FactorLayout::FactorLayout(std::vector<Factor> factors) : factors_(std::move(factors)) {
    std::set<FactorKey> seen;
    for (const auto& f : factors_) {
        if (f.dim == 0) throw DimensionError("factor " + to_string(f.key) + " has dimension 0");
        if (!seen.insert(f.key).second) throw DimensionError("duplicate factor " + to_string(f.key));
    }
}

std::size_t FactorLayout::total_dim() const {
    std::size_t d = 1;
    for (const auto& f : factors_) d *= f.dim;
    return d;
}

bool FactorLayout::is_canonical() const {
    return std::is_sorted(factors_.begin(), factors_.end(),
                          [](const Factor& a, const Factor& b) { return a.key < b.key; });
}

FactorLayout FactorLayout::canonical() const {
    auto sorted = factors_;
    std::sort(sorted.begin(), sorted.end(), [](const Factor& a, const Factor& b) { return a.key < b.key; });
    FactorLayout out;
    out.factors_ = std::move(sorted);
    return out;
}

std::optional<std::size_t> FactorLayout::position(const FactorKey& key) const {
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        if (factors_[i].key == key) return i;
    }
    return std::nullopt;
}

std::size_t FactorLayout::dim_of(const FactorKey& key) const {
    auto pos = position(key);
    if (!pos) throw DimensionError("unknown factor " + to_string(key));
    return factors_[*pos].dim;
}

bool FactorLayout::is_permutation_of(const FactorLayout& other) const {
    return canonical() == other.canonical();
}

FactorLayout FactorLayout::concat(const FactorLayout& other) const {
    auto all = factors_;
    all.insert(all.end(), other.factors_.begin(), other.factors_.end());
    return FactorLayout(std::move(all));
}

FactorLayout FactorLayout::without(const std::set<FactorKey>& keys) const {
    FactorLayout out;
    for (const auto& f : factors_) {
        if (!keys.count(f.key)) out.factors_.push_back(f);
    }
    return out;
}

FactorLayout FactorLayout::only(const std::set<FactorKey>& keys) const {
    FactorLayout out;
    for (const auto& f : factors_) {
        if (keys.count(f.key)) out.factors_.push_back(f);
    }
    return out;
}

std::set<FactorKey> FactorLayout::keys() const {
    std::set<FactorKey> out;
    for (const auto& f : factors_) out.insert(f.key);
    return out;
}

}  // namespace qpn
