#ifndef INGREDIENTS_LABELS_HPP
#define INGREDIENTS_LABELS_HPP

#include <cstdint>
#include <vector>

#include "ingredients/tensor.hpp"

namespace ingredients {

/// Sorted, duplicate-free label ids.
using LabelSet = std::vector<Index>;

/// Sorts and deduplicates in place; returns the argument for chaining.
LabelSet& normalize(LabelSet& labels);

/// Binary indicator vector over a vocabulary of size N.
struct TargetVector {
    std::vector<std::uint8_t> bits;

    Index size() const { return static_cast<Index>(bits.size()); }
    LabelSet labels() const;
    static TargetVector from_labels(const LabelSet& labels, Index n);

    friend bool operator==(const TargetVector&, const TargetVector&) = default;
};

/// (samples, n) tensor of 0/1 targets.
Tensor target_tensor(const std::vector<LabelSet>& sets, Index n);

}  // namespace ingredients

#endif  // INGREDIENTS_LABELS_HPP
