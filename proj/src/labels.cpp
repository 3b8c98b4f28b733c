#include "ingredients/labels.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ingredients {

LabelSet& normalize(LabelSet& labels) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    return labels;
}

LabelSet TargetVector::labels() const {
    LabelSet out;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) out.push_back(static_cast<Index>(i));
    return out;
}

TargetVector TargetVector::from_labels(const LabelSet& labels, Index n) {
    TargetVector t{std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0)};
    for (Index id : labels) {
        if (id < 0 || id >= n)
            throw std::out_of_range("label " + std::to_string(id) + " outside vocabulary of size " + std::to_string(n));
        t.bits[static_cast<std::size_t>(id)] = 1;
    }
    return t;
}

Tensor target_tensor(const std::vector<LabelSet>& sets, Index n) {
    Tensor t({static_cast<Index>(sets.size()), n});
    auto m = t.matrix();
    for (std::size_t r = 0; r < sets.size(); ++r)
        for (Index id : sets[r]) {
            if (id < 0 || id >= n) throw std::out_of_range("label id outside target width");
            m(static_cast<Index>(r), id) = 1.0;
        }
    return t;
}

}  // namespace ingredients
