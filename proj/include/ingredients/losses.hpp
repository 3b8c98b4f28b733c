#ifndef INGREDIENTS_LOSSES_HPP
#define INGREDIENTS_LOSSES_HPP

#include <vector>

#include "ingredients/tensor.hpp"

namespace ingredients {

/// Probabilities are kept inside [kProbabilityFloor, 1 - kProbabilityFloor]
/// so that every log in the losses stays finite.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossResult {
    /// Summed over labels, averaged over the batch.
    double loss = 0.0;
    /// Gradient of `loss` with respect to the logits, shape (batch, N).
    Tensor dlogits;
};

/// Elementwise logistic 1 / (1 + exp(-z)), clamped.
Tensor sigmoid(const Tensor& logits);

/// Row-wise softmax over a (batch, N) tensor via log-sum-exp, clamped.
Tensor softmax(const Tensor& logits);

/// Multi-label log loss
///   L = -sum_i [ y_i log p_i + (1 - y_i) log(1 - p_i) ]
/// per sample, from sigmoid probabilities `probs` and 0/1 `targets` of the same
/// shape. dlogits is the gradient through the sigmoid, (p - y) / batch.
LossResult binary_cross_entropy(const Tensor& probs, const Tensor& targets);

/// Same quantity evaluated from logits with log-sigmoid, without forming p
/// first; the training path.
LossResult binary_cross_entropy_with_logits(const Tensor& logits, const Tensor& targets);

/// Single-label log loss -log p_c from softmax probabilities; dlogits is
/// (p - onehot(c)) / batch.
LossResult categorical_cross_entropy(const Tensor& probs, const std::vector<Index>& classes);

/// Same quantity from logits via log-softmax.
LossResult categorical_cross_entropy_with_logits(const Tensor& logits, const std::vector<Index>& classes);

}  // namespace ingredients

#endif  // INGREDIENTS_LOSSES_HPP
