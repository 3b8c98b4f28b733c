#include "ingredients/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ingredients {

namespace {

const double kLogFloor = std::log(kProbabilityFloor);
const double kLogCeil = std::log1p(-kProbabilityFloor);

double clamp_prob(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }
double clamp_log(double lp) { return std::clamp(lp, kLogFloor, kLogCeil); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void check_pair(const Tensor& a, const Tensor& targets) {
    if (a.rank() != 2 || a.shape() != targets.shape())
        throw ShapeError("loss expects matching (batch, N) tensors, got " + shape_string(a.shape()) + " and " +
                         shape_string(targets.shape()));
    for (Index i = 0; i < targets.size(); ++i)
        if (targets[i] != 0.0 && targets[i] != 1.0)
            throw std::invalid_argument("target entries must be exactly 0 or 1");
}

void check_classes(const Tensor& a, const std::vector<Index>& classes) {
    if (a.rank() != 2 || static_cast<Index>(classes.size()) != a.dim(0))
        throw ShapeError("categorical loss expects one class per row of " + shape_string(a.shape()));
    for (Index c : classes)
        if (c < 0 || c >= a.dim(1))
            throw std::out_of_range("class index " + std::to_string(c) + " outside [0, " +
                                    std::to_string(a.dim(1)) + ")");
}

}  // namespace

Tensor sigmoid(const Tensor& logits) {
    Tensor out(logits.shape());
    for (Index i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        // Both branches avoid exp overflow.
        const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        out[i] = clamp_prob(p);
    }
    return out;
}

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("softmax expects (batch, N), got " + shape_string(logits.shape()));
    Tensor out(logits.shape());
    auto z = logits.matrix();
    auto p = out.matrix();
    for (Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        p.row(r) = (z.row(r).array() - m).exp().matrix();
        p.row(r) /= p.row(r).sum();
        p.row(r) = p.row(r).unaryExpr([](double v) { return clamp_prob(v); });
    }
    return out;
}

LossResult binary_cross_entropy(const Tensor& probs, const Tensor& targets) {
    check_pair(probs, targets);
    const double batch = static_cast<double>(probs.dim(0));
    LossResult r{0.0, Tensor(probs.shape())};
    double total = 0.0;
    for (Index i = 0; i < probs.size(); ++i) {
        const double p = clamp_prob(probs[i]);
        const double y = targets[i];
        total -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
        r.dlogits[i] = (p - y) / batch;
    }
    r.loss = total / batch;
    return r;
}

LossResult binary_cross_entropy_with_logits(const Tensor& logits, const Tensor& targets) {
    check_pair(logits, targets);
    const double batch = static_cast<double>(logits.dim(0));
    const Tensor p = sigmoid(logits);
    LossResult r{0.0, Tensor(logits.shape())};
    double total = 0.0;
    for (Index i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const double y = targets[i];
        const double log_p = clamp_log(-softplus(-z));
        const double log_not_p = clamp_log(-softplus(z));
        total -= y * log_p + (1.0 - y) * log_not_p;
        r.dlogits[i] = (p[i] - y) / batch;
    }
    r.loss = total / batch;
    return r;
}

LossResult categorical_cross_entropy(const Tensor& probs, const std::vector<Index>& classes) {
    check_classes(probs, classes);
    const double batch = static_cast<double>(probs.dim(0));
    LossResult r{0.0, Tensor(probs.shape())};
    auto p = probs.matrix();
    auto g = r.dlogits.matrix();
    double total = 0.0;
    for (Index b = 0; b < p.rows(); ++b) {
        total -= std::log(clamp_prob(p(b, classes[b])));
        g.row(b) = p.row(b) / batch;
        g(b, classes[b]) -= 1.0 / batch;
    }
    r.loss = total / batch;
    return r;
}

LossResult categorical_cross_entropy_with_logits(const Tensor& logits, const std::vector<Index>& classes) {
    check_classes(logits, classes);
    const double batch = static_cast<double>(logits.dim(0));
    const Tensor p = softmax(logits);
    LossResult r{0.0, Tensor(logits.shape())};
    auto z = logits.matrix();
    auto g = r.dlogits.matrix();
    double total = 0.0;
    for (Index b = 0; b < z.rows(); ++b) {
        const double m = z.row(b).maxCoeff();
        const double lse = m + std::log((z.row(b).array() - m).exp().sum());
        total -= clamp_log(z(b, classes[b]) - lse);
        g.row(b) = p.matrix().row(b) / batch;
        g(b, classes[b]) -= 1.0 / batch;
    }
    r.loss = total / batch;
    return r;
}

}  // namespace ingredients
