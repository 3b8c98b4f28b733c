#ifndef INGREDIENTS_METRICS_HPP
#define INGREDIENTS_METRICS_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ingredients/labels.hpp"

namespace ingredients {

/// How a score vector becomes a label set: every label at or above a
/// threshold, or the K best (ties to the lower id).
struct DecisionRule {
    enum class Kind { threshold, top_k };
    Kind kind = Kind::threshold;
    double threshold = 0.5;
    Index k = 1;

    static DecisionRule at_threshold(double t);
    static DecisionRule top(Index k);
    std::string describe() const;
    static DecisionRule parse(const std::string& text);
};

struct PredictionSet {
    Eigen::VectorXd scores;
    LabelSet chosen;
};

PredictionSet decide(const Eigen::VectorXd& scores, const DecisionRule& rule);
/// One PredictionSet per row of a (batch, N) probability tensor.
std::vector<PredictionSet> decide(const Tensor& probs, const DecisionRule& rule);

struct SampleScore {
    double precision = 0.0;
    double recall = 0.0;
};

/// Example-based scores in percent: precision and recall are per-sample
/// ratios averaged over samples, f1 is the harmonic mean of those averages.
struct MetricsReport {
    std::string split;
    std::string rule;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<SampleScore> per_sample;

    Index n_samples() const { return static_cast<Index>(per_sample.size()); }
};

/// 2PR / (P + R), zero when both are zero.
double harmonic_f1(double precision, double recall);

/// Per-sample ratios for one prediction. An empty prediction has precision 0
/// and an empty truth has recall 0.
SampleScore score_sample(const LabelSet& chosen, const LabelSet& truth);

MetricsReport evaluate(std::span<const LabelSet> chosen, std::span<const LabelSet> truths,
                       std::string split = "eval", std::string rule = "given");
MetricsReport evaluate(const std::vector<PredictionSet>& predictions, const std::vector<TargetVector>& truths,
                       std::string split = "eval", std::string rule = "given");

/// Uniform k-subset of [0, n) without replacement (Floyd's method).
LabelSet uniform_subset(Index n, Index k, std::mt19937_64& rng);

/// Rounded mean truth-set size.
Index baseline_k(std::span<const LabelSet> truths);

/// Predicts an independent uniform k-subset per sample and scores it against
/// `truths`. Deterministic per seed.
MetricsReport random_baseline(Index n_labels, Index k, std::span<const LabelSet> truths, std::uint64_t seed,
                              std::string split = "random");

nlohmann::json to_json(const MetricsReport& report);
/// Flat key=value lines.
std::string to_text(const MetricsReport& report);

}  // namespace ingredients

#endif  // INGREDIENTS_METRICS_HPP
