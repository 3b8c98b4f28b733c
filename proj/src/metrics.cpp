#include "ingredients/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ingredients {

DecisionRule DecisionRule::at_threshold(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("threshold must lie in [0, 1]");
    DecisionRule r;
    r.kind = Kind::threshold;
    r.threshold = t;
    return r;
}

DecisionRule DecisionRule::top(Index k) {
    if (k < 1) throw std::invalid_argument("top-K needs K >= 1");
    DecisionRule r;
    r.kind = Kind::top_k;
    r.k = k;
    return r;
}

std::string DecisionRule::describe() const {
    std::ostringstream os;
    if (kind == Kind::threshold)
        os << "threshold:" << threshold;
    else
        os << "top_k:" << k;
    return os.str();
}

DecisionRule DecisionRule::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("decision rule must be threshold:T or top_k:K");
    const std::string kind = text.substr(0, colon);
    const std::string value = text.substr(colon + 1);
    try {
        if (kind == "threshold") return at_threshold(std::stod(value));
        if (kind == "top_k") return top(std::stol(value));
    } catch (const std::logic_error&) {
        throw std::invalid_argument("bad decision rule '" + text + "'");
    }
    throw std::invalid_argument("bad decision rule '" + text + "'");
}

PredictionSet decide(const Eigen::VectorXd& scores, const DecisionRule& rule) {
    PredictionSet p{scores, {}};
    const Index n = scores.size();
    if (rule.kind == DecisionRule::Kind::threshold) {
        if (!(rule.threshold >= 0.0 && rule.threshold <= 1.0))
            throw std::invalid_argument("threshold must lie in [0, 1]");
        for (Index i = 0; i < n; ++i)
            if (scores[i] >= rule.threshold) p.chosen.push_back(i);
        return p;
    }
    if (rule.k < 1 || rule.k > n)
        throw std::invalid_argument("top-K with K=" + std::to_string(rule.k) + " over " + std::to_string(n) +
                                    " labels");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + rule.k, order.end(), [&](Index a, Index b) {
        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    });
    p.chosen.assign(order.begin(), order.begin() + rule.k);
    normalize(p.chosen);
    return p;
}

std::vector<PredictionSet> decide(const Tensor& probs, const DecisionRule& rule) {
    if (probs.rank() != 2) throw ShapeError("decide expects (batch, N) scores");
    std::vector<PredictionSet> out;
    out.reserve(static_cast<std::size_t>(probs.dim(0)));
    auto m = probs.matrix();
    for (Index r = 0; r < m.rows(); ++r) out.push_back(decide(Eigen::VectorXd(m.row(r).transpose()), rule));
    return out;
}

double harmonic_f1(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

SampleScore score_sample(const LabelSet& chosen, const LabelSet& truth) {
    // Both sides are sorted, so a merge walk counts the overlap.
    std::size_t hits = 0;
    auto a = chosen.begin();
    auto b = truth.begin();
    while (a != chosen.end() && b != truth.end()) {
        if (*a < *b)
            ++a;
        else if (*b < *a)
            ++b;
        else {
            ++hits;
            ++a;
            ++b;
        }
    }
    SampleScore s;
    if (!chosen.empty()) s.precision = static_cast<double>(hits) / static_cast<double>(chosen.size());
    if (!truth.empty()) s.recall = static_cast<double>(hits) / static_cast<double>(truth.size());
    return s;
}

namespace {

// Summing a sorted copy makes the mean independent of sample order.
double order_free_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double total = 0.0;
    for (double x : v) total += x;
    return total / static_cast<double>(v.size());
}

MetricsReport summarize(std::vector<SampleScore> per_sample, std::string split, std::string rule) {
    MetricsReport r;
    r.split = std::move(split);
    r.rule = std::move(rule);
    std::vector<double> p, q;
    p.reserve(per_sample.size());
    q.reserve(per_sample.size());
    for (const SampleScore& s : per_sample) {
        p.push_back(s.precision);
        q.push_back(s.recall);
    }
    r.precision = 100.0 * order_free_mean(std::move(p));
    r.recall = 100.0 * order_free_mean(std::move(q));
    r.f1 = harmonic_f1(r.precision, r.recall);
    r.per_sample = std::move(per_sample);
    return r;
}

}  // namespace

MetricsReport evaluate(std::span<const LabelSet> chosen, std::span<const LabelSet> truths, std::string split,
                       std::string rule) {
    if (chosen.size() != truths.size())
        throw std::invalid_argument("evaluate: " + std::to_string(chosen.size()) + " predictions vs " +
                                    std::to_string(truths.size()) + " truths");
    if (chosen.empty()) throw std::invalid_argument("evaluate: no samples");
    std::vector<SampleScore> per_sample;
    per_sample.reserve(chosen.size());
    for (std::size_t i = 0; i < chosen.size(); ++i) per_sample.push_back(score_sample(chosen[i], truths[i]));
    return summarize(std::move(per_sample), std::move(split), std::move(rule));
}

MetricsReport evaluate(const std::vector<PredictionSet>& predictions, const std::vector<TargetVector>& truths,
                       std::string split, std::string rule) {
    if (predictions.size() != truths.size())
        throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) + " predictions vs " +
                                    std::to_string(truths.size()) + " truths");
    std::vector<LabelSet> chosen, truth;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        chosen.push_back(predictions[i].chosen);
        truth.push_back(truths[i].labels());
    }
    return evaluate(chosen, truth, std::move(split), std::move(rule));
}

LabelSet uniform_subset(Index n, Index k, std::mt19937_64& rng) {
    if (k < 1 || k > n) throw std::invalid_argument("subset size must satisfy 1 <= k <= n");
    LabelSet out;
    out.reserve(static_cast<std::size_t>(k));
    for (Index j = n - k; j < n; ++j) {
        const Index t = std::uniform_int_distribution<Index>(0, j)(rng);
        if (std::find(out.begin(), out.end(), t) == out.end())
            out.push_back(t);
        else
            out.push_back(j);
    }
    return normalize(out);
}

Index baseline_k(std::span<const LabelSet> truths) {
    if (truths.empty()) throw std::invalid_argument("baseline K needs at least one truth set");
    double total = 0.0;
    for (const LabelSet& t : truths) total += static_cast<double>(t.size());
    return std::max<Index>(1, std::llround(total / static_cast<double>(truths.size())));
}

MetricsReport random_baseline(Index n_labels, Index k, std::span<const LabelSet> truths, std::uint64_t seed,
                              std::string split) {
    if (k < 1 || k > n_labels)
        throw std::invalid_argument("random baseline needs 1 <= k <= n_labels, got k=" + std::to_string(k));
    std::mt19937_64 rng(seed);
    std::vector<LabelSet> chosen;
    chosen.reserve(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) chosen.push_back(uniform_subset(n_labels, k, rng));
    return evaluate(chosen, truths, std::move(split), "random_k:" + std::to_string(k));
}

nlohmann::json to_json(const MetricsReport& report) {
    return nlohmann::json{{"split", report.split},         {"precision", report.precision},
                          {"recall", report.recall},       {"f1", report.f1},
                          {"n_samples", report.n_samples()}, {"rule", report.rule}};
}

std::string to_text(const MetricsReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "split=" << report.split << '\n'
       << "precision=" << report.precision << '\n'
       << "recall=" << report.recall << '\n'
       << "f1=" << report.f1 << '\n'
       << "n_samples=" << report.n_samples() << '\n'
       << "rule=" << report.rule << '\n';
    return os.str();
}

}  // namespace ingredients
