#ifndef INGREDIENTS_INSPECT_HPP
#define INGREDIENTS_INSPECT_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ingredients/labels.hpp"
#include "ingredients/network.hpp"
#include "ingredients/vocab.hpp"

namespace ingredients {

enum class SpatialReduction { mean, max };

/// (samples, neurons) activations at the output of `layer_index`, which must
/// be a relu or maxpool2x2 layer. Channel maps are reduced over space.
Eigen::MatrixXd neuron_activations(const Network& net, const Tensor& inputs, std::size_t layer_index,
                                   SpatialReduction reduction = SpatialReduction::mean);

/// Index of the last relu or maxpool2x2 layer before the final layer: the
/// features the classifier reads.
std::size_t penultimate_activation_layer(const Network& net);

/// The `count` neurons with the largest activation variance, highest first
/// (ties to the lower index).
std::vector<Index> neurons_by_variance(const Eigen::MatrixXd& activations, Index count);

struct TopSample {
    std::string id;
    double activation = 0.0;
};

struct NeuronReport {
    Index layer_index = 0;
    Index neuron_index = 0;
    std::vector<TopSample> top_samples;  // activation descending, ties by id
    Index top_ingredient = -1;           // -1 when every candidate was masked
    Index top_ingredient_count = 0;
    std::vector<bool> containment;  // per top sample: truth contains top_ingredient

    Index containment_count() const;
};

struct TopKOptions {
    Index k = 10;
    /// Ingredients present in more than this fraction of the subset are not
    /// candidates for the dominant ingredient. Off by default.
    std::optional<double> ubiquity_cutoff;
};

/// Top-k samples of one neuron and the ingredient most frequent among their
/// truth sets (ties to the lexicographically smallest name).
NeuronReport top_k_report(const Eigen::MatrixXd& activations, Index neuron, std::span<const std::string> ids,
                          std::span<const LabelSet> truths, const TopKOptions& options, Index layer_index = 0);

std::vector<NeuronReport> top_k_reports(const Eigen::MatrixXd& activations, std::span<const Index> neurons,
                                        std::span<const std::string> ids, std::span<const LabelSet> truths,
                                        const TopKOptions& options, Index layer_index = 0);

nlohmann::json to_json(const NeuronReport& report, const Vocabulary& vocab);
std::string to_text(std::span<const NeuronReport> reports, const Vocabulary& vocab);

/// One row per report, one (3, H, W) image per top sample. `images` holds
/// centred network inputs; `image_of` maps a recipe id to its row.
void write_contact_sheet(const std::string& path, std::span<const NeuronReport> reports, const Tensor& images,
                         const std::function<Index(const std::string&)>& image_of);

}  // namespace ingredients

#endif  // INGREDIENTS_INSPECT_HPP
