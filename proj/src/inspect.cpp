#include "ingredients/inspect.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "ingredients/data.hpp"
#include "ingredients/errors.hpp"

namespace ingredients {

Eigen::MatrixXd neuron_activations(const Network& net, const Tensor& inputs, std::size_t layer_index,
                                   SpatialReduction reduction) {
    if (layer_index >= net.layers.size()) throw ShapeError("layer index " + std::to_string(layer_index) + " out of range");
    const LayerKind kind = net.layers[layer_index].kind;
    if (kind != LayerKind::relu && kind != LayerKind::maxpool2x2)
        throw ShapeError("layer " + std::to_string(layer_index) + " (" + to_string(kind) +
                         ") has no post-nonlinearity activations");
    const Tensor out = forward_to(net, inputs, layer_index);
    const Index samples = out.dim(0);
    if (out.rank() == 2) return out.matrix();
    if (out.rank() != 4) throw ShapeError("unexpected activation shape " + shape_string(out.shape()));
    const Index channels = out.dim(1), area = out.dim(2) * out.dim(3);
    Eigen::MatrixXd acts(samples, channels);
    for (Index s = 0; s < samples; ++s)
        for (Index c = 0; c < channels; ++c) {
            const Eigen::Map<const Eigen::VectorXd> plane(out.data() + (s * channels + c) * area, area);
            acts(s, c) = reduction == SpatialReduction::mean ? plane.mean() : plane.maxCoeff();
        }
    return acts;
}

std::size_t penultimate_activation_layer(const Network& net) {
    for (std::size_t i = net.layers.size(); i-- > 1;) {
        const LayerKind k = net.layers[i - 1].kind;
        if (k == LayerKind::relu || k == LayerKind::maxpool2x2) return i - 1;
    }
    throw ShapeError("network has no relu or maxpool layer before its head");
}

std::vector<Index> neurons_by_variance(const Eigen::MatrixXd& activations, Index count) {
    const Index n = activations.cols();
    Eigen::VectorXd var(n);
    for (Index j = 0; j < n; ++j) {
        const Eigen::VectorXd centred = activations.col(j).array() - activations.col(j).mean();
        var[j] = centred.squaredNorm() / static_cast<double>(std::max<Index>(1, activations.rows()));
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return var[a] > var[b]; });
    order.resize(static_cast<std::size_t>(std::min(count, n)));
    return order;
}

Index NeuronReport::containment_count() const {
    return static_cast<Index>(std::count(containment.begin(), containment.end(), true));
}

NeuronReport top_k_report(const Eigen::MatrixXd& activations, Index neuron, std::span<const std::string> ids,
                          std::span<const LabelSet> truths, const TopKOptions& options, Index layer_index) {
    const Index samples = activations.rows();
    if (samples == 0) throw DataError("top-k report over an empty subset");
    if (static_cast<Index>(ids.size()) != samples || static_cast<Index>(truths.size()) != samples)
        throw DataError("activation rows, ids and truths disagree in length");
    if (neuron < 0 || neuron >= activations.cols()) throw ShapeError("neuron index out of range");
    if (options.k < 1 || options.k > samples)
        throw std::invalid_argument("k=" + std::to_string(options.k) + " outside [1, " + std::to_string(samples) + "]");

    std::vector<Index> order(static_cast<std::size_t>(samples));
    std::iota(order.begin(), order.end(), Index{0});
    const auto col = activations.col(neuron);
    std::partial_sort(order.begin(), order.begin() + options.k, order.end(), [&](Index a, Index b) {
        if (col[a] != col[b]) return col[a] > col[b];
        return ids[static_cast<std::size_t>(a)] < ids[static_cast<std::size_t>(b)];
    });
    order.resize(static_cast<std::size_t>(options.k));

    NeuronReport r;
    r.layer_index = layer_index;
    r.neuron_index = neuron;
    for (Index s : order) r.top_samples.push_back({ids[static_cast<std::size_t>(s)], col[s]});

    std::map<Index, Index> in_subset, in_top;
    for (const LabelSet& t : truths)
        for (Index id : t) ++in_subset[id];
    for (Index s : order)
        for (Index id : truths[static_cast<std::size_t>(s)]) ++in_top[id];

    // Vocabulary ids are in name order, so the first maximum in id order is
    // also the lexicographically smallest name.
    for (const auto& [id, count] : in_top) {
        if (options.ubiquity_cutoff &&
            static_cast<double>(in_subset[id]) > *options.ubiquity_cutoff * static_cast<double>(samples))
            continue;
        if (count > r.top_ingredient_count) {
            r.top_ingredient = id;
            r.top_ingredient_count = count;
        }
    }
    for (Index s : order) {
        const LabelSet& t = truths[static_cast<std::size_t>(s)];
        r.containment.push_back(r.top_ingredient >= 0 && std::binary_search(t.begin(), t.end(), r.top_ingredient));
    }
    return r;
}

std::vector<NeuronReport> top_k_reports(const Eigen::MatrixXd& activations, std::span<const Index> neurons,
                                        std::span<const std::string> ids, std::span<const LabelSet> truths,
                                        const TopKOptions& options, Index layer_index) {
    std::vector<NeuronReport> out;
    out.reserve(neurons.size());
    for (Index n : neurons) out.push_back(top_k_report(activations, n, ids, truths, options, layer_index));
    return out;
}

nlohmann::json to_json(const NeuronReport& r, const Vocabulary& vocab) {
    nlohmann::json top = nlohmann::json::array();
    for (std::size_t i = 0; i < r.top_samples.size(); ++i)
        top.push_back({{"id", r.top_samples[i].id},
                       {"activation", r.top_samples[i].activation},
                       {"contains_top_ingredient", static_cast<bool>(r.containment[i])}});
    return {{"layer_index", r.layer_index},
            {"neuron_index", r.neuron_index},
            {"top_ingredient", r.top_ingredient >= 0 ? nlohmann::json(vocab.name(r.top_ingredient)) : nlohmann::json()},
            {"top_ingredient_count", r.top_ingredient_count},
            {"containment", r.containment_count()},
            {"top_samples", std::move(top)}};
}

std::string to_text(std::span<const NeuronReport> reports, const Vocabulary& vocab) {
    std::ostringstream os;
    os << "layer\tneuron\ttop_ingredient\tcontained\ttop_samples\n";
    for (const NeuronReport& r : reports) {
        os << r.layer_index << '\t' << r.neuron_index << '\t'
           << (r.top_ingredient >= 0 ? vocab.name(r.top_ingredient) : std::string("-")) << '\t'
           << r.containment_count() << '/' << r.top_samples.size() << '\t';
        for (std::size_t i = 0; i < r.top_samples.size(); ++i)
            os << (i ? " " : "") << r.top_samples[i].id << (r.containment[i] ? "+" : "-");
        os << '\n';
    }
    return os.str();
}

void write_contact_sheet(const std::string& path, std::span<const NeuronReport> reports, const Tensor& images,
                         const std::function<Index(const std::string&)>& image_of) {
    if (images.rank() != 4 || images.dim(1) != 3) throw ShapeError("contact sheet needs (samples, 3, H, W) images");
    if (reports.empty()) throw DataError("no reports for contact sheet");
    const Index h = images.dim(2), w = images.dim(3), pad = 2;
    std::size_t cols = 0;
    for (const NeuronReport& r : reports) cols = std::max(cols, r.top_samples.size());
    const Index sheet_h = static_cast<Index>(reports.size()) * (h + pad) + pad;
    const Index sheet_w = static_cast<Index>(cols) * (w + pad) + pad;
    Tensor sheet({3, sheet_h, sheet_w}, 1.0);
    for (std::size_t row = 0; row < reports.size(); ++row)
        for (std::size_t col = 0; col < reports[row].top_samples.size(); ++col) {
            const Index src = image_of(reports[row].top_samples[col].id);
            const Index top = static_cast<Index>(row) * (h + pad) + pad;
            const Index left = static_cast<Index>(col) * (w + pad) + pad;
            for (Index c = 0; c < 3; ++c)
                for (Index y = 0; y < h; ++y)
                    for (Index x = 0; x < w; ++x)
                        sheet[(c * sheet_h + top + y) * sheet_w + left + x] =
                            images[((src * 3 + c) * h + y) * w + x] + kPixelOffset;
        }
    write_ppm(path, sheet);
}

}  // namespace ingredients
