#ifndef INGREDIENTS_NETWORK_HPP
#define INGREDIENTS_NETWORK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ingredients/tensor.hpp"

namespace ingredients {

enum class LayerKind { dense, conv2d, maxpool2x2, relu, flatten };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct DenseHyper {
    Index in_dim = 0;
    Index out_dim = 0;
};

/// Valid padding only.
struct Conv2dHyper {
    Index in_channels = 0;
    Index out_channels = 0;
    Index kernel_h = 0;
    Index kernel_w = 0;
    Index stride = 1;
};

/// One stage of the layer stack. Dense weights are (out, in); conv weights
/// are (out_channels, in_channels, kernel_h, kernel_w). Biases are 1-D.
struct Layer {
    LayerKind kind = LayerKind::relu;
    DenseHyper dense;
    Conv2dHyper conv;
    Tensor weight;
    Tensor bias;
    bool trainable = true;

    static Layer make_dense(Index in_dim, Index out_dim);
    static Layer make_conv2d(Index in_channels, Index out_channels, Index kernel_h, Index kernel_w,
                             Index stride = 1);
    static Layer make_relu() { return Layer{}; }
    static Layer make_maxpool2x2();
    static Layer make_flatten();

    bool has_parameters() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

    /// Per-sample output shape (batch dimension excluded).
    Shape output_shape(const Shape& sample_shape) const;
};

enum class Head { sigmoid_multilabel, softmax_singlelabel };

std::string to_string(Head head);
Head head_from_string(const std::string& name);

struct Network {
    Shape input_shape;  // per sample
    std::vector<Layer> layers;
    Head head = Head::sigmoid_multilabel;

    /// Throws ShapeError unless consecutive layers compose and end in a
    /// rank-1 output.
    void validate() const;
    Index output_dim() const;
    Index parameter_count() const;

    /// Pointers in canonical order: for each parameterised layer, weight then bias.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    /// Trainable flag for each entry of parameters().
    std::vector<bool> parameter_trainable() const;
};

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
void initialize(Layer& layer, std::uint64_t seed);
void initialize(Network& net, std::uint64_t seed);

/// Up to three conv -> relu -> maxpool stages (5x5x16, 3x3x32, 3x3x64), added
/// while the map stays even-sized, then maxpools down to 1x1 where possible,
/// flatten and dense(n_labels). For 3x32x32 input the classifier sees one
/// spatial maximum per channel.
Network make_default_network(const Shape& input_shape, Index n_labels, std::uint64_t seed);

// Single-layer kernels. Batched tensors carry the batch as dimension 0.
Tensor dense_forward(const Layer& layer, const Tensor& input);
Tensor conv2d_forward(const Layer& layer, const Tensor& input);
Tensor maxpool2x2_forward(const Tensor& input);
Tensor relu_forward(const Tensor& input);
Tensor flatten_forward(const Tensor& input);

/// Routes each window's gradient to its first row-major maximum.
Tensor maxpool2x2_backward(const Tensor& input, const Tensor& upstream);

struct LayerGradients {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

Tensor layer_forward(const Layer& layer, const Tensor& input);
/// `input` is what the layer saw during forward. Parameter gradients are
/// skipped (left empty) when `with_parameters` is false.
LayerGradients layer_backward(const Layer& layer, const Tensor& input, const Tensor& upstream,
                              bool with_parameters = true);

struct ForwardCache {
    /// activations[0] is the batch, activations[i + 1] the output of layer i.
    std::vector<Tensor> activations;
};

struct ForwardResult {
    Tensor logits;
    ForwardCache cache;
};

ForwardResult forward(const Network& net, const Tensor& batch);
/// Forward without keeping intermediates.
Tensor infer(const Network& net, const Tensor& batch);
/// Output of layer `layer_index` (inclusive) without running the rest.
Tensor forward_to(const Network& net, const Tensor& batch, std::size_t layer_index);

struct Gradients {
    std::vector<Tensor> parameters;  // same order as Network::parameters()
    Tensor input;
};

/// Frozen layers receive zero gradients unless `include_frozen` is set.
Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& dloss_dlogits,
                   bool include_frozen = true);

}  // namespace ingredients

#endif  // INGREDIENTS_NETWORK_HPP
