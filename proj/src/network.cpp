#include "ingredients/network.hpp"

#include <array>
#include <cmath>
#include <random>

namespace ingredients {

namespace {

std::string layer_label(std::size_t index, const Layer& layer) {
    return "layer " + std::to_string(index) + " (" + to_string(layer.kind) + ")";
}

Index conv_out_dim(Index in, Index kernel, Index stride) {
    return in < kernel ? 0 : (in - kernel) / stride + 1;
}

// Unfolds one (C, H, W) sample into a (C*kh*kw, Ho*Wo) patch matrix.
void im2col(const double* x, const Conv2dHyper& h, Index height, Index width, RowMatrix& cols) {
    const Index ho = conv_out_dim(height, h.kernel_h, h.stride);
    const Index wo = conv_out_dim(width, h.kernel_w, h.stride);
    cols.resize(h.in_channels * h.kernel_h * h.kernel_w, ho * wo);
    Index row = 0;
    for (Index c = 0; c < h.in_channels; ++c) {
        const double* plane = x + c * height * width;
        for (Index ky = 0; ky < h.kernel_h; ++ky) {
            for (Index kx = 0; kx < h.kernel_w; ++kx, ++row) {
                double* dst = cols.row(row).data();
                for (Index oy = 0; oy < ho; ++oy) {
                    const double* src = plane + (oy * h.stride + ky) * width + kx;
                    for (Index ox = 0; ox < wo; ++ox) dst[oy * wo + ox] = src[ox * h.stride];
                }
            }
        }
    }
}

void col2im_add(const RowMatrix& cols, const Conv2dHyper& h, Index height, Index width, double* dx) {
    const Index ho = conv_out_dim(height, h.kernel_h, h.stride);
    const Index wo = conv_out_dim(width, h.kernel_w, h.stride);
    Index row = 0;
    for (Index c = 0; c < h.in_channels; ++c) {
        double* plane = dx + c * height * width;
        for (Index ky = 0; ky < h.kernel_h; ++ky) {
            for (Index kx = 0; kx < h.kernel_w; ++kx, ++row) {
                const double* src = cols.row(row).data();
                for (Index oy = 0; oy < ho; ++oy) {
                    double* dst = plane + (oy * h.stride + ky) * width + kx;
                    for (Index ox = 0; ox < wo; ++ox) dst[ox * h.stride] += src[oy * wo + ox];
                }
            }
        }
    }
}

void require_rank(const Tensor& t, Index rank, const char* what) {
    if (t.rank() != rank)
        throw ShapeError(std::string(what) + " expects a rank-" + std::to_string(rank) +
                         " batch, got " + shape_string(t.shape()));
}

}  // namespace

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::maxpool2x2: return "maxpool2x2";
        case LayerKind::relu: return "relu";
        case LayerKind::flatten: return "flatten";
    }
    return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
    for (LayerKind k : {LayerKind::dense, LayerKind::conv2d, LayerKind::maxpool2x2, LayerKind::relu,
                        LayerKind::flatten})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown layer kind '" + name + "'");
}

std::string to_string(Head head) {
    return head == Head::sigmoid_multilabel ? "sigmoid_multilabel" : "softmax_singlelabel";
}

Head head_from_string(const std::string& name) {
    if (name == "sigmoid_multilabel") return Head::sigmoid_multilabel;
    if (name == "softmax_singlelabel") return Head::softmax_singlelabel;
    throw std::invalid_argument("unknown head '" + name + "'");
}

Layer Layer::make_dense(Index in_dim, Index out_dim) {
    Layer l;
    l.kind = LayerKind::dense;
    l.dense = {in_dim, out_dim};
    l.weight = Tensor({out_dim, in_dim});
    l.bias = Tensor({out_dim});
    return l;
}

Layer Layer::make_conv2d(Index in_channels, Index out_channels, Index kernel_h, Index kernel_w,
                         Index stride) {
    if (stride < 1) throw ShapeError("conv2d stride must be >= 1");
    Layer l;
    l.kind = LayerKind::conv2d;
    l.conv = {in_channels, out_channels, kernel_h, kernel_w, stride};
    l.weight = Tensor({out_channels, in_channels, kernel_h, kernel_w});
    l.bias = Tensor({out_channels});
    return l;
}

Layer Layer::make_maxpool2x2() {
    Layer l;
    l.kind = LayerKind::maxpool2x2;
    return l;
}

Layer Layer::make_flatten() {
    Layer l;
    l.kind = LayerKind::flatten;
    return l;
}

Shape Layer::output_shape(const Shape& s) const {
    switch (kind) {
        case LayerKind::dense:
            if (s.size() != 1 || s[0] != dense.in_dim)
                throw ShapeError("dense expects (" + std::to_string(dense.in_dim) + "), got " +
                                 shape_string(s));
            return {dense.out_dim};
        case LayerKind::conv2d: {
            if (s.size() != 3 || s[0] != conv.in_channels)
                throw ShapeError("conv2d expects (" + std::to_string(conv.in_channels) +
                                 ", H, W), got " + shape_string(s));
            const Index ho = conv_out_dim(s[1], conv.kernel_h, conv.stride);
            const Index wo = conv_out_dim(s[2], conv.kernel_w, conv.stride);
            if (ho < 1 || wo < 1) throw ShapeError("conv2d kernel larger than input " + shape_string(s));
            return {conv.out_channels, ho, wo};
        }
        case LayerKind::maxpool2x2:
            if (s.size() != 3) throw ShapeError("maxpool2x2 expects (C, H, W), got " + shape_string(s));
            if (s[1] % 2 != 0 || s[2] % 2 != 0)
                throw ShapeError("maxpool2x2 needs even spatial dims, got " + shape_string(s));
            return {s[0], s[1] / 2, s[2] / 2};
        case LayerKind::relu: return s;
        case LayerKind::flatten: return {shape_size(s)};
    }
    return s;
}

void Network::validate() const {
    Shape s = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        try {
            s = layers[i].output_shape(s);
        } catch (const ShapeError& e) {
            throw ShapeError(layer_label(i, layers[i]) + ": " + e.what());
        }
    }
    if (s.size() != 1) throw ShapeError("network output must be rank 1, got " + shape_string(s));
}

Index Network::output_dim() const {
    Shape s = input_shape;
    for (const Layer& l : layers) s = l.output_shape(s);
    return s.size() == 1 ? s[0] : 0;
}

Index Network::parameter_count() const {
    Index n = 0;
    for (const Tensor* p : parameters()) n += p->size();
    return n;
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (Layer& l : layers)
        if (l.has_parameters()) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    return out;
}

std::vector<const Tensor*> Network::parameters() const {
    std::vector<const Tensor*> out;
    for (const Layer& l : layers)
        if (l.has_parameters()) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    return out;
}

std::vector<bool> Network::parameter_trainable() const {
    std::vector<bool> out;
    for (const Layer& l : layers)
        if (l.has_parameters()) {
            out.push_back(l.trainable);
            out.push_back(l.trainable);
        }
    return out;
}

void initialize(Layer& layer, std::uint64_t seed) {
    if (!layer.has_parameters()) return;
    double fan_in = 0, fan_out = 0;
    if (layer.kind == LayerKind::dense) {
        fan_in = static_cast<double>(layer.dense.in_dim);
        fan_out = static_cast<double>(layer.dense.out_dim);
    } else {
        const double area = static_cast<double>(layer.conv.kernel_h * layer.conv.kernel_w);
        fan_in = static_cast<double>(layer.conv.in_channels) * area;
        fan_out = static_cast<double>(layer.conv.out_channels) * area;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Index i = 0; i < layer.weight.size(); ++i) layer.weight[i] = dist(rng);
    layer.bias.values().setZero();
}

void initialize(Network& net, std::uint64_t seed) {
    std::mt19937_64 seeder(seed);
    for (Layer& l : net.layers) {
        const std::uint64_t layer_seed = seeder();
        initialize(l, layer_seed);
    }
}

Network make_default_network(const Shape& input_shape, Index n_labels, std::uint64_t seed) {
    if (input_shape.size() != 3) throw ShapeError("default network expects (C, H, W) input");
    struct Stage {
        Index kernel, channels;
    };
    constexpr std::array<Stage, 3> stages{{{5, 16}, {3, 32}, {3, 64}}};
    Network net;
    net.input_shape = input_shape;
    Index c = input_shape[0], h = input_shape[1], w = input_shape[2];
    for (const Stage& st : stages) {
        const Index oh = h - st.kernel + 1, ow = w - st.kernel + 1;
        if (oh < 2 || ow < 2 || oh % 2 || ow % 2) break;
        net.layers.push_back(Layer::make_conv2d(c, st.channels, st.kernel, st.kernel));
        net.layers.push_back(Layer::make_relu());
        net.layers.push_back(Layer::make_maxpool2x2());
        c = st.channels;
        h = oh / 2;
        w = ow / 2;
    }
    while (h > 1 && w > 1 && h % 2 == 0 && w % 2 == 0) {
        net.layers.push_back(Layer::make_maxpool2x2());
        h /= 2;
        w /= 2;
    }
    net.layers.push_back(Layer::make_flatten());
    net.layers.push_back(Layer::make_dense(c * h * w, n_labels));
    net.validate();
    initialize(net, seed);
    return net;
}

Tensor dense_forward(const Layer& layer, const Tensor& input) {
    require_rank(input, 2, "dense");
    if (input.dim(1) != layer.dense.in_dim)
        throw ShapeError("dense expects width " + std::to_string(layer.dense.in_dim) + ", got " +
                         shape_string(input.shape()));
    Tensor out({input.dim(0), layer.dense.out_dim});
    out.matrix().noalias() = input.matrix() * layer.weight.matrix().transpose();
    out.matrix().rowwise() += layer.bias.values().transpose();
    return out;
}

Tensor conv2d_forward(const Layer& layer, const Tensor& input) {
    require_rank(input, 4, "conv2d");
    const Conv2dHyper& h = layer.conv;
    const Shape out_sample = layer.output_shape({input.dim(1), input.dim(2), input.dim(3)});
    const Index batch = input.dim(0), height = input.dim(2), width = input.dim(3);
    const Index positions = out_sample[1] * out_sample[2];
    Tensor out({batch, out_sample[0], out_sample[1], out_sample[2]});
    const ConstRowMatrixMap w(layer.weight.data(), h.out_channels, h.in_channels * h.kernel_h * h.kernel_w);
    RowMatrix cols;
    const Index in_stride = h.in_channels * height * width;
    for (Index b = 0; b < batch; ++b) {
        im2col(input.data() + b * in_stride, h, height, width, cols);
        RowMatrixMap y(out.data() + b * h.out_channels * positions, h.out_channels, positions);
        y.noalias() = w * cols;
        y.colwise() += layer.bias.values();
    }
    return out;
}

Tensor maxpool2x2_forward(const Tensor& input) {
    require_rank(input, 4, "maxpool2x2");
    if (input.dim(2) % 2 != 0 || input.dim(3) % 2 != 0)
        throw ShapeError("maxpool2x2 needs even spatial dims, got " + shape_string(input.shape()));
    const Index planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
    Tensor out({input.dim(0), input.dim(1), h / 2, w / 2});
    for (Index p = 0; p < planes; ++p) {
        const double* x = input.data() + p * h * w;
        double* y = out.data() + p * (h / 2) * (w / 2);
        for (Index oy = 0; oy < h / 2; ++oy)
            for (Index ox = 0; ox < w / 2; ++ox) {
                const double* base = x + 2 * oy * w + 2 * ox;
                y[oy * (w / 2) + ox] = std::max(std::max(base[0], base[1]), std::max(base[w], base[w + 1]));
            }
    }
    return out;
}

Tensor maxpool2x2_backward(const Tensor& input, const Tensor& upstream) {
    require_rank(input, 4, "maxpool2x2");
    if (input.dim(2) % 2 != 0 || input.dim(3) % 2 != 0)
        throw ShapeError("maxpool2x2 needs even spatial dims, got " + shape_string(input.shape()));
    const Index planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
    if (upstream.shape() != Shape{input.dim(0), input.dim(1), h / 2, w / 2})
        throw ShapeError("maxpool2x2 upstream gradient has shape " + shape_string(upstream.shape()));
    Tensor dx(input.shape());
    for (Index p = 0; p < planes; ++p) {
        const double* x = input.data() + p * h * w;
        const double* g = upstream.data() + p * (h / 2) * (w / 2);
        double* d = dx.data() + p * h * w;
        for (Index oy = 0; oy < h / 2; ++oy)
            for (Index ox = 0; ox < w / 2; ++ox) {
                const Index base = 2 * oy * w + 2 * ox;
                const Index offsets[4] = {0, 1, w, w + 1};
                Index best = base;
                for (Index o : offsets)
                    if (x[base + o] > x[best]) best = base + o;
                d[best] += g[oy * (w / 2) + ox];
            }
    }
    return dx;
}

Tensor relu_forward(const Tensor& input) {
    return Tensor(input.shape(), input.values().cwiseMax(0.0));
}

Tensor flatten_forward(const Tensor& input) {
    if (input.rank() < 2) throw ShapeError("flatten expects a batched tensor, got " + shape_string(input.shape()));
    return input.reshaped({input.dim(0), input.size() / input.dim(0)});
}

Tensor layer_forward(const Layer& layer, const Tensor& input) {
    switch (layer.kind) {
        case LayerKind::dense: return dense_forward(layer, input);
        case LayerKind::conv2d: return conv2d_forward(layer, input);
        case LayerKind::maxpool2x2: return maxpool2x2_forward(input);
        case LayerKind::relu: return relu_forward(input);
        case LayerKind::flatten: return flatten_forward(input);
    }
    throw std::logic_error("unreachable layer kind");
}

LayerGradients layer_backward(const Layer& layer, const Tensor& input, const Tensor& upstream,
                              bool with_parameters) {
    LayerGradients g;
    switch (layer.kind) {
        case LayerKind::dense: {
            require_rank(upstream, 2, "dense backward");
            if (upstream.dim(0) != input.dim(0) || upstream.dim(1) != layer.dense.out_dim)
                throw ShapeError("dense upstream gradient has shape " + shape_string(upstream.shape()));
            g.input = Tensor(input.shape());
            g.input.matrix().noalias() = upstream.matrix() * layer.weight.matrix();
            if (with_parameters) {
                g.weight = Tensor(layer.weight.shape());
                g.weight.matrix().noalias() = upstream.matrix().transpose() * input.matrix();
                g.bias = Tensor(layer.bias.shape(), upstream.matrix().colwise().sum().transpose());
            }
            return g;
        }
        case LayerKind::conv2d: {
            const Conv2dHyper& h = layer.conv;
            const Index batch = input.dim(0), height = input.dim(2), width = input.dim(3);
            const Shape out_sample = layer.output_shape({input.dim(1), height, width});
            if (upstream.shape() != Shape{batch, out_sample[0], out_sample[1], out_sample[2]})
                throw ShapeError("conv2d upstream gradient has shape " + shape_string(upstream.shape()));
            const Index positions = out_sample[1] * out_sample[2];
            const Index patch = h.in_channels * h.kernel_h * h.kernel_w;
            const ConstRowMatrixMap w(layer.weight.data(), h.out_channels, patch);
            g.input = Tensor(input.shape());
            RowMatrix dw = RowMatrix::Zero(h.out_channels, patch);
            Eigen::VectorXd db = Eigen::VectorXd::Zero(h.out_channels);
            RowMatrix cols, dcols;
            const Index in_stride = h.in_channels * height * width;
            for (Index b = 0; b < batch; ++b) {
                const ConstRowMatrixMap dy(upstream.data() + b * h.out_channels * positions, h.out_channels,
                                           positions);
                if (with_parameters) {
                    im2col(input.data() + b * in_stride, h, height, width, cols);
                    dw.noalias() += dy * cols.transpose();
                    db += dy.rowwise().sum();
                }
                dcols.noalias() = w.transpose() * dy;
                col2im_add(dcols, h, height, width, g.input.data() + b * in_stride);
            }
            if (with_parameters) {
                g.weight = Tensor(layer.weight.shape(), Eigen::Map<Eigen::VectorXd>(dw.data(), dw.size()));
                g.bias = Tensor(layer.bias.shape(), db);
            }
            return g;
        }
        case LayerKind::maxpool2x2:
            g.input = maxpool2x2_backward(input, upstream);
            return g;
        case LayerKind::relu:
            if (upstream.shape() != input.shape())
                throw ShapeError("relu upstream gradient has shape " + shape_string(upstream.shape()));
            g.input = Tensor(input.shape(),
                             (input.values().array() > 0.0).select(upstream.values(), 0.0).matrix());
            return g;
        case LayerKind::flatten:
            g.input = upstream.reshaped(input.shape());
            return g;
    }
    throw std::logic_error("unreachable layer kind");
}

namespace {

void check_batch(const Network& net, const Tensor& batch) {
    if (batch.rank() != static_cast<Index>(net.input_shape.size()) + 1 || batch.dim(0) < 1)
        throw ShapeError("layer 0: expected batch of " + shape_string(net.input_shape) + " samples, got " +
                         shape_string(batch.shape()));
    for (std::size_t i = 0; i < net.input_shape.size(); ++i)
        if (batch.dim(i + 1) != net.input_shape[i])
            throw ShapeError("layer 0: expected batch of " + shape_string(net.input_shape) +
                             " samples, got " + shape_string(batch.shape()));
}

Tensor run_layer(const Network& net, std::size_t i, const Tensor& x) {
    try {
        return layer_forward(net.layers[i], x);
    } catch (const ShapeError& e) {
        throw ShapeError(layer_label(i, net.layers[i]) + ": " + e.what());
    }
}

}  // namespace

ForwardResult forward(const Network& net, const Tensor& batch) {
    check_batch(net, batch);
    ForwardResult r;
    r.cache.activations.reserve(net.layers.size() + 1);
    r.cache.activations.push_back(batch);
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        r.cache.activations.push_back(run_layer(net, i, r.cache.activations.back()));
    r.logits = r.cache.activations.back();
    return r;
}

Tensor infer(const Network& net, const Tensor& batch) {
    if (net.layers.empty()) {
        check_batch(net, batch);
        return batch;
    }
    return forward_to(net, batch, net.layers.size() - 1);
}

Tensor forward_to(const Network& net, const Tensor& batch, std::size_t layer_index) {
    check_batch(net, batch);
    if (layer_index >= net.layers.size()) throw ShapeError("layer index out of range");
    Tensor x = batch;
    for (std::size_t i = 0; i <= layer_index; ++i) x = run_layer(net, i, x);
    return x;
}

Gradients backward(const Network& net, const ForwardCache& cache, const Tensor& dloss_dlogits,
                   bool include_frozen) {
    const auto& acts = cache.activations;
    if (acts.size() != net.layers.size() + 1)
        throw ShapeError("stale cache: " + std::to_string(acts.size()) + " activations for " +
                         std::to_string(net.layers.size()) + " layers");
    if (dloss_dlogits.shape() != acts.back().shape())
        throw ShapeError("stale cache: upstream gradient " + shape_string(dloss_dlogits.shape()) +
                         " vs logits " + shape_string(acts.back().shape()));
    Gradients g;
    std::vector<std::pair<Tensor, Tensor>> per_layer(net.layers.size());
    Tensor upstream = dloss_dlogits;
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        const Layer& layer = net.layers[i];
        const bool params = layer.has_parameters() && (include_frozen || layer.trainable);
        LayerGradients lg;
        try {
            if (acts[i + 1].shape() != upstream.shape())
                throw ShapeError("stale cache: activation " + shape_string(acts[i + 1].shape()) +
                                 " vs gradient " + shape_string(upstream.shape()));
            lg = layer_backward(layer, acts[i], upstream, params);
        } catch (const ShapeError& e) {
            throw ShapeError(layer_label(i, layer) + ": " + e.what());
        }
        if (layer.has_parameters()) {
            per_layer[i].first = params ? std::move(lg.weight) : Tensor(layer.weight.shape());
            per_layer[i].second = params ? std::move(lg.bias) : Tensor(layer.bias.shape());
        }
        upstream = std::move(lg.input);
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        if (net.layers[i].has_parameters()) {
            g.parameters.push_back(std::move(per_layer[i].first));
            g.parameters.push_back(std::move(per_layer[i].second));
        }
    g.input = std::move(upstream);
    return g;
}

}  // namespace ingredients
