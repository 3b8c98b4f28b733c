#include "ingredients/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "ingredients/errors.hpp"
#include "ingredients/framed_file.hpp"
#include "ingredients/losses.hpp"

namespace ingredients {

void TrainConfig::validate(Index train_size) const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (epochs < 1) throw std::invalid_argument("epochs must be positive");
    if (early_stop_patience < 1) throw std::invalid_argument("early_stop_patience must be positive");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in [0, 1]");
    if (train_size < 1) throw std::invalid_argument("empty training partition");
    if (batch_size > train_size)
        throw std::invalid_argument("batch_size " + std::to_string(batch_size) + " exceeds training set of " +
                                    std::to_string(train_size));
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate}, {"momentum", momentum},
            {"batch_size", batch_size},       {"epochs", epochs},
            {"seed", seed},                   {"head", to_string(head)},
            {"early_stop_patience", early_stop_patience}, {"threshold", threshold}};
}

nlohmann::json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch},         {"train_loss", r.train_loss}, {"val_precision", r.val.precision},
            {"val_recall", r.val.recall}, {"val_f1", r.val.f1},       {"improved", r.improved}};
}

DecisionRule head_rule(Head head, double threshold) {
    return head == Head::softmax_singlelabel ? DecisionRule::top(1) : DecisionRule::at_threshold(threshold);
}

Tensor predict_probabilities(const Network& net, const Tensor& inputs, Index chunk, unsigned workers) {
    const Index n = inputs.dim(0);
    const Index out_dim = net.output_dim();
    Tensor probs({n, out_dim});
    const Index chunks = (n + chunk - 1) / chunk;
    auto run = [&](Index first_chunk, Index step) {
        for (Index c = first_chunk; c < chunks; c += step) {
            const Index first = c * chunk;
            const Index count = std::min(chunk, n - first);
            const Tensor logits = infer(net, inputs.rows(first, count));
            const Tensor p = net.head == Head::softmax_singlelabel ? softmax(logits) : sigmoid(logits);
            probs.values().segment(first * out_dim, count * out_dim) = p.values();
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(chunks)));
    if (threads == 1) {
        run(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run, static_cast<Index>(t), static_cast<Index>(threads));
        for (auto& th : pool) th.join();
    }
    return probs;
}

MetricsReport evaluate_model(const Network& net, const Tensor& inputs, std::span<const LabelSet> labels,
                             std::span<const Index> rows, const DecisionRule& rule, const std::string& split_name,
                             unsigned workers) {
    const std::vector<Index> r(rows.begin(), rows.end());
    const Tensor probs = predict_probabilities(net, inputs.gather(r), 128, workers);
    const auto predictions = decide(probs, rule);
    std::vector<LabelSet> chosen, truth;
    chosen.reserve(r.size());
    truth.reserve(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        chosen.push_back(predictions[i].chosen);
        truth.push_back(labels[static_cast<std::size_t>(r[i])]);
    }
    return evaluate(chosen, truth, split_name, rule.describe());
}

namespace {

LossResult batch_loss(const Network& net, const Tensor& logits, std::span<const LabelSet> labels,
                      const std::vector<Index>& rows) {
    const Index n = logits.dim(1);
    if (net.head == Head::softmax_singlelabel) {
        std::vector<Index> classes;
        classes.reserve(rows.size());
        for (Index r : rows) {
            const LabelSet& l = labels[static_cast<std::size_t>(r)];
            if (l.size() != 1) throw DataError("softmax head needs exactly one label per sample");
            classes.push_back(l.front());
        }
        return categorical_cross_entropy_with_logits(logits, classes);
    }
    std::vector<LabelSet> sets;
    sets.reserve(rows.size());
    for (Index r : rows) sets.push_back(labels[static_cast<std::size_t>(r)]);
    return binary_cross_entropy_with_logits(logits, target_tensor(sets, n));
}

}  // namespace

TrainResult train(Network net, const Tensor& inputs, std::span<const LabelSet> labels,
                  std::span<const Index> train_rows, std::span<const Index> val_rows, const TrainConfig& config) {
    config.validate(static_cast<Index>(train_rows.size()));
    if (val_rows.empty()) throw std::invalid_argument("empty validation partition");
    if (static_cast<Index>(labels.size()) != inputs.dim(0)) throw DataError("labels do not match input rows");
    net.head = config.head;
    net.validate();
    const Index n_labels = net.output_dim();
    for (const LabelSet& l : labels)
        for (Index id : l)
            if (id < 0 || id >= n_labels)
                throw DataError("label id " + std::to_string(id) + " outside network output of " +
                                std::to_string(n_labels));

    const DecisionRule rule = head_rule(config.head, config.threshold);
    std::vector<Tensor*> params = net.parameters();
    const std::vector<bool> trainable = net.parameter_trainable();
    std::vector<Eigen::VectorXd> velocity;
    for (const Tensor* p : params) velocity.push_back(Eigen::VectorXd::Zero(p->size()));

    std::mt19937_64 rng(config.seed);
    std::vector<Index> order(train_rows.begin(), train_rows.end());

    TrainResult result;
    result.net = net;
    double best_f1 = -1.0;
    Index since_best = 0;
    for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        Index seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const std::vector<Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
            const ForwardResult fwd = forward(net, inputs.gather(rows));
            const LossResult loss = batch_loss(net, fwd.logits, labels, rows);
            if (!std::isfinite(loss.loss))
                throw TrainingError("loss became non-finite at epoch " + std::to_string(epoch));
            loss_sum += loss.loss * static_cast<double>(rows.size());
            seen += static_cast<Index>(rows.size());

            const Gradients grads = backward(net, fwd.cache, loss.dlogits, false);
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (!trainable[i]) continue;
                velocity[i] = config.momentum * velocity[i] - config.learning_rate * grads.parameters[i].values();
                params[i]->values() += velocity[i];
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.val = evaluate_model(net, inputs, labels, val_rows, rule, "val");
        rec.improved = rec.val.f1 > best_f1;
        if (rec.improved) {
            best_f1 = rec.val.f1;
            result.net = net;
            result.best_epoch = epoch;
            result.best_val = rec.val;
            since_best = 0;
        } else {
            ++since_best;
        }
        result.history.push_back(std::move(rec));
        if (since_best >= config.early_stop_patience) break;
    }
    return result;
}

TrainResult train(Network net, const Corpus& corpus, const SplitAssignment& split, const TrainConfig& config) {
    if (!corpus.inputs) throw DataError("corpus has no inputs attached");
    const auto train_ids = split.ids(Partition::train);
    const auto val_ids = split.ids(Partition::val);
    if (train_ids.empty() || val_ids.empty()) throw DataError("split needs non-empty train and val partitions");
    const auto train_rows = corpus.indices_of(train_ids);
    const auto val_rows = corpus.indices_of(val_ids);
    const auto labels = corpus.labels();
    return train(std::move(net), *corpus.inputs, labels, train_rows, val_rows, config);
}

// ---- checkpoints ----

nlohmann::json architecture_to_json(const Network& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& l : net.layers) {
        nlohmann::json j{{"kind", to_string(l.kind)}};
        if (l.kind == LayerKind::dense) {
            j["in_dim"] = l.dense.in_dim;
            j["out_dim"] = l.dense.out_dim;
        } else if (l.kind == LayerKind::conv2d) {
            j["in_channels"] = l.conv.in_channels;
            j["out_channels"] = l.conv.out_channels;
            j["kernel_h"] = l.conv.kernel_h;
            j["kernel_w"] = l.conv.kernel_w;
            j["stride"] = l.conv.stride;
        }
        if (l.has_parameters()) j["trainable"] = l.trainable;
        layers.push_back(std::move(j));
    }
    return {{"input_shape", net.input_shape}, {"head", to_string(net.head)}, {"layers", std::move(layers)}};
}

Network network_from_json(const nlohmann::json& a) {
    Network net;
    try {
        net.input_shape = a.at("input_shape").get<Shape>();
        net.head = head_from_string(a.at("head").get<std::string>());
        for (const auto& j : a.at("layers")) {
            const LayerKind kind = layer_kind_from_string(j.at("kind").get<std::string>());
            Layer l;
            switch (kind) {
                case LayerKind::dense:
                    l = Layer::make_dense(j.at("in_dim").get<Index>(), j.at("out_dim").get<Index>());
                    break;
                case LayerKind::conv2d:
                    l = Layer::make_conv2d(j.at("in_channels").get<Index>(), j.at("out_channels").get<Index>(),
                                           j.at("kernel_h").get<Index>(), j.at("kernel_w").get<Index>(),
                                           j.value("stride", Index{1}));
                    break;
                case LayerKind::maxpool2x2: l = Layer::make_maxpool2x2(); break;
                case LayerKind::relu: l = Layer::make_relu(); break;
                case LayerKind::flatten: l = Layer::make_flatten(); break;
            }
            l.trainable = j.value("trainable", true);
            net.layers.push_back(std::move(l));
        }
        net.validate();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad architecture description: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("bad architecture description: ") + e.what());
    } catch (const ShapeError& e) {
        throw DataError(std::string("bad architecture description: ") + e.what());
    }
    return net;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const Index count = ckpt.net.parameter_count();
    nlohmann::json header{{"version", ckpt.version},
                          {"architecture", architecture_to_json(ckpt.net)},
                          {"vocab_fingerprint", ckpt.vocab_fingerprint},
                          {"provenance", ckpt.provenance},
                          {"parameter_count", count}};
    std::vector<std::uint8_t> payload;
    payload.reserve(static_cast<std::size_t>(count) * 8);
    for (const Tensor* p : ckpt.net.parameters())
        for (Index i = 0; i < p->size(); ++i) append_f64(payload, (*p)[i]);
    write_framed(path, header, payload);
}

Checkpoint load_checkpoint(const std::string& path) {
    const FramedFile f = read_framed(path);
    Checkpoint c;
    try {
        c.version = f.header.at("version").get<std::string>();
        if (c.version != kCheckpointVersion)
            throw DataError(located(path, 0, "checkpoint version '" + c.version + "', expected '" + kCheckpointVersion + "'"));
        c.vocab_fingerprint = f.header.at("vocab_fingerprint").get<std::string>();
        c.provenance = f.header.value("provenance", nlohmann::json::object());
        c.net = network_from_json(f.header.at("architecture"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(located(path, 0, std::string("bad checkpoint header: ") + e.what()));
    }
    const Index count = c.net.parameter_count();
    if (f.payload.size() != static_cast<std::size_t>(count) * 8)
        throw DataError(located(path, 0, "payload holds " + std::to_string(f.payload.size()) + " bytes, expected " +
                                             std::to_string(count * 8)));
    std::size_t offset = 0;
    for (Tensor* p : c.net.parameters())
        for (Index i = 0; i < p->size(); ++i, offset += 8) (*p)[i] = read_f64(f.payload.data() + offset);
    return c;
}

FreezePolicy freeze_policy_from_string(const std::string& name) {
    if (name == "none") return FreezePolicy::none;
    if (name == "all_but_head") return FreezePolicy::all_but_head;
    throw std::invalid_argument("unknown freeze policy '" + name + "'");
}

Network transfer(const Network& pretrained, Index new_vocab_size, FreezePolicy freeze, std::uint64_t seed,
                 const std::optional<Shape>& expected_input_shape) {
    if (pretrained.layers.empty() || pretrained.layers.back().kind != LayerKind::dense)
        throw ShapeError("transfer needs a network whose final layer is dense");
    if (new_vocab_size < 1) throw ShapeError("transfer needs a positive vocabulary size");
    if (expected_input_shape && *expected_input_shape != pretrained.input_shape)
        throw ShapeError("backbone expects input " + shape_string(pretrained.input_shape) + ", target data has " +
                         shape_string(*expected_input_shape));
    Network net = pretrained;
    Layer& head = net.layers.back();
    head = Layer::make_dense(head.dense.in_dim, new_vocab_size);
    initialize(head, seed);
    for (std::size_t i = 0; i + 1 < net.layers.size(); ++i) net.layers[i].trainable = freeze == FreezePolicy::none;
    net.validate();
    return net;
}

}  // namespace ingredients
