#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ingredients/errors.hpp"
#include "ingredients/train.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace ingredients;
using testing_support::TempDir;

namespace {

Network mlp(Index in, Index hidden, Index out, std::uint64_t seed) {
    Network net;
    net.input_shape = {in};
    net.layers = {Layer::make_dense(in, hidden), Layer::make_relu(), Layer::make_dense(hidden, out)};
    initialize(net, seed);
    return net;
}

struct Toy {
    Tensor inputs;
    std::vector<LabelSet> labels;
    std::vector<Index> train_rows, val_rows;
};

// Label j is on when feature j is positive.
Toy toy_problem(Index samples, Index features, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Toy t{oracle::random_tensor({samples, features}, rng), {}, {}, {}};
    for (Index s = 0; s < samples; ++s) {
        LabelSet l;
        for (Index j = 0; j < features; ++j)
            if (t.inputs[s * features + j] > 0) l.push_back(j);
        t.labels.push_back(l);
        (s % 4 == 0 ? t.val_rows : t.train_rows).push_back(s);
    }
    return t;
}

std::vector<Eigen::VectorXd> snapshot(const Network& net) {
    std::vector<Eigen::VectorXd> out;
    for (const Tensor* p : net.parameters()) out.push_back(p->values());
    return out;
}

SyntheticCorpus small_synthetic(std::uint64_t seed, Index combos, Index held, Index per_combo) {
    auto spec = default_synthetic_spec(seed, 6, combos, held, per_combo, 16);
    spec.min_extent = 4;
    spec.max_extent = 6;
    return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("learning rate 0 leaves every parameter unchanged") {
    const Toy t = toy_problem(40, 4, 1);
    const Network net = mlp(4, 6, 4, 2);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    const auto r = train(net, t.inputs, t.labels, t.train_rows, t.val_rows, cfg);
    CHECK(snapshot(r.net) == snapshot(net));
    CHECK(r.history.size() == 3);
}

TEST_CASE("a single sample is memorised") {
    const Tensor x = Tensor::from_values({1, 3}, {0.5, -1.0, 2.0});
    const std::vector<LabelSet> y{{0, 2}};
    const std::vector<Index> rows{0};
    TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.epochs = 1000;
    cfg.learning_rate = 0.1;
    cfg.early_stop_patience = 2000;
    const auto r = train(mlp(3, 8, 4, 3), x, y, rows, rows, cfg);
    CHECK(r.history.back().train_loss < 0.01);
    CHECK(r.best_val.f1 == 100.0);
}

TEST_CASE("training is deterministic per seed") {
    const Toy t = toy_problem(60, 5, 4);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 7;
    cfg.seed = 13;
    const auto a = train(mlp(5, 8, 5, 1), t.inputs, t.labels, t.train_rows, t.val_rows, cfg);
    const auto b = train(mlp(5, 8, 5, 1), t.inputs, t.labels, t.train_rows, t.val_rows, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(a.history[e].train_loss == b.history[e].train_loss);
        CHECK(a.history[e].val.f1 == b.history[e].val.f1);
    }
    CHECK(snapshot(a.net) == snapshot(b.net));

    cfg.seed = 14;
    const auto c = train(mlp(5, 8, 5, 1), t.inputs, t.labels, t.train_rows, t.val_rows, cfg);
    CHECK(c.history.front().train_loss != a.history.front().train_loss);
}

TEST_CASE("best-validation parameters and early stopping") {
    const Toy t = toy_problem(80, 4, 5);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 10;
    cfg.early_stop_patience = 3;
    const auto r = train(mlp(4, 8, 4, 6), t.inputs, t.labels, t.train_rows, t.val_rows, cfg);
    double best = -1;
    Index best_epoch = 0;
    for (const auto& e : r.history)
        if (e.val.f1 > best) best = e.val.f1, best_epoch = e.epoch;
    CHECK(r.best_epoch == best_epoch);
    CHECK(r.best_val.f1 == best);
    if (static_cast<Index>(r.history.size()) < cfg.epochs)
        CHECK(static_cast<Index>(r.history.size()) - r.best_epoch == cfg.early_stop_patience);
    const auto again = evaluate_model(r.net, t.inputs, t.labels, t.val_rows, head_rule(cfg.head), "val");
    CHECK(again.f1 == r.best_val.f1);
}

TEST_CASE("training loss descends on a small synthetic corpus") {
    const auto synth = small_synthetic(2, 8, 0, 20);
    const auto split = make_synthetic_split(synth, {}, 2);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 16;
    cfg.early_stop_patience = 100;
    const auto r = train(make_default_network({3, 16, 16}, synth.corpus.vocab.size(), 1), synth.corpus, split, cfg);
    CHECK(r.history.front().train_loss > r.history.back().train_loss);
}

TEST_CASE("training errors") {
    const Toy t = toy_problem(20, 3, 7);
    TrainConfig cfg;
    cfg.batch_size = 100;
    CHECK_THROWS_AS(train(mlp(3, 4, 3, 0), t.inputs, t.labels, t.train_rows, t.val_rows, cfg), std::invalid_argument);
    cfg.batch_size = 4;
    CHECK_THROWS_AS(train(mlp(3, 4, 3, 0), t.inputs, t.labels, t.train_rows, {}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(train(mlp(3, 4, 2, 0), t.inputs, t.labels, t.train_rows, t.val_rows, cfg), DataError);

    cfg.learning_rate = 1e250;
    cfg.momentum = 0.0;
    CHECK_THROWS_AS(train(mlp(3, 4, 3, 0), t.inputs, t.labels, t.train_rows, t.val_rows, cfg), TrainingError);
}

TEST_CASE("softmax head trains on single labels and rejects multi-label data") {
    std::mt19937_64 rng(8);
    const Tensor x = oracle::random_tensor({60, 3}, rng);
    std::vector<LabelSet> y;
    for (Index s = 0; s < 60; ++s) {
        const auto row = x.matrix().row(s);
        Index arg = 0;
        row.maxCoeff(&arg);
        y.push_back({arg});
    }
    std::vector<Index> tr(45), va(15);
    std::iota(tr.begin(), tr.end(), 0);
    std::iota(va.begin(), va.end(), 45);
    TrainConfig cfg;
    cfg.head = Head::softmax_singlelabel;
    cfg.epochs = 60;
    cfg.batch_size = 9;
    const auto r = train(mlp(3, 12, 3, 9), x, y, tr, va, cfg);
    CHECK(r.net.head == Head::softmax_singlelabel);
    CHECK(r.best_val.rule == "top_k:1");
    CHECK(r.best_val.f1 > 80.0);
    CHECK(r.history.front().train_loss > r.history.back().train_loss);

    y[0] = {0, 1};
    CHECK_THROWS_AS(train(mlp(3, 12, 3, 9), x, y, tr, va, cfg), DataError);
}

TEST_CASE("parallel prediction equals serial prediction") {
    std::mt19937_64 rng(10);
    const Network net = make_default_network({3, 16, 16}, 5, 2);
    const Tensor x = oracle::random_tensor({37, 3, 16, 16}, rng, 0, 1);
    const Tensor serial = predict_probabilities(net, x, 8, 1);
    CHECK(predict_probabilities(net, x, 8, 3) == serial);
    CHECK(predict_probabilities(net, x, 128, 1) == serial);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    TempDir dir;
    Network net = make_default_network({3, 16, 16}, 6, 4);
    net.layers[0].trainable = false;
    Checkpoint ck{kCheckpointVersion, net, "0123456789abcdef", {{"epoch", 3}}};
    save_checkpoint(dir.file("m.ckpt"), ck);
    const Checkpoint back = load_checkpoint(dir.file("m.ckpt"));
    CHECK(back.vocab_fingerprint == ck.vocab_fingerprint);
    CHECK(back.provenance == ck.provenance);
    CHECK(back.net.layers[0].trainable == false);
    CHECK(snapshot(back.net) == snapshot(net));
    std::mt19937_64 rng(1);
    const Tensor probe = oracle::random_tensor({4, 3, 16, 16}, rng);
    CHECK(infer(back.net, probe) == infer(net, probe));

    save_checkpoint(dir.file("again.ckpt"), ck);
    CHECK(testing_support::read_bytes(dir.file("again.ckpt")) == testing_support::read_bytes(dir.file("m.ckpt")));

    const std::string bytes = testing_support::read_bytes(dir.file("m.ckpt"));
    CHECK(bytes.size() > static_cast<std::size_t>(net.parameter_count()) * 8);
    dir.write("short.ckpt", bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(load_checkpoint(dir.file("short.ckpt")), DataError);
    dir.write("tiny.ckpt", bytes.substr(0, 5));
    CHECK_THROWS_AS(load_checkpoint(dir.file("tiny.ckpt")), DataError);

    ck.version = "ingredients-checkpoint/0";
    save_checkpoint(dir.file("old.ckpt"), ck);
    CHECK_THROWS_AS(load_checkpoint(dir.file("old.ckpt")), DataError);
}

TEST_CASE("architecture description round trip") {
    const Network net = make_default_network({3, 32, 32}, 9, 0);
    const Network back = network_from_json(architecture_to_json(net));
    CHECK(architecture_to_json(back) == architecture_to_json(net));
    CHECK(back.parameter_count() == net.parameter_count());
    auto bad = architecture_to_json(net);
    bad["layers"][0]["kind"] = "softplus";
    CHECK_THROWS_AS(network_from_json(bad), DataError);
}

TEST_CASE("transfer keeps the backbone and re-initialises the head") {
    const Network pre = make_default_network({3, 16, 16}, 6, 4);
    const Network net = transfer(pre, 9, FreezePolicy::all_but_head, 11);
    CHECK(net.output_dim() == 9);
    for (std::size_t i = 0; i + 1 < net.layers.size(); ++i) {
        CHECK(net.layers[i].weight == pre.layers[i].weight);
        CHECK(net.layers[i].bias == pre.layers[i].bias);
        if (net.layers[i].has_parameters()) CHECK_FALSE(net.layers[i].trainable);
    }
    CHECK(net.layers.back().trainable);
    CHECK(net.layers.back().bias.values().isZero(0.0));

    CHECK(transfer(pre, 6, FreezePolicy::none, 1).layers.front().trainable);
    CHECK_THROWS_AS(transfer(pre, 6, FreezePolicy::none, 1, Shape{3, 32, 32}), ShapeError);
    CHECK_THROWS_AS(freeze_policy_from_string("some"), std::invalid_argument);
}

TEST_CASE("a frozen backbone is bit-identical after fine-tuning") {
    const auto synth = small_synthetic(5, 8, 0, 12);
    const auto split = make_synthetic_split(synth, {}, 5);
    const Network pre = make_default_network({3, 16, 16}, 4, 3);
    const Network net = transfer(pre, synth.corpus.vocab.size(), FreezePolicy::all_but_head, 7);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    const auto r = train(net, synth.corpus, split, cfg);
    for (std::size_t i = 0; i + 1 < pre.layers.size(); ++i) {
        CHECK(r.net.layers[i].weight == pre.layers[i].weight);
        CHECK(r.net.layers[i].bias == pre.layers[i].bias);
    }
    CHECK(r.net.layers.back().weight != net.layers.back().weight);
}

TEST_CASE("transfer with the same vocabulary continues loss descent") {
    const auto synth = small_synthetic(6, 8, 0, 20);
    const auto split = make_synthetic_split(synth, {}, 6);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 16;
    cfg.early_stop_patience = 100;
    const Index n = synth.corpus.vocab.size();
    const auto first = train(make_default_network({3, 16, 16}, n, 1), synth.corpus, split, cfg);
    cfg.seed = 1;
    const auto resumed = train(transfer(first.net, n, FreezePolicy::none, 2), synth.corpus, split, cfg);
    CHECK(resumed.history.back().train_loss < resumed.history.front().train_loss);
    CHECK(resumed.history.back().train_loss < first.history.front().train_loss);
}
