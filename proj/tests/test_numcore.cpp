#include <doctest.h>

#include <cmath>
#include <random>

#include "ingredients/network.hpp"
#include "oracles.hpp"

using namespace ingredients;

namespace {

Network small_conv_net(std::uint64_t seed) {
    Network net;
    net.input_shape = {2, 6, 6};
    net.layers = {Layer::make_conv2d(2, 3, 3, 3), Layer::make_relu(), Layer::make_flatten(),
                  Layer::make_dense(3 * 4 * 4, 4)};
    net.validate();
    initialize(net, seed);
    return net;
}

}  // namespace

TEST_CASE("identity dense layer passes its input through") {
    Network net;
    net.input_shape = {3};
    net.layers = {Layer::make_dense(3, 3)};
    net.layers[0].weight.matrix().setIdentity();
    const Tensor x = Tensor::from_values({2, 3}, {1.5, -2.0, 0.25, 4.0, 0.0, -1.0});
    CHECK(forward(net, x).logits == x);
}

TEST_CASE("relu clips negatives") {
    const Tensor out = relu_forward(Tensor::from_values({1, 3}, {-1.0, 0.0, 2.0}));
    CHECK(out == Tensor::from_values({1, 3}, {0.0, 0.0, 2.0}));
}

TEST_CASE("1x1 convolution with unit weight is the identity") {
    Layer conv = Layer::make_conv2d(1, 1, 1, 1);
    conv.weight[0] = 1.0;
    std::mt19937_64 rng(3);
    const Tensor x = oracle::random_tensor({2, 1, 5, 7}, rng);
    CHECK(conv2d_forward(conv, x) == x);
}

TEST_CASE("conv2d matches a direct nested-loop convolution") {
    Layer conv = Layer::make_conv2d(2, 3, 3, 2, 2);
    initialize(conv, 11);
    std::mt19937_64 rng(5);
    conv.bias = oracle::random_tensor({3}, rng);
    const Tensor x = oracle::random_tensor({2, 2, 7, 6}, rng);
    const Tensor y = conv2d_forward(conv, x);
    REQUIRE(y.shape() == Shape{2, 3, 3, 3});
    for (Index b = 0; b < 2; ++b)
        for (Index o = 0; o < 3; ++o)
            for (Index oy = 0; oy < 3; ++oy)
                for (Index ox = 0; ox < 3; ++ox) {
                    double acc = conv.bias[o];
                    for (Index c = 0; c < 2; ++c)
                        for (Index ky = 0; ky < 3; ++ky)
                            for (Index kx = 0; kx < 2; ++kx)
                                acc += conv.weight[((o * 2 + c) * 3 + ky) * 2 + kx] *
                                       x[((b * 2 + c) * 7 + oy * 2 + ky) * 6 + ox * 2 + kx];
                    CHECK(y[((b * 3 + o) * 3 + oy) * 3 + ox] == doctest::Approx(acc).epsilon(1e-12));
                }
}

TEST_CASE("maxpool takes window maxima and routes gradient to the first maximum") {
    const Tensor x = Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(maxpool2x2_forward(x)[0] == 4.0);

    const Tensor flat({1, 1, 2, 2}, 7.0);
    const Tensor g = maxpool2x2_backward(flat, Tensor({1, 1, 1, 1}, 1.0));
    CHECK(g == Tensor::from_values({1, 1, 2, 2}, {1, 0, 0, 0}));

    CHECK_THROWS_AS(maxpool2x2_forward(Tensor({1, 1, 3, 4})), ShapeError);
    CHECK_THROWS_AS(maxpool2x2_backward(Tensor({1, 1, 4, 3}), Tensor({1, 1, 2, 1})), ShapeError);
}

TEST_CASE("maxpool backward on a random 4x4 map matches finite differences") {
    std::mt19937_64 rng(21);
    Network net;
    net.input_shape = {1, 4, 4};
    net.layers = {Layer::make_maxpool2x2(), Layer::make_flatten()};
    const Tensor x = oracle::random_tensor({1, 1, 4, 4}, rng);
    const Tensor w = oracle::random_tensor({1, 4}, rng);
    const auto check = oracle::check_network(net, x, oracle::projection_loss(w));
    CHECK(check.checked == 16);
    CHECK(check.max_rel < 1e-4);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    const Network net = small_conv_net(1);
    std::mt19937_64 rng(2);
    const auto fwd = forward(net, oracle::random_tensor({3, 2, 6, 6}, rng));
    const auto g = backward(net, fwd.cache, Tensor(fwd.logits.shape()));
    REQUIRE(g.parameters.size() == 4);
    for (std::size_t i = 0; i < g.parameters.size(); ++i) {
        CHECK(g.parameters[i].shape() == net.parameters()[i]->shape());
        CHECK(g.parameters[i].values().isZero(0.0));
    }
}

TEST_CASE("dense layer gradient of sum(logits) is the batch-summed outer product") {
    Network net;
    net.input_shape = {4};
    net.layers = {Layer::make_dense(4, 3)};
    initialize(net, 9);
    std::mt19937_64 rng(4);
    const Tensor x = oracle::random_tensor({5, 4}, rng);
    const Tensor ones({5, 3}, 1.0);
    const auto fwd = forward(net, x);
    const auto g = backward(net, fwd.cache, ones);
    const Eigen::RowVectorXd col_sum = x.matrix().colwise().sum();
    for (Index o = 0; o < 3; ++o)
        for (Index i = 0; i < 4; ++i) CHECK(g.parameters[0].matrix()(o, i) == doctest::Approx(col_sum[i]));
    CHECK(g.parameters[1].values().isApprox(Eigen::VectorXd::Constant(3, 5.0)));

    const auto check = oracle::check_network(net, x, oracle::projection_loss(ones));
    CHECK(check.max_rel < 1e-4);
}

TEST_CASE("every layer kind matches finite differences on random input") {
    std::mt19937_64 rng(77);
    struct Case {
        const char* name;
        Network net;
        Shape batch;
    };
    std::vector<Case> cases;
    {
        Network n;
        n.input_shape = {5};
        n.layers = {Layer::make_dense(5, 3)};
        cases.push_back({"dense", n, {4, 5}});
    }
    {
        Network n;
        n.input_shape = {2, 7, 6};
        n.layers = {Layer::make_conv2d(2, 3, 3, 2, 2), Layer::make_flatten()};
        cases.push_back({"conv2d stride 2", n, {2, 2, 7, 6}});
    }
    {
        Network n;
        n.input_shape = {3, 5, 5};
        n.layers = {Layer::make_conv2d(3, 2, 3, 3), Layer::make_flatten()};
        cases.push_back({"conv2d", n, {2, 3, 5, 5}});
    }
    {
        Network n;
        n.input_shape = {2, 4, 6};
        n.layers = {Layer::make_maxpool2x2(), Layer::make_flatten()};
        cases.push_back({"maxpool2x2", n, {2, 2, 4, 6}});
    }
    {
        Network n;
        n.input_shape = {7};
        n.layers = {Layer::make_relu()};
        cases.push_back({"relu", n, {3, 7}});
    }
    {
        Network n;
        n.input_shape = {2, 3, 2};
        n.layers = {Layer::make_flatten()};
        cases.push_back({"flatten", n, {2, 2, 3, 2}});
    }
    for (auto& c : cases) {
        CAPTURE(c.name);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            initialize(c.net, seed);
            for (Tensor* p : c.net.parameters()) *p = oracle::random_tensor(p->shape(), rng);
            const Tensor x = oracle::random_tensor(c.batch, rng);
            const Tensor out = infer(c.net, x);
            const auto check = oracle::check_network(c.net, x, oracle::projection_loss(oracle::random_tensor(out.shape(), rng)));
            CHECK(check.max_rel < 1e-4);
            CHECK(check.checked > 0);
        }
    }
}

TEST_CASE("conv -> relu -> dense network gradients match finite differences") {
    std::mt19937_64 rng(8);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Network net = small_conv_net(seed);
        const Tensor x = oracle::random_tensor({2, 2, 6, 6}, rng);
        const Tensor w = oracle::random_tensor({2, 4}, rng);
        const auto check = oracle::check_network(net, x, oracle::projection_loss(w));
        CHECK(check.max_rel < 1e-4);
        CHECK(check.skipped * 100 < check.checked);
    }
}

TEST_CASE("shape mismatches name the offending layer") {
    Network net;
    net.input_shape = {2, 6, 6};
    net.layers = {Layer::make_conv2d(2, 3, 3, 3), Layer::make_flatten(), Layer::make_dense(10, 2)};
    try {
        net.validate();
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
    }
    const Network ok = small_conv_net(0);
    try {
        forward(ok, Tensor({1, 3, 6, 6}));
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }
}

TEST_CASE("backward rejects a stale cache") {
    const Network net = small_conv_net(0);
    std::mt19937_64 rng(1);
    auto fwd = forward(net, oracle::random_tensor({2, 2, 6, 6}, rng));
    CHECK_THROWS_AS(backward(net, fwd.cache, Tensor({3, 4})), ShapeError);
    fwd.cache.activations.pop_back();
    CHECK_THROWS_AS(backward(net, fwd.cache, Tensor({2, 4})), ShapeError);
}

TEST_CASE("forward is deterministic and composes") {
    const Network net = small_conv_net(12);
    std::mt19937_64 rng(6);
    const Tensor x = oracle::random_tensor({3, 2, 6, 6}, rng);
    CHECK(infer(net, x) == infer(net, x));

    Network head;
    head.input_shape = {3, 4, 4};
    head.layers.assign(net.layers.begin() + 1, net.layers.end());
    Network body;
    body.input_shape = net.input_shape;
    body.layers = {net.layers[0]};
    CHECK(infer(head, infer(body, x)) == infer(net, x));
}

TEST_CASE("initialisation is bounded, seeded and zero-biased") {
    Layer d = Layer::make_dense(30, 10);
    initialize(d, 4);
    const double limit = std::sqrt(6.0 / 40.0);
    CHECK(d.weight.values().cwiseAbs().maxCoeff() <= limit);
    CHECK(d.bias.values().isZero(0.0));
    Layer again = Layer::make_dense(30, 10);
    initialize(again, 4);
    CHECK(again.weight == d.weight);

    Layer c = Layer::make_conv2d(3, 8, 5, 5);
    initialize(c, 4);
    CHECK(c.weight.values().cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (75.0 + 200.0)));
}

TEST_CASE("default network maps 3x32x32 images to N logits") {
    const Network net = make_default_network({3, 32, 32}, 12, 0);
    CHECK(net.output_dim() == 12);
    std::mt19937_64 rng(0);
    const Tensor out = infer(net, oracle::random_tensor({2, 3, 32, 32}, rng, 0.0, 1.0));
    CHECK(out.shape() == Shape{2, 12});
    CHECK(out.all_finite());
}
