#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <tuple>

#include "ingredients/data.hpp"
#include "ingredients/errors.hpp"
#include "ingredients/inspect.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace ingredients;

namespace {

std::vector<std::string> numbered_ids(Index n) {
    std::vector<std::string> ids;
    for (Index i = 0; i < n; ++i) ids.push_back("s" + std::to_string(1000 + i));
    return ids;
}

Network dense_relu(Index in, Index out) {
    Network net;
    net.input_shape = {in};
    net.layers = {Layer::make_dense(in, out), Layer::make_relu(), Layer::make_dense(out, 2)};
    return net;
}

}  // namespace

TEST_CASE("zero weights give zero activations") {
    Network net = make_default_network({3, 16, 16}, 4, 0);
    for (Tensor* p : net.parameters()) p->values().setZero();
    std::mt19937_64 rng(1);
    const Tensor x = oracle::random_tensor({5, 3, 16, 16}, rng);
    for (std::size_t layer = 0; layer < net.layers.size(); ++layer) {
        const LayerKind k = net.layers[layer].kind;
        if (k != LayerKind::relu && k != LayerKind::maxpool2x2) continue;
        CHECK(neuron_activations(net, x, layer).isZero(0.0));
    }
}

TEST_CASE("identity dense + relu exposes relu(input)") {
    Network net = dense_relu(4, 4);
    net.layers[0].weight.matrix().setIdentity();
    std::mt19937_64 rng(2);
    const Tensor x = oracle::random_tensor({6, 4}, rng);
    const Eigen::MatrixXd acts = neuron_activations(net, x, 1);
    CHECK(acts == Eigen::MatrixXd(x.matrix().cwiseMax(0.0)));
}

TEST_CASE("activation matrix matches one-by-one forward passes") {
    const Network net = make_default_network({3, 16, 16}, 5, 3);
    std::mt19937_64 rng(3);
    const Tensor x = oracle::random_tensor({7, 3, 16, 16}, rng, 0, 1);
    for (std::size_t layer : {std::size_t{1}, std::size_t{2}, std::size_t{5}, penultimate_activation_layer(net)}) {
        CAPTURE(layer);
        const Eigen::MatrixXd mean = neuron_activations(net, x, layer);
        const Eigen::MatrixXd max = neuron_activations(net, x, layer, SpatialReduction::max);
        for (Index s = 0; s < 7; ++s) {
            // Run layer by layer on a single sample.
            Tensor a = x.rows(s, 1);
            for (std::size_t l = 0; l <= layer; ++l) a = layer_forward(net.layers[l], a);
            if (a.rank() == 2) {
                for (Index j = 0; j < a.dim(1); ++j) CHECK(mean(s, j) == doctest::Approx(a[j]).epsilon(1e-12));
                continue;
            }
            const Index channels = a.dim(1), area = a.dim(2) * a.dim(3);
            for (Index c = 0; c < channels; ++c) {
                double sum = 0, best = -INFINITY;
                for (Index p = 0; p < area; ++p) {
                    sum += a[c * area + p];
                    best = std::max(best, a[c * area + p]);
                }
                CHECK(mean(s, c) == doctest::Approx(sum / static_cast<double>(area)).epsilon(1e-12));
                CHECK(max(s, c) == best);
            }
        }
    }
}

TEST_CASE("layers without activations are rejected") {
    const Network net = make_default_network({3, 16, 16}, 5, 3);
    const Tensor x({2, 3, 16, 16});
    for (std::size_t layer = 0; layer < net.layers.size(); ++layer) {
        const LayerKind k = net.layers[layer].kind;
        if (k == LayerKind::flatten || k == LayerKind::conv2d || k == LayerKind::dense)
            CHECK_THROWS_AS(neuron_activations(net, x, layer), ShapeError);
    }
    CHECK_THROWS_AS(neuron_activations(net, x, 99), ShapeError);
    // ... pool, flatten, dense: the last pool feeds the classifier.
    CHECK(net.layers[penultimate_activation_layer(net)].kind == LayerKind::maxpool2x2);
    CHECK(penultimate_activation_layer(net) + 3 == net.layers.size());
    Network mlp = dense_relu(3, 4);
    CHECK(penultimate_activation_layer(mlp) == 1);
}

TEST_CASE("a neuron firing exactly on one ingredient names it") {
    const Index n = 12;
    const auto ids = numbered_ids(n);
    std::vector<LabelSet> truths;
    Eigen::MatrixXd acts(n, 2);
    for (Index s = 0; s < n; ++s) {
        const bool has_g = s % 3 == 0;
        LabelSet t{s % 2 == 0 ? Index{0} : Index{1}};
        if (has_g) t.push_back(4);
        truths.push_back(normalize(t));
        acts(s, 0) = has_g ? 1.0 + 0.1 * static_cast<double>(s) : 0.0;
        acts(s, 1) = 0.5;
    }
    const auto r = top_k_report(acts, 0, ids, truths, {4, std::nullopt});
    CHECK(r.top_ingredient == 4);
    CHECK(r.containment_count() == 4);
    CHECK(r.top_samples.front().id == ids[9]);

    const auto one = top_k_report(acts, 0, ids, truths, {1, std::nullopt});
    REQUIRE(one.top_samples.size() == 1);
    Index arg = 0;
    acts.col(0).maxCoeff(&arg);
    CHECK(one.top_samples[0].id == ids[static_cast<std::size_t>(arg)]);

    // Constant activations: ties fall back to id order.
    const auto flat = top_k_report(acts, 1, ids, truths, {3, std::nullopt});
    CHECK(flat.top_samples[0].id == ids[0]);
    CHECK(flat.top_samples[2].id == ids[2]);
}

TEST_CASE("top-k report agrees with a full sort and brute-force counting") {
    std::mt19937 rng(5);
    std::mt19937_64 rng64(5);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = std::uniform_int_distribution<Index>(1, 40)(rng);
        const Index vocab = 9;
        const Index k = std::uniform_int_distribution<Index>(1, n)(rng);
        auto ids = numbered_ids(n);
        std::shuffle(ids.begin(), ids.end(), rng);
        Eigen::MatrixXd acts(n, 3);
        for (Index s = 0; s < n; ++s)
            for (Index j = 0; j < 3; ++j)
                acts(s, j) = std::round(std::uniform_real_distribution<double>(0, 4)(rng64));  // many ties
        std::vector<LabelSet> truths;
        for (Index s = 0; s < n; ++s)
            truths.push_back(oracle::shuffled_subset(vocab, std::uniform_int_distribution<Index>(1, 4)(rng), rng));

        for (Index j = 0; j < 3; ++j) {
            const auto r = top_k_report(acts, j, ids, truths, {k, std::nullopt});
            std::vector<std::tuple<double, std::string, Index>> all;
            for (Index s = 0; s < n; ++s) all.emplace_back(-acts(s, j), ids[static_cast<std::size_t>(s)], s);
            std::sort(all.begin(), all.end());
            REQUIRE(static_cast<Index>(r.top_samples.size()) == k);
            std::vector<Index> freq(static_cast<std::size_t>(vocab), 0);
            for (Index i = 0; i < k; ++i) {
                const auto& [neg, id, s] = all[static_cast<std::size_t>(i)];
                CHECK(r.top_samples[static_cast<std::size_t>(i)].id == id);
                CHECK(r.top_samples[static_cast<std::size_t>(i)].activation == -neg);
                for (Index l : truths[static_cast<std::size_t>(s)]) ++freq[static_cast<std::size_t>(l)];
            }
            const auto best = std::max_element(freq.begin(), freq.end());
            CHECK(r.top_ingredient == best - freq.begin());
            for (Index f : freq) CHECK(r.top_ingredient_count >= f);
        }
    }
}

TEST_CASE("top-k report is invariant to sample order") {
    std::mt19937 rng(6);
    std::mt19937_64 rng64(6);
    const Index n = 30;
    auto ids = numbered_ids(n);
    Eigen::MatrixXd acts(n, 1);
    std::vector<LabelSet> truths;
    for (Index s = 0; s < n; ++s) {
        acts(s, 0) = std::round(std::uniform_real_distribution<double>(0, 5)(rng64));
        truths.push_back(oracle::shuffled_subset(8, 3, rng));
    }
    const auto a = top_k_report(acts, 0, ids, truths, {10, std::nullopt});
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd acts2(n, 1);
    std::vector<std::string> ids2;
    std::vector<LabelSet> truths2;
    for (Index i = 0; i < n; ++i) {
        const auto p = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
        acts2(i, 0) = acts(static_cast<Index>(p), 0);
        ids2.push_back(ids[p]);
        truths2.push_back(truths[p]);
    }
    const auto b = top_k_report(acts2, 0, ids2, truths2, {10, std::nullopt});
    REQUIRE(a.top_samples.size() == b.top_samples.size());
    for (std::size_t i = 0; i < a.top_samples.size(); ++i) CHECK(a.top_samples[i].id == b.top_samples[i].id);
    CHECK(a.top_ingredient == b.top_ingredient);
    CHECK(a.containment == b.containment);
}

TEST_CASE("ubiquity cutoff masks ingredients common to the whole subset") {
    const auto ids = numbered_ids(4);
    const std::vector<LabelSet> truths{{0, 1}, {0, 2}, {0, 1}, {0}};
    Eigen::MatrixXd acts(4, 1);
    acts << 4, 3, 2, 1;
    CHECK(top_k_report(acts, 0, ids, truths, {3, std::nullopt}).top_ingredient == 0);
    CHECK(top_k_report(acts, 0, ids, truths, {3, 0.9}).top_ingredient == 1);
    const auto masked = top_k_report(acts, 0, ids, std::vector<LabelSet>{{0}, {0}, {0}, {0}}, {2, 0.9});
    CHECK(masked.top_ingredient == -1);
    CHECK(masked.containment_count() == 0);
}

TEST_CASE("top-k argument errors") {
    const Eigen::MatrixXd empty(0, 3);
    CHECK_THROWS_AS(top_k_report(empty, 0, {}, {}, {}), DataError);
    const auto ids = numbered_ids(3);
    const std::vector<LabelSet> truths{{0}, {1}, {0}};
    const Eigen::MatrixXd acts = Eigen::MatrixXd::Ones(3, 2);
    CHECK_THROWS_AS(top_k_report(acts, 0, ids, truths, {4, std::nullopt}), std::invalid_argument);
    CHECK_THROWS_AS(top_k_report(acts, 2, ids, truths, {1, std::nullopt}), ShapeError);
}

TEST_CASE("neurons by variance") {
    Eigen::MatrixXd acts(4, 3);
    acts << 0, 1, 5, 0, 3, 5, 0, 1, 5, 0, 3, 5.5;
    CHECK(neurons_by_variance(acts, 2) == std::vector<Index>{1, 2});
    CHECK(neurons_by_variance(acts, 10).size() == 3);
}

TEST_CASE("report serialisation and contact sheet") {
    const Vocabulary vocab({"apple", "basil", "corn"});
    const auto ids = numbered_ids(3);
    const std::vector<LabelSet> truths{{0}, {1, 2}, {1}};
    Eigen::MatrixXd acts(3, 1);
    acts << 0.2, 0.9, 0.5;
    const auto r = top_k_report(acts, 0, ids, truths, {3, std::nullopt}, 7);
    const auto j = to_json(r, vocab);
    CHECK(j["top_ingredient"] == "basil");
    CHECK(j["containment"] == 2);
    CHECK(j["layer_index"] == 7);
    CHECK(j["top_samples"][0]["id"] == "s1001");
    const std::vector<NeuronReport> reports{r};
    CHECK(to_text(reports, vocab).find("7\t0\tbasil\t2/3\ts1001+ s1002+ s1000-") != std::string::npos);

    testing_support::TempDir dir;
    Tensor images({3, 3, 4, 4});
    for (Index s = 0; s < 3; ++s) images.values().segment(s * 48, 48).setConstant(0.2 * static_cast<double>(s) - kPixelOffset);
    write_contact_sheet(dir.file("sheet.ppm"), reports, images, [&](const std::string& id) {
        return static_cast<Index>(std::find(ids.begin(), ids.end(), id) - ids.begin());
    });
    const Tensor sheet = read_ppm(dir.file("sheet.ppm"));
    CHECK(sheet.shape() == Shape{3, 8, 20});
    CHECK(sheet[2 * 20 + 2] == doctest::Approx(0.2).epsilon(0.01));
    CHECK(sheet[2 * 20 + 8] == doctest::Approx(0.4).epsilon(0.01));
    CHECK(sheet[2 * 20 + 14] == 0.0);
}
