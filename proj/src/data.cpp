#include "ingredients/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ingredients/errors.hpp"
#include "ingredients/framed_file.hpp"

namespace fs = std::filesystem;

namespace ingredients {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string resolve(const std::string& root, const std::string& ref) {
    if (root.empty() || ref.empty() || fs::path(ref).is_absolute()) return ref;
    return (fs::path(root) / ref).string();
}

}  // namespace

std::vector<LabelSet> Corpus::labels() const {
    std::vector<LabelSet> out;
    out.reserve(recipes.size());
    for (const Recipe& r : recipes) out.push_back(r.ingredients);
    return out;
}

Index Corpus::index_of(const std::string& id) const {
    const auto it = std::lower_bound(recipes.begin(), recipes.end(), id,
                                     [](const Recipe& r, const std::string& key) { return r.id < key; });
    if (it == recipes.end() || it->id != id) throw DataError("unknown recipe id '" + id + "'");
    return static_cast<Index>(it - recipes.begin());
}

std::vector<Index> Corpus::indices_of(std::span<const std::string> ids) const {
    std::vector<Index> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) out.push_back(index_of(id));
    return out;
}

Corpus make_corpus(std::vector<RawRecipe> raw, std::optional<Vocabulary> vocab) {
    std::sort(raw.begin(), raw.end(), [](const RawRecipe& a, const RawRecipe& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].id.empty()) throw DataError("recipe with empty id");
        if (i > 0 && raw[i].id == raw[i - 1].id) throw DataError("duplicate recipe id '" + raw[i].id + "'");
        if (raw[i].ingredients.empty()) throw DataError("recipe '" + raw[i].id + "' has no ingredients");
    }
    Corpus c;
    if (vocab) {
        c.vocab = std::move(*vocab);
    } else {
        std::vector<std::vector<std::string>> lists;
        lists.reserve(raw.size());
        for (const RawRecipe& r : raw) lists.push_back(r.ingredients);
        c.vocab = build_vocabulary(lists).vocab;
    }
    c.recipes.reserve(raw.size());
    for (RawRecipe& r : raw) {
        LabelSet labels;
        try {
            labels = encode_labels(r.ingredients, c.vocab, EncodeMode::strict);
        } catch (const DataError& e) {
            throw DataError("recipe '" + r.id + "': " + e.what());
        }
        c.recipes.push_back({std::move(r.id), std::move(r.class_name), std::move(r.image_ref), std::move(labels)});
    }
    return c;
}

std::vector<RawRecipe> read_class_level(const std::string& classes_file, const std::string& class_ingredients_file,
                                        const std::string& images_root) {
    std::ifstream cls(classes_file);
    if (!cls) throw DataError(located(classes_file, 0, "cannot open"));
    std::vector<std::string> classes;
    for (std::string line; std::getline(cls, line);) {
        line = trim(line);
        if (!line.empty()) classes.push_back(line);
    }

    std::ifstream ing(class_ingredients_file);
    if (!ing) throw DataError(located(class_ingredients_file, 0, "cannot open"));
    std::map<std::string, std::vector<std::string>> by_class;
    std::size_t lineno = 0;
    for (std::string line; std::getline(ing, line);) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw DataError(located(class_ingredients_file, lineno, "expected 'class_name: ing1, ing2, ...'"));
        const std::string name = trim(line.substr(0, colon));
        auto items = split_commas(line.substr(colon + 1));
        if (items.empty()) throw DataError(located(class_ingredients_file, lineno, "class '" + name + "' has no ingredients"));
        if (!by_class.emplace(name, std::move(items)).second)
            throw DataError(located(class_ingredients_file, lineno, "duplicate class '" + name + "'"));
    }

    std::vector<RawRecipe> out;
    for (const std::string& c : classes) {
        const auto it = by_class.find(c);
        if (it == by_class.end())
            throw DataError(located(class_ingredients_file, 0, "missing ingredient line for class '" + c + "'"));
        const fs::path dir = fs::path(images_root) / c;
        if (!fs::is_directory(dir)) throw DataError(located(dir.string(), 0, "missing image directory"));
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) {
            if (!fs::is_regular_file(f) || !std::ifstream(f, std::ios::binary))
                throw DataError(located(f.string(), 0, "unreadable image entry"));
            out.push_back({c + "/" + f.filename().string(), c, f.string(), it->second});
        }
    }
    return out;
}

Corpus load_class_level(const std::string& classes_file, const std::string& class_ingredients_file,
                        const std::string& images_root, std::optional<Vocabulary> vocab) {
    return make_corpus(read_class_level(classes_file, class_ingredients_file, images_root), std::move(vocab));
}

std::vector<RawRecipe> read_recipe_level(const std::string& recipes_file, const std::string& images_root) {
    std::ifstream in(recipes_file);
    if (!in) throw DataError(located(recipes_file, 0, "cannot open"));
    std::vector<RawRecipe> out;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (trim(line).empty()) continue;
        RawRecipe r;
        try {
            const auto j = nlohmann::json::parse(line);
            r.id = j.at("id").get<std::string>();
            r.class_name = j.value("class", std::string());
            r.image_ref = resolve(images_root, j.value("image", std::string()));
            r.ingredients = j.at("ingredients").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(located(recipes_file, lineno, std::string("malformed record: ") + e.what()));
        }
        if (r.id.empty()) throw DataError(located(recipes_file, lineno, "empty id"));
        if (r.ingredients.empty()) throw DataError(located(recipes_file, lineno, "recipe '" + r.id + "' has no ingredients"));
        if (!seen.insert(r.id).second) throw DataError(located(recipes_file, lineno, "duplicate id '" + r.id + "'"));
        out.push_back(std::move(r));
    }
    return out;
}

Corpus load_recipe_level(const std::string& recipes_file, const std::string& images_root,
                         std::optional<Vocabulary> vocab) {
    return make_corpus(read_recipe_level(recipes_file, images_root), std::move(vocab));
}

void write_recipes(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(located(path, 0, "cannot write"));
    for (const Recipe& r : corpus.recipes) {
        nlohmann::json j{{"id", r.id},
                         {"class", r.class_name},
                         {"image", r.image_ref},
                         {"ingredients", decode(r.ingredients, corpus.vocab)}};
        out << j.dump() << '\n';
    }
}

std::string to_string(Partition p) {
    switch (p) {
        case Partition::train: return "train";
        case Partition::val: return "val";
        case Partition::test: return "test";
    }
    return "unknown";
}

std::vector<std::string> SplitAssignment::ids(Partition p) const {
    std::vector<std::string> out;
    for (const auto& [id, part] : partition)
        if (part == p) out.push_back(id);
    return out;
}

SplitAssignment make_split(std::span<const Recipe> recipes, const SplitFractions& fractions, std::uint64_t seed) {
    const std::array<double, 3> f{fractions.train, fractions.val, fractions.test};
    for (double x : f)
        if (!(x > 0.0)) throw std::invalid_argument("split fractions must be positive");
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");

    std::map<std::string, std::vector<std::string>> by_class;
    for (const Recipe& r : recipes) by_class[r.class_name].push_back(r.id);

    SplitAssignment split;
    std::mt19937_64 rng(seed);
    for (auto& [cls, ids] : by_class) {
        const std::size_t n = ids.size();
        if (n < 3)
            throw DataError("class '" + cls + "' has " + std::to_string(n) +
                            " samples; each of train/val/test needs at least one");
        std::sort(ids.begin(), ids.end());
        std::shuffle(ids.begin(), ids.end(), rng);

        std::array<std::size_t, 3> count{};
        std::array<double, 3> remainder{};
        std::size_t assigned = 0;
        for (std::size_t p = 0; p < 3; ++p) {
            const double exact = f[p] * static_cast<double>(n);
            count[p] = static_cast<std::size_t>(std::floor(exact));
            remainder[p] = exact - static_cast<double>(count[p]);
            assigned += count[p];
        }
        std::array<std::size_t, 3> order{0, 1, 2};
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++count[order[i % 3]];
        for (std::size_t p = 0; p < 3; ++p)
            if (count[p] == 0) {
                const auto donor = std::max_element(count.begin(), count.end());
                --*donor;
                ++count[p];
            }

        std::size_t next = 0;
        for (std::size_t p = 0; p < 3; ++p)
            for (std::size_t i = 0; i < count[p]; ++i) split.partition[ids[next++]] = static_cast<Partition>(p);
    }
    return split;
}

void write_split(const std::string& path, const SplitAssignment& split) {
    nlohmann::json j{{"train", split.ids(Partition::train)},
                     {"val", split.ids(Partition::val)},
                     {"test", split.ids(Partition::test)}};
    if (!split.zeroshot.empty()) j["zeroshot"] = split.zeroshot;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(located(path, 0, "cannot write"));
    out << j.dump(1) << '\n';
}

SplitAssignment read_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(located(path, 0, "cannot open"));
    SplitAssignment split;
    try {
        const auto j = nlohmann::json::parse(in);
        for (Partition p : {Partition::train, Partition::val, Partition::test})
            for (const auto& id : j.at(to_string(p)).get<std::vector<std::string>>())
                if (!split.partition.emplace(id, p).second)
                    throw DataError(located(path, 0, "id '" + id + "' appears in more than one partition"));
        if (j.contains("zeroshot")) split.zeroshot = j.at("zeroshot").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(located(path, 0, std::string("malformed split file: ") + e.what()));
    }
    for (const auto& id : split.zeroshot)
        if (split.partition.count(id)) throw DataError(located(path, 0, "zero-shot id '" + id + "' also in a partition"));
    return split;
}

void write_features(const std::string& path, const FeatureSet& features) {
    if (features.values.rank() < 2 || features.values.dim(0) != static_cast<Index>(features.ids.size()))
        throw DataError(located(path, 0, "feature rows do not match ids"));
    nlohmann::json header{{"shape", features.values.shape()}, {"dtype", "f32"}, {"ids", features.ids}};
    std::vector<std::uint8_t> payload;
    payload.reserve(static_cast<std::size_t>(features.values.size()) * 4);
    for (Index i = 0; i < features.values.size(); ++i) append_f32(payload, static_cast<float>(features.values[i]));
    write_framed(path, header, payload);
}

FeatureSet read_features(const std::string& path) {
    const FramedFile f = read_framed(path);
    FeatureSet out;
    Shape shape;
    try {
        if (f.header.at("dtype").get<std::string>() != "f32") throw DataError(located(path, 0, "dtype must be f32"));
        shape = f.header.at("shape").get<Shape>();
        out.ids = f.header.at("ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(located(path, 0, std::string("bad feature header: ") + e.what()));
    }
    Index n = 0;
    try {
        n = shape_size(shape);
    } catch (const ShapeError& e) {
        throw DataError(located(path, 0, e.what()));
    }
    if (shape.size() < 2 || shape[0] != static_cast<Index>(out.ids.size()))
        throw DataError(located(path, 0, "shape does not match id count"));
    if (f.payload.size() != static_cast<std::size_t>(n) * 4)
        throw DataError(located(path, 0, "payload holds " + std::to_string(f.payload.size()) + " bytes, expected " +
                                             std::to_string(n * 4)));
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = read_f32(f.payload.data() + 4 * i);
    out.values = Tensor(shape, std::move(v));
    return out;
}

void attach_features(Corpus& corpus, const FeatureSet& features) {
    std::map<std::string, Index> row;
    for (std::size_t i = 0; i < features.ids.size(); ++i) row.emplace(features.ids[i], static_cast<Index>(i));
    std::vector<Index> order;
    order.reserve(corpus.recipes.size());
    for (const Recipe& r : corpus.recipes) {
        const auto it = row.find(r.id);
        if (it == row.end()) throw DataError("no features for recipe '" + r.id + "'");
        order.push_back(it->second);
    }
    corpus.inputs = features.values.gather(order);
}

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(located(path, 0, "cannot open"));
    auto next_token = [&]() {
        std::string tok;
        while (in) {
            const int c = in.peek();
            if (c == '#') {
                std::string comment;
                std::getline(in, comment);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        in >> tok;
        return tok;
    };
    if (next_token() != "P6") throw DataError(located(path, 0, "not a binary PPM (P6)"));
    Index w = 0, h = 0, maxval = 0;
    try {
        w = std::stol(next_token());
        h = std::stol(next_token());
        maxval = std::stol(next_token());
    } catch (const std::logic_error&) {
        throw DataError(located(path, 0, "bad PPM header"));
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw DataError(located(path, 0, "unsupported PPM geometry or maxval"));
    in.get();
    std::vector<unsigned char> px(static_cast<std::size_t>(w * h * 3));
    in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (in.gcount() != static_cast<std::streamsize>(px.size())) throw DataError(located(path, 0, "truncated PPM"));
    Tensor img({3, h, w});
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
            for (Index c = 0; c < 3; ++c) img[(c * h + y) * w + x] = px[static_cast<std::size_t>((y * w + x) * 3 + c)] / 255.0;
    return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_ppm expects a (3, H, W) image");
    const Index h = image.dim(1), w = image.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(located(path, 0, "cannot write"));
    out << "P6\n" << w << ' ' << h << "\n255\n";
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
            for (Index c = 0; c < 3; ++c) {
                const double v = std::clamp(image[(c * h + y) * w + x], 0.0, 1.0);
                out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
            }
}

Tensor centre_image(Tensor intensities) {
    intensities.values().array() -= kPixelOffset;
    return intensities;
}

Tensor uncentre_image(Tensor inputs) {
    inputs.values().array() += kPixelOffset;
    return inputs;
}

void attach_images(Corpus& corpus) {
    if (corpus.recipes.empty()) throw DataError("no recipes to attach images to");
    std::vector<Tensor> images;
    images.reserve(corpus.recipes.size());
    for (const Recipe& r : corpus.recipes) {
        images.push_back(read_ppm(r.image_ref));
        if (images.back().shape() != images.front().shape())
            throw DataError(located(r.image_ref, 0, "image size differs from the first image"));
    }
    Shape shape = images.front().shape();
    shape.insert(shape.begin(), static_cast<Index>(images.size()));
    Tensor all(shape);
    const Index stride = images.front().size();
    for (std::size_t i = 0; i < images.size(); ++i)
        all.values().segment(static_cast<Index>(i) * stride, stride) = images[i].values();
    corpus.inputs = centre_image(std::move(all));
}

// ---- synthetic ----

std::string to_string(ShapeKind s) {
    switch (s) {
        case ShapeKind::circle: return "circle";
        case ShapeKind::square: return "square";
        case ShapeKind::triangle: return "triangle";
        case ShapeKind::diamond: return "diamond";
    }
    return "unknown";
}

void SyntheticSpec::validate() const {
    if (primitives.empty()) throw DataError("synthetic spec has no primitives");
    if (combos.empty()) throw DataError("synthetic spec has no combos");
    if (samples_per_combo < 1) throw DataError("samples_per_combo must be positive");
    if (min_extent < 2 || max_extent < min_extent) throw DataError("bad primitive extent range");
    std::set<Index> held(held_out.begin(), held_out.end());
    std::set<Index> covered;
    for (Index h : held)
        if (h < 0 || h >= static_cast<Index>(combos.size())) throw DataError("held-out combo index out of range");
    for (std::size_t c = 0; c < combos.size(); ++c) {
        if (combos[c].empty()) throw DataError("combo " + std::to_string(c) + " is empty");
        for (Index p : combos[c]) {
            if (p < 0 || p >= static_cast<Index>(primitives.size()))
                throw DataError("combo " + std::to_string(c) + " references unknown primitive " + std::to_string(p));
            if (!held.count(static_cast<Index>(c))) covered.insert(p);
        }
    }
    std::set<std::vector<Index>> seen_sets;
    for (std::size_t c = 0; c < combos.size(); ++c)
        if (!held.count(static_cast<Index>(c))) {
            auto s = combos[c];
            std::sort(s.begin(), s.end());
            seen_sets.insert(s);
        }
    for (Index h : held) {
        auto s = combos[static_cast<std::size_t>(h)];
        std::sort(s.begin(), s.end());
        if (seen_sets.count(s)) throw DataError("held-out combo " + std::to_string(h) + " also appears in training");
    }
    if (covered.size() != primitives.size()) throw DataError("every primitive must appear in a training combo");
}

SyntheticSpec default_synthetic_spec(std::uint64_t seed, Index n_primitives, Index n_combos, Index n_held_out,
                                     Index samples_per_combo, Index image_size) {
    const std::array<ShapeKind, 4> shapes{ShapeKind::circle, ShapeKind::square, ShapeKind::triangle, ShapeKind::diamond};
    const std::array<std::pair<const char*, std::array<double, 3>>, 3> colors{{
        {"red", {0.9, 0.1, 0.1}},
        {"green", {0.1, 0.8, 0.1}},
        {"blue", {0.1, 0.2, 0.9}},
    }};
    if (n_primitives < 2 || n_primitives > 12) throw DataError("default catalog supports 2..12 primitives");
    if (n_held_out < 0 || n_held_out >= n_combos) throw DataError("need 0 <= held_out < combos");

    SyntheticSpec spec;
    spec.height = spec.width = image_size;
    spec.samples_per_combo = samples_per_combo;
    spec.seed = seed;
    for (Index i = 0; i < n_primitives; ++i) {
        const ShapeKind s = shapes[static_cast<std::size_t>(i / 3)];
        const auto& [cname, rgb] = colors[static_cast<std::size_t>(i % 3)];
        spec.primitives.push_back({s, rgb, std::string(cname) + " " + to_string(s)});
    }

    const Index possible = n_primitives * (n_primitives - 1) / 2 +
                           n_primitives * (n_primitives - 1) * (n_primitives - 2) / 6;
    if (n_combos > possible) throw DataError("more combos requested than distinct 2-3 primitive sets");

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const auto np = static_cast<std::size_t>(n_primitives);
    std::vector<Index> usage(np, 0);
    std::vector<std::vector<Index>> pairs(np, std::vector<Index>(np, 0));
    std::set<std::vector<Index>> chosen;
    auto draw = [&](bool balanced) {
        const Index size = std::uniform_int_distribution<Index>(2, std::min<Index>(3, n_primitives))(rng);
        std::vector<Index> pool(np);
        std::iota(pool.begin(), pool.end(), Index{0});
        std::shuffle(pool.begin(), pool.end(), rng);
        if (!balanced) {
            pool.resize(static_cast<std::size_t>(size));
            std::sort(pool.begin(), pool.end());
            return pool;
        }
        // Greedy: least-used primitive that has co-occurred least with those already picked.
        std::vector<Index> combo;
        while (static_cast<Index>(combo.size()) < size) {
            auto cost = [&](Index q) {
                Index c = usage[static_cast<std::size_t>(q)];
                for (Index p : combo) c += 2 * pairs[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
                return c;
            };
            const auto best = std::min_element(pool.begin(), pool.end(), [&](Index a, Index b) { return cost(a) < cost(b); });
            combo.push_back(*best);
            pool.erase(best);
        }
        std::sort(combo.begin(), combo.end());
        return combo;
    };

    // Training combos spread usage evenly over the catalog; held-out combos are
    // then drawn uniformly from the sets not used for training.
    std::vector<std::vector<Index>> seen, held;
    for (int tries = 0; static_cast<Index>(seen.size()) < n_combos - n_held_out; ++tries) {
        if (tries > 100000) throw DataError("could not draw enough distinct training combos");
        auto combo = draw(tries < 1000 * n_combos);
        if (!chosen.insert(combo).second) continue;
        for (Index p : combo) {
            ++usage[static_cast<std::size_t>(p)];
            for (Index q : combo)
                if (p != q) ++pairs[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
        }
        seen.push_back(std::move(combo));
    }
    for (int tries = 0; static_cast<Index>(held.size()) < n_held_out; ++tries) {
        if (tries > 100000) throw DataError("could not draw enough distinct held-out combos");
        auto combo = draw(false);
        if (chosen.insert(combo).second) held.push_back(std::move(combo));
    }

    std::vector<std::vector<Index>> all = seen;
    all.insert(all.end(), held.begin(), held.end());
    std::vector<Index> order(all.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        spec.combos.push_back(all[static_cast<std::size_t>(order[pos])]);
        if (order[pos] >= n_combos - n_held_out) spec.held_out.push_back(static_cast<Index>(pos));
    }
    spec.validate();
    return spec;
}

void draw_primitive(Tensor& image, const Primitive& primitive, Index top, Index left, Index extent) {
    const Index h = image.dim(1), w = image.dim(2);
    const double e = static_cast<double>(extent);
    for (Index y = top; y < top + extent; ++y)
        for (Index x = left; x < left + extent; ++x) {
            if (y < 0 || y >= h || x < 0 || x >= w) continue;
            const double u = (static_cast<double>(y - top) + 0.5) / e;  // 0 at top, 1 at bottom
            const double v = (static_cast<double>(x - left) + 0.5) / e;
            bool inside = false;
            switch (primitive.shape) {
                case ShapeKind::square: inside = true; break;
                case ShapeKind::circle: inside = (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) <= 0.25; break;
                case ShapeKind::triangle: inside = std::abs(v - 0.5) <= u / 2.0; break;
                case ShapeKind::diamond: inside = std::abs(u - 0.5) + std::abs(v - 0.5) <= 0.5; break;
            }
            if (!inside) continue;
            for (Index c = 0; c < 3; ++c) image[(c * h + y) * w + x] = primitive.color[static_cast<std::size_t>(c)];
        }
}

namespace {

struct Box {
    Index top, left, extent;
};

bool overlaps(const Box& a, const Box& b) {
    // One pixel of background between shapes.
    return a.left < b.left + b.extent + 1 && b.left < a.left + a.extent + 1 && a.top < b.top + b.extent + 1 &&
           b.top < a.top + a.extent + 1;
}

std::string zero_pad(Index v, int width) {
    std::string s = std::to_string(v);
    return std::string(static_cast<std::size_t>(std::max<int>(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    if (spec.max_extent > std::min(spec.height, spec.width)) throw DataError("primitive extent exceeds canvas");

    std::vector<std::string> names;
    for (const Primitive& p : spec.primitives) names.push_back(p.name);
    Vocabulary vocab(names);
    if (vocab.size() != static_cast<Index>(spec.primitives.size())) throw DataError("primitive names must be unique");

    const std::set<Index> held(spec.held_out.begin(), spec.held_out.end());
    const Index per_image = 3 * spec.height * spec.width;
    const Index total = static_cast<Index>(spec.combos.size()) * spec.samples_per_combo;
    Eigen::VectorXd pixels(total * per_image);

    std::mt19937_64 rng(spec.seed);
    SyntheticCorpus out;
    out.corpus.vocab = vocab;
    Index sample = 0;
    for (std::size_t c = 0; c < spec.combos.size(); ++c) {
        const auto& combo = spec.combos[c];
        LabelSet labels;
        for (Index p : combo) labels.push_back(vocab.id(spec.primitives[static_cast<std::size_t>(p)].name));
        normalize(labels);
        for (Index s = 0; s < spec.samples_per_combo; ++s, ++sample) {
            std::vector<Box> boxes;
            bool placed = false;
            for (Index attempt = 0; attempt < spec.max_retries && !placed; ++attempt) {
                boxes.clear();
                placed = true;
                for (std::size_t k = 0; k < combo.size() && placed; ++k) {
                    const Index extent = std::uniform_int_distribution<Index>(spec.min_extent, spec.max_extent)(rng);
                    const Box b{std::uniform_int_distribution<Index>(0, spec.height - extent)(rng),
                                std::uniform_int_distribution<Index>(0, spec.width - extent)(rng), extent};
                    for (const Box& other : boxes)
                        if (overlaps(b, other)) placed = false;
                    boxes.push_back(b);
                }
            }
            if (!placed)
                throw DataError("canvas " + std::to_string(spec.height) + "x" + std::to_string(spec.width) +
                                " too small to place combo " + std::to_string(c) + " without overlap");
            Tensor img({3, spec.height, spec.width}, kBackgroundLevel);
            for (std::size_t k = 0; k < combo.size(); ++k)
                draw_primitive(img, spec.primitives[static_cast<std::size_t>(combo[k])], boxes[k].top, boxes[k].left,
                               boxes[k].extent);
            pixels.segment(sample * per_image, per_image) = centre_image(std::move(img)).values();

            Recipe r;
            r.id = "c" + zero_pad(static_cast<Index>(c), 3) + "_s" + zero_pad(s, 4);
            r.class_name = "combo" + zero_pad(static_cast<Index>(c), 3);
            r.image_ref = "#" + std::to_string(sample);
            r.ingredients = labels;
            if (held.count(static_cast<Index>(c))) out.zeroshot_ids.push_back(r.id);
            out.corpus.recipes.push_back(std::move(r));
        }
    }
    // Generation order already matches id order.
    out.corpus.inputs = Tensor({total, 3, spec.height, spec.width}, std::move(pixels));
    return out;
}

SplitAssignment make_synthetic_split(const SyntheticCorpus& synthetic, const SplitFractions& fractions,
                                     std::uint64_t seed) {
    const std::set<std::string> held(synthetic.zeroshot_ids.begin(), synthetic.zeroshot_ids.end());
    std::vector<Recipe> seen;
    for (const Recipe& r : synthetic.corpus.recipes)
        if (!held.count(r.id)) seen.push_back(r);
    SplitAssignment split = make_split(seen, fractions, seed);
    split.zeroshot = synthetic.zeroshot_ids;
    return split;
}

}  // namespace ingredients
