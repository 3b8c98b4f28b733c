#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "ingredients/errors.hpp"
#include "ingredients/vocab.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace ingredients;

namespace {

const std::string kMini = std::string(INGREDIENTS_DATA_DIR) + "/mini";

std::vector<std::vector<std::string>> mini_ingredient_lists() {
    std::ifstream in(kMini + "/recipes.jsonl");
    std::vector<std::vector<std::string>> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(nlohmann::json::parse(line)["ingredients"].get<std::vector<std::string>>());
    return out;
}

// Lowercase and squeeze spaces; enough for the bundled names, which carry no punctuation.
std::string naive_key(const std::string& raw) {
    std::string out;
    for (char c : raw) {
        if (c == ' ') {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

LabelSet intersect(const LabelSet& a, const LabelSet& b) {
    LabelSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

TEST_CASE("canonicalize trims, lowercases and collapses whitespace") {
    CHECK(canonicalize("  Sliced  Tomato ") == "sliced tomato");
    CHECK(canonicalize("eggs,") == "eggs");
    CHECK(canonicalize("tomato") == "tomato");
    CHECK(canonicalize("\tOlive\n oil.") == "olive oil");
    for (const char* s : {"  Sliced  Tomato ", "eggs,", "(Fresh) basil!"}) {
        const std::string once = canonicalize(s);
        CHECK(canonicalize(once) == once);
    }
    CHECK_THROWS_AS(canonicalize("   "), DataError);
    CHECK_THROWS_AS(canonicalize(" ,;. "), DataError);
}

TEST_CASE("build_vocabulary examples") {
    const std::vector<std::vector<std::string>> two{{"a", "b"}, {"b", "c"}};
    const auto built = build_vocabulary(two);
    CHECK(built.vocab.names() == std::vector<std::string>{"a", "b", "c"});
    CHECK(built.stats.n_ingredients == 3);
    CHECK(built.stats.mean_per_recipe == 2.0);

    const std::vector<std::vector<std::string>> dup{{"a", "a"}};
    const auto d = build_vocabulary(dup);
    CHECK(d.vocab.size() == 1);
    CHECK(d.stats.mean_per_recipe == 1.0);
    CHECK(encode_labels(dup[0], d.vocab).size() == 1);

    CHECK_THROWS_AS(build_vocabulary(std::vector<std::vector<std::string>>{}), DataError);
    CHECK_THROWS_AS(build_vocabulary(std::vector<std::vector<std::string>>{{"a"}, {}}), DataError);
}

TEST_CASE("vocabulary of the bundled mini-corpus equals the set union") {
    const auto lists = mini_ingredient_lists();
    REQUIRE(lists.size() == 20);
    std::set<std::string> expected;
    for (const auto& l : lists)
        for (const auto& n : l) expected.insert(naive_key(n));
    const auto built = build_vocabulary(lists);
    CHECK(built.vocab.names() == std::vector<std::string>(expected.begin(), expected.end()));
    CHECK(built.stats.n_recipes == 20);
}

TEST_CASE("vocabulary index is the inverse of names") {
    const Vocabulary v({"Salt", "pepper", "salt ", "basil"});
    REQUIRE(v.size() == 3);
    CHECK(std::is_sorted(v.names().begin(), v.names().end()));
    for (Index i = 0; i < v.size(); ++i) CHECK(v.id(v.name(i)) == i);
    CHECK_FALSE(v.find("thyme").has_value());
    CHECK_THROWS_AS(v.id("thyme"), DataError);
    CHECK(v.fingerprint().size() == 16);
    CHECK(v.fingerprint() == Vocabulary({"basil", "pepper", "salt"}).fingerprint());
    CHECK(v.fingerprint() != Vocabulary({"basil", "pepper"}).fingerprint());
}

TEST_CASE("simplify removes descriptor tokens") {
    const auto particles = default_particles();
    CHECK(simplify("sliced tomato", particles) == "tomato");
    CHECK(simplify("tomato sauce", particles) == "tomato");
    const std::vector<std::string> few{"sliced", "sauce"};
    CHECK(simplify("egg", few) == "egg");
    CHECK(simplify("fresh ground black pepper", particles) == "black pepper");
    CHECK(simplify("ground", particles) == "ground");
    CHECK(simplify("sliced diced", particles) == "sliced diced");
}

TEST_CASE("simplify is idempotent and the projection is surjective") {
    const auto lists = mini_ingredient_lists();
    const auto fine = build_vocabulary(lists).vocab;
    const auto particles = default_particles();
    for (const auto& n : fine.names()) {
        const std::string once = simplify(n, particles);
        CHECK(simplify(once, particles) == once);
        CHECK(simplify(n, particles) == once);
    }
    const SimplificationMap map(fine, particles);
    CHECK(map.simplified().size() <= fine.size());
    std::set<Index> hit(map.projection().begin(), map.projection().end());
    CHECK(static_cast<Index>(hit.size()) == map.simplified().size());
    CHECK(map.simplified().name(map.project(fine.id("sliced tomato"))) == "tomato");
    CHECK(map.project(LabelSet{fine.id("sliced tomato"), fine.id("tomato sauce")}) ==
          LabelSet{map.simplified().id("tomato")});
}

TEST_CASE("projecting after intersecting is contained in intersecting after projecting") {
    const auto lists = mini_ingredient_lists();
    const auto fine = build_vocabulary(lists).vocab;
    const SimplificationMap map(fine, default_particles());
    std::vector<LabelSet> sets;
    for (const auto& l : lists) sets.push_back(encode_labels(l, fine));

    bool saw_strict = false;
    for (const auto& a : sets)
        for (const auto& b : sets) {
            const LabelSet before = map.project(intersect(a, b));
            const LabelSet after = intersect(map.project(a), map.project(b));
            CHECK(std::includes(after.begin(), after.end(), before.begin(), before.end()));
            LabelSet both = a;
            both.insert(both.end(), b.begin(), b.end());
            normalize(both);
            const bool injective = map.project(both).size() == both.size();
            if (injective) CHECK(before == after);
            saw_strict = saw_strict || before != after;
        }
    // "sliced tomato" vs "tomato sauce" recipes meet only after projection.
    CHECK(saw_strict);
}

TEST_CASE("encode and decode") {
    const Vocabulary v({"a", "b", "c"});
    CHECK(encode({"a", "c"}, v).bits == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(encode({}, v).bits == std::vector<std::uint8_t>{0, 0, 0});
    CHECK_THROWS_AS(encode({"a", "z"}, v), DataError);
    std::vector<std::string> dropped;
    CHECK(encode({"a", "Z "}, v, EncodeMode::lenient, &dropped).bits == std::vector<std::uint8_t>{1, 0, 0});
    CHECK(dropped == std::vector<std::string>{"z"});
    CHECK(decode(TargetVector::from_labels({0, 2}, 3), v) == std::vector<std::string>{"a", "c"});
    CHECK_THROWS_AS(decode(TargetVector::from_labels({0}, 2), v), DataError);
}

TEST_CASE("encode/decode round trip on 1000 random subsets") {
    std::vector<std::string> names;
    for (int i = 0; i < 60; ++i) names.push_back("ingredient " + std::to_string(i));
    const Vocabulary v(names);
    std::mt19937 rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index k = std::uniform_int_distribution<Index>(0, v.size())(rng);
        const LabelSet ids = oracle::shuffled_subset(v.size(), k, rng);
        const auto decoded = decode(ids, v);
        const TargetVector t = encode(decoded, v);
        CHECK(t.labels() == ids);
        CHECK(decode(t, v) == decoded);
    }
}

TEST_CASE("vocabulary, particle and projection files") {
    testing_support::TempDir dir;
    const Vocabulary v({"basil", "sliced tomato", "tomato sauce"});
    write_vocabulary(dir.file("vocab.txt"), v);
    CHECK(testing_support::read_bytes(dir.file("vocab.txt")) == "basil\nsliced tomato\ntomato sauce\n");
    CHECK(read_vocabulary(dir.file("vocab.txt")) == v);

    dir.write("unsorted.txt", "tomato\nbasil\n");
    CHECK_THROWS_AS(read_vocabulary(dir.file("unsorted.txt")), DataError);
    dir.write("gap.txt", "basil\n\ntomato\n");
    CHECK_THROWS_AS(read_vocabulary(dir.file("gap.txt")), DataError);
    CHECK_THROWS_AS(read_vocabulary(dir.file("missing.txt")), DataError);

    dir.write("particles.txt", "# descriptors\nsliced\n\nsauce\n");
    const auto particles = read_particles(dir.file("particles.txt"));
    CHECK(particles == std::vector<std::string>{"sliced", "sauce"});
    write_particles(dir.file("p2.txt"), particles);
    CHECK(read_particles(dir.file("p2.txt")) == particles);
    CHECK(read_particles(std::string(INGREDIENTS_DATA_DIR) + "/particles.txt") == default_particles());

    const SimplificationMap map(v, particles);
    write_projection(dir.file("proj.tsv"), v, map);
    CHECK(testing_support::read_bytes(dir.file("proj.tsv")) ==
          "basil\tbasil\nsliced tomato\ttomato\ntomato sauce\ttomato\n");
}
