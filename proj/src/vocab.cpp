#include "ingredients/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "ingredients/errors.hpp"

namespace ingredients {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_trimmed(char c) { return is_space(c) || std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string t; is >> t;) out.push_back(t);
    return out;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(located(path, 0, "cannot open"));
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(located(path, 0, "cannot write"));
    return out;
}

}  // namespace

std::string canonicalize(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    const auto first = std::find_if_not(out.begin(), out.end(), is_trimmed);
    const auto last = std::find_if_not(out.rbegin(), out.rend(), is_trimmed).base();
    if (first >= last) throw DataError("ingredient name '" + std::string(raw) + "' is empty after cleanup");
    return std::string(first, last);
}

Vocabulary::Vocabulary(std::vector<std::string> names) {
    for (std::string& n : names) n = canonicalize(n);
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    names_ = std::move(names);
    for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], static_cast<Index>(i));
}

std::optional<Index> Vocabulary::find(const std::string& canonical_name) const {
    const auto it = index_.find(canonical_name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Index Vocabulary::id(const std::string& canonical_name) const {
    if (auto i = find(canonical_name)) return *i;
    throw DataError("unknown ingredient '" + canonical_name + "'");
}

std::string Vocabulary::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::string& n : names_) {
        for (unsigned char c : n) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= static_cast<unsigned char>('\n');
        h *= 0x100000001b3ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    return out;
}

BuiltVocabulary build_vocabulary(std::span<const std::vector<std::string>> ingredient_lists) {
    if (ingredient_lists.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
    std::set<std::string> all;
    std::size_t total = 0;
    for (std::size_t r = 0; r < ingredient_lists.size(); ++r) {
        if (ingredient_lists[r].empty())
            throw DataError("recipe " + std::to_string(r) + " has no ingredients");
        std::set<std::string> mine;
        for (const std::string& raw : ingredient_lists[r]) mine.insert(canonicalize(raw));
        total += mine.size();
        all.insert(mine.begin(), mine.end());
    }
    BuiltVocabulary b{Vocabulary(std::vector<std::string>(all.begin(), all.end())), {}};
    b.stats.n_recipes = static_cast<Index>(ingredient_lists.size());
    b.stats.n_ingredients = b.vocab.size();
    b.stats.mean_per_recipe = static_cast<double>(total) / static_cast<double>(ingredient_lists.size());
    return b;
}

std::vector<std::string> default_particles() {
    return {"sliced", "diced", "fresh", "chopped", "ground", "sauce", "large", "beaten", "grated", "minced"};
}

std::string simplify(const std::string& canonical_name, std::span<const std::string> particles) {
    std::string out;
    for (const std::string& t : tokens(canonical_name)) {
        if (std::find(particles.begin(), particles.end(), t) != particles.end()) continue;
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out.empty() ? canonical_name : out;
}

SimplificationMap::SimplificationMap(const Vocabulary& fine, std::vector<std::string> particles)
    : particles_(std::move(particles)) {
    for (std::string& p : particles_) p = canonicalize(p);
    std::vector<std::string> projected;
    projected.reserve(fine.names().size());
    for (const std::string& n : fine.names()) projected.push_back(simplify(n, particles_));
    simplified_ = Vocabulary(projected);
    projection_.reserve(projected.size());
    for (const std::string& n : projected) projection_.push_back(simplified_.id(n));
}

LabelSet SimplificationMap::project(const LabelSet& fine_ids) const {
    LabelSet out;
    out.reserve(fine_ids.size());
    for (Index id : fine_ids) out.push_back(project(id));
    return normalize(out);
}

LabelSet encode_labels(const std::vector<std::string>& names, const Vocabulary& vocab, EncodeMode mode,
                       std::vector<std::string>* dropped) {
    LabelSet out;
    for (const std::string& raw : names) {
        const std::string n = canonicalize(raw);
        if (auto id = vocab.find(n)) {
            out.push_back(*id);
        } else if (mode == EncodeMode::strict) {
            throw DataError("unknown ingredient '" + n + "'");
        } else if (dropped) {
            dropped->push_back(n);
        }
    }
    return normalize(out);
}

TargetVector encode(const std::vector<std::string>& names, const Vocabulary& vocab, EncodeMode mode,
                    std::vector<std::string>* dropped) {
    return TargetVector::from_labels(encode_labels(names, vocab, mode, dropped), vocab.size());
}

std::vector<std::string> decode(const LabelSet& labels, const Vocabulary& vocab) {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (Index id : labels) out.push_back(vocab.name(id));
    return out;
}

std::vector<std::string> decode(const TargetVector& target, const Vocabulary& vocab) {
    if (target.size() != vocab.size()) throw DataError("target width does not match vocabulary size");
    return decode(target.labels(), vocab);
}

void write_vocabulary(const std::string& path, const Vocabulary& vocab) {
    auto out = open_out(path);
    for (const std::string& n : vocab.names()) out << n << '\n';
}

Vocabulary read_vocabulary(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            if (i + 1 == lines.size()) break;
            throw DataError(located(path, i + 1, "empty vocabulary entry"));
        }
        names.push_back(lines[i]);
    }
    Vocabulary v(names);
    if (v.names() != names) throw DataError(located(path, 0, "vocabulary must be canonical, sorted and unique"));
    return v;
}

std::vector<std::string> read_particles(const std::string& path) {
    std::vector<std::string> out;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto t = tokens(lines[i]);
        if (t.empty() || t[0][0] == '#') continue;
        if (t.size() != 1) throw DataError(located(path, i + 1, "expected one particle token per line"));
        out.push_back(canonicalize(t[0]));
    }
    return out;
}

void write_particles(const std::string& path, std::span<const std::string> particles) {
    auto out = open_out(path);
    for (const std::string& p : particles) out << p << '\n';
}

void write_projection(const std::string& path, const Vocabulary& fine, const SimplificationMap& map) {
    auto out = open_out(path);
    for (Index i = 0; i < fine.size(); ++i) out << fine.name(i) << '\t' << map.simplified().name(map.project(i)) << '\n';
}

}  // namespace ingredients
