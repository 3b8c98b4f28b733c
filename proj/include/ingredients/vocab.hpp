#ifndef INGREDIENTS_VOCAB_HPP
#define INGREDIENTS_VOCAB_HPP

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ingredients/labels.hpp"

namespace ingredients {

/// Lowercases ASCII, collapses internal whitespace to single spaces and strips
/// leading/trailing whitespace and punctuation. Throws DataError when nothing
/// is left.
std::string canonicalize(std::string_view raw);

/// Sorted, duplicate-free ingredient names; the id of a name is its position.
class Vocabulary {
public:
    Vocabulary() = default;
    /// Names are canonicalised, sorted and deduplicated.
    explicit Vocabulary(std::vector<std::string> names);

    Index size() const { return static_cast<Index>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(Index id) const { return names_.at(static_cast<std::size_t>(id)); }
    std::optional<Index> find(const std::string& canonical_name) const;
    /// Throws DataError for unknown names.
    Index id(const std::string& canonical_name) const;

    /// FNV-1a 64 over the newline-joined names, as 16 hex digits.
    std::string fingerprint() const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

private:
    std::vector<std::string> names_;
    std::map<std::string, Index, std::less<>> index_;
};

struct VocabularyStats {
    Index n_recipes = 0;
    Index n_ingredients = 0;
    double mean_per_recipe = 0.0;
};

struct BuiltVocabulary {
    Vocabulary vocab;
    VocabularyStats stats;
};

/// Vocabulary over every ingredient in every list. Each list must be
/// non-empty; means are over deduplicated per-recipe sets.
BuiltVocabulary build_vocabulary(std::span<const std::vector<std::string>> ingredient_lists);

std::vector<std::string> default_particles();

/// Drops every particle token from `canonical_name`. A name made only of
/// particles is returned unchanged.
std::string simplify(const std::string& canonical_name, std::span<const std::string> particles);

/// Fine-grained vocabulary projected onto its simplified names.
class SimplificationMap {
public:
    SimplificationMap(const Vocabulary& fine, std::vector<std::string> particles);

    const std::vector<std::string>& particles() const { return particles_; }
    const Vocabulary& simplified() const { return simplified_; }
    Index project(Index fine_id) const { return projection_.at(static_cast<std::size_t>(fine_id)); }
    /// Projected set, duplicates collapsed.
    LabelSet project(const LabelSet& fine_ids) const;
    const std::vector<Index>& projection() const { return projection_; }

private:
    std::vector<std::string> particles_;
    Vocabulary simplified_;
    std::vector<Index> projection_;
};

enum class EncodeMode { strict, lenient };

/// Canonicalises each name and looks it up. Unknown names throw in strict mode
/// and are appended to `dropped` (when given) in lenient mode.
LabelSet encode_labels(const std::vector<std::string>& names, const Vocabulary& vocab,
                       EncodeMode mode = EncodeMode::strict, std::vector<std::string>* dropped = nullptr);
TargetVector encode(const std::vector<std::string>& names, const Vocabulary& vocab,
                    EncodeMode mode = EncodeMode::strict, std::vector<std::string>* dropped = nullptr);
std::vector<std::string> decode(const TargetVector& target, const Vocabulary& vocab);
std::vector<std::string> decode(const LabelSet& labels, const Vocabulary& vocab);

// One name per line; line number (from 0) is the id.
void write_vocabulary(const std::string& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::string& path);
// One token per line; blank lines and '#' comments ignored.
std::vector<std::string> read_particles(const std::string& path);
void write_particles(const std::string& path, std::span<const std::string> particles);
/// "fine\tsimplified" per fine-grained name.
void write_projection(const std::string& path, const Vocabulary& fine, const SimplificationMap& map);

}  // namespace ingredients

#endif  // INGREDIENTS_VOCAB_HPP
