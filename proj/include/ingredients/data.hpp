#ifndef INGREDIENTS_DATA_HPP
#define INGREDIENTS_DATA_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ingredients/labels.hpp"
#include "ingredients/vocab.hpp"

namespace ingredients {

/// A recipe as read from disk, before vocabulary lookup.
struct RawRecipe {
    std::string id;
    std::string class_name;
    std::string image_ref;
    std::vector<std::string> ingredients;
};

struct Recipe {
    std::string id;
    std::string class_name;  // metadata only; never a training target
    std::string image_ref;
    LabelSet ingredients;
};

/// Recipes sorted by id, their vocabulary, and optional per-recipe inputs
/// aligned with `recipes` along dimension 0.
struct Corpus {
    Vocabulary vocab;
    std::vector<Recipe> recipes;
    std::optional<Tensor> inputs;

    Index size() const { return static_cast<Index>(recipes.size()); }
    std::vector<LabelSet> labels() const;
    /// Throws DataError for unknown ids.
    Index index_of(const std::string& id) const;
    std::vector<Index> indices_of(std::span<const std::string> ids) const;
};

/// Sorts by id, rejects duplicate ids and empty ingredient sets, and encodes
/// against `vocab` (strict), building the vocabulary first when none is given.
Corpus make_corpus(std::vector<RawRecipe> raw, std::optional<Vocabulary> vocab = std::nullopt);

/// classes_file: one class name per line. class_ingredients_file:
/// "class_name: ing1, ing2, ..." per line. Every regular file under
/// images_root/class_name/ becomes one recipe with id "class_name/file".
std::vector<RawRecipe> read_class_level(const std::string& classes_file, const std::string& class_ingredients_file,
                                        const std::string& images_root);
Corpus load_class_level(const std::string& classes_file, const std::string& class_ingredients_file,
                        const std::string& images_root, std::optional<Vocabulary> vocab = std::nullopt);

/// JSON lines {"id", "class", "image", "ingredients": [...]}; image paths are
/// resolved against images_root when relative and images_root is non-empty.
std::vector<RawRecipe> read_recipe_level(const std::string& recipes_file, const std::string& images_root = "");
Corpus load_recipe_level(const std::string& recipes_file, const std::string& images_root = "",
                         std::optional<Vocabulary> vocab = std::nullopt);
void write_recipes(const std::string& path, const Corpus& corpus);

enum class Partition { train, val, test };
std::string to_string(Partition p);

struct SplitFractions {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

struct SplitAssignment {
    std::map<std::string, Partition> partition;
    /// Ids held out of train/val/test entirely (synthetic unseen combinations).
    std::vector<std::string> zeroshot;

    /// Sorted ids of one partition.
    std::vector<std::string> ids(Partition p) const;
};

/// Class-stratified, seed-deterministic split. Per class, counts follow the
/// largest-remainder rounding of the fractions, with at least one sample in
/// every partition.
SplitAssignment make_split(std::span<const Recipe> recipes, const SplitFractions& fractions, std::uint64_t seed);

void write_split(const std::string& path, const SplitAssignment& split);
SplitAssignment read_split(const std::string& path);

/// Per-sample inputs keyed by recipe id, as stored in a feature file.
struct FeatureSet {
    std::vector<std::string> ids;
    Tensor values;  // (samples, ...)
};

/// Stored as f32 little-endian under a JSON header {shape, dtype, ids}.
void write_features(const std::string& path, const FeatureSet& features);
FeatureSet read_features(const std::string& path);
/// Orders feature rows like corpus.recipes; every recipe must be present.
void attach_features(Corpus& corpus, const FeatureSet& features);

/// Binary PPM (P6, maxval 255) as a (3, H, W) tensor in [0, 1].
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

/// Network image inputs are intensities minus this offset, so mid-grey is 0.
inline constexpr double kPixelOffset = 0.5;
Tensor centre_image(Tensor intensities);
Tensor uncentre_image(Tensor inputs);

/// Decodes each recipe's image_ref as PPM and attaches the centred images;
/// all images must share one size.
void attach_images(Corpus& corpus);

// ---- synthetic shape-salad corpus ----

enum class ShapeKind { circle, square, triangle, diamond };
std::string to_string(ShapeKind s);

struct Primitive {
    ShapeKind shape = ShapeKind::circle;
    std::array<double, 3> color{};
    std::string name;  // e.g. "red circle"
};

struct SyntheticSpec {
    Index height = 32;
    Index width = 32;
    std::vector<Primitive> primitives;
    std::vector<std::vector<Index>> combos;  // indices into primitives
    std::vector<Index> held_out;             // indices into combos
    Index samples_per_combo = 50;
    Index min_extent = 8;  // primitive bounding-box side, pixels
    Index max_extent = 11;
    Index max_retries = 200;
    std::uint64_t seed = 0;

    /// Throws DataError unless combos reference known primitives, held-out
    /// indices are valid and every primitive occurs in a training combo.
    void validate() const;
};

/// 4 shapes x 3 colours (or fewer) with `n_combos` distinct 2-3 primitive
/// combinations drawn from the seed, of which `n_held_out` are held out.
SyntheticSpec default_synthetic_spec(std::uint64_t seed, Index n_primitives = 12, Index n_combos = 40,
                                     Index n_held_out = 8, Index samples_per_combo = 50, Index image_size = 32);

inline constexpr double kBackgroundLevel = 0.5;

/// Fills the pixels of `extent` x `extent` box at (top, left) whose centres
/// fall inside the shape. `image` is (3, H, W).
void draw_primitive(Tensor& image, const Primitive& primitive, Index top, Index left, Index extent);

struct SyntheticCorpus {
    Corpus corpus;  // all samples, centred image inputs attached
    std::vector<std::string> zeroshot_ids;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// Split of the non-held-out samples plus the held-out ids as the zero-shot list.
SplitAssignment make_synthetic_split(const SyntheticCorpus& synthetic, const SplitFractions& fractions,
                                     std::uint64_t seed);

}  // namespace ingredients

#endif  // INGREDIENTS_DATA_HPP
