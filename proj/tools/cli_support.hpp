#ifndef INGREDIENTS_TOOLS_CLI_SUPPORT_HPP
#define INGREDIENTS_TOOLS_CLI_SUPPORT_HPP

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ingredients/data.hpp"
#include "ingredients/metrics.hpp"

namespace cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Bad flag values or combinations; reported with exit code 1.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Rewrites `args` (program name excluded, subcommand first) so that each
/// "key=value" line of a `--config FILE` becomes "--key=value", unless that
/// flag is already on the command line. Keys must name options of the
/// subcommand.
std::vector<std::string> expand_config(std::vector<std::string> args, const CLI::App& app);

/// Resolved "key=value" pairs of every option of `command`, in declaration order.
std::vector<std::pair<std::string, std::string>> effective_config(const CLI::App& command);

/// Options shared by every subcommand.
struct CommonOptions {
    std::string out;
    std::uint64_t seed = 0;
    std::string format = "json";
    unsigned workers = 1;
    std::string config;

    void add_to(CLI::App& command);
};

/// Output directory plus the manifest written next to the outputs.
class Run {
public:
    /// `path_keys` name the options whose values are input files or directories.
    Run(const CLI::App& command, const CommonOptions& common, std::set<std::string> path_keys);

    std::filesystem::path file(const std::string& name) const { return out_ / name; }
    const CommonOptions& common() const { return common_; }

    /// Writes `report` as name.json or name.txt according to --format and
    /// echoes it to stdout.
    void write_report(const std::string& name, const nlohmann::json& json, const std::string& text) const;
    void write_report(const std::string& name, const ingredients::MetricsReport& report) const;

    /// manifest.json: command, versions, seed, non-path configuration, input
    /// names with content hashes and output hashes. No timestamps or
    /// absolute paths, so identical runs give identical manifests.
    void finish() const;

private:
    const CLI::App& command_;
    CommonOptions common_;
    std::set<std::string> path_keys_;
    std::filesystem::path out_;
};

/// FNV-1a 64 of a file's bytes as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

/// Where a corpus comes from: a recipe-level JSON-lines file or a class-level
/// triple, plus optional precomputed features and a fixed vocabulary.
struct CorpusSource {
    std::string recipes;
    std::string classes;
    std::string class_ingredients;
    std::string images;
    std::string images_root;
    std::string features;
    std::string vocab;

    void add_to(CLI::App& command, bool with_inputs);
    std::optional<ingredients::Vocabulary> fixed_vocab() const;
    std::vector<ingredients::RawRecipe> read_raw() const;
    /// Inputs come from --features when given, otherwise from the images.
    ingredients::Corpus load(bool with_inputs) const;
};

inline const std::set<std::string> kCorpusPathKeys{"recipes", "classes", "class-ingredients", "images",
                                                   "images-root", "features", "vocab"};

/// Rows of `corpus` in a partition: train, val, test, zeroshot or all.
std::vector<ingredients::Index> select_rows(const ingredients::Corpus& corpus, const std::string& split_path,
                                            const std::string& partition);

}  // namespace cli

#endif  // INGREDIENTS_TOOLS_CLI_SUPPORT_HPP
