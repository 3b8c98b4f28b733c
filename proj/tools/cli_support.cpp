#include "cli_support.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "ingredients/errors.hpp"
#include "ingredients/train.hpp"

#ifndef INGREDIENTS_VERSION
#define INGREDIENTS_VERSION "unknown"
#endif

namespace cli {

namespace fs = std::filesystem;
using ingredients::DataError;
using ingredients::located;

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

// "--name=value" or "--name" -> "name"; empty for anything else.
std::string long_flag_name(const std::string& arg) {
    if (arg.size() < 3 || arg.compare(0, 2, "--") != 0) return "";
    return arg.substr(2, arg.find('=') == std::string::npos ? std::string::npos : arg.find('=') - 2);
}

std::string option_key(const CLI::Option& opt) {
    return opt.get_lnames().empty() ? "" : opt.get_lnames().front();
}

}  // namespace

std::vector<std::string> expand_config(std::vector<std::string> args, const CLI::App& app) {
    if (args.empty()) return args;
    const CLI::App* command = nullptr;
    for (const CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        if (sub->get_name() == args[0]) command = sub;
    if (!command) return args;

    std::string path;
    std::set<std::string> given;
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string name = long_flag_name(args[i]);
        if (name.empty()) continue;
        given.insert(name);
        if (name != "config") continue;
        if (args[i].find('=') != std::string::npos)
            path = args[i].substr(args[i].find('=') + 1);
        else if (i + 1 < args.size())
            path = args[i + 1];
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw DataError(located(path, 0, "cannot open config file"));
    std::set<std::string> seen;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(located(path, lineno, "expected key=value"));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "config" || key == "help")
            throw UsageError(located(path, lineno, "'" + key + "' cannot be set from a config file"));
        if (!command->get_option_no_throw("--" + key))
            throw UsageError(located(path, lineno, "unknown key '" + key + "' for " + command->get_name()));
        if (!seen.insert(key).second) throw UsageError(located(path, lineno, "duplicate key '" + key + "'"));
        if (!given.count(key)) args.push_back("--" + key + "=" + value);
    }
    return args;
}

std::vector<std::pair<std::string, std::string>> effective_config(const CLI::App& command) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const CLI::Option* opt : command.get_options()) {
        const std::string key = option_key(*opt);
        if (key.empty() || key == "help") continue;
        std::string value;
        if (opt->count() > 0) {
            for (const std::string& r : opt->results()) value += (value.empty() ? "" : ",") + r;
        } else {
            value = opt->get_default_str();
        }
        out.emplace_back(key, value);
    }
    return out;
}

void CommonOptions::add_to(CLI::App& command) {
    command.add_option("--out", out, "Output directory")->required();
    command.add_option("--seed", seed, "Random seed");
    command.add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "text"}));
    command.add_option("--workers", workers, "Threads for batched inference")->check(CLI::Range(1u, 256u));
    command.add_option("--config", config, "Flat key=value file; flags on the command line win");
}

Run::Run(const CLI::App& command, const CommonOptions& common, std::set<std::string> path_keys)
    : command_(command), common_(common), path_keys_(std::move(path_keys)), out_(common.out) {
    path_keys_.insert("config");
    std::cerr << "# " << command_.get_name() << " effective configuration\n";
    for (const auto& [key, value] : effective_config(command_)) std::cerr << key << "=" << value << "\n";
    fs::create_directories(out_);
}

void Run::write_report(const std::string& name, const nlohmann::json& json, const std::string& text) const {
    const bool as_json = common_.format == "json";
    const std::string body = as_json ? json.dump(2) + "\n" : text;
    const fs::path path = file(name + (as_json ? ".json" : ".txt"));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(located(path.string(), 0, "cannot write"));
    out << body;
    std::cout << body;
}

void Run::write_report(const std::string& name, const ingredients::MetricsReport& report) const {
    write_report(name, ingredients::to_json(report), ingredients::to_text(report));
}

void Run::finish() const {
    nlohmann::json manifest;
    manifest["command"] = command_.get_name();
    manifest["versions"] = {{"ingredients", INGREDIENTS_VERSION}, {"checkpoint", ingredients::kCheckpointVersion}};
    manifest["seed"] = common_.seed;
    manifest["config"] = nlohmann::json::object();
    manifest["inputs"] = nlohmann::json::object();
    for (const auto& [key, value] : effective_config(command_)) {
        if (key == "out") continue;
        if (!path_keys_.count(key)) {
            manifest["config"][key] = value;
        } else if (!value.empty()) {
            const fs::path p(value);
            nlohmann::json entry{{"name", p.filename().string()}};
            entry["content"] = fs::is_regular_file(p) ? file_hash(p) : "directory";
            manifest["inputs"][key] = entry;
        }
    }
    manifest["outputs"] = nlohmann::json::object();
    for (const auto& entry : fs::directory_iterator(out_))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            manifest["outputs"][entry.path().filename().string()] = file_hash(entry.path());
    std::ofstream out(file("manifest.json"), std::ios::binary);
    if (!out) throw DataError(located(file("manifest.json").string(), 0, "cannot write"));
    out << manifest.dump(2) << "\n";
}

std::string file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(located(path.string(), 0, "cannot open"));
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void CorpusSource::add_to(CLI::App& command, bool with_inputs) {
    command.add_option("--recipes", recipes, "Recipe-level JSON lines");
    command.add_option("--classes", classes, "Class-level: one class name per line");
    command.add_option("--class-ingredients", class_ingredients, "Class-level: 'class: ing1, ing2' lines");
    command.add_option("--images", images, "Class-level: image directory with one folder per class");
    command.add_option("--images-root", images_root, "Base for relative image paths (default: the recipes file's directory)");
    if (with_inputs) command.add_option("--features", features, "Feature file used instead of images");
    command.add_option("--vocab", vocab, "Fixed vocabulary; otherwise built from the corpus");
}

std::optional<ingredients::Vocabulary> CorpusSource::fixed_vocab() const {
    if (vocab.empty()) return std::nullopt;
    return ingredients::read_vocabulary(vocab);
}

std::vector<ingredients::RawRecipe> CorpusSource::read_raw() const {
    const bool class_level = !classes.empty() || !class_ingredients.empty() || !images.empty();
    if (!recipes.empty() && class_level) throw UsageError("give either --recipes or the class-level files, not both");
    if (!recipes.empty()) {
        const std::string root = images_root.empty() ? fs::path(recipes).parent_path().string() : images_root;
        return ingredients::read_recipe_level(recipes, root);
    }
    if (classes.empty() || class_ingredients.empty() || images.empty())
        throw UsageError("no corpus: give --recipes, or --classes with --class-ingredients and --images");
    return ingredients::read_class_level(classes, class_ingredients, images);
}

ingredients::Corpus CorpusSource::load(bool with_inputs) const {
    ingredients::Corpus corpus = ingredients::make_corpus(read_raw(), fixed_vocab());
    if (with_inputs) {
        if (!features.empty())
            ingredients::attach_features(corpus, ingredients::read_features(features));
        else
            ingredients::attach_images(corpus);
    }
    return corpus;
}

std::vector<ingredients::Index> select_rows(const ingredients::Corpus& corpus, const std::string& split_path,
                                            const std::string& partition) {
    using ingredients::Partition;
    if (partition == "all") {
        std::vector<ingredients::Index> rows(static_cast<std::size_t>(corpus.size()));
        for (ingredients::Index i = 0; i < corpus.size(); ++i) rows[static_cast<std::size_t>(i)] = i;
        return rows;
    }
    if (split_path.empty()) throw UsageError("--partition " + partition + " needs --split");
    const auto split = ingredients::read_split(split_path);
    static const std::map<std::string, Partition> named{
        {"train", Partition::train}, {"val", Partition::val}, {"test", Partition::test}};
    std::vector<std::string> ids;
    if (partition == "zeroshot")
        ids = split.zeroshot;
    else if (named.count(partition))
        ids = split.ids(named.at(partition));
    else
        throw UsageError("unknown partition '" + partition + "'");
    if (ids.empty()) throw DataError(located(split_path, 0, "partition '" + partition + "' is empty"));
    return corpus.indices_of(ids);
}

}  // namespace cli
