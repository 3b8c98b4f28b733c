#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "cli_support.hpp"
#include "ingredients/errors.hpp"
#include "ingredients/inspect.hpp"
#include "ingredients/train.hpp"

namespace cli {

namespace {

using namespace ingredients;

std::set<std::string> with_keys(std::set<std::string> keys, std::initializer_list<const char*> more) {
    for (const char* k : more) keys.insert(k);
    return keys;
}

std::string flat_text(const nlohmann::json& j) {
    std::ostringstream out;
    for (const auto& [key, value] : j.items()) out << key << "=" << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
    return out.str();
}

Shape sample_shape(const Tensor& inputs) { return Shape(inputs.shape().begin() + 1, inputs.shape().end()); }

/// Convolutional default for image inputs, a single dense layer for feature vectors.
Network initial_network(const Shape& sample, Index n_labels, std::uint64_t seed) {
    if (sample.size() != 1) return make_default_network(sample, n_labels, seed);
    Network net;
    net.input_shape = sample;
    net.layers = {Layer::make_dense(sample[0], n_labels)};
    net.validate();
    initialize(net, seed);
    return net;
}

void warn_fingerprint(const Checkpoint& ckpt, const Vocabulary& vocab) {
    if (ckpt.vocab_fingerprint != vocab.fingerprint())
        std::cerr << "warning: checkpoint vocabulary " << ckpt.vocab_fingerprint << " differs from " << vocab.fingerprint()
                  << "\n";
    if (ckpt.net.output_dim() != vocab.size())
        throw DataError("checkpoint predicts " + std::to_string(ckpt.net.output_dim()) + " labels, vocabulary has " +
                        std::to_string(vocab.size()));
}

DecisionRule rule_for(const std::string& text, const Network& net) {
    return text.empty() ? head_rule(net.head) : DecisionRule::parse(text);
}

struct TrainOptions {
    TrainConfig config;
    std::string head = "sigmoid_multilabel";

    void add_to(CLI::App& cmd) {
        cmd.add_option("--learning-rate", config.learning_rate, "SGD step size");
        cmd.add_option("--momentum", config.momentum, "SGD momentum");
        cmd.add_option("--batch-size", config.batch_size, "Samples per update");
        cmd.add_option("--epochs", config.epochs, "Passes over the training partition");
        cmd.add_option("--patience", config.early_stop_patience, "Epochs without validation improvement before stopping");
        cmd.add_option("--head", head, "Output head")->check(CLI::IsMember({"sigmoid_multilabel", "softmax_singlelabel"}));
        cmd.add_option("--threshold", config.threshold, "Validation decision threshold");
    }

    TrainConfig resolved(std::uint64_t seed) const {
        TrainConfig c = config;
        c.seed = seed;
        c.head = head_from_string(head);
        return c;
    }
};

/// Trains, then writes model.ckpt, train_log.jsonl, vocab.txt and the
/// validation report of the selected epoch.
void fit_and_write(const Run& run, Network net, const Corpus& corpus, const SplitAssignment& split,
                   const TrainConfig& config, nlohmann::json provenance) {
    const TrainResult result = train(std::move(net), corpus, split, config);
    std::ofstream log(run.file("train_log.jsonl"), std::ios::binary);
    for (const EpochRecord& e : result.history) {
        log << to_json(e).dump() << "\n";
        std::cerr << "epoch " << e.epoch << " loss=" << e.train_loss << " val_f1=" << e.val.f1
                  << (e.improved ? " *" : "") << "\n";
    }
    Checkpoint ckpt;
    ckpt.net = result.net;
    ckpt.vocab_fingerprint = corpus.vocab.fingerprint();
    provenance["config"] = config.to_json();
    provenance["best_epoch"] = result.best_epoch;
    provenance["val"] = to_json(result.best_val);
    ckpt.provenance = std::move(provenance);
    save_checkpoint(run.file("model.ckpt").string(), ckpt);
    write_vocabulary(run.file("vocab.txt").string(), corpus.vocab);
    run.write_report("val_report", result.best_val);
}

// ---- subcommands ----

struct BuildVocab {
    CommonOptions common;
    CorpusSource corpus;
};

void add_build_vocab(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("build-vocab", "Build the ingredient vocabulary of a corpus");
    auto o = std::make_shared<BuildVocab>();
    o->common.add_to(*cmd);
    o->corpus.add_to(*cmd, false);
    cmd->remove_option(cmd->get_option("--vocab"));
    handlers[cmd->get_name()] = [cmd, o] {
        const Run run(*cmd, o->common, kCorpusPathKeys);
        std::vector<std::vector<std::string>> lists;
        for (const RawRecipe& r : o->corpus.read_raw()) lists.push_back(r.ingredients);
        const BuiltVocabulary built = build_vocabulary(lists);
        write_vocabulary(run.file("vocab.txt").string(), built.vocab);
        const nlohmann::json stats{{"n_recipes", built.stats.n_recipes},
                                   {"n_ingredients", built.stats.n_ingredients},
                                   {"mean_per_recipe", built.stats.mean_per_recipe},
                                   {"fingerprint", built.vocab.fingerprint()}};
        run.write_report("vocab_stats", stats, flat_text(stats));
        run.finish();
    };
}

struct SimplifyVocab {
    CommonOptions common;
    std::string vocab;
    std::string particles;
};

void add_simplify_vocab(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("simplify-vocab", "Project a vocabulary onto names without descriptor tokens");
    auto o = std::make_shared<SimplifyVocab>();
    o->common.add_to(*cmd);
    cmd->add_option("--vocab", o->vocab, "Fine-grained vocabulary")->required();
    cmd->add_option("--particles", o->particles, "Descriptor tokens, one per line (default: built-in list)");
    handlers[cmd->get_name()] = [cmd, o] {
        const Run run(*cmd, o->common, {"vocab", "particles"});
        const Vocabulary fine = read_vocabulary(o->vocab);
        const SimplificationMap map(fine, o->particles.empty() ? default_particles() : read_particles(o->particles));
        write_vocabulary(run.file("simplified_vocab.txt").string(), map.simplified());
        write_projection(run.file("projection.tsv").string(), fine, map);
        write_particles(run.file("particles.txt").string(), map.particles());
        const nlohmann::json stats{{"n_fine", fine.size()},
                                   {"n_simplified", map.simplified().size()},
                                   {"fine_fingerprint", fine.fingerprint()},
                                   {"simplified_fingerprint", map.simplified().fingerprint()}};
        run.write_report("simplify_stats", stats, flat_text(stats));
        run.finish();
    };
}

void add_fractions(CLI::App& cmd, SplitFractions& f) {
    cmd.add_option("--train-fraction", f.train, "Share of each class in train");
    cmd.add_option("--val-fraction", f.val, "Share of each class in val");
    cmd.add_option("--test-fraction", f.test, "Share of each class in test");
}

nlohmann::json split_counts(const SplitAssignment& split) {
    return {{"train", split.ids(Partition::train).size()},
            {"val", split.ids(Partition::val).size()},
            {"test", split.ids(Partition::test).size()},
            {"zeroshot", split.zeroshot.size()}};
}

struct SplitCommand {
    CommonOptions common;
    CorpusSource corpus;
    SplitFractions fractions;
};

void add_split(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("split", "Class-stratified train/val/test split");
    auto o = std::make_shared<SplitCommand>();
    o->common.add_to(*cmd);
    o->corpus.add_to(*cmd, false);
    add_fractions(*cmd, o->fractions);
    handlers[cmd->get_name()] = [cmd, o] {
        const Run run(*cmd, o->common, kCorpusPathKeys);
        const Corpus corpus = o->corpus.load(false);
        const SplitAssignment split = make_split(corpus.recipes, o->fractions, o->common.seed);
        write_split(run.file("split.json").string(), split);
        const nlohmann::json counts = split_counts(split);
        run.write_report("split_stats", counts, flat_text(counts));
        run.finish();
    };
}

struct Synth {
    CommonOptions common;
    Index primitives = 12;
    Index combos = 40;
    Index held_out = 8;
    Index samples_per_combo = 50;
    Index image_size = 32;
    Index min_extent = 8;
    Index max_extent = 11;
    SplitFractions fractions;
};

void add_synth(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("synth", "Generate a synthetic shape-salad corpus");
    auto o = std::make_shared<Synth>();
    o->common.add_to(*cmd);
    cmd->add_option("--primitives", o->primitives, "Shape-colour primitives (2..12)");
    cmd->add_option("--combos", o->combos, "Distinct primitive combinations");
    cmd->add_option("--held-out", o->held_out, "Combinations kept out of training");
    cmd->add_option("--samples-per-combo", o->samples_per_combo, "Images per combination");
    cmd->add_option("--image-size", o->image_size, "Square canvas side in pixels");
    cmd->add_option("--min-extent", o->min_extent, "Smallest primitive side in pixels");
    cmd->add_option("--max-extent", o->max_extent, "Largest primitive side in pixels");
    add_fractions(*cmd, o->fractions);
    handlers[cmd->get_name()] = [cmd, o] {
        const Run run(*cmd, o->common, {});
        SyntheticSpec spec = default_synthetic_spec(o->common.seed, o->primitives, o->combos, o->held_out,
                                                    o->samples_per_combo, o->image_size);
        spec.min_extent = o->min_extent;
        spec.max_extent = o->max_extent;
        const SyntheticCorpus synth = generate_synthetic(spec);
        const SplitAssignment split = make_synthetic_split(synth, o->fractions, o->common.seed);

        FeatureSet features;
        for (const Recipe& r : synth.corpus.recipes) features.ids.push_back(r.id);
        features.values = *synth.corpus.inputs;
        write_recipes(run.file("recipes.jsonl").string(), synth.corpus);
        write_features(run.file("features.bin").string(), features);
        write_split(run.file("split.json").string(), split);
        write_vocabulary(run.file("vocab.txt").string(), synth.corpus.vocab);

        nlohmann::json combos = nlohmann::json::array();
        for (std::size_t c = 0; c < spec.combos.size(); ++c) {
            std::vector<std::string> names;
            for (Index p : spec.combos[c]) names.push_back(spec.primitives[static_cast<std::size_t>(p)].name);
            const bool held = std::find(spec.held_out.begin(), spec.held_out.end(), static_cast<Index>(c)) != spec.held_out.end();
            combos.push_back({{"primitives", names}, {"held_out", held}});
        }
        std::ofstream(run.file("combos.json"), std::ios::binary) << combos.dump(1) << "\n";

        nlohmann::json stats = split_counts(split);
        stats["samples"] = synth.corpus.size();
        stats["combos"] = spec.combos.size();
        stats["primitives"] = spec.primitives.size();
        run.write_report("synth_stats", stats, flat_text(stats));
        run.finish();
    };
}

struct TrainCommand {
    CommonOptions common;
    CorpusSource corpus;
    std::string split;
    TrainOptions train;
};

void add_train(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("train", "Train the default network from scratch");
    auto o = std::make_shared<TrainCommand>();
    o->common.add_to(*cmd);
    o->corpus.add_to(*cmd, true);
    cmd->add_option("--split", o->split, "Split file")->required();
    o->train.add_to(*cmd);
    handlers[cmd->get_name()] = [cmd, o] {
        const Run run(*cmd, o->common, with_keys(kCorpusPathKeys, {"split"}));
        const Corpus corpus = o->corpus.load(true);
        const SplitAssignment split = read_split(o->split);
        const TrainConfig config = o->train.resolved(o->common.seed);
        Network net = initial_network(sample_shape(*corpus.inputs), corpus.vocab.size(), o->common.seed);
        fit_and_write(run, std::move(net), corpus, split, config, {{"command", "train"}});
        run.finish();
    };
}

struct TransferCommand {
    CommonOptions common;
    CorpusSource corpus;
    std::string split;
    std::string model;
    std::string freeze = "none";
    TrainOptions train;
};

void add_transfer(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("transfer", "Fine-tune a checkpoint on a new corpus with a fresh head");
    auto o = std::make_shared<TransferCommand>();
    o->common.add_to(*cmd);
    cmd->add_option("--model", o->model, "Pretrained checkpoint")->required();
    cmd->add_option("--freeze", o->freeze, "Layers kept fixed")->check(CLI::IsMember({"none", "all_but_head"}));
    o->corpus.add_to(*cmd, true);
    cmd->add_option("--split", o->split, "Split file")->required();
    o->train.add_to(*cmd);
    handlers[cmd->get_name()] = [cmd, o] {
        const Run run(*cmd, o->common, with_keys(kCorpusPathKeys, {"split", "model"}));
        const Checkpoint pretrained = load_checkpoint(o->model);
        const Corpus corpus = o->corpus.load(true);
        const SplitAssignment split = read_split(o->split);
        Network net = transfer(pretrained.net, corpus.vocab.size(), freeze_policy_from_string(o->freeze), o->common.seed,
                               sample_shape(*corpus.inputs));
        const nlohmann::json provenance{{"command", "transfer"},
                                        {"freeze", o->freeze},
                                        {"pretrained_content", file_hash(o->model)},
                                        {"pretrained_vocab", pretrained.vocab_fingerprint}};
        fit_and_write(run, std::move(net), corpus, split, o->train.resolved(o->common.seed), provenance);
        run.finish();
    };
}

struct Evaluate {
    CommonOptions common;
    CorpusSource corpus;
    std::string predictions;
    std::string model;
    std::string split;
    std::string partition = "test";
    std::string rule;
    bool simplify = false;
    std::string particles;
};

/// JSON lines {"id", "labels": [...]}, encoded strictly against `vocab`.
std::map<std::string, LabelSet> read_predictions(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw DataError(located(path, 0, "cannot open"));
    std::map<std::string, LabelSet> out;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto id = j.at("id").get<std::string>();
            if (!out.emplace(id, encode_labels(j.at("labels").get<std::vector<std::string>>(), vocab)).second)
                throw DataError("duplicate id '" + id + "'");
        } catch (const nlohmann::json::exception& e) {
            throw DataError(located(path, lineno, std::string("malformed prediction: ") + e.what()));
        } catch (const DataError& e) {
            throw DataError(located(path, lineno, e.what()));
        }
    }
    if (out.empty()) throw DataError(located(path, 0, "no predictions"));
    return out;
}

void add_evaluate(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("evaluate", "Score predictions or a model against a corpus");
    auto o = std::make_shared<Evaluate>();
    o->common.add_to(*cmd);
    o->corpus.add_to(*cmd, true);
    cmd->add_option("--predictions", o->predictions, "Predictions as JSON lines {id, labels}");
    cmd->add_option("--model", o->model, "Checkpoint to run instead of reading predictions");
    cmd->add_option("--split", o->split, "Split file");
    cmd->add_option("--partition", o->partition, "Rows to score when running a model")
        ->check(CLI::IsMember({"train", "val", "test", "zeroshot", "all"}));
    cmd->add_option("--rule", o->rule, "threshold:T or top_k:K (default: the model head's rule)");
    cmd->add_flag("--simplify", o->simplify, "Score on simplified ingredient names");
    cmd->add_option("--particles", o->particles, "Descriptor tokens for --simplify (default: built-in list)");
    handlers[cmd->get_name()] = [cmd, o] {
        if (o->predictions.empty() == o->model.empty()) throw UsageError("give exactly one of --predictions and --model");
        const Run run(*cmd, o->common, with_keys(kCorpusPathKeys, {"predictions", "model", "split", "particles"}));
        std::vector<LabelSet> chosen, truths;
        std::string split_name, rule_text = "given";
        if (!o->predictions.empty()) {
            const Corpus corpus = o->corpus.load(false);
            for (auto& [id, labels] : read_predictions(o->predictions, corpus.vocab)) {
                chosen.push_back(std::move(labels));
                truths.push_back(corpus.recipes[static_cast<std::size_t>(corpus.index_of(id))].ingredients);
            }
            split_name = "predictions";
            if (o->simplify || !o->particles.empty()) {
                const SimplificationMap map(corpus.vocab,
                                            o->particles.empty() ? default_particles() : read_particles(o->particles));
                for (auto& s : chosen) s = map.project(s);
                for (auto& s : truths) s = map.project(s);
            }
        } else {
            const Corpus corpus = o->corpus.load(true);
            const Checkpoint ckpt = load_checkpoint(o->model);
            warn_fingerprint(ckpt, corpus.vocab);
            const auto rows = select_rows(corpus, o->split, o->partition);
            const DecisionRule rule = rule_for(o->rule, ckpt.net);
            const Tensor probs = predict_probabilities(ckpt.net, corpus.inputs->gather(rows), 128, o->common.workers);
            for (const PredictionSet& p : decide(probs, rule)) chosen.push_back(p.chosen);
            for (Index r : rows) truths.push_back(corpus.recipes[static_cast<std::size_t>(r)].ingredients);
            split_name = o->partition;
            rule_text = rule.describe();
            if (o->simplify || !o->particles.empty()) {
                const SimplificationMap map(corpus.vocab,
                                            o->particles.empty() ? default_particles() : read_particles(o->particles));
                for (auto& s : chosen) s = map.project(s);
                for (auto& s : truths) s = map.project(s);
            }
        }
        run.write_report("report", evaluate(chosen, truths, split_name, rule_text));
        run.finish();
    };
}

struct Predict {
    CommonOptions common;
    CorpusSource corpus;
    std::string model;
    std::string rule;
};

void add_predict(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("predict", "Predict ingredient sets for images or features");
    auto o = std::make_shared<Predict>();
    o->common.add_to(*cmd);
    cmd->add_option("--model", o->model, "Checkpoint")->required();
    o->corpus.add_to(*cmd, true);
    cmd->get_option("--vocab")->required()->description("Vocabulary the model was trained on");
    cmd->add_option("--rule", o->rule, "threshold:T or top_k:K (default: the model head's rule)");
    handlers[cmd->get_name()] = [cmd, o] {
        const Run run(*cmd, o->common, with_keys(kCorpusPathKeys, {"model"}));
        const Checkpoint ckpt = load_checkpoint(o->model);
        const Vocabulary vocab = read_vocabulary(o->corpus.vocab);
        warn_fingerprint(ckpt, vocab);

        FeatureSet inputs;
        if (!o->corpus.features.empty()) {
            inputs = read_features(o->corpus.features);
        } else {
            auto raw = o->corpus.read_raw();
            std::sort(raw.begin(), raw.end(), [](const RawRecipe& a, const RawRecipe& b) { return a.id < b.id; });
            std::vector<Tensor> images;
            for (const RawRecipe& r : raw) {
                inputs.ids.push_back(r.id);
                images.push_back(centre_image(read_ppm(r.image_ref)));
            }
            if (images.empty()) throw DataError("no images to predict");
            Shape shape = images.front().shape();
            shape.insert(shape.begin(), static_cast<Index>(images.size()));
            inputs.values = Tensor(shape);
            const Index per = images.front().size();
            for (std::size_t i = 0; i < images.size(); ++i) {
                if (images[i].shape() != images.front().shape())
                    throw DataError(located(raw[i].image_ref, 0, "image size differs from the first image"));
                inputs.values.values().segment(static_cast<Index>(i) * per, per) = images[i].values();
            }
        }

        const DecisionRule rule = rule_for(o->rule, ckpt.net);
        const Tensor probs = predict_probabilities(ckpt.net, inputs.values, 128, o->common.workers);
        const auto predictions = decide(probs, rule);
        std::ofstream out(run.file("predictions.jsonl"), std::ios::binary);
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            std::vector<double> scores;
            for (Index id : predictions[i].chosen) scores.push_back(predictions[i].scores[id]);
            out << nlohmann::json{{"id", inputs.ids[i]}, {"labels", decode(predictions[i].chosen, vocab)}, {"scores", scores}}
                       .dump()
                << "\n";
        }
        std::cerr << "predicted " << predictions.size() << " samples with " << rule.describe() << "\n";
        out.close();
        run.finish();
    };
}

struct Baseline {
    CommonOptions common;
    CorpusSource corpus;
    std::string split;
    std::string partition = "all";
    Index labels = 0;
    Index k = 0;
    Index truth_size = 0;
    Index samples = 0;
};

void add_baseline(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("baseline", "Random k-subset baseline on simulated or corpus truths");
    auto o = std::make_shared<Baseline>();
    o->common.add_to(*cmd);
    cmd->add_option("--labels", o->labels, "Label-space size for simulated truths");
    cmd->add_option("--k", o->k, "Labels predicted per sample (0: rounded mean truth size)");
    cmd->add_option("--truth-size", o->truth_size, "Labels per simulated truth set");
    cmd->add_option("--samples", o->samples, "Simulated samples");
    o->corpus.add_to(*cmd, false);
    cmd->add_option("--split", o->split, "Split file");
    cmd->add_option("--partition", o->partition, "Corpus rows to score")
        ->check(CLI::IsMember({"train", "val", "test", "zeroshot", "all"}));
    handlers[cmd->get_name()] = [cmd, o] {
        const Run run(*cmd, o->common, with_keys(kCorpusPathKeys, {"split"}));
        const bool from_corpus = !o->corpus.recipes.empty() || !o->corpus.classes.empty();
        std::vector<LabelSet> truths;
        Index n = o->labels;
        if (from_corpus) {
            if (o->labels || o->truth_size || o->samples)
                throw UsageError("--labels, --truth-size and --samples only apply to simulated truths");
            const Corpus corpus = o->corpus.load(false);
            for (Index r : select_rows(corpus, o->split, o->partition))
                truths.push_back(corpus.recipes[static_cast<std::size_t>(r)].ingredients);
            n = corpus.vocab.size();
        } else {
            if (n < 1 || o->truth_size < 1 || o->truth_size > n || o->samples < 1)
                throw UsageError("simulated truths need --labels >= --truth-size >= 1 and --samples >= 1");
            std::mt19937_64 rng(o->common.seed);
            for (Index i = 0; i < o->samples; ++i) truths.push_back(uniform_subset(n, o->truth_size, rng));
        }
        const Index k = o->k ? o->k : baseline_k(truths);
        const MetricsReport report = random_baseline(n, k, truths, o->common.seed + 1);
        nlohmann::json j = to_json(report);
        j["labels"] = n;
        j["k"] = k;
        run.write_report("baseline", j, to_text(report) + "labels=" + std::to_string(n) + "\nk=" + std::to_string(k) + "\n");
        run.finish();
    };
}

struct InspectNeurons {
    CommonOptions common;
    CorpusSource corpus;
    std::string model;
    std::string split;
    std::string partition = "all";
    int layer = -1;
    std::vector<Index> neurons;
    Index top_variance = 8;
    Index k = 10;
    std::string reduction = "mean";
    double ubiquity_cutoff = 0.0;
    bool contact_sheet = false;
};

void add_inspect_neurons(CLI::App& app, Handlers& handlers) {
    auto* cmd = app.add_subcommand("inspect-neurons", "Top-activating samples and shared ingredient per neuron");
    auto o = std::make_shared<InspectNeurons>();
    o->common.add_to(*cmd);
    cmd->add_option("--model", o->model, "Checkpoint")->required();
    o->corpus.add_to(*cmd, true);
    cmd->add_option("--split", o->split, "Split file");
    cmd->add_option("--partition", o->partition, "Rows to rank")
        ->check(CLI::IsMember({"train", "val", "test", "zeroshot", "all"}));
    cmd->add_option("--layer", o->layer, "Relu or maxpool layer index (default: the one the classifier reads)");
    cmd->add_option("--neurons", o->neurons, "Neuron indices; otherwise the most variable ones")->delimiter(',');
    cmd->add_option("--top-variance", o->top_variance, "How many high-variance neurons to report");
    cmd->add_option("--k", o->k, "Top samples per neuron");
    cmd->add_option("--reduction", o->reduction, "Spatial reduction of channel maps")
        ->check(CLI::IsMember({"mean", "max"}));
    cmd->add_option("--ubiquity-cutoff", o->ubiquity_cutoff,
                    "Skip ingredients present in more than this fraction of rows (0: off)");
    cmd->add_flag("--contact-sheet", o->contact_sheet, "Also write contact_sheet.ppm");
    handlers[cmd->get_name()] = [cmd, o] {
        const Run run(*cmd, o->common, with_keys(kCorpusPathKeys, {"model", "split"}));
        const Corpus corpus = o->corpus.load(true);
        const Checkpoint ckpt = load_checkpoint(o->model);
        warn_fingerprint(ckpt, corpus.vocab);
        const auto rows = select_rows(corpus, o->split, o->partition);
        const Tensor inputs = corpus.inputs->gather(rows);
        const std::size_t layer = o->layer < 0 ? penultimate_activation_layer(ckpt.net) : static_cast<std::size_t>(o->layer);
        const Eigen::MatrixXd acts = neuron_activations(
            ckpt.net, inputs, layer, o->reduction == "max" ? SpatialReduction::max : SpatialReduction::mean);

        std::vector<Index> neurons = o->neurons;
        if (neurons.empty()) neurons = neurons_by_variance(acts, std::min<Index>(o->top_variance, acts.cols()));
        std::vector<std::string> ids;
        std::vector<LabelSet> truths;
        std::map<std::string, Index> row_of;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Recipe& r = corpus.recipes[static_cast<std::size_t>(rows[i])];
            ids.push_back(r.id);
            truths.push_back(r.ingredients);
            row_of[r.id] = static_cast<Index>(i);
        }
        TopKOptions options;
        options.k = o->k;
        if (o->ubiquity_cutoff > 0.0) options.ubiquity_cutoff = o->ubiquity_cutoff;
        const auto reports = top_k_reports(acts, neurons, ids, truths, options, static_cast<Index>(layer));

        nlohmann::json j = nlohmann::json::array();
        for (const NeuronReport& r : reports) j.push_back(to_json(r, corpus.vocab));
        run.write_report("neurons", j, to_text(reports, corpus.vocab));
        if (o->contact_sheet)
            write_contact_sheet(run.file("contact_sheet.ppm").string(), reports, inputs,
                                [&](const std::string& id) { return row_of.at(id); });
        run.finish();
    };
}

}  // namespace

void add_commands(CLI::App& app, Handlers& handlers) {
    add_build_vocab(app, handlers);
    add_simplify_vocab(app, handlers);
    add_split(app, handlers);
    add_synth(app, handlers);
    add_train(app, handlers);
    add_evaluate(app, handlers);
    add_predict(app, handlers);
    add_baseline(app, handlers);
    add_inspect_neurons(app, handlers);
    add_transfer(app, handlers);
}

}  // namespace cli
