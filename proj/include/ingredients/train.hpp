#ifndef INGREDIENTS_TRAIN_HPP
#define INGREDIENTS_TRAIN_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ingredients/data.hpp"
#include "ingredients/metrics.hpp"
#include "ingredients/network.hpp"

namespace ingredients {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    Index batch_size = 8;
    Index epochs = 30;
    std::uint64_t seed = 0;
    Head head = Head::sigmoid_multilabel;
    /// Stop after this many epochs without a validation-F1 improvement.
    Index early_stop_patience = 10;
    /// Validation decision rule; the softmax head always uses top-1.
    double threshold = 0.5;

    void validate(Index train_size) const;
    nlohmann::json to_json() const;
};

struct EpochRecord {
    Index epoch = 0;  // 1-based
    double train_loss = 0.0;
    MetricsReport val;
    bool improved = false;
};

nlohmann::json to_json(const EpochRecord& record);

struct TrainResult {
    Network net;  // parameters of the best validation epoch
    std::vector<EpochRecord> history;
    Index best_epoch = 0;
    MetricsReport best_val;
};

/// Mini-batch SGD with momentum on the rows `train_rows` of `inputs`,
/// selecting the epoch with the best F1 on `val_rows`. Frozen layers are
/// left untouched. Throws TrainingError if the loss stops being finite.
TrainResult train(Network net, const Tensor& inputs, std::span<const LabelSet> labels,
                  std::span<const Index> train_rows, std::span<const Index> val_rows, const TrainConfig& config);

/// Corpus wrapper: trains on the split's train ids, validates on val ids.
TrainResult train(Network net, const Corpus& corpus, const SplitAssignment& split, const TrainConfig& config);

/// Head activation of the network (sigmoid or softmax) over all rows, in
/// chunks of `chunk` samples spread over `workers` threads.
Tensor predict_probabilities(const Network& net, const Tensor& inputs, Index chunk = 128, unsigned workers = 1);

/// Decision rule that matches the head: threshold for sigmoid, top-1 for softmax.
DecisionRule head_rule(Head head, double threshold = 0.5);

MetricsReport evaluate_model(const Network& net, const Tensor& inputs, std::span<const LabelSet> labels,
                             std::span<const Index> rows, const DecisionRule& rule, const std::string& split_name,
                             unsigned workers = 1);

// ---- checkpoints ----

inline constexpr const char* kCheckpointVersion = "ingredients-checkpoint/1";

struct Checkpoint {
    std::string version = kCheckpointVersion;
    Network net;
    std::string vocab_fingerprint;
    nlohmann::json provenance = nlohmann::json::object();
};

nlohmann::json architecture_to_json(const Network& net);
/// Architecture only; parameters are zero.
Network network_from_json(const nlohmann::json& architecture);

/// Framed file: JSON header then parameters as little-endian f64 in
/// Network::parameters() order.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
/// Throws DataError on version mismatch, truncation or payload-size mismatch.
Checkpoint load_checkpoint(const std::string& path);

enum class FreezePolicy { none, all_but_head };
FreezePolicy freeze_policy_from_string(const std::string& name);

/// Copies the checkpoint network, replaces the final dense layer with a
/// freshly initialised one of `new_vocab_size` outputs and applies the freeze
/// policy. When `expected_input_shape` is given it must match the backbone.
Network transfer(const Network& pretrained, Index new_vocab_size, FreezePolicy freeze, std::uint64_t seed,
                 const std::optional<Shape>& expected_input_shape = std::nullopt);

}  // namespace ingredients

#endif  // INGREDIENTS_TRAIN_HPP
