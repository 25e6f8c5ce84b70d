#pragma once
// Training loop, path-type pretraining schedule and checkpoint conversion.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ugre/attention_model.hpp"
#include "ugre/checkpoint.hpp"
#include "ugre/encoders.hpp"

namespace ugre {

enum class PathFilter { textual, hybrid, kg, all };

std::string_view to_string(PathFilter f);
std::optional<PathFilter> parse_path_filter(std::string_view s);

// Keeps the paths of the filtered type; sentences are untouched.
EncodedBag filter_bag_paths(const EncodedBag& bag, PathFilter filter);

struct Stage {
  PathFilter filter = PathFilter::all;
  std::size_t epochs = 1;
};

struct StagePlan {
  std::vector<Stage> stages;

  // Throws std::invalid_argument unless the last stage is All and every
  // epoch count is positive.
  void validate() const;

  static StagePlan plain(std::size_t epochs);
  // Textual, Hybrid and KG for `pretrain_epochs` each, then All.
  static StagePlan pretrain(std::size_t pretrain_epochs, std::size_t finetune_epochs);
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& msg)
      : std::runtime_error("config key '" + key + "': " + msg), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct TrainConfig {
  double lr_net = 0.02;
  double lr_kg = 0.05;
  std::size_t batch_size = 50;
  double dropout = 0.5;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  Mode mode = Mode::base;
  bool pretrain = false;
  std::size_t pretrain_epochs = 3;
  ComplexityWeights complexity;
  std::size_t j = 50;
  Norm norm = Norm::l2;
  double kg_bias = 7.0;
  std::size_t maxdist = 30;
  std::size_t filters = 100;
  std::size_t word_dim = 50;
  std::size_t pos_dim = 5;
  std::size_t kg_dim = 50;
  std::size_t window = 3;
  bool use_paths = true;
  bool attention_kg_grad = false;

  // Throws ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void apply(const std::vector<std::pair<std::string, std::string>>& entries);
  // Every key with its current value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string serialize() const;
  std::uint64_t hash() const;

  StagePlan plan() const;
  ModelConfig model_config(std::size_t n_entities, std::size_t n_relations,
                           std::size_t vocab_size) const;
};

// "biomedical" (the defaults) or "nyt10".
TrainConfig preset(const std::string& name);
TrainConfig load_train_config(const std::filesystem::path& path,
                              TrainConfig base = {});

struct LossRow {
  std::size_t epoch = 0;  // 1-based across all stages
  std::string stage;
  double loss = 0.0;
};

struct StageReport {
  std::string tag;
  std::uint64_t start_hash = 0;  // parameters entering the stage
  std::uint64_t end_hash = 0;    // parameters leaving the stage
  PathUsage usage;               // path encodings seen by forward passes
  Checkpoint checkpoint;
};

struct TrainResult {
  Model model;
  std::vector<LossRow> trace;
  std::vector<StageReport> stages;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t batch, const std::string& msg)
      : std::runtime_error(msg), batch_(batch) {}
  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
};

// Initialises the model from config.seed and runs the plan with one RNG
// stream (initialisation, then per epoch a shuffle followed by one dropout
// mask per bag). `metadata` is copied into every stage checkpoint.
TrainResult run_pretrain_schedule(
    const StagePlan& plan, const TrainConfig& config, const ModelConfig& model_config,
    const std::vector<EncodedBag>& bags,
    const std::vector<std::pair<std::string, std::string>>& metadata = {});

// Plain training: the plan from config.plan().
TrainResult train(const TrainConfig& config, const ModelConfig& model_config,
                  const std::vector<EncodedBag>& bags,
                  const std::vector<std::pair<std::string, std::string>>& metadata = {});

void write_loss_trace(const std::vector<LossRow>& trace, const std::filesystem::path& path);

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config,
                           const std::string& stage,
                           const std::vector<std::pair<std::string, std::string>>& metadata);

// Metadata helpers shared by the trainer and the evaluator.
std::vector<std::pair<std::string, std::string>> model_metadata(const ModelConfig& mc,
                                                                const Vocabulary& vocab);
Model model_from_checkpoint(const Checkpoint& ckpt, Vocabulary* vocab = nullptr);

}  // namespace ugre
