#pragma once
// End-to-end steps shared by the command line tool and the tests: encode a
// dataset, train on its train split, evaluate on its test split.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "ugre/data_io.hpp"
#include "ugre/evaluation.hpp"
#include "ugre/training.hpp"

namespace ugre {

struct PreparedData {
  Dataset dataset;
  Vocabulary vocab;
  std::vector<Bag> bags;
  std::vector<EncodedBag> train;
  std::vector<EncodedBag> test;
  std::vector<std::size_t> test_pairs;  // pair index of each test bag
};

// Builds the vocabulary from the data unless one is given.
PreparedData prepare_data(Dataset ds, std::size_t maxdist,
                          const Vocabulary* vocab = nullptr);

// Defaults, then the dataset's config.txt, then `config_file`.
TrainConfig resolve_train_config(const Dataset& ds,
                                 const std::optional<std::filesystem::path>& config_file);

ModelConfig model_config_for(const PreparedData& data, const TrainConfig& config);

TrainResult train_on(const PreparedData& data, const TrainConfig& config);

struct EvalOutputs {
  std::vector<EvalRecord> records;
  Metrics metrics;
  BiasReport bias;
};

EvalOutputs evaluate_on(const Model& model, const PreparedData& data);

// Writes checkpoint_<stage>.bin per stage, checkpoint.bin (last stage) and
// loss.csv.
void write_training_outputs(const TrainResult& result, const std::filesystem::path& dir);
// Writes pr_curve.csv, pr_curve.svg, metrics.txt, attention_bias.csv and
// path_weights.csv.
void write_eval_outputs(const EvalOutputs& eval, const std::filesystem::path& dir);

// Random bags with 1-3 sentences and 1-6 paths of mixed type, for gradient
// checks.
std::vector<EncodedBag> toy_batch(const ModelConfig& mc, std::size_t n_bags, Rng& rng);

// Small model for gradient checks. Attention sends gradient into the entity
// table so the analytic gradient is the full derivative.
ModelConfig gradcheck_model_config(Mode mode);

// Finite-difference check of the joint loss with dropout off.
GradCheckReport check_model_gradients(Model& model, const std::vector<EncodedBag>& batch,
                                      const GradCheckOptions& options = {});

}  // namespace ugre
