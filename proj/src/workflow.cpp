#include "ugre/workflow.hpp"

namespace ugre {

PreparedData prepare_data(Dataset ds, std::size_t maxdist, const Vocabulary* vocab) {
  PreparedData d;
  d.dataset = std::move(ds);
  d.vocab = vocab ? *vocab : build_vocabulary(d.dataset);
  d.bags = assemble_bags(d.dataset);
  for (const Bag& b : d.bags) {
    EncodedBag e = encode_bag(d.dataset, b, d.vocab, maxdist);
    if (b.split == Split::train) {
      d.train.push_back(std::move(e));
    } else {
      d.test.push_back(std::move(e));
      d.test_pairs.push_back(b.pair);
    }
  }
  return d;
}

TrainConfig resolve_train_config(const Dataset& ds,
                                 const std::optional<std::filesystem::path>& config_file) {
  TrainConfig c;
  c.apply(ds.config);
  if (config_file) c = load_train_config(*config_file, c);
  return c;
}

ModelConfig model_config_for(const PreparedData& data, const TrainConfig& config) {
  return config.model_config(data.dataset.graph.entity_count(),
                             data.dataset.graph.relation_count(), data.vocab.size());
}

TrainResult train_on(const PreparedData& data, const TrainConfig& config) {
  const ModelConfig mc = model_config_for(data, config);
  return train(config, mc, data.train, model_metadata(mc, data.vocab));
}

EvalOutputs evaluate_on(const Model& model, const PreparedData& data) {
  if (model.config.n_entities != data.dataset.graph.entity_count() ||
      model.config.n_relations != data.dataset.graph.relation_count()) {
    throw std::runtime_error("model and dataset disagree on entity or relation counts");
  }
  EvalOutputs out;
  const GoldIndex gold(data.dataset.triplets);
  out.records = predict_all(model, data.test, gold, data.test_pairs);
  out.metrics = compute_metrics(out.records);
  out.bias = attention_bias_report(model, data.test);
  return out;
}

void write_training_outputs(const TrainResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : result.stages) {
    save_checkpoint(s.checkpoint, dir / ("checkpoint_" + s.tag + ".bin"));
  }
  if (!result.stages.empty()) {
    save_checkpoint(result.stages.back().checkpoint, dir / "checkpoint.bin");
  }
  write_loss_trace(result.trace, dir / "loss.csv");
}

void write_eval_outputs(const EvalOutputs& eval, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const PRCurve curve = pr_curve(eval.records);
  write_pr_curve_csv(curve, dir / "pr_curve.csv");
  write_pr_curve_svg(curve, dir / "pr_curve.svg");
  write_metrics(eval.metrics, dir / "metrics.txt");
  write_bias_groups_csv(eval.bias.groups, dir / "attention_bias.csv");
  write_path_weights_csv(eval.bias.raw, dir / "path_weights.csv");
}

namespace {

TokenFeatures random_features(const ModelConfig& mc, std::size_t len, Rng& rng) {
  std::vector<std::uint32_t> ids(len);
  for (auto& id : ids) id = static_cast<std::uint32_t>(rng.index(mc.vocab_size));
  const std::size_t p1 = rng.index(len);
  std::size_t p2 = rng.index(len);
  if (len > 1) {
    while (p2 == p1) p2 = rng.index(len);
  }
  return featurize(ids, p1, p2, mc.maxdist);
}

}  // namespace

std::vector<EncodedBag> toy_batch(const ModelConfig& mc, std::size_t n_bags, Rng& rng) {
  std::vector<EncodedBag> bags;
  for (std::size_t b = 0; b < n_bags; ++b) {
    EncodedBag bag;
    bag.head = rng.index(mc.n_entities);
    do {
      bag.tail = rng.index(mc.n_entities);
    } while (bag.tail == bag.head && mc.n_entities > 1);
    bag.label = rng.index(mc.n_relations);
    const std::size_t n_sent = 1 + rng.index(3);
    for (std::size_t s = 0; s < n_sent; ++s) {
      bag.sentences.push_back(random_features(mc, 3 + rng.index(8), rng));
    }
    const std::size_t n_path = 1 + rng.index(6);
    for (std::size_t p = 0; p < n_path; ++p) {
      EncodedPath path;
      const std::size_t len = 3 + rng.index(12);
      path.features = random_features(mc, len, rng);
      path.type = static_cast<PathType>(p % 3);
      path.tau1 = len;
      path.tau2 = 1 + rng.index(len);
      bag.paths.push_back(std::move(path));
    }
    bags.push_back(std::move(bag));
  }
  return bags;
}

ModelConfig gradcheck_model_config(Mode mode) {
  ModelConfig mc;
  mc.n_entities = 6;
  mc.n_relations = 4;
  mc.vocab_size = 30;
  mc.word_dim = 6;
  mc.pos_dim = 3;
  mc.kg_dim = 5;
  mc.filters = 7;
  mc.maxdist = 6;
  mc.mode = mode;
  mc.j = 2;
  mc.attention_kg_grad = true;
  return mc;
}

GradCheckReport check_model_gradients(Model& model, const std::vector<EncodedBag>& batch,
                                      const GradCheckOptions& options) {
  auto slots = model.slots();
  return finite_difference_check(
      [&] { return joint_loss(model, batch); },
      [&] {
        model.zero_grads();
        joint_loss_and_grad(model, batch);
      },
      slots, options);
}

}  // namespace ugre
