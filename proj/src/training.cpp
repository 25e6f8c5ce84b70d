#include "ugre/training.hpp"

#include <cmath>
#include <fstream>

#include "ugre/data_io.hpp"
#include "ugre/text_io.hpp"

namespace ugre {

std::string_view to_string(PathFilter f) {
  switch (f) {
    case PathFilter::textual: return "textual";
    case PathFilter::hybrid: return "hybrid";
    case PathFilter::kg: return "kg";
    case PathFilter::all: return "all";
  }
  return "all";
}

std::optional<PathFilter> parse_path_filter(std::string_view s) {
  for (auto f : {PathFilter::textual, PathFilter::hybrid, PathFilter::kg, PathFilter::all}) {
    if (s == to_string(f)) return f;
  }
  return std::nullopt;
}

EncodedBag filter_bag_paths(const EncodedBag& bag, PathFilter filter) {
  if (filter == PathFilter::all) return bag;
  const PathType keep = filter == PathFilter::textual  ? PathType::textual
                        : filter == PathFilter::hybrid ? PathType::hybrid
                                                       : PathType::kg;
  EncodedBag out;
  out.head = bag.head;
  out.tail = bag.tail;
  out.label = bag.label;
  out.sentences = bag.sentences;
  for (const auto& p : bag.paths) {
    if (p.type == keep) out.paths.push_back(p);
  }
  return out;
}

void StagePlan::validate() const {
  if (stages.empty()) throw std::invalid_argument("stage plan is empty");
  if (stages.back().filter != PathFilter::all) {
    throw std::invalid_argument("the last stage must use all paths");
  }
  for (const auto& s : stages) {
    if (s.epochs == 0) throw std::invalid_argument("stage epoch counts must be >= 1");
  }
}

StagePlan StagePlan::plain(std::size_t epochs) {
  return {{{PathFilter::all, epochs}}};
}

StagePlan StagePlan::pretrain(std::size_t pretrain_epochs, std::size_t finetune_epochs) {
  return {{{PathFilter::textual, pretrain_epochs},
           {PathFilter::hybrid, pretrain_epochs},
           {PathFilter::kg, pretrain_epochs},
           {PathFilter::all, finetune_epochs}}};
}

// --- config ----------------------------------------------------------------

namespace {

double to_double(const std::string& key, const std::string& v) {
  double d;
  if (!parse_double(v, d) || !std::isfinite(d)) throw ConfigError(key, "expected a number");
  return d;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t n;
  if (!parse_size(v, n)) throw ConfigError(key, "expected a non-negative integer");
  return n;
}

std::size_t to_positive(const std::string& key, const std::string& v) {
  const std::size_t n = to_size(key, v);
  if (n == 0) throw ConfigError(key, "must be >= 1");
  return n;
}

double to_rate(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d <= 0.0) throw ConfigError(key, "must be > 0");
  return d;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError(key, "expected true or false");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "lr_net") {
    lr_net = to_rate(key, value);
  } else if (key == "lr_kg") {
    lr_kg = to_rate(key, value);
  } else if (key == "batch_size") {
    batch_size = to_positive(key, value);
  } else if (key == "dropout") {
    dropout = to_double(key, value);
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError(key, "must be in [0, 1)");
  } else if (key == "epochs") {
    epochs = to_positive(key, value);
  } else if (key == "seed") {
    seed = to_size(key, value);
  } else if (key == "mode") {
    auto m = parse_mode(value);
    if (!m) throw ConfigError(key, "expected base or ranking");
    mode = *m;
  } else if (key == "pretrain") {
    pretrain = to_bool(key, value);
  } else if (key == "pretrain_epochs") {
    pretrain_epochs = to_positive(key, value);
  } else if (key == "complexity.lambda1") {
    complexity.lambda1 = to_double(key, value);
  } else if (key == "complexity.lambda2") {
    complexity.lambda2 = to_double(key, value);
  } else if (key == "complexity.j") {
    j = to_positive(key, value);
  } else if (key == "norm") {
    if (value == "l1") {
      norm = Norm::l1;
    } else if (value == "l2") {
      norm = Norm::l2;
    } else {
      throw ConfigError(key, "expected l1 or l2");
    }
  } else if (key == "kg_bias") {
    kg_bias = to_double(key, value);
  } else if (key == "maxdist") {
    maxdist = to_positive(key, value);
  } else if (key == "filters") {
    filters = to_positive(key, value);
  } else if (key == "word_dim") {
    word_dim = to_positive(key, value);
  } else if (key == "pos_dim") {
    pos_dim = to_positive(key, value);
  } else if (key == "kg_dim") {
    kg_dim = to_positive(key, value);
  } else if (key == "window") {
    window = to_positive(key, value);
    if (window % 2 == 0) throw ConfigError(key, "must be odd");
  } else if (key == "use_paths") {
    use_paths = to_bool(key, value);
  } else if (key == "attention_kg_grad") {
    attention_kg_grad = to_bool(key, value);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

void TrainConfig::apply(const std::vector<std::pair<std::string, std::string>>& entries) {
  for (const auto& [k, v] : entries) set(k, v);
}

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
  return {
      {"lr_net", format_double(lr_net)},
      {"lr_kg", format_double(lr_kg)},
      {"batch_size", std::to_string(batch_size)},
      {"dropout", format_double(dropout)},
      {"epochs", std::to_string(epochs)},
      {"seed", std::to_string(seed)},
      {"mode", std::string(to_string(mode))},
      {"pretrain", bool_str(pretrain)},
      {"pretrain_epochs", std::to_string(pretrain_epochs)},
      {"complexity.lambda1", format_double(complexity.lambda1)},
      {"complexity.lambda2", format_double(complexity.lambda2)},
      {"complexity.j", std::to_string(j)},
      {"norm", norm == Norm::l1 ? "l1" : "l2"},
      {"kg_bias", format_double(kg_bias)},
      {"maxdist", std::to_string(maxdist)},
      {"filters", std::to_string(filters)},
      {"word_dim", std::to_string(word_dim)},
      {"pos_dim", std::to_string(pos_dim)},
      {"kg_dim", std::to_string(kg_dim)},
      {"window", std::to_string(window)},
      {"use_paths", bool_str(use_paths)},
      {"attention_kg_grad", bool_str(attention_kg_grad)},
  };
}

std::string TrainConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(serialize()); }

StagePlan TrainConfig::plan() const {
  return pretrain ? StagePlan::pretrain(pretrain_epochs, epochs) : StagePlan::plain(epochs);
}

ModelConfig TrainConfig::model_config(std::size_t n_entities, std::size_t n_relations,
                                      std::size_t vocab_size) const {
  ModelConfig mc;
  mc.n_entities = n_entities;
  mc.n_relations = n_relations;
  mc.vocab_size = vocab_size;
  mc.word_dim = word_dim;
  mc.pos_dim = pos_dim;
  mc.kg_dim = kg_dim;
  mc.filters = filters;
  mc.window = window;
  mc.maxdist = maxdist;
  mc.kg_bias = kg_bias;
  mc.norm = norm;
  mc.mode = mode;
  mc.use_paths = use_paths;
  mc.complexity = complexity;
  mc.j = j;
  mc.attention_kg_grad = attention_kg_grad;
  return mc;
}

TrainConfig preset(const std::string& name) {
  TrainConfig c;
  if (name == "biomedical") return c;
  if (name == "nyt10") {
    c.filters = 230;
    c.lr_net = 0.05;
    c.lr_kg = 0.001;
    c.batch_size = 160;
    c.j = 30;
    return c;
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  base.apply(parse_key_values(path));
  return base;
}

// --- training loop -----------------------------------------------------------

namespace {

struct EpochContext {
  Model& model;
  const TrainConfig& config;
  Rng& rng;
  PathUsage& usage;
  std::size_t& batch_counter;
};

double run_epoch(EpochContext& ctx, const std::vector<EncodedBag>& bags) {
  const std::size_t n = bags.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  ctx.rng.shuffle(order);
  auto slots = ctx.model.slots();
  const std::size_t mask_dim = ctx.model.config.classifier_dim();
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += ctx.config.batch_size) {
    const std::size_t end = std::min(n, start + ctx.config.batch_size);
    const double scale = 1.0 / static_cast<double>(end - start);
    double batch_loss = 0.0;
    for (std::size_t k = start; k < end; ++k) {
      const EncodedBag& bag = bags[order[k]];
      std::vector<double> mask;
      if (ctx.config.dropout > 0.0) mask = dropout_mask(mask_dim, ctx.config.dropout, ctx.rng);
      const BagState st = forward_bag(ctx.model, bag, mask, &ctx.usage);
      batch_loss += st.kg_nll() + st.cls_nll(bag.label);
      backward_bag(ctx.model, bag, st, scale);
    }
    batch_loss *= scale;
    const std::size_t batch_id = ctx.batch_counter++;
    if (!std::isfinite(batch_loss)) {
      throw TrainingDiverged(batch_id, "non-finite loss at batch " + std::to_string(batch_id));
    }
    try {
      sgd_step(slots, ctx.config.lr_kg, ctx.config.lr_net);
    } catch (const std::runtime_error& e) {
      throw TrainingDiverged(batch_id, "batch " + std::to_string(batch_id) + ": " + e.what());
    }
    total += batch_loss * static_cast<double>(end - start);
  }
  return total / static_cast<double>(n);
}

std::uint64_t model_hash(const Model& model) {
  const auto slots = model.slots();
  return params_hash(slots);
}

TrainResult start(const ModelConfig& mc, const std::vector<EncodedBag>& bags, Rng& rng) {
  if (bags.empty()) throw std::invalid_argument("no training bags");
  TrainResult res{Model(mc), {}, {}};
  res.model.initialize(rng);
  return res;
}

}  // namespace

TrainResult run_pretrain_schedule(
    const StagePlan& plan, const TrainConfig& config, const ModelConfig& mc,
    const std::vector<EncodedBag>& bags,
    const std::vector<std::pair<std::string, std::string>>& metadata) {
  plan.validate();
  Rng rng(config.seed);
  TrainResult res = start(mc, bags, rng);
  std::size_t epoch = 0;
  std::size_t batches = 0;
  for (const Stage& stage : plan.stages) {
    std::vector<EncodedBag> filtered;
    const std::vector<EncodedBag>* view = &bags;
    if (stage.filter != PathFilter::all) {
      filtered.reserve(bags.size());
      for (const auto& b : bags) filtered.push_back(filter_bag_paths(b, stage.filter));
      view = &filtered;
    }
    StageReport report;
    report.tag = std::string(to_string(stage.filter));
    report.start_hash = model_hash(res.model);
    EpochContext ctx{res.model, config, rng, report.usage, batches};
    for (std::size_t e = 0; e < stage.epochs; ++e) {
      const double loss = run_epoch(ctx, *view);
      res.trace.push_back({++epoch, report.tag, loss});
    }
    report.end_hash = model_hash(res.model);
    report.checkpoint = make_checkpoint(res.model, config, report.tag, metadata);
    res.stages.push_back(std::move(report));
  }
  return res;
}

TrainResult train(const TrainConfig& config, const ModelConfig& mc,
                  const std::vector<EncodedBag>& bags,
                  const std::vector<std::pair<std::string, std::string>>& metadata) {
  if (config.pretrain) {
    return run_pretrain_schedule(config.plan(), config, mc, bags, metadata);
  }
  Rng rng(config.seed);
  TrainResult res = start(mc, bags, rng);
  StageReport report;
  report.tag = "all";
  report.start_hash = model_hash(res.model);
  std::size_t batches = 0;
  EpochContext ctx{res.model, config, rng, report.usage, batches};
  for (std::size_t e = 1; e <= config.epochs; ++e) {
    res.trace.push_back({e, report.tag, run_epoch(ctx, bags)});
  }
  report.end_hash = model_hash(res.model);
  report.checkpoint = make_checkpoint(res.model, config, report.tag, metadata);
  res.stages.push_back(std::move(report));
  return res;
}

void write_loss_trace(const std::vector<LossRow>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,stage,loss\n";
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.stage << ',' << format_double(r.loss) << '\n';
  }
}

// --- checkpoints -------------------------------------------------------------

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config,
                           const std::string& stage,
                           const std::vector<std::pair<std::string, std::string>>& metadata) {
  Checkpoint c;
  c.config_hash = config.hash();
  c.stage = stage;
  for (const auto& [k, v] : config.entries()) c.metadata.emplace_back("train." + k, v);
  for (const auto& kv : metadata) c.metadata.push_back(kv);
  for (const ParamSlot* s : model.slots()) c.slots.push_back(*s);
  for (auto& s : c.slots) s.grad.fill(0.0);
  return c;
}

std::vector<std::pair<std::string, std::string>> model_metadata(const ModelConfig& mc,
                                                                const Vocabulary& vocab) {
  return {
      {"model.n_entities", std::to_string(mc.n_entities)},
      {"model.n_relations", std::to_string(mc.n_relations)},
      {"model.vocab_size", std::to_string(mc.vocab_size)},
      {"model.word_dim", std::to_string(mc.word_dim)},
      {"model.pos_dim", std::to_string(mc.pos_dim)},
      {"model.kg_dim", std::to_string(mc.kg_dim)},
      {"model.filters", std::to_string(mc.filters)},
      {"model.window", std::to_string(mc.window)},
      {"model.maxdist", std::to_string(mc.maxdist)},
      {"model.kg_bias", format_double(mc.kg_bias)},
      {"model.norm", mc.norm == Norm::l1 ? "l1" : "l2"},
      {"model.mode", std::string(to_string(mc.mode))},
      {"model.use_paths", bool_str(mc.use_paths)},
      {"model.lambda1", format_double(mc.complexity.lambda1)},
      {"model.lambda2", format_double(mc.complexity.lambda2)},
      {"model.j", std::to_string(mc.j)},
      {"model.attention_kg_grad", bool_str(mc.attention_kg_grad)},
      {"vocab", join(vocab.tokens(), " ")},
  };
}

Model model_from_checkpoint(const Checkpoint& ckpt, Vocabulary* vocab) {
  auto get = [&](const std::string& key) -> const std::string& {
    const std::string* v = ckpt.meta(key);
    if (!v) throw std::runtime_error("checkpoint metadata lacks '" + key + "'");
    return *v;
  };
  ModelConfig mc;
  mc.n_entities = to_size("model.n_entities", get("model.n_entities"));
  mc.n_relations = to_size("model.n_relations", get("model.n_relations"));
  mc.vocab_size = to_size("model.vocab_size", get("model.vocab_size"));
  mc.word_dim = to_size("model.word_dim", get("model.word_dim"));
  mc.pos_dim = to_size("model.pos_dim", get("model.pos_dim"));
  mc.kg_dim = to_size("model.kg_dim", get("model.kg_dim"));
  mc.filters = to_size("model.filters", get("model.filters"));
  mc.window = to_size("model.window", get("model.window"));
  mc.maxdist = to_size("model.maxdist", get("model.maxdist"));
  mc.kg_bias = to_double("model.kg_bias", get("model.kg_bias"));
  mc.norm = get("model.norm") == "l1" ? Norm::l1 : Norm::l2;
  auto mode = parse_mode(get("model.mode"));
  if (!mode) throw std::runtime_error("checkpoint has an unknown mode");
  mc.mode = *mode;
  mc.use_paths = to_bool("model.use_paths", get("model.use_paths"));
  mc.complexity.lambda1 = to_double("model.lambda1", get("model.lambda1"));
  mc.complexity.lambda2 = to_double("model.lambda2", get("model.lambda2"));
  mc.j = to_size("model.j", get("model.j"));
  mc.attention_kg_grad = to_bool("model.attention_kg_grad", get("model.attention_kg_grad"));

  Model model(mc);
  for (ParamSlot* s : model.slots()) {
    const ParamSlot* stored = ckpt.slot(s->name);
    if (!stored) throw std::runtime_error("checkpoint lacks parameter '" + s->name + "'");
    if (stored->value.shape() != s->value.shape()) {
      throw ShapeError("checkpoint parameter " + s->name, stored->value.shape(),
                       s->value.shape());
    }
    s->value = stored->value;
  }
  if (vocab) {
    const auto tokens = split_ws(get("vocab"));
    if (tokens.size() != mc.vocab_size || tokens.empty() ||
        tokens.front() != Vocabulary::kUnknownToken) {
      throw std::runtime_error("checkpoint vocabulary does not match its model");
    }
    Vocabulary v;
    for (std::size_t i = 1; i < tokens.size(); ++i) v.add(tokens[i]);
    *vocab = std::move(v);
  }
  return model;
}

}  // namespace ugre
