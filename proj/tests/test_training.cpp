#include <gtest/gtest.h>

#include "test_util.hpp"
#include "ugre/checkpoint.hpp"
#include "ugre/training.hpp"
#include "ugre/workflow.hpp"

using namespace ugre;

namespace {

ModelConfig small_config(Mode mode) {
  ModelConfig mc;
  mc.n_entities = 12;
  mc.n_relations = 4;
  mc.vocab_size = 30;
  mc.word_dim = 6;
  mc.pos_dim = 3;
  mc.kg_dim = 5;
  mc.filters = 8;
  mc.maxdist = 6;
  mc.j = 2;
  mc.mode = mode;
  return mc;
}

TrainConfig small_train() {
  TrainConfig c;
  c.lr_net = 0.1;
  c.batch_size = 4;
  c.epochs = 3;
  c.pretrain_epochs = 1;
  c.seed = 5;
  return c;
}

// Each sentence starts with a word that names the bag label.
std::vector<EncodedBag> separable_bags(const ModelConfig& mc, std::size_t n) {
  Rng rng(21);
  auto bags = toy_batch(mc, n, rng);
  for (auto& b : bags) {
    for (auto& s : b.sentences) s.words[0] = static_cast<std::uint32_t>(20 + b.label);
  }
  return bags;
}

std::uint64_t hash_of(const Model& m) {
  const auto slots = m.slots();
  return params_hash(slots);
}

}  // namespace

TEST(PathFilter, KeepsOnlyOneType) {
  const auto mc = small_config(Mode::base);
  Rng rng(1);
  const auto bag = toy_batch(mc, 1, rng)[0];
  for (auto [f, t] : {std::pair{PathFilter::kg, PathType::kg},
                      std::pair{PathFilter::textual, PathType::textual},
                      std::pair{PathFilter::hybrid, PathType::hybrid}}) {
    const auto out = filter_bag_paths(bag, f);
    std::size_t want = 0;
    for (const auto& p : bag.paths) want += p.type == t;
    EXPECT_EQ(out.paths.size(), want);
    for (const auto& p : out.paths) EXPECT_EQ(p.type, t);
    EXPECT_EQ(out.sentences.size(), bag.sentences.size());
  }
  EXPECT_EQ(filter_bag_paths(bag, PathFilter::all).paths.size(), bag.paths.size());
  EXPECT_EQ(parse_path_filter("hybrid"), PathFilter::hybrid);
}

TEST(StagePlan, ShapesAndValidation) {
  const auto p = StagePlan::pretrain(2, 7);
  ASSERT_EQ(p.stages.size(), 4u);
  EXPECT_EQ(p.stages[0].filter, PathFilter::textual);
  EXPECT_EQ(p.stages[1].filter, PathFilter::hybrid);
  EXPECT_EQ(p.stages[2].filter, PathFilter::kg);
  EXPECT_EQ(p.stages[3].filter, PathFilter::all);
  EXPECT_EQ(p.stages[3].epochs, 7u);
  EXPECT_NO_THROW(p.validate());
  EXPECT_THROW((StagePlan{{{PathFilter::kg, 1}}}.validate()), std::invalid_argument);
  EXPECT_THROW((StagePlan{{{PathFilter::all, 0}}}.validate()), std::invalid_argument);
  EXPECT_THROW(StagePlan{}.validate(), std::invalid_argument);
}

TEST(TrainConfig, SetAndSerialize) {
  TrainConfig c;
  c.set("lr_net", "0.125");
  c.set("mode", "ranking");
  c.set("complexity.j", "7");
  c.set("pretrain", "true");
  EXPECT_EQ(c.lr_net, 0.125);
  EXPECT_EQ(c.mode, Mode::ranking);
  EXPECT_EQ(c.j, 7u);
  EXPECT_EQ(c.plan().stages.size(), 4u);
  TrainConfig d;
  d.apply(c.entries());
  EXPECT_EQ(d.serialize(), c.serialize());
  EXPECT_EQ(d.hash(), c.hash());
  d.set("seed", "2");
  EXPECT_NE(d.hash(), c.hash());
}

TEST(TrainConfig, ErrorsNameTheKey) {
  TrainConfig c;
  try {
    c.set("lr_nte", "0.1");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "lr_nte");
  }
  EXPECT_THROW(c.set("batch_size", "0"), ConfigError);
  EXPECT_THROW(c.set("dropout", "1.5"), ConfigError);
  EXPECT_THROW(c.set("epochs", "3x"), ConfigError);
  EXPECT_THROW(c.set("mode", "fancy"), ConfigError);
}

TEST(TrainConfig, FileAndPresets) {
  test::TempDir dir("cfg");
  test::write_file(dir / "c.txt", "# comment\nepochs = 4\n\nnorm = l1\n");
  const auto c = load_train_config(dir / "c.txt");
  EXPECT_EQ(c.epochs, 4u);
  EXPECT_EQ(c.norm, Norm::l1);
  EXPECT_EQ(preset("nyt10").filters, 230u);
  EXPECT_EQ(preset("nyt10").j, 30u);
  EXPECT_THROW(preset("other"), ConfigError);
  test::write_file(dir / "bad.txt", "epochs\n");
  EXPECT_THROW(load_train_config(dir / "bad.txt"), std::exception);
}

TEST(Training, LossDecreasesOnSeparableData) {
  for (Mode mode : {Mode::base, Mode::ranking}) {
    const auto mc = small_config(mode);
    const auto bags = separable_bags(mc, 40);
    TrainConfig c = small_train();
    c.epochs = 5;
    c.dropout = 0.0;
    const auto res = train(c, mc, bags);
    ASSERT_EQ(res.trace.size(), 5u);
    EXPECT_LT(res.trace.back().loss, res.trace.front().loss);
  }
}

TEST(Training, IsDeterministic) {
  const auto mc = small_config(Mode::ranking);
  const auto bags = separable_bags(mc, 20);
  const auto a = train(small_train(), mc, bags);
  const auto b = train(small_train(), mc, bags);
  EXPECT_EQ(hash_of(a.model), hash_of(b.model));
  EXPECT_EQ(serialize_checkpoint(a.stages.back().checkpoint),
            serialize_checkpoint(b.stages.back().checkpoint));
  TrainConfig other = small_train();
  other.seed = 6;
  EXPECT_NE(hash_of(train(other, mc, bags).model), hash_of(a.model));
}

TEST(Training, SingleStagePlanEqualsPlainTraining) {
  const auto mc = small_config(Mode::base);
  const auto bags = separable_bags(mc, 20);
  const auto c = small_train();
  const auto plain = train(c, mc, bags);
  const auto planned = run_pretrain_schedule(StagePlan::plain(c.epochs), c, mc, bags);
  EXPECT_EQ(hash_of(plain.model), hash_of(planned.model));
  ASSERT_EQ(plain.trace.size(), planned.trace.size());
  for (std::size_t i = 0; i < plain.trace.size(); ++i) {
    EXPECT_EQ(plain.trace[i].loss, planned.trace[i].loss);
  }
}

TEST(Training, PretrainStagesSeeOnlyTheirPathType) {
  const auto mc = small_config(Mode::ranking);
  const auto bags = separable_bags(mc, 20);
  auto c = small_train();
  c.pretrain = true;
  const auto res = train(c, mc, bags);
  ASSERT_EQ(res.stages.size(), 4u);
  const PathType types[] = {PathType::textual, PathType::hybrid, PathType::kg};
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& u = res.stages[s].usage;
    EXPECT_GT(u[types[s]], 0u);
    EXPECT_EQ(u.total(), u[types[s]]) << res.stages[s].tag;
    EXPECT_NE(res.stages[s].start_hash, res.stages[s].end_hash);
    if (s > 0) {
      EXPECT_EQ(res.stages[s].start_hash, res.stages[s - 1].end_hash);
    }
  }
  const auto& all = res.stages[3].usage;
  EXPECT_GT(all[PathType::kg], 0u);
  EXPECT_GT(all[PathType::textual], 0u);
  EXPECT_GT(all[PathType::hybrid], 0u);
  EXPECT_EQ(res.trace.size(), 3u * c.pretrain_epochs + c.epochs);
}

TEST(Training, DivergenceIsReported) {
  const auto mc = small_config(Mode::base);
  const auto bags = separable_bags(mc, 8);
  auto c = small_train();
  c.lr_net = 1e300;
  c.lr_kg = 1e300;
  EXPECT_THROW(train(c, mc, bags), TrainingDiverged);
}

TEST(Checkpoint, RoundTripRestoresModel) {
  const auto mc = small_config(Mode::ranking);
  const auto bags = separable_bags(mc, 10);
  Vocabulary vocab;
  for (int i = 1; i < 30; ++i) vocab.add("w" + std::to_string(i));
  const auto res = train(small_train(), mc, bags, model_metadata(mc, vocab));
  const auto bytes = serialize_checkpoint(res.stages.back().checkpoint);
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  Vocabulary restored_vocab;
  const Model restored = model_from_checkpoint(back, &restored_vocab);
  EXPECT_EQ(restored_vocab.tokens(), vocab.tokens());
  EXPECT_EQ(restored.config.mode, Mode::ranking);
  EXPECT_EQ(hash_of(restored), hash_of(res.model));
  EXPECT_EQ(joint_loss(restored, bags), joint_loss(res.model, bags));
  EXPECT_EQ(*back.meta("train.seed"), "5");
}

TEST(Checkpoint, RejectsCorruptBytes) {
  Checkpoint c;
  c.stage = "all";
  c.slots.emplace_back("x", Tensor::vector({1.0, 2.0}), LearningRateGroup::net);
  auto bytes = serialize_checkpoint(c);
  EXPECT_EQ(deserialize_checkpoint(bytes).slots[0].value, c.slots[0].value);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), std::exception);
  bytes.pop_back();
  EXPECT_THROW(deserialize_checkpoint(bytes), std::exception);
}

TEST(LossTrace, CsvFormat) {
  test::TempDir dir("trace");
  write_loss_trace({{1, "kg", 0.5}, {2, "all", 0.25}}, dir / "loss.csv");
  EXPECT_EQ(test::read_file(dir / "loss.csv"), "epoch,stage,loss\n1,kg,0.5\n2,all,0.25\n");
}
